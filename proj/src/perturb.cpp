#include "cqa/perturb.hpp"

#include "cqa/errors.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace cqa {

std::string to_string(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::Load: return "load";
    case PerturbationKind::Shunt: return "shunt";
    case PerturbationKind::Line: return "line";
    case PerturbationKind::Mixed: return "mixed";
  }
  return "?";
}

PerturbationKind perturbation_kind_from_string(const std::string& s) {
  if (s == "load") return PerturbationKind::Load;
  if (s == "shunt") return PerturbationKind::Shunt;
  if (s == "line") return PerturbationKind::Line;
  if (s == "mixed") return PerturbationKind::Mixed;
  throw InvariantError("unknown perturbation model '" + s + "' (expected load, shunt, line or mixed)");
}

PerturbationModel::PerturbationModel(PerturbationKind kind, int n_buses, int n_lines, std::vector<BusCoverage> coverage)
    : kind_(kind), n_buses_(n_buses), n_lines_(n_lines), coverage_(std::move(coverage)) {
  for (std::size_t k = 0; k < coverage_.size(); ++k) {
    if (coverage_[k] != BusCoverage::None) covered_.push_back(static_cast<int>(k));
  }
}

PerturbationModel PerturbationModel::load(const Network& net, BoxSpec box) {
  PerturbationModel m(PerturbationKind::Load, net.size(), net.line_count(),
                      std::vector<BusCoverage>(static_cast<std::size_t>(net.size()), BusCoverage::Load));
  m.set_default_box(net, box);
  return m;
}

PerturbationModel PerturbationModel::shunt(const Network& net, BoxSpec box) {
  PerturbationModel m(PerturbationKind::Shunt, net.size(), net.line_count(),
                      std::vector<BusCoverage>(static_cast<std::size_t>(net.size()), BusCoverage::Shunt));
  m.set_default_box(net, box);
  return m;
}

PerturbationModel PerturbationModel::line(const Network& net, BoxSpec box) {
  if (net.line_count() == 0) throw InvariantError("line perturbation model needs at least one line");
  PerturbationModel m(PerturbationKind::Line, net.size(), net.line_count(), {});
  m.set_default_box(net, box);
  return m;
}

PerturbationModel PerturbationModel::mixed(const Network& net, std::vector<BusCoverage> coverage, BoxSpec box) {
  if (coverage.size() != static_cast<std::size_t>(net.size())) {
    throw InvariantError("mixed perturbation model needs one coverage entry per bus");
  }
  PerturbationModel m(PerturbationKind::Mixed, net.size(), net.line_count(), std::move(coverage));
  if (m.covered_.empty()) throw InvariantError("mixed perturbation model covers no bus");
  m.set_default_box(net, box);
  return m;
}

void PerturbationModel::set_default_box(const Network& net, BoxSpec box) {
  if (!(box.rel > 0.0) || !(box.floor > 0.0)) throw InvariantError("box half-width parameters must be positive");
  const Vec nom = nominal(net);
  Vec half(nom.size());
  for (Eigen::Index i = 0; i < nom.size(); ++i) half(i) = box.rel * std::max(std::abs(nom(i)), box.floor);
  lower_ = nom - half;
  upper_ = nom + half;
}

PerturbationModel PerturbationModel::with_box(Vec lower, Vec upper) const {
  if (lower.size() != dimension() || upper.size() != dimension()) {
    throw DimensionError("box must have " + std::to_string(dimension()) + " entries");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(upper(i) > lower(i)) || !std::isfinite(lower(i)) || !std::isfinite(upper(i))) {
      throw InvariantError("box interval " + std::to_string(i) + " must be finite with positive width");
    }
  }
  PerturbationModel m = *this;
  m.lower_ = std::move(lower);
  m.upper_ = std::move(upper);
  return m;
}

namespace {

// Lumped nodal shunt: nodal shunt plus half the charging of every incident line.
std::pair<Vec, Vec> lumped_shunts(const Network& net) {
  Vec g(net.size());
  Vec b(net.size());
  for (const Bus& bus : net.buses()) {
    g(bus.id) = bus.g_shunt;
    b(bus.id) = bus.b_shunt;
  }
  for (const Line& l : net.lines()) {
    for (int end : {l.from, l.to}) {
      g(end) += 0.5 * l.g_shunt;
      b(end) += 0.5 * l.b_shunt;
    }
  }
  return {g, b};
}

}  // namespace

Vec PerturbationModel::nominal(const Network& net) const {
  if (net.size() != n_buses_ || net.line_count() != n_lines_) throw DimensionError("network does not match the model");
  if (kind_ == PerturbationKind::Line) {
    Vec xi(2 * n_lines_);
    for (int i = 0; i < n_lines_; ++i) {
      xi(i) = net.lines()[static_cast<std::size_t>(i)].g_series;
      xi(n_lines_ + i) = net.lines()[static_cast<std::size_t>(i)].b_series;
    }
    return xi;
  }
  const auto [lg, lb] = lumped_shunts(net);
  const int k = static_cast<int>(covered_.size());
  Vec xi(2 * k);
  for (int c = 0; c < k; ++c) {
    const int bus = covered_[static_cast<std::size_t>(c)];
    if (coverage_[static_cast<std::size_t>(bus)] == BusCoverage::Load) {
      xi(c) = net.bus(bus).p_load;
      xi(k + c) = net.bus(bus).q_load;
    } else {
      xi(c) = lg(bus);
      xi(k + c) = lb(bus);
    }
  }
  return xi;
}

Network PerturbationModel::apply(const Network& net, const Vec& xi) const {
  if (xi.size() != dimension()) throw DimensionError("parameter vector has the wrong dimension");
  if (net.size() != n_buses_ || net.line_count() != n_lines_) throw DimensionError("network does not match the model");
  std::vector<Bus> buses = net.buses();
  std::vector<Line> lines = net.lines();
  if (kind_ == PerturbationKind::Line) {
    for (int i = 0; i < n_lines_; ++i) {
      lines[static_cast<std::size_t>(i)].g_series = xi(i);
      lines[static_cast<std::size_t>(i)].b_series = xi(n_lines_ + i);
    }
  } else {
    Vec half_g = Vec::Zero(n_buses_);
    Vec half_b = Vec::Zero(n_buses_);
    for (const Line& l : net.lines()) {
      for (int end : {l.from, l.to}) {
        half_g(end) += 0.5 * l.g_shunt;
        half_b(end) += 0.5 * l.b_shunt;
      }
    }
    const int k = static_cast<int>(covered_.size());
    for (int c = 0; c < k; ++c) {
      const int bus = covered_[static_cast<std::size_t>(c)];
      Bus& b = buses[static_cast<std::size_t>(bus)];
      if (coverage_[static_cast<std::size_t>(bus)] == BusCoverage::Load) {
        b.p_load = xi(c);
        b.q_load = xi(k + c);
      } else {
        b.g_shunt = xi(c) - half_g(bus);
        b.b_shunt = xi(k + c) - half_b(bus);
      }
    }
  }
  return Network(std::move(buses), std::move(lines), net.generators());
}

std::string PerturbationModel::parameter_label(int i) const {
  if (i < 0 || i >= dimension()) throw DimensionError("parameter index out of range");
  if (kind_ == PerturbationKind::Line) {
    return (i < n_lines_ ? "g_line" : "b_line") + std::to_string(i % n_lines_);
  }
  const int k = static_cast<int>(covered_.size());
  const int bus = covered_[static_cast<std::size_t>(i % k)];
  const bool first = i < k;
  if (coverage_[static_cast<std::size_t>(bus)] == BusCoverage::Load) {
    return (first ? "p_load" : "q_load") + std::to_string(bus);
  }
  return (first ? "g_shunt" : "b_shunt") + std::to_string(bus);
}

Mat param_jacobian(const PerturbationModel& model, const Network& net, const SystemState& x) {
  const int n = net.size();
  x.check_dimensions(n);
  Mat d = Mat::Zero(2 * n, model.dimension());
  if (model.kind() == PerturbationKind::Line) {
    const int m = net.line_count();
    for (int i = 0; i < m; ++i) {
      const Line& line = net.lines()[static_cast<std::size_t>(i)];
      for (int side = 0; side < 2; ++side) {
        const int k = side == 0 ? line.from : line.to;
        const int l = side == 0 ? line.to : line.from;
        const double t = x.theta(k) - x.theta(l);
        const double vk2 = x.v(k) * x.v(k);
        const double vv = x.v(k) * x.v(l);
        const double c = vv * std::cos(t);
        const double s = vv * std::sin(t);
        // dP_k/dg = v_k^2 - c, dP_k/db = -s, dQ_k/dg = -s, dQ_k/db = c - v_k^2; F carries -P, -Q.
        d(k, i) = -(vk2 - c);
        d(k, m + i) = s;
        d(n + k, i) = s;
        d(n + k, m + i) = -(c - vk2);
      }
    }
    return d;
  }
  const auto& covered = model.covered_buses();
  const int kc = static_cast<int>(covered.size());
  for (int c = 0; c < kc; ++c) {
    const int bus = covered[static_cast<std::size_t>(c)];
    if (model.coverage()[static_cast<std::size_t>(bus)] == BusCoverage::Load) {
      d(bus, c) = -1.0;
      d(n + bus, kc + c) = -1.0;
    } else {
      // The lumped shunt enters P_k as +v_k^2 g and Q_k as -v_k^2 b.
      const double v2 = x.v(bus) * x.v(bus);
      d(bus, c) = -v2;
      d(n + bus, kc + c) = v2;
    }
  }
  return d;
}

RankHypothesis check_rank_hypothesis(const PerturbationModel& model, const Network& net, const SystemState& x,
                                     double ulp_scale) {
  RankHypothesis h;
  const Mat d = param_jacobian(model, net, x);
  // Rank of the column space; the transpose puts the 2N rows in the "rows" slot
  // when k >= 2N, otherwise the rank is capped by k anyway.
  const RankInfo info = numerical_rank(d, ulp_scale);
  h.rank = info.rank;
  h.required = 2 * net.size();
  h.satisfied = info.rank == h.required;
  h.sigma_min = info.rows <= info.cols ? info.sigma_min : 0.0;
  if (model.kind() == PerturbationKind::Shunt || model.kind() == PerturbationKind::Mixed) {
    bool any = false;
    double vmin = std::numeric_limits<double>::infinity();
    for (int bus : model.covered_buses()) {
      if (model.coverage()[static_cast<std::size_t>(bus)] == BusCoverage::Shunt) {
        any = true;
        vmin = std::min(vmin, x.v(bus));
      }
    }
    if (any) {
      h.voltage_premise = vmin > 0.0;
      h.min_v = vmin;
    }
  }
  return h;
}

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial) {
  return mix64(mix64(seed + kGolden) ^ (trial * kGolden + 0x632BE59BD9B4E019ULL));
}

Vec sample_box(const Vec& lower, const Vec& upper, std::uint64_t seed) {
  Vec xi(lower.size());
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    const std::uint64_t r = mix64(seed + static_cast<std::uint64_t>(i + 1) * kGolden);
    // 53 random bits, shifted by half an ulp so that u lies in the open interval (0, 1).
    const double u = (static_cast<double>(r >> 11) + 0.5) * 0x1p-53;
    xi(i) = lower(i) + u * (upper(i) - lower(i));
  }
  return xi;
}

namespace {

TrialRecord run_trial(const Case& c, const PerturbationModel& model, int trial, std::uint64_t seed,
                      const ExperimentOptions& opts, std::optional<LicqFailure>& failure) {
  TrialRecord rec;
  rec.trial = trial;
  rec.seed = trial_seed(seed, static_cast<std::uint64_t>(trial));
  rec.xi = sample_box(model.lower(), model.upper(), rec.seed);
  try {
    const Network net = model.apply(c.network, rec.xi);
    const ConstraintSystem cs(net, c.constraints, opts.tol);
    const NewtonResult nr = newton_pf(net, cs.ybus(), Setpoints::from_network(net), opts.newton);
    rec.converged = true;
    rec.newton_iterations = nr.iterations;
    const Evaluation ev = evaluate(cs, nr.state);
    rec.feasible = ev.feasible;
    if (rec.feasible) {
      CQReport rep = licq_check(cs, nr.state);
      rec.licq = rep.licq_holds;
      rec.rank = rep.rank;
      rec.rows = rep.rows;
      rec.sigma_min = rep.sigma_min;
      rec.hypothesis_satisfied = check_rank_hypothesis(model, net, nr.state, opts.tol.rank_tol_scale).satisfied;
      if (!rec.licq) failure = LicqFailure{trial, rec.seed, rec.xi, nr.state, std::move(rep)};
    } else {
      rec.note = "operating point violates the operational constraints";
    }
    if (opts.keep_states) rec.state = nr.state;
  } catch (const PowerFlowError& e) {
    rec.note = e.what();
  } catch (const DomainError& e) {
    rec.note = e.what();
  }
  return rec;
}

}  // namespace

GenericityReport run_genericity_experiment(const Case& c, const PerturbationModel& model, int trials,
                                           std::uint64_t seed, const ExperimentOptions& opts) {
  if (trials < 0) throw InvariantError("trial count must be non-negative");
  opts.tol.validate();
  GenericityReport rep;
  rep.case_name = c.name;
  rep.model = model.kind();
  rep.dimension = model.dimension();
  rep.box_lower = model.lower();
  rep.box_upper = model.upper();
  rep.rng_seed = seed;
  rep.trials = trials;
  rep.tol = opts.tol;
  rep.scope =
      "one operating point per parameter sample, obtained by Newton power flow from the case setpoints; "
      "LICQ is checked at that point only, not over the whole feasible set";

  // Rank hypothesis and fixed-constraint LICQ at the unperturbed operating point.
  try {
    const ConstraintSystem cs = c.system(opts.tol);
    const NewtonResult nr = newton_pf(c.network, cs.ybus(), Setpoints::from_network(c.network), opts.newton);
    rep.nominal_hypothesis = check_rank_hypothesis(model, c.network, nr.state, opts.tol.rank_tol_scale);
    rep.nominal_fixed_licq = fixed_licq_check(cs.equalities(), cs.inequalities(), nr.state, opts.tol);
  } catch (const PowerFlowError&) {
  }

  std::vector<TrialRecord> records(static_cast<std::size_t>(trials));
  std::vector<std::optional<LicqFailure>> failures(static_cast<std::size_t>(trials));
  const int workers = std::max(1, std::min(opts.threads, trials));
  auto run_range = [&](int begin, int end) {
    for (int t = begin; t < end; ++t) {
      records[static_cast<std::size_t>(t)] = run_trial(c, model, t, seed, opts, failures[static_cast<std::size_t>(t)]);
    }
  };
  if (workers <= 1) {
    run_range(0, trials);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (trials + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int b = w * chunk;
      const int e = std::min(trials, b + chunk);
      if (b < e) pool.emplace_back(run_range, b, e);
    }
    for (auto& th : pool) th.join();
  }

  for (std::size_t t = 0; t < records.size(); ++t) {
    const TrialRecord& r = records[t];
    rep.converged_count += r.converged ? 1 : 0;
    if (r.feasible) {
      ++rep.feasible_count;
      rep.sigma_min_samples.push_back(r.sigma_min);
      if (r.licq) ++rep.licq_pass_count;
      if (!r.hypothesis_satisfied) ++rep.hypothesis_failures;
    }
    if (failures[t]) rep.failures.push_back(std::move(*failures[t]));
  }
  std::sort(rep.sigma_min_samples.begin(), rep.sigma_min_samples.end());
  rep.records = std::move(records);
  rep.within_hypotheses =
      rep.hypothesis_failures == 0 && (!rep.nominal_hypothesis || rep.nominal_hypothesis->satisfied);
  return rep;
}

namespace {

struct EqualitySystem {
  const ConstraintSystem& cs;
  std::vector<int> keep;  // inequalities held as equalities

  Vec residual(const SystemState& x) const {
    const Vec flat = x.flatten();
    const Vec f = pf_residual(cs.network(), cs.ybus(), x);
    Vec c(f.size() + static_cast<Eigen::Index>(cs.equalities().size() + keep.size()));
    c.head(f.size()) = f;
    Eigen::Index r = f.size();
    for (const auto& h : cs.equalities()) c(r++) = constraint_value(h, flat);
    for (int j : keep) c(r++) = constraint_value(cs.inequalities()[static_cast<std::size_t>(j)], flat);
    return c;
  }

  Mat jacobian(const SystemState& x, const std::vector<int>& cols) const {
    const Mat jf = select_columns(pf_jacobian(cs.network(), cs.ybus(), x), cols);
    const Mat jo = operational_jacobian(cs.equalities(), cs.inequalities(), keep, x.flatten(), cols);
    Mat a(jf.rows() + jo.rows(), jf.cols());
    a << jf, jo;
    return a;
  }
};

SystemState step(const SystemState& x, const std::vector<int>& cols, const Vec& dx) {
  Vec flat = x.flatten();
  for (std::size_t j = 0; j < cols.size(); ++j) flat(cols[j]) += dx(static_cast<Eigen::Index>(j));
  return SystemState::from_flat(flat, x.free_mask);
}

std::optional<std::pair<SystemState, int>> newton_min_norm(const EqualitySystem& sys, SystemState x, double tol,
                                                           int max_iter, double ulp_scale) {
  const std::vector<int> cols = x.free_indices();
  for (int it = 0; it <= max_iter; ++it) {
    Vec c;
    try {
      c = sys.residual(x);
    } catch (const DomainError&) {
      return std::nullopt;
    }
    const double norm = c.size() ? c.lpNorm<Eigen::Infinity>() : 0.0;
    if (!std::isfinite(norm)) return std::nullopt;
    if (norm <= tol) return std::make_pair(x, it);
    if (it == max_iter) break;
    const Svd svd = full_svd(sys.jacobian(x, cols), ulp_scale);
    x = step(x, cols, -pinv_solve(svd, c));
  }
  return std::nullopt;
}

bool inequalities_hold(const ConstraintSystem& cs, const SystemState& x) {
  const Evaluation e = evaluate(cs, x);
  return e.feasible;
}

double distance(const SystemState& a, const SystemState& b) { return (a.flatten() - b.flatten()).norm(); }

}  // namespace

RestoreResult restore_feasibility(const ConstraintSystem& cs, const SystemState& reference,
                                  const std::vector<int>& keep_active, int max_iter) {
  reference.check_dimensions(cs.n_buses());
  const auto& tol = cs.tolerances();
  const double conv_tol = std::min(tol.pf_tol, tol.eq_tol);

  EqualitySystem held{cs, keep_active};
  const Vec c0 = held.residual(reference);
  if ((c0.size() ? c0.lpNorm<Eigen::Infinity>() : 0.0) <= conv_tol && inequalities_hold(cs, reference)) {
    return {reference, 0, true};
  }

  std::vector<SystemState> starts{reference};
  const std::vector<int> cols = reference.free_indices();
  const Mat a0 = held.jacobian(reference, cols);
  const Svd svd = full_svd(a0, tol.rank_tol_scale);
  const auto rows = a0.rows();
  if (rows <= a0.cols() && svd.rank == rows - 1) {
    // Fold: w^T c(x + t d) ~ w^T c0 + t^2/2 w^T c''[d,d]. Take t from the quadratic model.
    const Vec w = svd.u.col(rows - 1);
    const Vec d = svd.v.col(rows - 1);
    const double h = 1e-4;
    try {
      const Vec cp = held.residual(step(reference, cols, h * d));
      const Vec cm = held.residual(step(reference, cols, -h * d));
      const double curvature = w.dot(cp - 2.0 * c0 + cm) / (h * h);
      const double disc = -2.0 * w.dot(c0) / curvature;
      starts.clear();
      if (std::isfinite(disc) && disc > 0.0) {
        const double t = std::sqrt(disc);
        starts.push_back(step(reference, cols, t * d));
        starts.push_back(step(reference, cols, -t * d));
      }
    } catch (const DomainError&) {
    }
  }

  std::optional<RestoreResult> best;
  for (const SystemState& s : starts) {
    auto r = newton_min_norm(held, s, conv_tol, max_iter, tol.rank_tol_scale);
    if (r && inequalities_hold(cs, r->first)) {
      if (!best || distance(r->first, reference) < distance(best->state, reference)) {
        best = RestoreResult{r->first, r->second, true};
      }
    }
  }
  if (best) return *best;

  // Release the active inequalities; add back any that end up violated.
  std::vector<int> keep;
  for (std::size_t round = 0; round <= cs.inequalities().size(); ++round) {
    EqualitySystem sys{cs, keep};
    auto r = newton_min_norm(sys, reference, conv_tol, max_iter, tol.rank_tol_scale);
    if (!r) break;
    const Evaluation e = evaluate(cs, r->first);
    if (e.feasible) return {r->first, r->second, false};
    bool added = false;
    for (Eigen::Index j = 0; j < e.g.size(); ++j) {
      if (e.g(j) > tol.act_tol && std::find(keep.begin(), keep.end(), static_cast<int>(j)) == keep.end()) {
        keep.push_back(static_cast<int>(j));
        added = true;
      }
    }
    if (!added) break;
  }
  throw InfeasibleError("feasibility restoration failed to reach a feasible point");
}

std::vector<ProbeRow> tangency_escape_probe(const Case& c, const SystemState& reference,
                                            std::span<const double> deltas, int param_index,
                                            const Tolerances& tol) {
  const PerturbationModel model = PerturbationModel::load(c.network);
  if (param_index < 0 || param_index >= model.dimension()) {
    throw DimensionError("load parameter index " + std::to_string(param_index) + " out of range");
  }
  const ConstraintSystem base = c.system(tol);
  const std::vector<int> ref_active = active_set(base, reference).indices;
  const Vec nominal = model.nominal(c.network);

  std::vector<ProbeRow> rows;
  for (double delta : deltas) {
    ProbeRow row;
    row.delta = delta;
    try {
      Vec xi = nominal;
      xi(param_index) += delta;
      const ConstraintSystem cs = base.with_network(model.apply(c.network, xi));
      const RestoreResult rr = restore_feasibility(cs, reference, ref_active);
      const CQReport rep = licq_check(cs, rr.state);
      row.solved = true;
      row.sigma_min = rep.sigma_min;
      row.licq_holds = rep.licq_holds;
      row.rank = rep.rank;
      row.rows = rep.rows;
      row.state = rr.state;
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace cqa
