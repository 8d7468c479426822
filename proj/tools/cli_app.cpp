#include "cli_app.hpp"

#include "cqa/case_io.hpp"
#include "cqa/cases.hpp"
#include "cqa/errors.hpp"
#include "cqa/report_io.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cqa::cli {

using nlohmann::json;

namespace {

struct RunConfig {
  std::string case_path;
  std::string builtin;
  double alpha = 1.0;
  Tolerances tol;
  std::optional<std::uint64_t> seed;
  int trials = 1000;
  int threads = 1;
  std::string model = "load";
  std::string out_path;
  std::string format = "json";
  std::string state_path;
  std::string perturb_load;
  std::string which;
};

void add_case_options(CLI::App* sub, RunConfig& cfg) {
  auto* c = sub->add_option("--case", cfg.case_path, "JSON case file");
  auto* b = sub->add_option("--builtin", cfg.builtin, "built-in case: ex1, ex2 or ex3");
  c->excludes(b);
  sub->add_option("--alpha", cfg.alpha, "power-factor parameter of ex1")->check(CLI::PositiveNumber);
}

void add_tolerance_options(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--act-tol", cfg.tol.act_tol, "activity tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--rank-tol-scale", cfg.tol.rank_tol_scale, "rank tolerance scale (default 2^-52)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--stat-tol", cfg.tol.stat_tol, "stationarity tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--pf-tol", cfg.tol.pf_tol, "power-flow mismatch tolerance")->check(CLI::PositiveNumber);
}

void add_output_options(CLI::App* sub, RunConfig& cfg, std::vector<std::string> formats) {
  sub->add_option("--out", cfg.out_path, "output file (default stdout)");
  sub->add_option("--format", cfg.format, "output format")->check(CLI::IsMember(std::move(formats)));
}

Case load_selected_case(const RunConfig& cfg) {
  if (!cfg.case_path.empty()) return load_case_file(cfg.case_path);
  if (!cfg.builtin.empty()) return builtin_case(cfg.builtin, cfg.alpha);
  throw InputError("--case", "one of --case or --builtin is required");
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw InputError(path, "cannot write file");
  f << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json evaluation_json(const Evaluation& e) {
  return {{"pf_inf", e.pf_inf},
          {"h_inf", e.h_inf},
          {"g_max", real_to_json(e.g_max)},
          {"feasible", e.feasible},
          {"h", vector_to_json(e.h)},
          {"g", vector_to_json(e.g)}};
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

// ---------------------------------------------------------------- ybus

int cmd_ybus(const RunConfig& cfg, std::ostream& out) {
  const Case c = load_selected_case(cfg);
  emit(dump(to_json(build_ybus(c.network))), cfg.out_path, out);
  return kOk;
}

// ---------------------------------------------------------------- export

int cmd_export(const RunConfig& cfg, std::ostream& out) {
  const Case c = load_selected_case(cfg);
  emit(dump(case_to_json(c)), cfg.out_path, out);
  return kOk;
}

// ---------------------------------------------------------------- check

std::pair<int, double> parse_perturb_load(const std::string& spec, int dimension) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw InputError("--perturb-load", "expected K:DELTA");
  int k = 0;
  double delta = 0.0;
  try {
    std::size_t used = 0;
    k = std::stoi(spec.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("k");
    const std::string d = spec.substr(colon + 1);
    delta = std::stod(d, &used);
    if (used != d.size()) throw std::invalid_argument("delta");
  } catch (const std::exception&) {
    throw InputError("--perturb-load", "expected K:DELTA with integer K and real DELTA, got '" + spec + "'");
  }
  if (k < 1 || k > dimension) {
    throw InputError("--perturb-load", "K must lie in 1.." + std::to_string(dimension) + " (positions in [p_load; q_load])");
  }
  if (!std::isfinite(delta)) throw InputError("--perturb-load", "DELTA must be finite");
  return {k, delta};
}

int cmd_check(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  cfg.tol.validate();
  Case c = load_selected_case(cfg);
  ConstraintSystem cs = c.system(cfg.tol);

  std::string source;
  SystemState x;
  if (!cfg.state_path.empty()) {
    x = load_state_file(cfg.state_path, c.network);
    source = "file";
  } else if (!cfg.builtin.empty()) {
    x = builtin_point(cfg.builtin, cfg.alpha);
    source = "builtin";
  } else {
    NewtonOptions opts;
    opts.tol = cfg.tol.pf_tol;
    x = newton_pf(c.network, cs.ybus(), Setpoints::from_network(c.network), opts).state;
    source = "newton";
  }

  json perturbation = nullptr;
  if (!cfg.perturb_load.empty()) {
    const PerturbationModel model = PerturbationModel::load(c.network);
    const auto [k, delta] = parse_perturb_load(cfg.perturb_load, model.dimension());
    Vec xi = model.nominal(c.network);
    xi(k - 1) += delta;
    const Network perturbed = model.apply(c.network, xi);
    const ConstraintSystem pcs = cs.with_network(perturbed);
    std::string method;
    const bool tabulated = cfg.builtin == "ex1" && k == 2 && cfg.state_path.empty() && delta >= 0.0 &&
                           4.0 * cfg.alpha * delta <= 1.0;
    if (tabulated) {
      x = example1(cfg.alpha).perturbed_optimum(delta);
      method = "analytic optimum";
    } else {
      const auto active = active_indices(cs.inequalities(), x.flatten(), cfg.tol.act_tol);
      x = restore_feasibility(pcs, x, active).state;
      method = "feasibility restoration";
    }
    c = c.with_network(perturbed);
    cs = pcs;
    source = "perturbed";
    perturbation = {{"parameter", model.parameter_label(k - 1)}, {"delta", delta}, {"method", method}};
  }

  const Evaluation ev = evaluate(cs, x);
  json report{{"command", "check"},
              {"case", c.name},
              {"tolerances", to_json(cfg.tol)},
              {"state_source", source},
              {"state", state_to_json(x)},
              {"perturbation", perturbation},
              {"evaluation", evaluation_json(ev)}};
  if (!ev.feasible) {
    report["error"] = "state is infeasible";
    if (cfg.format == "text") {
      emit("infeasible: |F| " + fmt(ev.pf_inf) + ", |h| " + fmt(ev.h_inf) + ", max g " + fmt(ev.g_max) + "\n",
           cfg.out_path, out);
    } else {
      emit(dump(report), cfg.out_path, out);
    }
    err << "cqa: state is infeasible\n";
    return kInfeasible;
  }

  const CQReport cq = licq_check(cs, x);
  const FixedLicqResult fixed = fixed_licq_check(cs.equalities(), cs.inequalities(), x, cfg.tol);
  const MultiplierSet mult = kkt_solve(cs, x, c.cost);
  report["cq_report"] = to_json(cq);
  report["fixed_licq"] = to_json(fixed);
  report["multipliers"] = to_json(mult);

  std::optional<FixedLicqResult> rfixed;
  std::optional<MultiplierSet> rmult;
  try {
    rfixed = fixed_licq_check_reduced(cs, x);
    rmult = kkt_solve_reduced(cs, x, c.cost);
    report["reduced"] = {{"fixed_licq", to_json(*rfixed)}, {"multipliers", to_json(*rmult)}};
  } catch (const InvariantError&) {
    report["reduced"] = nullptr;
  }

  if (cfg.format == "text") {
    std::ostringstream s;
    s << "case " << c.name << " (" << source << " state), face " << cq.face() << "\n";
    s << "licq: " << (cq.licq_holds ? "holds" : "fails") << " (rank " << cq.rank << "/" << cq.rows
      << ", sigma_min " << fmt(cq.sigma_min) << ", rank_tol " << fmt(cq.rank_tol) << ")\n";
    s << "fixed licq: " << (fixed.holds ? "holds" : "fails") << " (rank " << fixed.rank << "/" << fixed.rows << ")";
    if (rfixed) s << ", reduced: " << (rfixed->holds ? "holds" : "fails") << " (rank " << rfixed->rank << "/" << rfixed->rows << ")";
    s << "\n";
    s << "multipliers: " << to_string(mult.classification) << " (residual " << fmt(mult.residual) << ")";
    if (rmult) s << ", reduced: " << to_string(rmult->classification) << " (residual " << fmt(rmult->residual) << ")";
    s << "\n";
    emit(s.str(), cfg.out_path, out);
  } else {
    emit(dump(report), cfg.out_path, out);
  }
  return cq.licq_holds ? kOk : kLicqFails;
}

// ---------------------------------------------------------------- perturb

std::uint64_t resolve_seed(const RunConfig& cfg) {
  if (cfg.seed) return *cfg.seed;
  if (const char* env = std::getenv("CQA_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const std::string s(env);
      const auto v = std::stoull(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw InputError("CQA_SEED", std::string("not an unsigned integer: '") + env + "'");
    }
  }
  return 0;
}

std::string csv_path_for(const std::string& json_path) {
  std::filesystem::path p(json_path);
  p.replace_extension(".csv");
  if (p.string() == json_path) p += ".csv";
  return p.string();
}

int cmd_perturb(const RunConfig& cfg, std::ostream& out) {
  cfg.tol.validate();
  const Case c = load_selected_case(cfg);
  PerturbationModel model = [&] {
    switch (perturbation_kind_from_string(cfg.model)) {
      case PerturbationKind::Load: return PerturbationModel::load(c.network);
      case PerturbationKind::Shunt: return PerturbationModel::shunt(c.network);
      case PerturbationKind::Line: return PerturbationModel::line(c.network);
      case PerturbationKind::Mixed: break;
    }
    throw InputError("--model", "expected load, shunt or line");
  }();
  ExperimentOptions opts;
  opts.tol = cfg.tol;
  opts.newton.tol = cfg.tol.pf_tol;
  opts.threads = cfg.threads;
  const GenericityReport rep = run_genericity_experiment(c, model, cfg.trials, resolve_seed(cfg), opts);

  if (cfg.format == "csv") {
    std::ostringstream s;
    write_trials_csv(rep, s);
    emit(s.str(), cfg.out_path, out);
    return kOk;
  }
  json j = to_json(rep);
  j["command"] = "perturb";
  if (cfg.format == "text") {
    std::ostringstream s;
    s << "case " << rep.case_name << ", model " << to_string(rep.model) << ", seed " << rep.rng_seed << "\n";
    s << "trials " << rep.trials << ", converged " << rep.converged_count << ", feasible " << rep.feasible_count
      << ", licq " << rep.licq_pass_count << ", failures " << rep.failures.size() << "\n";
    if (!rep.sigma_min_samples.empty()) s << "min sigma_min " << fmt(rep.sigma_min_samples.front()) << "\n";
    s << "rank hypothesis: " << (rep.within_hypotheses ? "satisfied" : "NOT satisfied") << "\n";
    emit(s.str(), cfg.out_path, out);
    return kOk;
  }
  emit(dump(j), cfg.out_path, out);
  if (!cfg.out_path.empty()) {
    std::ostringstream s;
    write_trials_csv(rep, s);
    emit(s.str(), csv_path_for(cfg.out_path), out);
  }
  return kOk;
}

// ---------------------------------------------------------------- repro

struct Checklist {
  json items = json::array();
  bool ok = true;

  void add(const std::string& name, bool pass, const std::string& detail) {
    items.push_back({{"check", name}, {"pass", pass}, {"detail", detail}});
    ok = ok && pass;
  }
};

double max_abs(const Vec& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

double max_state_gap(const SystemState& a, const SystemState& b) { return max_abs(a.flatten() - b.flatten()); }

std::string repro_ex1(double alpha, const Tolerances& tol, Checklist& cl, json& data) {
  const Example1 ex = example1(alpha);
  const ConstraintSystem cs = ex.c.system(tol);
  const Evaluation ev = evaluate(cs, ex.x_star);
  cl.add("power flow at x*", ev.pf_inf <= 1e-12, "|F|_inf = " + fmt(ev.pf_inf));
  cl.add("operational constraints at x*", ev.h_inf <= 1e-12 && std::abs(ev.g(0)) <= 1e-12,
         "|h| = " + fmt(ev.h_inf) + ", g = " + fmt(ev.g(0)));

  // Flat start lands on the high-voltage branch (x*) for alpha up to about 1.2, on the low one beyond.
  const NewtonResult nr = newton_pf(ex.c.network, cs.ybus(), Setpoints::from_network(ex.c.network));
  const bool at_star = max_state_gap(nr.state, ex.x_star) <= 1e-10;
  cl.add("newton converges from a flat start", nr.iterations <= 10 && nr.mismatch_trace.back() <= tol.pf_tol,
         std::to_string(nr.iterations) + " iterations, " + (at_star ? "reached x*" : "reached the low-voltage branch"));

  const CQReport cq = licq_check(cs, ex.x_star);
  cl.add("active stack rank", cq.rows == ex.expected_rows && cq.rank == ex.expected_rank && cq.sigma_min <= cq.rank_tol,
         "rank " + std::to_string(cq.rank) + "/" + std::to_string(cq.rows) + ", sigma_min " + fmt(cq.sigma_min));

  const MultiplierSet m = kkt_solve(cs, ex.x_star, ex.c.cost);
  cl.add("classification", m.classification == Classification::Ray, to_string(m.classification));
  const bool is_ray = m.classification == Classification::Ray;
  const double part_gap = m.particular.size() == 6 ? max_abs(m.particular - ex.particular) : INFINITY;
  cl.add("particular multipliers", part_gap <= 1e-10, "gap " + fmt(part_gap));
  double dir_gap = INFINITY;
  if (is_ray) dir_gap = max_abs(m.ray_direction - ex.ray_direction.normalized());
  cl.add("ray direction", dir_gap <= 1e-8, "gap " + fmt(dir_gap));
  Interval price;
  if (is_ray) price = m.component_ranges[static_cast<std::size_t>(ex.price_index)];
  const bool price_ok = is_ray && std::abs(price.lo - ex.price_range.lo) <= 1e-10 && !price.bounded_above();
  cl.add("bus-2 price multiplier range", price_ok, "[" + fmt(price.lo) + ", " + fmt(price.hi) + "]");

  data = {{"alpha", alpha}, {"state", state_to_json(ex.x_star)}, {"cq_report", to_json(cq)}, {"multipliers", to_json(m)}};
  return "rank " + std::to_string(cq.rank) + "/" + std::to_string(cq.rows) + ", " + to_string(m.classification) +
         ", bus-2 multiplier in [" + fmt(price.lo) + ", " + fmt(price.hi) + ")";
}

std::string repro_ex2(const Tolerances& tol, Checklist& cl, json& data) {
  const Example2 ex = example2();
  const ConstraintSystem cs = ex.c.system(tol);
  const Evaluation ev = evaluate(cs, ex.x_star);
  cl.add("power flow at the cross-over point", ev.pf_inf <= 1e-12, "|F|_inf = " + fmt(ev.pf_inf));
  cl.add("h and g vanish", ev.h_inf <= 1e-9 && std::abs(ev.g(0)) <= 1e-9,
         "|h| = " + fmt(ev.h_inf) + ", g = " + fmt(ev.g(0)));

  const NewtonResult nr = newton_pf(ex.c.network, cs.ybus(), Setpoints::from_network(ex.c.network));
  cl.add("newton reaches the cross-over point", max_state_gap(nr.state, ex.x_star) <= 1e-10,
         std::to_string(nr.iterations) + " iterations");

  const ReducedView view = voltage_coordinates(cs, ex.x_star);
  const Mat r = reduced_operational_jacobian(cs, ex.x_star, view, {0});
  Vec a = r.row(0).transpose().normalized();
  Vec b = r.row(1).transpose().normalized();
  if (a.dot(b) < 0) b = -b;
  const double angle = 2.0 * std::asin(std::min(1.0, 0.5 * (a - b).norm()));
  cl.add("constraint gradients parallel", angle <= 1e-6, "angle " + fmt(angle) + " rad");

  const FixedLicqResult fixed = fixed_licq_check_reduced(cs, ex.x_star);
  cl.add("fixed LICQ fails in (v2, theta2)", !fixed.holds && fixed.rank == 1 && fixed.rows == 2,
         "rank " + std::to_string(fixed.rank) + "/" + std::to_string(fixed.rows));

  const MultiplierSet m = kkt_solve_reduced(cs, ex.x_star, ex.probe_cost);
  cl.add("no multipliers for the probe cost", m.classification == Classification::None && m.residual >= 0.1,
         to_string(m.classification) + ", residual " + fmt(m.residual));

  data = {{"state", state_to_json(ex.x_star)},
          {"gradient_angle", angle},
          {"reduced_jacobian", matrix_to_json(r)},
          {"fixed_licq", to_json(fixed)},
          {"multipliers", to_json(m)}};
  return "tangent constraints (angle " + fmt(angle) + "), fixed LICQ rank " + std::to_string(fixed.rank) + "/2, " +
         to_string(m.classification);
}

std::string repro_ex3(Checklist& cl, json& data) {
  const Example3 ex = example3();
  const AdmittanceMatrix y = build_ybus(ex.c.network);
  const Vec f = pf_residual(ex.c.network, y, ex.flat);
  cl.add("flat no-load profile solves the power flow", max_abs(f) == 0.0, "|F|_inf = " + fmt(max_abs(f)));
  const PerturbationModel line = PerturbationModel::line(ex.c.network);
  const Mat d = param_jacobian(line, ex.c.network, ex.flat);
  const RankHypothesis h = check_rank_hypothesis(line, ex.c.network, ex.flat);
  cl.add("line parameters do not move the flat point", d.cwiseAbs().maxCoeff() <= 1e-14,
         "max |dF/dxi| = " + fmt(d.cwiseAbs().maxCoeff()));
  cl.add("rank hypothesis fails", h.rank == 0 && !h.satisfied,
         "rank " + std::to_string(h.rank) + " of required " + std::to_string(h.required));
  data = {{"param_jacobian", matrix_to_json(d)}, {"rank_hypothesis", to_json(h)}};
  return "LINE param rank " + std::to_string(h.rank);
}

int cmd_repro(const RunConfig& cfg, std::ostream& out) {
  cfg.tol.validate();
  Checklist cl;
  json data;
  std::string summary;
  if (cfg.which == "ex1") {
    summary = repro_ex1(cfg.alpha, cfg.tol, cl, data);
  } else if (cfg.which == "ex2") {
    summary = repro_ex2(cfg.tol, cl, data);
  } else {
    summary = repro_ex3(cl, data);
  }
  json j{{"command", "repro"},
         {"example", cfg.which},
         {"tolerances", to_json(cfg.tol)},
         {"pass", cl.ok},
         {"checks", cl.items},
         {"data", data}};

  std::ostringstream s;
  s << cfg.which << ": " << summary << ": " << (cl.ok ? "PASS" : "FAIL") << "\n";
  for (const auto& item : cl.items) {
    if (!item["pass"].get<bool>()) {
      s << "  failed: " << item["check"].get<std::string>() << " (" << item["detail"].get<std::string>() << ")\n";
    }
  }
  if (cfg.format == "json") {
    emit(dump(j), cfg.out_path, out);
  } else {
    out << s.str();
    if (!cfg.out_path.empty()) emit(dump(j), cfg.out_path, out);
  }
  return cl.ok ? kOk : kReproMismatch;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Constraint qualification and KKT multiplier diagnostics for AC optimal power flow", "cqa"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* ybus = app.add_subcommand("ybus", "dump the nodal admittance matrix");
  add_case_options(ybus, cfg);
  ybus->add_option("--out", cfg.out_path, "output file (default stdout)");

  auto* exp = app.add_subcommand("export", "write a case as a JSON case document");
  add_case_options(exp, cfg);
  exp->add_option("--out", cfg.out_path, "output file (default stdout)");

  auto* check = app.add_subcommand("check", "LICQ and KKT multipliers at a state");
  add_case_options(check, cfg);
  add_tolerance_options(check, cfg);
  add_output_options(check, cfg, {"json", "text"});
  check->add_option("--state", cfg.state_path, "state file: flat JSON array in (pg, qg, v, theta) order");
  check->add_option("--perturb-load", cfg.perturb_load, "K:DELTA, shift entry K (1-based) of [p_load; q_load]");

  auto* perturb = app.add_subcommand("perturb", "Monte Carlo genericity experiment");
  add_case_options(perturb, cfg);
  add_tolerance_options(perturb, cfg);
  add_output_options(perturb, cfg, {"json", "csv", "text"});
  perturb->add_option("--model", cfg.model, "perturbation model")->check(CLI::IsMember({"load", "shunt", "line"}));
  perturb->add_option("--trials", cfg.trials, "number of trials")->check(CLI::NonNegativeNumber);
  perturb->add_option("--seed", cfg.seed, "RNG seed (falls back to CQA_SEED, then 0)");
  perturb->add_option("--threads", cfg.threads, "worker threads")->check(CLI::PositiveNumber);

  auto* repro = app.add_subcommand("repro", "re-derive a built-in example and compare with its ground truth");
  repro->add_option("which", cfg.which, "ex1, ex2 or ex3")->required()->check(CLI::IsMember({"ex1", "ex2", "ex3"}));
  repro->add_option("--alpha", cfg.alpha, "power-factor parameter of ex1")->check(CLI::PositiveNumber);
  add_tolerance_options(repro, cfg);
  add_output_options(repro, cfg, {"text", "json"});
  cfg.format = "";

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*ybus) return cmd_ybus(cfg, out);
    if (*exp) return cmd_export(cfg, out);
    if (cfg.format.empty()) cfg.format = *repro ? "text" : "json";
    if (*check) return cmd_check(cfg, out, err);
    if (*perturb) return cmd_perturb(cfg, out);
    if (*repro) return cmd_repro(cfg, out);
  } catch (const InfeasibleError& e) {
    err << "cqa: " << e.what() << "\n";
    return kInfeasible;
  } catch (const PowerFlowError& e) {
    err << "cqa: power flow failed: " << e.what() << "\n";
    return kInfeasible;
  } catch (const Error& e) {
    err << "cqa: " << e.what() << "\n";
    return kInputError;
  } catch (const nlohmann::json::exception& e) {
    err << "cqa: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace cqa::cli
