// Acceptance report: one verdict line per criterion, followed by its checks.
// Exit status is non-zero if any criterion fails, unless --report-only.

#include "cqa/cases.hpp"
#include "cqa/errors.hpp"
#include "cqa/cqkit.hpp"
#include "cqa/perturb.hpp"
#include "cqa/report_io.hpp"
#include "oracles.hpp"

#include <cmath>
#include <cstring>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace cqa;

namespace {

struct Check {
  std::string what;
  bool ok = false;
  std::string detail;
};

struct Criterion {
  int number = 0;
  std::string title;
  std::vector<Check> checks;

  void add(std::string what, bool ok, std::string detail = {}) {
    checks.push_back({std::move(what), ok, std::move(detail)});
  }
  bool passed() const {
    for (const auto& c : checks) {
      if (!c.ok) return false;
    }
    return !checks.empty();
  }
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

std::string fmt_vec(const Vec& v) {
  std::ostringstream s;
  s.precision(6);
  s << "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v(i);
  s << "]";
  return s.str();
}

std::string fmt_interval(const Interval& i) {
  std::ostringstream s;
  s << (i.bounded_below() ? "[" : "(") << i.lo << ", " << i.hi << (i.bounded_above() ? "]" : ")");
  return s.str();
}

// Smallest angle between the lines spanned by a and b.
double line_angle(const Vec& a, const Vec& b) {
  const Vec u = a.normalized();
  Vec w = b.normalized();
  if (u.dot(w) < 0) w = -w;
  return 2.0 * std::asin(std::min(1.0, 0.5 * (u - w).norm()));
}

Criterion tangency() {
  Criterion c{1, "tangency example reproduction", {}};
  for (double alpha : {1.0, 2.0, 0.5}) {
    const std::string tag = "alpha=" + fmt(alpha) + ": ";
    const Example1 ex = example1(alpha);
    const ConstraintSystem cs = ex.c.system();
    const double pf = pf_residual(ex.c.network, cs.ybus(), ex.x_star).lpNorm<Eigen::Infinity>();
    c.add(tag + "F(x*) = 0", pf <= 1e-12, "|F|inf = " + fmt(pf));

    const CQReport r = licq_check(cs, ex.x_star);
    c.add(tag + "stack 6x6 of rank 5", r.rows == 6 && r.free_cols == 6 && r.rank == 5 && r.sigma_min <= r.rank_tol,
          std::to_string(r.rows) + "x" + std::to_string(r.free_cols) + " rank " + std::to_string(r.rank) +
              ", sigma_min " + fmt(r.sigma_min) + " vs tol " + fmt(r.rank_tol));

    const MultiplierSet m = kkt_solve(cs, ex.x_star, ex.c.cost);
    c.add(tag + "multipliers form a RAY", m.classification == Classification::Ray, to_string(m.classification));

    Vec particular(6);
    particular << -alpha, -alpha, 0, 0, 0, 0;
    const double dp = m.particular.size() == 6 ? (m.particular - particular).lpNorm<Eigen::Infinity>() : INFINITY;
    c.add(tag + "particular [-a,-a,0,0,0,0]", dp <= 1e-10, "got " + fmt_vec(m.particular));

    Vec direction(6);
    direction << 0, -alpha, 0, 1, -1, std::sqrt(alpha * alpha + 1);
    const double angle = m.ray_direction.size() == 6 ? line_angle(m.ray_direction, direction) : INFINITY;
    c.add(tag + "direction parallel to [0,-a,0,1,-1,vbar]", angle <= 1e-8,
          "got " + fmt_vec(m.ray_direction) + ", angle " + fmt(angle));

    Interval range;
    range.lo = INFINITY;
    range.hi = -INFINITY;
    if (m.component_ranges.size() > static_cast<std::size_t>(ex.price_index)) range = m.component_ranges[1];
    const bool exact = !range.bounded_below() && range.hi == -alpha;
    c.add(tag + "bus-2 balance multiplier in (-inf, -a]", exact, "got " + fmt_interval(range));
  }
  return c;
}

Criterion crossover() {
  Criterion c{2, "cross-over example reproduction", {}};
  const Example2 ex = example2();
  const ConstraintSystem cs = ex.c.system();
  const Evaluation e = evaluate(cs, ex.x_star);
  c.add("h = 0 at (1, pi/6)", std::abs(e.h(0)) <= 1e-9, "|h| = " + fmt(std::abs(e.h(0))));
  c.add("g = 0 at (1, pi/6)", std::abs(e.g(0)) <= 1e-9, "|g| = " + fmt(std::abs(e.g(0))));

  const ReducedView view = voltage_coordinates(cs, ex.x_star);
  const Mat rj = reduced_operational_jacobian(cs, ex.x_star, view, {0});
  const double angle = line_angle(rj.row(0).transpose(), rj.row(1).transpose());
  c.add("gradients of h and g are parallel", angle <= 1e-6, "angle " + fmt(angle));

  const FixedLicqResult f = fixed_licq_check_reduced(cs, ex.x_star);
  c.add("fixed LICQ fails with rank 1 of 2", !f.holds && f.rank == 1 && f.rows == 2,
        "rank " + std::to_string(f.rank) + " of " + std::to_string(f.rows));

  const MultiplierSet m = kkt_solve_reduced(cs, ex.x_star, ex.probe_cost);
  c.add("no multipliers for cost gradient [0,1]", m.classification == Classification::None && m.residual >= 0.1,
        to_string(m.classification) + ", residual " + fmt(m.residual));
  return c;
}

Criterion rank_hypotheses() {
  Criterion c{3, "parameter Jacobian rank checks", {}};
  const Network net = random_network(4, 3, 2, true);
  const int n = net.size();
  const PerturbationModel load = PerturbationModel::load(net);
  const PerturbationModel shunt = PerturbationModel::shunt(net);
  bool load_ok = true;
  double p_err = 0.0;
  double q_err = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const SystemState x = random_state(net, 100 + s);
    load_ok = load_ok && param_jacobian(load, net, x) == -Mat::Identity(2 * n, 2 * n);
    const Mat d = param_jacobian(shunt, net, x);
    for (int k = 0; k < n; ++k) {
      const double v2 = x.v(k) * x.v(k);
      p_err = std::max(p_err, std::abs(d(k, k) + v2));
      q_err = std::max(q_err, std::abs(d(n + k, n + k) + v2));
    }
  }
  c.add("LOAD: dF/dxi = -I exactly at 10 random states", load_ok);
  c.add("SHUNT: diagonal equals -v^2", std::max(p_err, q_err) <= 1e-14,
        "max error on p rows " + fmt(p_err) + ", on q rows " + fmt(q_err));

  const Example3 ex = example3();
  const Mat dl = param_jacobian(PerturbationModel::line(ex.c.network), ex.c.network, ex.flat);
  const RankInfo ri = numerical_rank(dl);
  c.add("LINE: dF/dxi vanishes at the flat no-load point",
        dl.cwiseAbs().maxCoeff() <= 1e-14 && ri.rank == 0,
        "max |entry| " + fmt(dl.cwiseAbs().maxCoeff()) + ", rank " + std::to_string(ri.rank));
  return c;
}

Criterion genericity() {
  Criterion c{4, "genericity corroboration", {}};
  const Example1 ex = example1(1.0);
  const PerturbationModel model = PerturbationModel::load(ex.c.network);
  const GenericityReport r = run_genericity_experiment(ex.c, model, 1000, 42);
  const int licq_failures = static_cast<int>(r.failures.size());
  c.add("no LICQ failures among feasible trials", licq_failures == 0 && r.feasible_count > 0,
        std::to_string(r.feasible_count) + " feasible of " + std::to_string(r.trials) + ", " +
            std::to_string(licq_failures) + " failures");
  const double smin = r.sigma_min_samples.empty() ? 0.0 : r.sigma_min_samples.front();
  c.add("min sigma_min > 1e-6", smin > 1e-6, "min sigma_min " + fmt(smin));

  const std::vector<double> deltas{0.0, 1e-3, -1e-3, 1e-2, -1e-2, 1e-1, -1e-1};
  const auto rows = tangency_escape_probe(ex.c, ex.x_star, deltas, 1);  // p_load at bus 2
  bool ok = true;
  std::string detail;
  for (const auto& row : rows) {
    const bool expect = row.delta != 0.0;
    ok = ok && row.solved && row.licq_holds == expect;
    detail += "d=" + fmt(row.delta) + ":" + (row.solved ? (row.licq_holds ? "holds" : "fails") : "unsolved") + " ";
  }
  c.add("probe: LICQ fails only at delta = 0", ok, detail);
  return c;
}

Criterion hygiene() {
  Criterion c{5, "numerical hygiene", {}};

  double worst_f = 0.0;
  double worst_g = 0.0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const Network net = random_network(2 + t % 5, static_cast<std::uint64_t>(t), 1, true);
    const int n = net.size();
    const SystemState x = random_state(net, 1000 + static_cast<std::uint64_t>(t), 0.7, 1.3);
    const Mat j = pf_jacobian(net, build_ybus(net), x);
    const Mat fd = oracle::central_jacobian([&](const Vec& z) { return oracle::pf_residual(net, z); }, x.flatten());
    worst_f = std::max(worst_f, oracle::max_rel_error(j, fd));

    const std::vector<OperationalConstraint> cons{
        BoxUpper{state_index(StateBlock::V, n - 1, n), 1.1},
        BoxLower{state_index(StateBlock::Theta, 0, n), -0.3},
        LinearEq{{{state_index(StateBlock::QGen, 0, n), u(rng)}, {state_index(StateBlock::PGen, n - 1, n), u(rng)}}, 0.1},
        ApparentPower{n - 1, 0.8},
        ExpLoadEq{n - 1, 1.0 + u(rng), 0.1},
    };
    const Vec xf = x.flatten();
    for (const auto& con : cons) {
      const Vec grad = constraint_gradient(con, xf);
      Vec ref(xf.size());
      for (Eigen::Index i = 0; i < xf.size(); ++i) {
        ref(i) = oracle::central_derivative([&](const Vec& z) { return constraint_value(con, z); }, xf, i);
      }
      worst_g = std::max(worst_g, oracle::max_rel_error(grad.transpose(), ref.transpose()));
    }
  }
  c.add("dF/dx matches finite differences", worst_f <= 1e-6, "max rel error " + fmt(worst_f));
  c.add("constraint gradients match finite differences", worst_g <= 1e-6, "max rel error " + fmt(worst_g));

  std::vector<std::pair<std::string, Network>> fixtures{
      {"ex1 alpha=0.5", example1(0.5).c.network},
      {"ex1 alpha=1", example1(1.0).c.network},
      {"ex1 alpha=2", example1(2.0).c.network},
      {"ex2", example2().c.network},
      {"ex3", example3().c.network},
  };
  bool newton_ok = true;
  std::string detail;
  for (const auto& [name, net] : fixtures) {
    try {
      const NewtonResult nr = newton_pf(net, build_ybus(net), Setpoints::from_network(net));
      const double mis = pf_residual(net, build_ybus(net), nr.state).lpNorm<Eigen::Infinity>();
      const bool ok = nr.iterations <= 10 && mis <= 1e-10;
      newton_ok = newton_ok && ok;
      detail += name + ": " + std::to_string(nr.iterations) + " it, " + fmt(mis) + "; ";
    } catch (const PowerFlowError& e) {
      newton_ok = false;
      detail += name + ": " + e.what() + "; ";
    }
  }
  c.add("Newton converges on every fixture within 10 iterations", newton_ok, detail);

  const Example1 ex = example1(1.0);
  const PerturbationModel model = PerturbationModel::load(ex.c.network);
  ExperimentOptions four;
  four.threads = 4;
  const std::string a = to_json(run_genericity_experiment(ex.c, model, 300, 9)).dump();
  const std::string b = to_json(run_genericity_experiment(ex.c, model, 300, 9, four)).dump();
  const std::string d = to_json(run_genericity_experiment(ex.c, model, 300, 9)).dump();
  c.add("genericity reports bit-identical for a fixed seed", a == b && a == d);
  return c;
}

Criterion verifier() {
  Criterion c{6, "independent KKT verification", {}};
  struct Point {
    std::string name;
    Case cs;
    SystemState x;
  };
  std::vector<Point> points;
  for (double alpha : {0.5, 1.0, 2.0}) {
    const Example1 ex = example1(alpha);
    points.push_back({"ex1 alpha=" + fmt(alpha), ex.c, ex.x_star});
    Network net = ex.c.network;
    std::vector<Bus> buses = net.buses();
    buses[1].p_load = 0.1 / alpha;
    points.push_back({"ex1 perturbed", ex.c.with_network(Network(buses, net.lines(), net.generators())),
                      ex.perturbed_optimum(0.1 / alpha)});
  }
  const Example2 e2 = example2();
  points.push_back({"ex2", e2.c, e2.x_star});
  const Example3 e3 = example3();
  points.push_back({"ex3", e3.c, e3.flat});

  std::mt19937_64 rng(6);
  std::normal_distribution<double> z(0.0, 1.0);
  bool ok = true;
  std::string detail;
  for (const auto& p : points) {
    const ConstraintSystem sys = p.cs.system();
    const MultiplierSet m = kkt_solve(sys, p.x, p.cs.cost);
    const double bound = sys.tolerances().stat_tol + 1e-12;
    const double r0 = kkt_residual(sys, p.x, p.cs.cost, m.particular);
    bool point_ok;
    double worst = r0;
    if (m.classification == Classification::None) {
      // No solution: the verifier must reproduce the reported least-squares residual.
      point_ok = std::abs(r0 - m.residual) <= 1e-12 * std::max(1.0, m.residual) && r0 > sys.tolerances().stat_tol;
    } else {
      point_ok = r0 <= bound;
      for (int t = 0; t < 10; ++t) {
        Vec w(m.nullspace_basis.cols());
        for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = z(rng);
        const double r = kkt_residual(sys, p.x, p.cs.cost, m.particular + m.nullspace_basis * w);
        worst = std::max(worst, r);
        point_ok = point_ok && r <= bound;
      }
    }
    ok = ok && point_ok;
    detail += p.name + " " + to_string(m.classification) + " " + fmt(worst) + "; ";
  }
  c.add("kkt_residual confirms particular solutions and null-space offsets", ok, detail);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  bool report_only = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--report-only") == 0) {
      report_only = true;
    } else {
      std::cerr << "usage: acceptance [--report-only]\n";
      return 2;
    }
  }

  std::vector<Criterion (*)()> all{tangency, crossover, rank_hypotheses, genericity, hygiene, verifier};
  int passed = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    Criterion c{static_cast<int>(i + 1), "", {}};
    try {
      c = all[i]();
    } catch (const std::exception& e) {
      c.add("ran to completion", false, e.what());
    }
    const bool ok = c.passed();
    passed += ok ? 1 : 0;
    std::cout << "criterion " << c.number << " " << (ok ? "PASS" : "FAIL") << ": " << c.title << "\n";
    for (const auto& ch : c.checks) {
      std::cout << "    " << (ch.ok ? "ok  " : "FAIL") << " " << ch.what;
      if (!ch.detail.empty()) std::cout << " (" << ch.detail << ")";
      std::cout << "\n";
    }
  }
  std::cout << "criteria passed: " << passed << " of " << all.size() << "\n";
  return report_only || passed == static_cast<int>(all.size()) ? 0 : 1;
}
