#include "cqa/cases.hpp"
#include "cqa/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace cqa;

TEST_CASE("tangency example at alpha = 1") {
  const Example1 ex = example1(1.0);
  CHECK(ex.v_bar == std::sqrt(2.0));
  CHECK(ex.x_star.v(1) == doctest::Approx(std::sqrt(2.0)));
  CHECK(std::abs(ex.x_star.theta(1)) == doctest::Approx(std::numbers::pi / 4));
  CHECK(ex.x_star.p_gen(1) == -1.0);
  CHECK(ex.x_star.p_gen(0) == 1.0);
  CHECK(ex.x_star.q_gen(1) == 1.0);
  CHECK(ex.x_star.q_gen(0) == 0.0);
  const AdmittanceMatrix y = build_ybus(ex.c.network);
  CHECK(y.b(0, 1) == 1.0);  // y12 = -1j
  CHECK(y.g(0, 1) == 0.0);
  CHECK(ex.x_star.free_indices() == std::vector<int>{0, 1, 2, 3, 5, 7});
}

TEST_CASE("tangency example at alpha = 2") {
  const Example1 ex = example1(2.0);
  CHECK(ex.v_bar == std::sqrt(5.0));
  Vec w(6);
  w << 0, 2, 0, 1, -1, std::sqrt(5.0);
  CHECK(ex.ray_direction == w);
}

TEST_CASE("degeneracy condition: the voltage bound is tangent to the power-flow solutions") {
  // v2 is extremal along the one-dimensional set {F = 0, h = 0} exactly when
  // the (v2, theta2) columns of the reduced stack are dependent:
  // for x* this reads sin(theta2) = -alpha cos(theta2).
  for (double alpha : {0.5, 1.0, 2.0}) {
    const Example1 ex = example1(alpha);
    const double t = ex.x_star.theta(1);
    CHECK(std::abs(std::sin(t) + alpha * std::cos(t)) <= 1e-12);
  }
}

TEST_CASE("ground truth re-verifies through the public APIs") {
  for (double alpha : {0.5, 1.0, 2.0}) {
    const Example1 ex = example1(alpha);
    const ConstraintSystem cs = ex.c.system();
    const Evaluation e = evaluate(cs, ex.x_star);
    CHECK(e.pf_inf <= 1e-12);
    CHECK(e.h_inf <= 1e-12);
    CHECK(e.g(0) == 0.0);
    CHECK(oracle::pf_residual(ex.c.network, ex.x_star.flatten()).lpNorm<Eigen::Infinity>() <= 1e-12);
    const CQReport r = licq_check(cs, ex.x_star);
    CHECK(r.rows == ex.expected_rows);
    CHECK(r.rank == ex.expected_rank);
    CHECK((r.active_jacobian().transpose() * ex.ray_direction).norm() <= 1e-12);
    CHECK(kkt_residual(cs, ex.x_star, ex.c.cost, ex.particular) <= 1e-12);
  }
  CHECK_THROWS_AS(example1(0.0), DomainError);
  CHECK_THROWS_AS(example1(-1.0), DomainError);
}

TEST_CASE("perturbed optimum of the tangency example") {
  const Example1 ex = example1(1.0);
  for (double delta : {0.0, 0.01, 0.05, 0.2, 0.25}) {
    const SystemState x = ex.perturbed_optimum(delta);
    std::vector<Bus> buses = ex.c.network.buses();
    buses[1].p_load = delta;
    const ConstraintSystem cs(Network(buses, ex.c.network.lines(), ex.c.network.generators()), ex.c.constraints);
    const Evaluation e = evaluate(cs, x);
    CHECK(e.pf_inf <= 1e-12);
    CHECK(e.h_inf <= 1e-12);
    CHECK(e.feasible);
    // Stationary with the voltage bound's multiplier at zero.
    const MultiplierSet m = kkt_solve(cs, x, ex.c.cost);
    CHECK(m.residual <= 1e-10);
    if (delta > 0.0) CHECK(m.classification == Classification::Unique);
  }
  CHECK(ex.perturbed_optimum(0.0) == ex.x_star);
  CHECK_THROWS_AS(ex.perturbed_optimum(0.3), DomainError);
  CHECK_THROWS_AS(ex.perturbed_optimum(-0.1), DomainError);
}

TEST_CASE("cross-over example") {
  const Example2 ex = example2();
  CHECK(ex.alpha == doctest::Approx(2.0 / 9.0 * (std::sqrt(3.0) + 3.0)));
  CHECK(ex.s_bar_sq == doctest::Approx(2.0 - std::sqrt(3.0)));
  const ConstraintSystem cs = ex.c.system();
  const Evaluation e = evaluate(cs, ex.x_star);
  CHECK(e.pf_inf <= 1e-12);
  CHECK(std::abs(e.h(0)) <= 1e-9);
  CHECK(std::abs(e.g(0)) <= 1e-12);

  // The same constraints written directly in (v2, theta2).
  const double v = ex.v2;
  const double t = ex.theta2;
  const double h = v * v + v * (ex.alpha * std::sin(t) - std::cos(t)) - ex.alpha * (std::sqrt(v) + ex.p_load2);
  const double g = v * v * (v * v - 2 * v * std::cos(t) + 1) - ex.s_bar_sq;
  CHECK(std::abs(h) <= 1e-9);
  CHECK(std::abs(g) <= 1e-12);

  const ReducedView view = voltage_coordinates(cs, ex.x_star);
  const Mat r = reduced_operational_jacobian(cs, ex.x_star, view, {0});
  const Vec a = r.row(0).normalized();
  Vec b = r.row(1).normalized();
  if (a.dot(b) < 0) b = -b;
  CHECK(2.0 * std::asin(0.5 * (a - b).norm()) <= 1e-6);
}

TEST_CASE("no-load flat example") {
  const Example3 ex = example3();
  CHECK(pf_residual(ex.c.network, build_ybus(ex.c.network), ex.flat).cwiseAbs().maxCoeff() == 0.0);
  SystemState x = ex.flat;
  x.v *= 1.05;  // a uniform profile still carries no flow
  CHECK(pf_residual(ex.c.network, build_ybus(ex.c.network), x).cwiseAbs().maxCoeff() <= 1e-15);
  x.v(1) = 1.0;
  CHECK(pf_residual(ex.c.network, build_ybus(ex.c.network), x).cwiseAbs().maxCoeff() > 1e-3);

  std::vector<Bus> buses = ex.c.network.buses();
  buses[1].b_shunt = 0.1;
  CHECK_THROWS_AS(example3(Network(buses, ex.c.network.lines())), InvariantError);
  std::vector<Line> lines = ex.c.network.lines();
  lines[0].b_shunt = 0.02;
  CHECK_THROWS_AS(example3(Network(ex.c.network.buses(), lines)), InvariantError);
}

TEST_CASE("built-in lookup") {
  CHECK(builtin_case("ex1", 2.0).constraints.size() == 2);
  CHECK(builtin_case("ex2").name == "ex2");
  CHECK(builtin_point("ex3") == example3().flat);
  CHECK_THROWS_AS(builtin_case("ex4"), InputError);
}

TEST_CASE("random networks are connected and valid") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Network net = random_network(1 + static_cast<int>(seed % 9), seed, 2, true);
    CHECK(net.connected());
    CHECK_NOTHROW(build_ybus(net));
  }
}
