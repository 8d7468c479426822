#include "cqa/cases.hpp"

#include "cqa/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace cqa {

Network two_bus_network(double g_series, double b_series, double p_gen2, double q_gen2) {
  std::vector<Bus> buses(2);
  buses[0].id = 0;
  buses[0].type = BusType::Slack;
  buses[1].id = 1;
  buses[1].type = BusType::PQ;
  std::vector<Line> lines{Line{0, 1, g_series, b_series, 0.0, 0.0}};
  std::vector<Generator> gens{Generator{0, 0.0, 0.0}, Generator{1, p_gen2, q_gen2}};
  return Network(std::move(buses), std::move(lines), std::move(gens));
}

namespace {

SystemState two_bus_state(const Network& net, double p1, double p2, double q1, double q2, double v2, double t2) {
  SystemState x = SystemState::flat(2);
  x.p_gen << p1, p2;
  x.q_gen << q1, q2;
  x.v << 1.0, v2;
  x.theta << 0.0, t2;
  x.free_mask = mask_from_bus_types(net);
  return x;
}

}  // namespace

Example1 example1(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("example1 needs alpha > 0");
  const double v_bar = std::sqrt(alpha * alpha + 1.0);
  const int n = 2;
  const Network net = two_bus_network(0.0, -1.0, -alpha, alpha * alpha);

  const int p2 = state_index(StateBlock::PGen, 1, n);
  const int q2 = state_index(StateBlock::QGen, 1, n);
  const int v2 = state_index(StateBlock::V, 1, n);
  std::vector<OperationalConstraint> cons{
      LinearEq{{LinearTerm{q2, 1.0}, LinearTerm{p2, alpha}}, 0.0},
      BoxUpper{v2, v_bar},
  };
  CostSpec cost = CostSpec::zero(4 * n);
  cost.c2(state_index(StateBlock::PGen, 0, n)) = 1.0;
  cost.c1(p2) = alpha;
  Vec particular = Vec::Zero(6);
  particular(0) = -alpha;
  particular(1) = -alpha;
  Vec direction(6);
  direction << 0.0, alpha, 0.0, 1.0, -1.0, v_bar;
  Example1 ex{.alpha = alpha,
              .v_bar = v_bar,
              .c = Case{"ex1", net, std::move(cons), std::move(cost), std::nullopt},
              .x_star = two_bus_state(net, alpha, -alpha, 0.0, alpha * alpha, v_bar, -std::atan(alpha)),
              .expected_rows = 6,
              .expected_rank = 5,
              .particular = std::move(particular),
              .ray_direction = std::move(direction),
              .price_index = 1,
              .price_range = Interval{-alpha, std::numeric_limits<double>::infinity()}};
  return ex;
}

SystemState Example1::perturbed_optimum(double delta) const {
  const double disc = 1.0 - 4.0 * alpha * delta;
  if (!(delta >= 0.0) || disc < 0.0) {
    throw DomainError("perturbed optimum is tabulated for 0 <= delta <= 1/(4 alpha)");
  }
  const double a = 0.5 * (1.0 + std::sqrt(disc));
  const double v2 = std::hypot(a, alpha);
  return two_bus_state(c.network, alpha, delta - alpha, 1.0 - a, alpha * alpha - alpha * delta, v2,
                       std::atan2(-alpha, a));
}

Example2 example2() {
  using std::numbers::pi;
  using std::numbers::sqrt3;
  const double alpha = 2.0 / 9.0 * (sqrt3 + 3.0);
  const double s_bar_sq = 2.0 - sqrt3;
  const double p_load2 = -(15.0 * sqrt3 - 23.0) / 8.0;
  const int n = 2;
  const double q = 1.0 - sqrt3 / 2.0;
  const Network net = two_bus_network(0.0, -1.0, 0.5, q);
  std::vector<OperationalConstraint> cons{
      ExpLoadEq{1, alpha, p_load2},
      ApparentPower{1, s_bar_sq},
  };
  CostSpec probe = CostSpec::zero(4 * n);
  probe.c1(state_index(StateBlock::Theta, 1, n)) = 1.0;
  Example2 ex{.alpha = alpha,
              .s_bar_sq = s_bar_sq,
              .p_load2 = p_load2,
              .c = Case{"ex2", net, std::move(cons), probe, std::nullopt},
              .x_star = {},
              .v2 = 1.0,
              .theta2 = pi / 6.0,
              .probe_cost = probe};
  ex.x_star = two_bus_state(net, -0.5, 0.5, q, q, ex.v2, ex.theta2);
  return ex;
}

Example3 example3(const Network& shunt_free) {
  for (const Bus& b : shunt_free.buses()) {
    if (b.g_shunt != 0.0 || b.b_shunt != 0.0) {
      throw InvariantError("bus " + std::to_string(b.id) + " has a nonzero shunt");
    }
  }
  for (std::size_t i = 0; i < shunt_free.lines().size(); ++i) {
    const Line& l = shunt_free.lines()[i];
    if (l.g_shunt != 0.0 || l.b_shunt != 0.0) {
      throw InvariantError("line " + std::to_string(i) + " has a nonzero shunt");
    }
  }
  std::vector<Bus> buses = shunt_free.buses();
  for (Bus& b : buses) {
    b.p_load = 0.0;
    b.q_load = 0.0;
    if (b.type != BusType::PQ) b.v_setpoint = 1.0;
    b.theta_setpoint = 0.0;
  }
  std::vector<Generator> gens = shunt_free.generators();
  for (Generator& g : gens) {
    g.p = 0.0;
    g.q = 0.0;
  }
  Network net(std::move(buses), shunt_free.lines(), std::move(gens));
  SystemState flat = SystemState::flat(net.size());
  flat.free_mask = mask_from_bus_types(net);
  const int n_state = 4 * net.size();
  return Example3{Case{"ex3", std::move(net), {}, CostSpec::zero(n_state), std::nullopt}, std::move(flat)};
}

Example3 example3() { return example3(two_bus_network(0.5, -2.0)); }

Network random_network(int n_buses, std::uint64_t seed, int extra_lines, bool shunts) {
  if (n_buses < 1) throw InvariantError("random network needs at least one bus");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  std::vector<Bus> buses(static_cast<std::size_t>(n_buses));
  for (int k = 0; k < n_buses; ++k) {
    Bus& b = buses[static_cast<std::size_t>(k)];
    b.id = k;
    b.type = k == 0 ? BusType::Slack : BusType::PQ;
    b.p_load = uni(0.0, 0.3);
    b.q_load = uni(0.0, 0.1);
    if (shunts) {
      b.g_shunt = uni(0.0, 0.05);
      b.b_shunt = uni(-0.05, 0.1);
    }
  }
  std::vector<Line> lines;
  std::set<std::pair<int, int>> used;
  auto add = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    if (a == b || !used.insert(key).second) return false;
    Line l{a, b, uni(0.5, 2.0), uni(-8.0, -2.0), 0.0, 0.0};
    if (shunts) l.b_shunt = uni(0.0, 0.1);
    lines.push_back(l);
    return true;
  };
  for (int k = 1; k < n_buses; ++k) {
    add(static_cast<int>(rng() % static_cast<std::uint64_t>(k)), k);
  }
  for (int e = 0, attempts = 0; e < extra_lines && attempts < 50 * (extra_lines + 1); ++attempts) {
    const int a = static_cast<int>(rng() % static_cast<std::uint64_t>(n_buses));
    const int b = static_cast<int>(rng() % static_cast<std::uint64_t>(n_buses));
    if (add(a, b)) ++e;
  }
  std::vector<Generator> gens{Generator{0, 0.0, 0.0}};
  return Network(std::move(buses), std::move(lines), std::move(gens));
}

SystemState random_state(const Network& net, std::uint64_t seed, double v_lo, double v_hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const int n = net.size();
  SystemState x = SystemState::flat(n);
  for (int k = 0; k < n; ++k) {
    x.p_gen(k) = uni(-1.0, 1.0);
    x.q_gen(k) = uni(-1.0, 1.0);
    x.v(k) = uni(v_lo, v_hi);
    x.theta(k) = uni(-0.5, 0.5);
  }
  x.free_mask = mask_from_bus_types(net);
  return x;
}

Case builtin_case(const std::string& name, double alpha) {
  if (name == "ex1") return example1(alpha).c;
  if (name == "ex2") return example2().c;
  if (name == "ex3") return example3().c;
  throw InputError("builtin", "unknown builtin case '" + name + "' (expected ex1, ex2 or ex3)");
}

SystemState builtin_point(const std::string& name, double alpha) {
  if (name == "ex1") return example1(alpha).x_star;
  if (name == "ex2") return example2().x_star;
  if (name == "ex3") return example3().flat;
  throw InputError("builtin", "unknown builtin case '" + name + "' (expected ex1, ex2 or ex3)");
}

}  // namespace cqa
