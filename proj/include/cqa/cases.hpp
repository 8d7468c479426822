#pragma once

#include "cqa/case.hpp"
#include "cqa/perturb.hpp"

#include <cstdint>
#include <string>

namespace cqa {

/// Two buses joined by one line with series admittance g + jb and no shunts.
/// Bus 0 is the slack (v = 1, theta = 0), bus 1 is PQ.
Network two_bus_network(double g_series, double b_series, double p_gen2 = 0.0, double q_gen2 = 0.0);

/// Lossless 2-bus tangency example.
///
/// Operational constraints: q2 + alpha p2 = 0 (fixed power factor) and v2 <= vbar,
/// vbar = sqrt(alpha^2 + 1). Cost p1^2 / 2 + alpha p2. At x_star the voltage bound is
/// active and tangent to the power-flow manifold, so the 6 x 6 active stack
/// (slack v and theta eliminated) loses one rank and the multipliers form a ray.
struct Example1 {
  double alpha = 1.0;
  double v_bar = 0.0;
  Case c;
  SystemState x_star;  // free entries p1, p2, q1, q2, v2, theta2
  int expected_rows = 6;
  int expected_rank = 5;
  Vec particular;       // [kappa_p1, kappa_p2, kappa_q1, kappa_q2, lambda, mu] at the vertex
  Vec ray_direction;    // not normalized; mu grows along it
  int price_index = 1;  // bus-2 real-power balance multiplier
  Interval price_range;

  /// Optimal point of the same problem with p^L_2 = delta, 0 <= delta <= 1 / (4 alpha).
  /// The voltage bound is inactive there. Throws DomainError outside that range.
  SystemState perturbed_optimum(double delta) const;
};

Example1 example1(double alpha);

/// 2-bus cross-over example: exponential load equality and apparent-power
/// limit at bus 1 are tangent to each other at (v2, theta2) = (1, pi/6).
struct Example2 {
  double alpha = 0.0;
  double s_bar_sq = 0.0;
  double p_load2 = 0.0;
  Case c;
  SystemState x_star;
  double v2 = 1.0;
  double theta2 = 0.0;
  CostSpec probe_cost;  // f = theta2, gradient off the span of the constraint gradients
};

Example2 example2();

/// No-load flat-profile configuration of a shunt-free network.
struct Example3 {
  Case c;
  SystemState flat;  // v = 1, theta = 0, zero generation, bus-type mask
};

/// Throws InvariantError if any bus or line shunt is nonzero.
Example3 example3(const Network& shunt_free);
Example3 example3();  // on two_bus_network(0.5, -2.0)

/// Connected random test network: bus 0 slack, a random spanning tree plus
/// `extra_lines` chords, positive series conductance and negative susceptance.
/// Loads, generation and (if `shunts`) shunts are random but small.
Network random_network(int n_buses, std::uint64_t seed, int extra_lines = 1, bool shunts = true);

/// Random state with v in [v_lo, v_hi], theta in [-0.5, 0.5] and generation in [-1, 1].
SystemState random_state(const Network& net, std::uint64_t seed, double v_lo = 0.8, double v_hi = 1.2);

/// Case for a built-in name: "ex1", "ex2" or "ex3". `alpha` applies to ex1 only.
Case builtin_case(const std::string& name, double alpha = 1.0);

/// The analytic reference point of a built-in case (x_star or the flat profile).
SystemState builtin_point(const std::string& name, double alpha = 1.0);

}  // namespace cqa
