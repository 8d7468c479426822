#pragma once

#include "cqa/linalg.hpp"
#include "cqa/netmodel.hpp"

#include <optional>
#include <vector>

namespace cqa {

/// Blocks of the flattened state x = (p^G, q^G, v, theta) in R^{4N}.
enum class StateBlock : int { PGen = 0, QGen = 1, V = 2, Theta = 3 };

constexpr int state_index(StateBlock block, int bus, int n_buses) {
  return static_cast<int>(block) * n_buses + bus;
}

/// Operating point of an N-bus network plus a per-entry free/fixed mask over
/// the flattened 4N vector. Fixed entries are excluded from every rank and
/// stationarity computation.
struct SystemState {
  Vec p_gen;
  Vec q_gen;
  Vec v;
  Vec theta;
  std::vector<bool> free_mask;

  int size() const { return static_cast<int>(v.size()); }

  /// Flat profile: zero generation, v = 1, theta = 0, everything free.
  static SystemState flat(int n_buses);
  static SystemState from_flat(const Vec& x, std::vector<bool> mask);

  Vec flatten() const;
  std::vector<int> free_indices() const;
  void check_dimensions(int n_buses) const;

  bool operator==(const SystemState&) const = default;
};

/// Slack bus v and theta, and PV bus v, are fixed; all other entries are free.
std::vector<bool> mask_from_bus_types(const Network& net);

/// Power injections S = diag(u) (Y u)^* in polar form.
struct Injections {
  Vec p;
  Vec q;
};

Injections injections(const AdmittanceMatrix& y, const Vec& v, const Vec& theta);

/// F(x) = [p^G - p^L - Re{S}; q^G - q^L - Im{S}] in R^{2N}.
Vec pf_residual(const Network& net, const AdmittanceMatrix& y, const SystemState& x);

/// Analytic dF/dx, 2N x 4N, columns in flattened state order.
Mat pf_jacobian(const Network& net, const AdmittanceMatrix& y, const SystemState& x);

/// What a power-flow solve holds fixed. Per bus: generation p at PV/PQ buses,
/// generation q at PQ buses, v at slack/PV buses, theta at the slack.
struct Setpoints {
  Vec p_gen;
  Vec q_gen;
  Vec v;
  Vec theta;

  static Setpoints from_network(const Network& net);
};

struct NewtonOptions {
  double tol = 1e-10;
  int max_iter = 50;
  // Below this reciprocal condition estimate the Newton matrix is treated as singular.
  double singular_rcond = 1e-14;
  std::optional<SystemState> warm_start;
};

struct NewtonResult {
  SystemState state;
  int iterations = 0;
  std::vector<double> mismatch_trace;
};

/// Plain Newton-Raphson on the reduced mismatch system (theta at non-slack
/// buses, v at PQ buses). Slack p/q and PV q are then set so that F = 0.
/// The returned state carries the bus-type mask.
///
/// Throws NonConvergenceError or SingularJacobianError (both PowerFlowError)
/// carrying the mismatch trace.
NewtonResult newton_pf(const Network& net, const AdmittanceMatrix& y, const Setpoints& sp,
                       const NewtonOptions& opts = {});

}  // namespace cqa
