#pragma once

#include "cqa/linalg.hpp"
#include "cqa/netmodel.hpp"
#include "cqa/powerflow.hpp"

#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace cqa {

// ---------------------------------------------------------------------------
// Constraint catalog. Every kind is evaluated over the flattened 4N state and
// returns a gradient of length 4N. Inequalities use the g(x) <= 0 convention.
// ---------------------------------------------------------------------------

/// x[index] - bound <= 0. A bound of +inf is never active.
struct BoxUpper {
  int index = 0;
  double bound = 0.0;
};

/// bound - x[index] <= 0.
struct BoxLower {
  int index = 0;
  double bound = 0.0;
};

struct LinearTerm {
  int index = 0;
  double coef = 0.0;
};

/// sum_i a_i x_i + offset = 0.
struct LinearEq {
  std::vector<LinearTerm> terms;
  double offset = 0.0;
};

/// (p^G_bus)^2 + (q^G_bus)^2 - s_max_sq <= 0.
struct ApparentPower {
  int bus = 0;
  double s_max_sq = 0.0;
};

/// Exponential (square-root) load with fixed power factor:
///   q^G_bus + alpha (p^G_bus - p_load - sqrt(v_bus)) = 0,  defined for v_bus > 0.
struct ExpLoadEq {
  int bus = 0;
  double alpha = 0.0;
  double p_load = 0.0;
};

using OperationalConstraint = std::variant<BoxUpper, BoxLower, LinearEq, ApparentPower, ExpLoadEq>;

enum class ConstraintKind { BoxUpper, BoxLower, LinearEq, ApparentPower, ExpLoadEq };

ConstraintKind kind_of(const OperationalConstraint& c);
std::string to_string(ConstraintKind k);
ConstraintKind constraint_kind_from_string(const std::string& s);
bool is_equality(const OperationalConstraint& c);

/// Human-readable label such as "box_upper[v2]" (bus numbers 0-based).
std::string describe(const OperationalConstraint& c, int n_buses);

/// Throws DomainError for ExpLoadEq at v <= 0, DimensionError for bad indices.
double constraint_value(const OperationalConstraint& c, const Vec& x);
Vec constraint_gradient(const OperationalConstraint& c, const Vec& x);

/// Checks indices against a 4N state; throws InvariantError.
void validate_constraint(const OperationalConstraint& c, int n_buses);

/// Power-flow equalities plus operational equalities h and inequalities g.
class ConstraintSystem {
 public:
  ConstraintSystem(Network net, std::vector<OperationalConstraint> constraints, Tolerances tol = {});

  const Network& network() const { return net_; }
  const AdmittanceMatrix& ybus() const { return ybus_; }
  const std::vector<OperationalConstraint>& equalities() const { return eqs_; }
  const std::vector<OperationalConstraint>& inequalities() const { return ineqs_; }
  const Tolerances& tolerances() const { return tol_; }
  int n_buses() const { return net_.size(); }
  int n_state() const { return 4 * net_.size(); }

  /// Same constraints on a different network (e.g. after a parameter perturbation).
  ConstraintSystem with_network(Network net) const;
  ConstraintSystem with_tolerances(Tolerances tol) const;

 private:
  Network net_;
  AdmittanceMatrix ybus_;
  std::vector<OperationalConstraint> eqs_;
  std::vector<OperationalConstraint> ineqs_;
  Tolerances tol_;
};

struct Evaluation {
  Vec pf;  // F(x)
  Vec h;
  Vec g;
  double pf_inf = 0.0;
  double h_inf = 0.0;
  double g_max = -std::numeric_limits<double>::infinity();
  bool feasible = false;
};

/// feasible <=> |F|_inf <= pf_tol, |h|_inf <= eq_tol, max g <= act_tol.
Evaluation evaluate(const ConstraintSystem& cs, const SystemState& x);

struct ActiveSet {
  std::vector<int> indices;  // into cs.inequalities(), ascending
  Vec g_values;              // all inequalities

  /// Deterministic face label, a pure function of `indices`: "{}" or "{0,3}".
  std::string face_label() const;
};

/// j active <=> g_j(x) >= -act_tol. Throws InfeasibleError if x is infeasible.
ActiveSet active_set(const ConstraintSystem& cs, const SystemState& x);

/// Active indices by the tolerance rule alone, without a feasibility check.
std::vector<int> active_indices(std::span<const OperationalConstraint> g_ops, const Vec& x, double act_tol);

/// Rows [grad h; grad g_J] of the operational constraints over the given columns.
Mat operational_jacobian(std::span<const OperationalConstraint> h_ops, std::span<const OperationalConstraint> g_ops,
                         std::span<const int> active, const Vec& x, std::span<const int> cols);

struct FixedLicqResult {
  bool holds = false;
  int rank = 0;
  int rows = 0;
  double sigma_min = 0.0;
  std::vector<int> active;
};

/// LICQ of the operational constraints alone (power flow excluded): rank of
/// [grad h; grad g_J] over the free entries of x equals its row count.
FixedLicqResult fixed_licq_check(std::span<const OperationalConstraint> h_ops,
                                 std::span<const OperationalConstraint> g_ops, const SystemState& x,
                                 const Tolerances& tol = {});

}  // namespace cqa
