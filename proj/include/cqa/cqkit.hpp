#pragma once

#include "cqa/constraints.hpp"
#include "cqa/linalg.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace cqa {

/// Stacked gradients of every constraint that is active at a feasible point:
/// the 2N power-flow rows, the I operational equalities, then the active
/// inequalities, restricted to the free state entries.
struct ActiveStack {
  Mat jacobian;
  int n_pf = 0;
  int n_eq = 0;
  int n_active = 0;
  std::vector<int> active;        // indices into cs.inequalities()
  std::vector<int> free_indices;  // column -> flattened state index
  std::vector<std::string> row_labels;
  std::string face;

  int rows() const { return static_cast<int>(jacobian.rows()); }
};

/// Throws InfeasibleError if x is not feasible.
ActiveStack active_stack(const ConstraintSystem& cs, const SystemState& x);

struct CQReport {
  ActiveStack stack;
  int rows = 0;
  int free_cols = 0;
  int rank = 0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  double rank_tol = 0.0;
  bool licq_holds = false;
  Vec singular_values;

  const Mat& active_jacobian() const { return stack.jacobian; }
  const std::string& face() const { return stack.face; }
};

/// LICQ at a feasible point: numerical rank of the active stack equals its row count.
CQReport licq_check(const ConstraintSystem& cs, const SystemState& x);

/// Separable quadratic cost f(x) = sum_i (c2_i x_i^2 / 2 + c1_i x_i).
struct CostSpec {
  Vec c2;
  Vec c1;

  static CostSpec zero(int n_state);
  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  CostSpec scaled(double factor) const;
};

enum class Classification { None, Unique, Ray, Family };

std::string to_string(Classification c);

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool empty() const { return lo > hi; }
  bool bounded_below() const { return std::isfinite(lo); }
  bool bounded_above() const { return std::isfinite(hi); }
};

/// Solution set of the first-order conditions
///   grad f + kappa^T grad F + lambda^T grad h + mu^T grad g_J = 0,  mu >= 0,
/// with multipliers of inactive inequalities structurally zero.
///
/// For a one-dimensional family the solution set is particular + zeta * direction
/// with zeta in `zeta`. When the sign constraints bound zeta on one side the
/// family is re-anchored so that zeta starts at 0 and `particular` is the vertex.
struct MultiplierSet {
  Classification classification = Classification::None;
  int family_dim = 0;
  double residual = 0.0;  // || A^T y0 + grad f ||_2 of the least-squares solution

  Vec particular;  // stacked [kappa; lambda; mu]
  Vec kappa;
  Vec lambda;
  Vec mu;
  Mat nullspace_basis;  // columns span {y : A^T y = 0}

  Vec ray_direction;  // unit vector, nullity 1 only
  Interval zeta;      // admissible zeta for mu >= 0, nullity 1 only
  std::string ray_shape;  // line | ray | segment | point | empty, nullity 1 only

  /// Range of each stacked multiplier over the sign-feasible solution set.
  /// Filled for UNIQUE and RAY; empty for NONE and FAMILY.
  std::vector<Interval> component_ranges;

  /// Whether some solution satisfies mu >= 0. Unset when undecided
  /// (NONE, or a family of dimension >= 2 whose particular solution violates it).
  std::optional<bool> sign_feasible;

  int n_pf = 0;
  int n_eq = 0;
  int n_active = 0;
};

/// Classifies the multipliers for a given stack A (rows = constraints) and cost gradient.
MultiplierSet solve_multipliers(const Mat& a, const Vec& grad_f, int n_pf, int n_eq, int n_active,
                                const Tolerances& tol);

/// KKT multipliers at a feasible point. Throws InfeasibleError / DimensionError.
MultiplierSet kkt_solve(const ConstraintSystem& cs, const SystemState& x, const CostSpec& cost);

/// || grad f + A^T y ||_2 over the free entries, A the active stack at x.
double kkt_residual(const ConstraintSystem& cs, const SystemState& x, const CostSpec& cost, const Vec& y);

/// Local coordinates on the power-flow manifold: generation entries are
/// eliminated through F(x) = 0 (possible because dF/d(p^G, q^G) is the
/// identity), leaving the free v and theta entries as coordinates.
/// `basis` maps reduced-coordinate displacements to free-entry displacements.
struct ReducedView {
  Mat basis;                      // n_free x n_reduced
  std::vector<int> coordinates;   // flattened state indices of the reduced coordinates
  std::vector<int> free_indices;  // flattened state indices of the rows of `basis`
};

/// Requires every p^G and q^G entry to be free; throws InvariantError otherwise.
ReducedView voltage_coordinates(const ConstraintSystem& cs, const SystemState& x);

/// fixed_licq_check on the operational constraints expressed in reduced coordinates.
FixedLicqResult fixed_licq_check_reduced(const ConstraintSystem& cs, const SystemState& x);

/// KKT analysis of the operational constraints in reduced coordinates (power
/// flow eliminated, so kappa is empty). x must be feasible.
MultiplierSet kkt_solve_reduced(const ConstraintSystem& cs, const SystemState& x, const CostSpec& cost);

/// Operational stack [grad h; grad g_J] * basis in reduced coordinates.
Mat reduced_operational_jacobian(const ConstraintSystem& cs, const SystemState& x, const ReducedView& view,
                                 const std::vector<int>& active);

}  // namespace cqa
