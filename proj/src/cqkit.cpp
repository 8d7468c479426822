#include "cqa/cqkit.hpp"

#include "cqa/errors.hpp"

#include <algorithm>
#include <cmath>

namespace cqa {

namespace {

std::string pf_row_label(int row, int n) {
  return (row < n ? "F_p" : "F_q") + std::to_string(row % n);
}

void require_feasible(const ConstraintSystem& cs, const SystemState& x, const char* what) {
  const Evaluation e = evaluate(cs, x);
  if (!e.feasible) {
    throw InfeasibleError(std::string(what) + " requires a feasible point (|F|_inf=" + std::to_string(e.pf_inf) +
                          ", |h|_inf=" + std::to_string(e.h_inf) + ", max g=" + std::to_string(e.g_max) + ")");
  }
}

// Below this magnitude a component of the (unit) null direction is treated as zero.
constexpr double kDirectionZero = 1e-12;

}  // namespace

ActiveStack active_stack(const ConstraintSystem& cs, const SystemState& x) {
  const int n = cs.n_buses();
  x.check_dimensions(n);
  const ActiveSet as = active_set(cs, x);  // throws on infeasible x
  const Vec flat = x.flatten();

  ActiveStack st;
  st.free_indices = x.free_indices();
  st.active = as.indices;
  st.face = as.face_label();
  st.n_pf = 2 * n;
  st.n_eq = static_cast<int>(cs.equalities().size());
  st.n_active = static_cast<int>(as.indices.size());

  const Mat jf = select_columns(pf_jacobian(cs.network(), cs.ybus(), x), st.free_indices);
  const Mat jo = operational_jacobian(cs.equalities(), cs.inequalities(), st.active, flat, st.free_indices);
  st.jacobian.resize(jf.rows() + jo.rows(), static_cast<Eigen::Index>(st.free_indices.size()));
  st.jacobian << jf, jo;

  for (int r = 0; r < 2 * n; ++r) st.row_labels.push_back(pf_row_label(r, n));
  for (const auto& c : cs.equalities()) st.row_labels.push_back(describe(c, n));
  for (int j : st.active) st.row_labels.push_back(describe(cs.inequalities()[static_cast<std::size_t>(j)], n));
  return st;
}

CQReport licq_check(const ConstraintSystem& cs, const SystemState& x) {
  CQReport r;
  r.stack = active_stack(cs, x);
  const RankInfo info = numerical_rank(r.stack.jacobian, cs.tolerances().rank_tol_scale);
  r.rows = info.rows;
  r.free_cols = info.cols;
  r.rank = info.rank;
  r.sigma_min = info.sigma_min;
  r.sigma_max = info.sigma_max;
  r.rank_tol = info.rank_tol;
  r.singular_values = info.singular_values;
  r.licq_holds = info.full_row_rank();
  return r;
}

CostSpec CostSpec::zero(int n_state) { return CostSpec{Vec::Zero(n_state), Vec::Zero(n_state)}; }

double CostSpec::value(const Vec& x) const {
  if (x.size() != c1.size() || x.size() != c2.size()) throw DimensionError("cost is not dimensioned for the state");
  return (0.5 * c2.array() * x.array().square() + c1.array() * x.array()).sum();
}

Vec CostSpec::gradient(const Vec& x) const {
  if (x.size() != c1.size() || x.size() != c2.size()) throw DimensionError("cost is not dimensioned for the state");
  return (c2.array() * x.array() + c1.array()).matrix();
}

CostSpec CostSpec::scaled(double factor) const { return CostSpec{c2 * factor, c1 * factor}; }

std::string to_string(Classification c) {
  switch (c) {
    case Classification::None: return "NONE";
    case Classification::Unique: return "UNIQUE";
    case Classification::Ray: return "RAY";
    case Classification::Family: return "FAMILY";
  }
  return "?";
}

MultiplierSet solve_multipliers(const Mat& a, const Vec& grad_f, int n_pf, int n_eq, int n_active,
                                const Tolerances& tol) {
  const auto m = a.rows();
  if (grad_f.size() != a.cols()) throw DimensionError("cost gradient does not match the constraint stack");
  if (n_pf + n_eq + n_active != m) throw DimensionError("multiplier layout does not match the stack rows");

  MultiplierSet ms;
  ms.n_pf = n_pf;
  ms.n_eq = n_eq;
  ms.n_active = n_active;

  const Svd svd = full_svd(a, tol.rank_tol_scale);
  Vec y0 = pinv_solve_transposed(svd, -grad_f);
  ms.residual = (a.transpose() * y0 + grad_f).norm();
  ms.nullspace_basis = left_null_space(svd);
  const auto nullity = ms.nullspace_basis.cols();
  const auto mu_begin = static_cast<Eigen::Index>(n_pf + n_eq);

  auto finish = [&](const Vec& y) {
    ms.particular = y;
    ms.kappa = y.segment(0, n_pf);
    ms.lambda = y.segment(n_pf, n_eq);
    ms.mu = y.segment(mu_begin, n_active);
  };

  if (ms.residual > tol.stat_tol) {
    ms.classification = Classification::None;
    finish(y0);
    return ms;
  }

  const double sign_tol = tol.stat_tol;
  if (nullity == 0) {
    ms.classification = Classification::Unique;
    finish(y0);
    ms.sign_feasible = n_active == 0 || ms.mu.minCoeff() >= -sign_tol;
    for (Eigen::Index i = 0; i < m; ++i) ms.component_ranges.push_back({y0(i), y0(i)});
    return ms;
  }

  if (nullity >= 2) {
    ms.classification = Classification::Family;
    ms.family_dim = static_cast<int>(nullity);
    finish(y0);
    if (n_active == 0 || ms.mu.minCoeff() >= -sign_tol) ms.sign_feasible = true;
    return ms;
  }

  // One-dimensional family y0 + zeta * w; intersect with mu >= 0.
  ms.classification = Classification::Ray;
  ms.family_dim = 1;
  Vec w = ms.nullspace_basis.col(0);
  Interval z;
  bool empty = false;
  for (Eigen::Index j = mu_begin; j < m; ++j) {
    const double base = y0(j);
    const double slope = w(j);
    if (std::abs(slope) <= kDirectionZero) {
      if (base < -sign_tol) empty = true;
    } else if (slope > 0) {
      z.lo = std::max(z.lo, -base / slope);
    } else {
      z.hi = std::min(z.hi, -base / slope);
    }
  }
  if (!empty && z.lo > z.hi) {
    // Tolerate a degenerate point interval split by rounding.
    empty = z.lo - z.hi > sign_tol;
    if (!empty) z.hi = z.lo;
  }

  Vec anchor = y0;
  if (empty) {
    ms.ray_shape = "empty";
    ms.sign_feasible = false;
    z = Interval{1.0, 0.0};
  } else if (z.bounded_below()) {
    anchor = y0 + z.lo * w;
    z = Interval{0.0, z.hi - z.lo};
    ms.ray_shape = !z.bounded_above() ? "ray" : (z.hi > 0.0 ? "segment" : "point");
    ms.sign_feasible = true;
  } else if (z.bounded_above()) {
    anchor = y0 + z.hi * w;
    w = -w;
    z = Interval{0.0, std::numeric_limits<double>::infinity()};
    ms.ray_shape = "ray";
    ms.sign_feasible = true;
  } else {
    Eigen::Index imax = 0;
    w.cwiseAbs().maxCoeff(&imax);
    if (w(imax) < 0) w = -w;
    ms.ray_shape = "line";
    ms.sign_feasible = true;
  }
  ms.ray_direction = w;
  ms.zeta = z;
  finish(anchor);

  if (!empty) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const double slope = std::abs(w(i)) <= kDirectionZero ? 0.0 : w(i);
      Interval r;
      if (slope == 0.0) {
        r = {anchor(i), anchor(i)};
      } else {
        const double a1 = anchor(i) + slope * z.lo;
        const double a2 = std::isfinite(z.hi) ? anchor(i) + slope * z.hi
                                              : (slope > 0 ? std::numeric_limits<double>::infinity()
                                                           : -std::numeric_limits<double>::infinity());
        r = {std::min(a1, a2), std::max(a1, a2)};
        if (!z.bounded_below()) r = Interval{};
      }
      ms.component_ranges.push_back(r);
    }
  }
  return ms;
}

MultiplierSet kkt_solve(const ConstraintSystem& cs, const SystemState& x, const CostSpec& cost) {
  const ActiveStack st = active_stack(cs, x);
  const Vec flat = x.flatten();
  const Vec grad = select_entries(cost.gradient(flat), st.free_indices);
  return solve_multipliers(st.jacobian, grad, st.n_pf, st.n_eq, st.n_active, cs.tolerances());
}

double kkt_residual(const ConstraintSystem& cs, const SystemState& x, const CostSpec& cost, const Vec& y) {
  const ActiveStack st = active_stack(cs, x);
  if (y.size() != st.jacobian.rows()) {
    throw DimensionError("multiplier vector has " + std::to_string(y.size()) + " entries, active stack has " +
                         std::to_string(st.jacobian.rows()) + " rows");
  }
  const Vec grad = select_entries(cost.gradient(x.flatten()), st.free_indices);
  return (grad + st.jacobian.transpose() * y).norm();
}

ReducedView voltage_coordinates(const ConstraintSystem& cs, const SystemState& x) {
  const int n = cs.n_buses();
  x.check_dimensions(n);
  for (int i = 0; i < 2 * n; ++i) {
    if (!x.free_mask[static_cast<std::size_t>(i)]) {
      throw InvariantError("reduced coordinates need every generation entry free (entry " + std::to_string(i) +
                           " is fixed)");
    }
  }
  ReducedView view;
  view.free_indices = x.free_indices();
  for (int idx : view.free_indices) {
    if (idx >= 2 * n) view.coordinates.push_back(idx);
  }
  const Mat jac = pf_jacobian(cs.network(), cs.ybus(), x);
  const auto nf = static_cast<Eigen::Index>(view.free_indices.size());
  const auto nr = static_cast<Eigen::Index>(view.coordinates.size());
  view.basis = Mat::Zero(nf, nr);
  for (Eigen::Index c = 0; c < nr; ++c) {
    const int coord = view.coordinates[static_cast<std::size_t>(c)];
    for (Eigen::Index r = 0; r < nf; ++r) {
      const int idx = view.free_indices[static_cast<std::size_t>(r)];
      if (idx < 2 * n) {
        // dF = d(pq) + J_{v,theta} d(v,theta) = 0
        view.basis(r, c) = -jac(idx, coord);
      } else if (idx == coord) {
        view.basis(r, c) = 1.0;
      }
    }
  }
  return view;
}

Mat reduced_operational_jacobian(const ConstraintSystem& cs, const SystemState& x, const ReducedView& view,
                                 const std::vector<int>& active) {
  const Mat full = operational_jacobian(cs.equalities(), cs.inequalities(), active, x.flatten(), view.free_indices);
  return full * view.basis;
}

FixedLicqResult fixed_licq_check_reduced(const ConstraintSystem& cs, const SystemState& x) {
  const ReducedView view = voltage_coordinates(cs, x);
  FixedLicqResult out;
  out.active = active_indices(cs.inequalities(), x.flatten(), cs.tolerances().act_tol);
  const RankInfo info =
      numerical_rank(reduced_operational_jacobian(cs, x, view, out.active), cs.tolerances().rank_tol_scale);
  out.rows = info.rows;
  out.rank = info.rank;
  out.sigma_min = info.sigma_min;
  out.holds = info.full_row_rank();
  return out;
}

MultiplierSet kkt_solve_reduced(const ConstraintSystem& cs, const SystemState& x, const CostSpec& cost) {
  require_feasible(cs, x, "reduced KKT analysis");
  const ReducedView view = voltage_coordinates(cs, x);
  const std::vector<int> active = active_indices(cs.inequalities(), x.flatten(), cs.tolerances().act_tol);
  const Mat a = reduced_operational_jacobian(cs, x, view, active);
  const Vec grad = view.basis.transpose() * select_entries(cost.gradient(x.flatten()), view.free_indices);
  return solve_multipliers(a, grad, 0, static_cast<int>(cs.equalities().size()), static_cast<int>(active.size()),
                           cs.tolerances());
}

}  // namespace cqa
