#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace cqa {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kDefaultUlpScale = 0x1p-52;

/// Analysis tolerances shared by every module. All must be strictly positive.
struct Tolerances {
  double act_tol = 1e-6;          // inequality counts as active when g >= -act_tol
  double eq_tol = 1e-8;           // operational equality feasibility
  double pf_tol = 1e-10;          // power-flow mismatch (infinity norm)
  double stat_tol = 1e-8;         // KKT stationarity residual (2-norm)
  double rank_tol_scale = kDefaultUlpScale;

  void validate() const;
};

/// Singular-value based numerical rank of a (rows x cols) matrix.
///
/// rank_tol = sigma_max * max(rows, cols) * ulp_scale; the rank counts the
/// singular values strictly above it. `sigma_min` is the rows-th singular
/// value when rows <= cols, i.e. the margin by which the rows are linearly
/// independent; it is 0 when rows > cols and +inf for an empty row set.
struct RankInfo {
  int rows = 0;
  int cols = 0;
  int rank = 0;
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  double rank_tol = 0.0;
  Vec singular_values;

  bool full_row_rank() const { return rank == rows; }
};

RankInfo numerical_rank(const Mat& a, double ulp_scale = kDefaultUlpScale);

/// Thin wrapper around a full SVD, used for least-squares solves and null spaces.
struct Svd {
  Mat u;
  Vec s;
  Mat v;
  double tol = 0.0;
  int rank = 0;
};

Svd full_svd(const Mat& a, double ulp_scale = kDefaultUlpScale);

/// Minimum-norm least-squares solution of a * x = b with singular values at or
/// below the rank tolerance truncated.
Vec pinv_solve(const Svd& svd, const Vec& b);

/// Minimum-norm least-squares solution of a^T * y = r, reusing the SVD of a.
Vec pinv_solve_transposed(const Svd& svd, const Vec& r);

/// Orthonormal basis (as columns) of the left null space of a, i.e. {y : a^T y = 0}.
Mat left_null_space(const Svd& svd);

/// Columns of `a` selected by `cols`, in order.
Mat select_columns(const Mat& a, std::span<const int> cols);

/// Entries of `x` selected by `idx`, in order.
Vec select_entries(const Vec& x, std::span<const int> idx);

}  // namespace cqa
