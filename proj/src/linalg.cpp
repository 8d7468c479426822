#include "cqa/linalg.hpp"

#include "cqa/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cqa {

void Tolerances::validate() const {
  auto check = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvariantError(std::string("tolerance ") + name + " must be finite and strictly positive");
    }
  };
  check(act_tol, "act_tol");
  check(eq_tol, "eq_tol");
  check(pf_tol, "pf_tol");
  check(stat_tol, "stat_tol");
  check(rank_tol_scale, "rank_tol_scale");
}

Svd full_svd(const Mat& a, double ulp_scale) {
  Svd out;
  const auto rows = a.rows();
  const auto cols = a.cols();
  if (rows == 0 || cols == 0) {
    out.u = Mat::Identity(rows, rows);
    out.v = Mat::Identity(cols, cols);
    out.s = Vec::Zero(0);
    return out;
  }
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  out.u = svd.matrixU();
  out.v = svd.matrixV();
  out.s = svd.singularValues();
  const double smax = out.s.size() > 0 ? out.s(0) : 0.0;
  out.tol = smax * static_cast<double>(std::max(rows, cols)) * ulp_scale;
  out.rank = static_cast<int>((out.s.array() > out.tol).count());
  return out;
}

RankInfo numerical_rank(const Mat& a, double ulp_scale) {
  RankInfo info;
  info.rows = static_cast<int>(a.rows());
  info.cols = static_cast<int>(a.cols());
  if (info.rows == 0) {
    info.sigma_min = std::numeric_limits<double>::infinity();
    return info;
  }
  Svd svd = full_svd(a, ulp_scale);
  info.singular_values = svd.s;
  info.rank = svd.rank;
  info.rank_tol = svd.tol;
  info.sigma_max = svd.s.size() > 0 ? svd.s(0) : 0.0;
  if (info.rows <= info.cols) {
    info.sigma_min = svd.s(info.rows - 1);
  } else {
    info.sigma_min = 0.0;
  }
  return info;
}

Vec pinv_solve(const Svd& svd, const Vec& b) {
  // a = U S V^T  =>  x = V S^+ U^T b
  const auto k = svd.s.size();
  Vec utb = svd.u.leftCols(k).transpose() * b;
  for (Eigen::Index i = 0; i < k; ++i) {
    utb(i) = svd.s(i) > svd.tol ? utb(i) / svd.s(i) : 0.0;
  }
  return svd.v.leftCols(k) * utb;
}

Vec pinv_solve_transposed(const Svd& svd, const Vec& r) {
  // a^T = V S U^T  =>  y = U S^+ V^T r
  const auto k = svd.s.size();
  Vec vtr = svd.v.leftCols(k).transpose() * r;
  for (Eigen::Index i = 0; i < k; ++i) {
    vtr(i) = svd.s(i) > svd.tol ? vtr(i) / svd.s(i) : 0.0;
  }
  return svd.u.leftCols(k) * vtr;
}

Mat left_null_space(const Svd& svd) {
  const auto rows = svd.u.rows();
  const auto dim = rows - svd.rank;
  return svd.u.rightCols(dim);
}

Mat select_columns(const Mat& a, std::span<const int> cols) {
  Mat out(a.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = a.col(cols[j]);
  return out;
}

Vec select_entries(const Vec& x, std::span<const int> idx) {
  Vec out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out(static_cast<Eigen::Index>(j)) = x(idx[j]);
  return out;
}

}  // namespace cqa
