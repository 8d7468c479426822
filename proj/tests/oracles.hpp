#pragma once

// Reference computations that share no code with the library: complex
// arithmetic straight from the admittance and injection definitions, and
// central finite differences.

#include "cqa/netmodel.hpp"
#include "cqa/powerflow.hpp"

#include <complex>
#include <functional>
#include <vector>

namespace oracle {

using cqa::Mat;
using cqa::Vec;
using cplx = std::complex<double>;
using CMat = std::vector<std::vector<cplx>>;

inline CMat ybus(const cqa::Network& net) {
  const auto n = static_cast<std::size_t>(net.size());
  CMat y(n, std::vector<cplx>(n, 0.0));
  for (const auto& b : net.buses()) y[static_cast<std::size_t>(b.id)][static_cast<std::size_t>(b.id)] += cplx(b.g_shunt, b.b_shunt);
  for (const auto& l : net.lines()) {
    const auto k = static_cast<std::size_t>(l.from);
    const auto m = static_cast<std::size_t>(l.to);
    const cplx ys(l.g_series, l.b_series);
    const cplx ysh(l.g_shunt, l.b_shunt);
    y[k][k] += ys + 0.5 * ysh;
    y[m][m] += ys + 0.5 * ysh;
    y[k][m] -= ys;
    y[m][k] -= ys;
  }
  return y;
}

// F = [pG - pL - Re{u .* conj(Y u)}; qG - qL - Im{...}]
inline Vec pf_residual(const cqa::Network& net, const Vec& x) {
  const int n = net.size();
  const CMat y = ybus(net);
  std::vector<cplx> u(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) u[static_cast<std::size_t>(k)] = std::polar(x(2 * n + k), x(3 * n + k));
  Vec f(2 * n);
  for (int k = 0; k < n; ++k) {
    cplx i = 0.0;
    for (int l = 0; l < n; ++l) i += y[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)] * u[static_cast<std::size_t>(l)];
    const cplx s = u[static_cast<std::size_t>(k)] * std::conj(i);
    const auto& b = net.bus(k);
    f(k) = x(k) - b.p_load - s.real();
    f(n + k) = x(n + k) - b.q_load - s.imag();
  }
  return f;
}

inline Mat central_jacobian(const std::function<Vec(const Vec&)>& fn, const Vec& x, double h = 1e-6) {
  const Vec f0 = fn(x);
  Mat j(f0.size(), x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    Vec xp = x;
    Vec xm = x;
    xp(c) += h;
    xm(c) -= h;
    j.col(c) = (fn(xp) - fn(xm)) / (2.0 * h);
  }
  return j;
}

inline double central_derivative(const std::function<double(const Vec&)>& fn, const Vec& x, Eigen::Index c,
                                 double h = 1e-6) {
  Vec xp = x;
  Vec xm = x;
  xp(c) += h;
  xm(c) -= h;
  return (fn(xp) - fn(xm)) / (2.0 * h);
}

// max_ij |a_ij - b_ij| / max(1, |a_ij|)
inline double max_rel_error(const Mat& analytic, const Mat& reference) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
    for (Eigen::Index j = 0; j < analytic.cols(); ++j) {
      const double d = std::abs(analytic(i, j) - reference(i, j)) / std::max(1.0, std::abs(analytic(i, j)));
      worst = std::max(worst, d);
    }
  }
  return worst;
}

// Least-squares distance of g from the row space of a, via Gram-Schmidt on the rows.
inline double distance_from_row_space(const Mat& a, const Vec& g) {
  std::vector<Vec> basis;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    Vec r = a.row(i).transpose();
    for (const auto& q : basis) r -= q.dot(r) * q;
    if (r.norm() > 1e-12 * std::max(1.0, a.row(i).norm())) basis.push_back(r.normalized());
  }
  Vec rem = g;
  for (const auto& q : basis) rem -= q.dot(rem) * q;
  return rem.norm();
}

}  // namespace oracle
