#include "cqa/powerflow.hpp"

#include "cqa/errors.hpp"

#include <cmath>
#include <string>

namespace cqa {

SystemState SystemState::flat(int n_buses) {
  SystemState s;
  s.p_gen = Vec::Zero(n_buses);
  s.q_gen = Vec::Zero(n_buses);
  s.v = Vec::Ones(n_buses);
  s.theta = Vec::Zero(n_buses);
  s.free_mask.assign(static_cast<std::size_t>(4 * n_buses), true);
  return s;
}

SystemState SystemState::from_flat(const Vec& x, std::vector<bool> mask) {
  if (x.size() % 4 != 0) throw DimensionError("flattened state length must be a multiple of 4");
  const auto n = x.size() / 4;
  if (mask.empty()) mask.assign(static_cast<std::size_t>(x.size()), true);
  if (static_cast<Eigen::Index>(mask.size()) != x.size()) {
    throw DimensionError("free mask length does not match the state length");
  }
  SystemState s;
  s.p_gen = x.segment(0, n);
  s.q_gen = x.segment(n, n);
  s.v = x.segment(2 * n, n);
  s.theta = x.segment(3 * n, n);
  s.free_mask = std::move(mask);
  return s;
}

Vec SystemState::flatten() const {
  const auto n = v.size();
  Vec x(4 * n);
  x << p_gen, q_gen, v, theta;
  return x;
}

std::vector<int> SystemState::free_indices() const {
  std::vector<int> idx;
  for (std::size_t i = 0; i < free_mask.size(); ++i) {
    if (free_mask[i]) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

void SystemState::check_dimensions(int n_buses) const {
  if (p_gen.size() != n_buses || q_gen.size() != n_buses || v.size() != n_buses || theta.size() != n_buses) {
    throw DimensionError("state is not dimensioned for a " + std::to_string(n_buses) + "-bus network");
  }
  if (free_mask.size() != static_cast<std::size_t>(4 * n_buses)) {
    throw DimensionError("free mask must have 4N entries");
  }
}

std::vector<bool> mask_from_bus_types(const Network& net) {
  const int n = net.size();
  std::vector<bool> mask(static_cast<std::size_t>(4 * n), true);
  for (const Bus& b : net.buses()) {
    if (b.type == BusType::Slack || b.type == BusType::PV) {
      mask[static_cast<std::size_t>(state_index(StateBlock::V, b.id, n))] = false;
    }
    if (b.type == BusType::Slack) {
      mask[static_cast<std::size_t>(state_index(StateBlock::Theta, b.id, n))] = false;
    }
  }
  return mask;
}

// The injections are evaluated in the equivalent "Laplacian" form
//   P_k = v_k^2 s_k + sum_{l != k} [G_kl (v_k v_l cos t_kl - v_k^2) + B_kl v_k v_l sin t_kl]
//   Q_k = -v_k^2 r_k + sum_{l != k} [G_kl v_k v_l sin t_kl - B_kl (v_k v_l cos t_kl - v_k^2)]
// with s + jr = Y*1 the lumped shunts, so a flat profile gives exact zeros on
// shunt-free networks.
Injections injections(const AdmittanceMatrix& y, const Vec& v, const Vec& theta) {
  const int n = y.size();
  if (v.size() != n || theta.size() != n) throw DimensionError("voltage vectors do not match Y");
  const Vec sg = y.row_sum_g();
  const Vec sb = y.row_sum_b();
  Injections s{Vec::Zero(n), Vec::Zero(n)};
  for (int k = 0; k < n; ++k) {
    const double vk2 = v(k) * v(k);
    double p = vk2 * sg(k);
    double q = -vk2 * sb(k);
    for (int l = 0; l < n; ++l) {
      if (l == k) continue;
      const double g = y.g(k, l);
      const double b = y.b(k, l);
      if (g == 0.0 && b == 0.0) continue;
      const double t = theta(k) - theta(l);
      const double vv = v(k) * v(l);
      const double c = vv * std::cos(t);
      const double sn = vv * std::sin(t);
      p += g * (c - vk2) + b * sn;
      q += g * sn - b * (c - vk2);
    }
    s.p(k) = p;
    s.q(k) = q;
  }
  return s;
}

Vec pf_residual(const Network& net, const AdmittanceMatrix& y, const SystemState& x) {
  const int n = net.size();
  x.check_dimensions(n);
  if (y.size() != n) throw DimensionError("admittance matrix does not match the network");
  const Injections s = injections(y, x.v, x.theta);
  Vec f(2 * n);
  for (int k = 0; k < n; ++k) {
    const Bus& b = net.bus(k);
    f(k) = x.p_gen(k) - b.p_load - s.p(k);
    f(n + k) = x.q_gen(k) - b.q_load - s.q(k);
  }
  return f;
}

Mat pf_jacobian(const Network& net, const AdmittanceMatrix& y, const SystemState& x) {
  const int n = net.size();
  x.check_dimensions(n);
  if (y.size() != n) throw DimensionError("admittance matrix does not match the network");
  const Vec sg = y.row_sum_g();
  const Vec sb = y.row_sum_b();
  const auto& v = x.v;
  const auto& th = x.theta;

  Mat jac = Mat::Zero(2 * n, 4 * n);
  jac.block(0, 0, n, n).setIdentity();
  jac.block(n, n, n, n).setIdentity();

  const int cv = 2 * n;
  const int ct = 3 * n;
  // Accumulate dP/dx and dQ/dx, then negate into F rows.
  for (int k = 0; k < n; ++k) {
    double dp_dvk = 2.0 * v(k) * sg(k);
    double dq_dvk = -2.0 * v(k) * sb(k);
    double dp_dtk = 0.0;
    double dq_dtk = 0.0;
    for (int l = 0; l < n; ++l) {
      if (l == k) continue;
      const double g = y.g(k, l);
      const double b = y.b(k, l);
      if (g == 0.0 && b == 0.0) continue;
      const double t = th(k) - th(l);
      const double ct_ = std::cos(t);
      const double st = std::sin(t);
      const double vv = v(k) * v(l);

      dp_dvk += g * (v(l) * ct_ - 2.0 * v(k)) + b * v(l) * st;
      dq_dvk += g * v(l) * st - b * (v(l) * ct_ - 2.0 * v(k));
      const double dp_dvl = v(k) * (g * ct_ + b * st);
      const double dq_dvl = v(k) * (g * st - b * ct_);

      dp_dtk += vv * (-g * st + b * ct_);
      dq_dtk += vv * (g * ct_ + b * st);
      const double dp_dtl = vv * (g * st - b * ct_);
      const double dq_dtl = -vv * (g * ct_ + b * st);

      jac(k, cv + l) = -dp_dvl;
      jac(n + k, cv + l) = -dq_dvl;
      jac(k, ct + l) = -dp_dtl;
      jac(n + k, ct + l) = -dq_dtl;
    }
    jac(k, cv + k) = -dp_dvk;
    jac(n + k, cv + k) = -dq_dvk;
    jac(k, ct + k) = -dp_dtk;
    jac(n + k, ct + k) = -dq_dtk;
  }
  return jac;
}

Setpoints Setpoints::from_network(const Network& net) {
  const int n = net.size();
  Setpoints sp{net.generation_p(), net.generation_q(), Vec::Ones(n), Vec::Zero(n)};
  for (const Bus& b : net.buses()) {
    if (b.type != BusType::PQ) sp.v(b.id) = b.v_setpoint;
    if (b.type == BusType::Slack) sp.theta(b.id) = b.theta_setpoint;
  }
  return sp;
}

NewtonResult newton_pf(const Network& net, const AdmittanceMatrix& y, const Setpoints& sp,
                       const NewtonOptions& opts) {
  const int n = net.size();
  if (sp.p_gen.size() != n || sp.q_gen.size() != n || sp.v.size() != n || sp.theta.size() != n) {
    throw DimensionError("setpoints are not dimensioned for the network");
  }

  SystemState x = SystemState::flat(n);
  x.free_mask = mask_from_bus_types(net);
  x.p_gen = sp.p_gen;
  x.q_gen = sp.q_gen;
  if (opts.warm_start) {
    opts.warm_start->check_dimensions(n);
    x.v = opts.warm_start->v;
    x.theta = opts.warm_start->theta;
  }

  // Unknowns: theta at non-slack buses, v at PQ buses. Equations: P rows at
  // non-slack buses, Q rows at PQ buses.
  std::vector<int> rows;
  std::vector<int> cols;
  for (const Bus& b : net.buses()) {
    if (b.type != BusType::Slack) {
      rows.push_back(b.id);
      cols.push_back(state_index(StateBlock::Theta, b.id, n));
    }
  }
  for (const Bus& b : net.buses()) {
    if (b.type == BusType::PQ) {
      rows.push_back(n + b.id);
      cols.push_back(state_index(StateBlock::V, b.id, n));
    }
  }
  for (const Bus& b : net.buses()) {
    if (b.type != BusType::PQ) x.v(b.id) = sp.v(b.id);
    if (b.type == BusType::Slack) x.theta(b.id) = sp.theta(b.id);
  }

  NewtonResult result;
  const auto m = static_cast<Eigen::Index>(rows.size());
  for (int iter = 0;; ++iter) {
    const Vec f = pf_residual(net, y, x);
    Vec fr(m);
    for (Eigen::Index i = 0; i < m; ++i) fr(i) = f(rows[static_cast<std::size_t>(i)]);
    const double mismatch = m > 0 ? fr.lpNorm<Eigen::Infinity>() : 0.0;
    result.mismatch_trace.push_back(mismatch);
    if (!std::isfinite(mismatch)) {
      throw NonConvergenceError("Newton power flow diverged (non-finite mismatch) after " +
                                    std::to_string(iter) + " iterations",
                                result.mismatch_trace);
    }
    if (mismatch <= opts.tol) {
      result.iterations = iter;
      break;
    }
    if (iter >= opts.max_iter) {
      throw NonConvergenceError("Newton power flow did not converge in " + std::to_string(opts.max_iter) +
                                    " iterations (final mismatch " + std::to_string(mismatch) + ")",
                                result.mismatch_trace);
    }
    const Mat jac = pf_jacobian(net, y, x);
    Mat jr(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        jr(i, j) = jac(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
      }
    }
    Eigen::PartialPivLU<Mat> lu(jr);
    if (!(lu.rcond() > opts.singular_rcond)) {
      throw SingularJacobianError("reduced Newton matrix is numerically singular at iteration " +
                                      std::to_string(iter) +
                                      " (possible voltage-collapse point or LICQ degeneracy)",
                                  result.mismatch_trace);
    }
    const Vec dx = lu.solve(-fr);
    Vec flat = x.flatten();
    for (Eigen::Index j = 0; j < m; ++j) flat(cols[static_cast<std::size_t>(j)]) += dx(j);
    x = SystemState::from_flat(flat, x.free_mask);
  }

  // Balance: slack absorbs P and Q, PV buses absorb Q.
  const Injections s = injections(y, x.v, x.theta);
  for (const Bus& b : net.buses()) {
    if (b.type == BusType::Slack) x.p_gen(b.id) = b.p_load + s.p(b.id);
    if (b.type != BusType::PQ) x.q_gen(b.id) = b.q_load + s.q(b.id);
  }
  const double full = pf_residual(net, y, x).lpNorm<Eigen::Infinity>();
  if (!(full <= opts.tol)) {
    result.mismatch_trace.push_back(full);
    throw NonConvergenceError("power-flow post-check failed: full mismatch " + std::to_string(full),
                              result.mismatch_trace);
  }
  result.state = std::move(x);
  return result;
}

}  // namespace cqa
