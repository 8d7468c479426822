#include "cqa/constraints.hpp"

#include "cqa/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cqa {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

int buses_of(const Vec& x) {
  if (x.size() % 4 != 0) throw DimensionError("state length must be a multiple of 4");
  return static_cast<int>(x.size() / 4);
}

void check_index(int idx, const Vec& x) {
  if (idx < 0 || idx >= x.size()) throw DimensionError("constraint index " + std::to_string(idx) + " out of range");
}

std::string entry_name(int index, int n) {
  static const char* names[] = {"pg", "qg", "v", "theta"};
  if (n <= 0 || index < 0 || index >= 4 * n) return "x" + std::to_string(index);
  return std::string(names[index / n]) + std::to_string(index % n);
}

}  // namespace

ConstraintKind kind_of(const OperationalConstraint& c) {
  return static_cast<ConstraintKind>(c.index());
}

std::string to_string(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::BoxUpper: return "box_upper";
    case ConstraintKind::BoxLower: return "box_lower";
    case ConstraintKind::LinearEq: return "linear_eq";
    case ConstraintKind::ApparentPower: return "apparent_power";
    case ConstraintKind::ExpLoadEq: return "exp_load_eq";
  }
  return "?";
}

ConstraintKind constraint_kind_from_string(const std::string& s) {
  for (auto k : {ConstraintKind::BoxUpper, ConstraintKind::BoxLower, ConstraintKind::LinearEq,
                 ConstraintKind::ApparentPower, ConstraintKind::ExpLoadEq}) {
    if (to_string(k) == s) return k;
  }
  throw InvariantError("unknown constraint kind '" + s + "'");
}

bool is_equality(const OperationalConstraint& c) {
  return std::holds_alternative<LinearEq>(c) || std::holds_alternative<ExpLoadEq>(c);
}

std::string describe(const OperationalConstraint& c, int n) {
  return std::visit(
      overloaded{
          [&](const BoxUpper& b) { return "box_upper[" + entry_name(b.index, n) + "]"; },
          [&](const BoxLower& b) { return "box_lower[" + entry_name(b.index, n) + "]"; },
          [&](const LinearEq& l) {
            std::ostringstream os;
            os << "linear_eq[";
            for (std::size_t i = 0; i < l.terms.size(); ++i) {
              if (i) os << ",";
              os << entry_name(l.terms[i].index, n);
            }
            os << "]";
            return os.str();
          },
          [&](const ApparentPower& a) { return "apparent_power[bus" + std::to_string(a.bus) + "]"; },
          [&](const ExpLoadEq& e) { return "exp_load_eq[bus" + std::to_string(e.bus) + "]"; },
      },
      c);
}

double constraint_value(const OperationalConstraint& c, const Vec& x) {
  const int n = buses_of(x);
  return std::visit(
      overloaded{
          [&](const BoxUpper& b) {
            check_index(b.index, x);
            return x(b.index) - b.bound;
          },
          [&](const BoxLower& b) {
            check_index(b.index, x);
            return b.bound - x(b.index);
          },
          [&](const LinearEq& l) {
            double s = l.offset;
            for (const auto& t : l.terms) {
              check_index(t.index, x);
              s += t.coef * x(t.index);
            }
            return s;
          },
          [&](const ApparentPower& a) {
            const double p = x(state_index(StateBlock::PGen, a.bus, n));
            const double q = x(state_index(StateBlock::QGen, a.bus, n));
            return p * p + q * q - a.s_max_sq;
          },
          [&](const ExpLoadEq& e) {
            const double v = x(state_index(StateBlock::V, e.bus, n));
            if (!(v > 0.0)) {
              throw DomainError("exp_load_eq at bus " + std::to_string(e.bus) + " evaluated at v = " +
                                std::to_string(v) + " (requires v > 0)");
            }
            const double p = x(state_index(StateBlock::PGen, e.bus, n));
            const double q = x(state_index(StateBlock::QGen, e.bus, n));
            return q + e.alpha * (p - e.p_load - std::sqrt(v));
          },
      },
      c);
}

Vec constraint_gradient(const OperationalConstraint& c, const Vec& x) {
  const int n = buses_of(x);
  Vec grad = Vec::Zero(x.size());
  std::visit(overloaded{
                 [&](const BoxUpper& b) {
                   check_index(b.index, x);
                   grad(b.index) = 1.0;
                 },
                 [&](const BoxLower& b) {
                   check_index(b.index, x);
                   grad(b.index) = -1.0;
                 },
                 [&](const LinearEq& l) {
                   for (const auto& t : l.terms) {
                     check_index(t.index, x);
                     grad(t.index) += t.coef;
                   }
                 },
                 [&](const ApparentPower& a) {
                   const int ip = state_index(StateBlock::PGen, a.bus, n);
                   const int iq = state_index(StateBlock::QGen, a.bus, n);
                   grad(ip) = 2.0 * x(ip);
                   grad(iq) = 2.0 * x(iq);
                 },
                 [&](const ExpLoadEq& e) {
                   const int iv = state_index(StateBlock::V, e.bus, n);
                   const double v = x(iv);
                   if (!(v > 0.0)) {
                     throw DomainError("exp_load_eq gradient at bus " + std::to_string(e.bus) +
                                       " requires v > 0");
                   }
                   grad(state_index(StateBlock::PGen, e.bus, n)) = e.alpha;
                   grad(state_index(StateBlock::QGen, e.bus, n)) = 1.0;
                   grad(iv) = -e.alpha / (2.0 * std::sqrt(v));
                 },
             },
             c);
  return grad;
}

void validate_constraint(const OperationalConstraint& c, int n) {
  auto idx_ok = [&](int i) { return i >= 0 && i < 4 * n; };
  auto bus_ok = [&](int b) { return b >= 0 && b < n; };
  std::visit(overloaded{
                 [&](const BoxUpper& b) {
                   if (!idx_ok(b.index)) throw InvariantError("box_upper target out of range");
                   if (std::isnan(b.bound)) throw InvariantError("box_upper bound is NaN");
                 },
                 [&](const BoxLower& b) {
                   if (!idx_ok(b.index)) throw InvariantError("box_lower target out of range");
                   if (std::isnan(b.bound)) throw InvariantError("box_lower bound is NaN");
                 },
                 [&](const LinearEq& l) {
                   if (l.terms.empty()) throw InvariantError("linear_eq has no terms");
                   for (const auto& t : l.terms) {
                     if (!idx_ok(t.index)) throw InvariantError("linear_eq term index out of range");
                   }
                 },
                 [&](const ApparentPower& a) {
                   if (!bus_ok(a.bus)) throw InvariantError("apparent_power target bus out of range");
                 },
                 [&](const ExpLoadEq& e) {
                   if (!bus_ok(e.bus)) throw InvariantError("exp_load_eq target bus out of range");
                 },
             },
             c);
}

ConstraintSystem::ConstraintSystem(Network net, std::vector<OperationalConstraint> constraints, Tolerances tol)
    : net_(std::move(net)), ybus_(build_ybus(net_)), tol_(tol) {
  tol_.validate();
  for (auto& c : constraints) {
    validate_constraint(c, net_.size());
    if (is_equality(c)) {
      eqs_.push_back(std::move(c));
    } else {
      ineqs_.push_back(std::move(c));
    }
  }
}

ConstraintSystem ConstraintSystem::with_network(Network net) const {
  std::vector<OperationalConstraint> all = eqs_;
  all.insert(all.end(), ineqs_.begin(), ineqs_.end());
  return ConstraintSystem(std::move(net), std::move(all), tol_);
}

ConstraintSystem ConstraintSystem::with_tolerances(Tolerances tol) const {
  ConstraintSystem out = *this;
  tol.validate();
  out.tol_ = tol;
  return out;
}

Evaluation evaluate(const ConstraintSystem& cs, const SystemState& x) {
  Evaluation e;
  e.pf = pf_residual(cs.network(), cs.ybus(), x);
  const Vec flat = x.flatten();
  e.h.resize(static_cast<Eigen::Index>(cs.equalities().size()));
  e.g.resize(static_cast<Eigen::Index>(cs.inequalities().size()));
  for (std::size_t i = 0; i < cs.equalities().size(); ++i) {
    e.h(static_cast<Eigen::Index>(i)) = constraint_value(cs.equalities()[i], flat);
  }
  for (std::size_t j = 0; j < cs.inequalities().size(); ++j) {
    e.g(static_cast<Eigen::Index>(j)) = constraint_value(cs.inequalities()[j], flat);
  }
  e.pf_inf = e.pf.size() ? e.pf.lpNorm<Eigen::Infinity>() : 0.0;
  e.h_inf = e.h.size() ? e.h.lpNorm<Eigen::Infinity>() : 0.0;
  e.g_max = e.g.size() ? e.g.maxCoeff() : -std::numeric_limits<double>::infinity();
  const auto& tol = cs.tolerances();
  e.feasible = e.pf_inf <= tol.pf_tol && e.h_inf <= tol.eq_tol && e.g_max <= tol.act_tol;
  return e;
}

std::string ActiveSet::face_label() const {
  std::string out = "{";
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(indices[i]);
  }
  return out + "}";
}

std::vector<int> active_indices(std::span<const OperationalConstraint> g_ops, const Vec& x, double act_tol) {
  std::vector<int> out;
  for (std::size_t j = 0; j < g_ops.size(); ++j) {
    if (constraint_value(g_ops[j], x) >= -act_tol) out.push_back(static_cast<int>(j));
  }
  return out;
}

ActiveSet active_set(const ConstraintSystem& cs, const SystemState& x) {
  const Evaluation e = evaluate(cs, x);
  if (!e.feasible) {
    std::ostringstream os;
    os << "active set requested at an infeasible point (|F|=" << e.pf_inf << ", |h|=" << e.h_inf
       << ", max g=" << e.g_max << ")";
    throw InfeasibleError(os.str());
  }
  ActiveSet as;
  as.g_values = e.g;
  for (Eigen::Index j = 0; j < e.g.size(); ++j) {
    if (e.g(j) >= -cs.tolerances().act_tol) as.indices.push_back(static_cast<int>(j));
  }
  return as;
}

Mat operational_jacobian(std::span<const OperationalConstraint> h_ops, std::span<const OperationalConstraint> g_ops,
                         std::span<const int> active, const Vec& x, std::span<const int> cols) {
  const auto rows = static_cast<Eigen::Index>(h_ops.size() + active.size());
  Mat a(rows, static_cast<Eigen::Index>(cols.size()));
  Eigen::Index r = 0;
  for (const auto& c : h_ops) a.row(r++) = select_entries(constraint_gradient(c, x), cols).transpose();
  for (int j : active) {
    a.row(r++) = select_entries(constraint_gradient(g_ops[static_cast<std::size_t>(j)], x), cols).transpose();
  }
  return a;
}

FixedLicqResult fixed_licq_check(std::span<const OperationalConstraint> h_ops,
                                 std::span<const OperationalConstraint> g_ops, const SystemState& x,
                                 const Tolerances& tol) {
  const Vec flat = x.flatten();
  FixedLicqResult out;
  out.active = active_indices(g_ops, flat, tol.act_tol);
  const std::vector<int> cols = x.free_indices();
  const Mat a = operational_jacobian(h_ops, g_ops, out.active, flat, cols);
  const RankInfo info = numerical_rank(a, tol.rank_tol_scale);
  out.rows = info.rows;
  out.rank = info.rank;
  out.sigma_min = info.sigma_min;
  out.holds = info.full_row_rank();
  return out;
}

}  // namespace cqa
