#include "cqa/report_io.hpp"

#include "cqa/case_io.hpp"

#include <iomanip>

namespace cqa {

using nlohmann::json;

json vector_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(real_to_json(v(i)));
  return a;
}

json matrix_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    // + 0.0 folds negative zeros into +0.
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(real_to_json(m(i, j) + 0.0));
    rows.push_back(row);
  }
  return rows;
}

json to_json(const Tolerances& t) {
  return {{"act_tol", t.act_tol},
          {"eq_tol", t.eq_tol},
          {"pf_tol", t.pf_tol},
          {"stat_tol", t.stat_tol},
          {"rank_tol_scale", t.rank_tol_scale}};
}

json to_json(const AdmittanceMatrix& y) { return {{"G", matrix_to_json(y.g)}, {"B", matrix_to_json(y.b)}}; }

json to_json(const CQReport& r) {
  return {{"rows", r.rows},
          {"free_cols", r.free_cols},
          {"rank", r.rank},
          {"sigma_min", real_to_json(r.sigma_min)},
          {"sigma_max", r.sigma_max},
          {"rank_tol", r.rank_tol},
          {"licq_holds", r.licq_holds},
          {"face", r.stack.face},
          {"active", r.stack.active},
          {"row_labels", r.stack.row_labels},
          {"free_indices", r.stack.free_indices},
          {"singular_values", vector_to_json(r.singular_values)},
          {"active_jacobian", matrix_to_json(r.stack.jacobian)}};
}

json to_json(const FixedLicqResult& r) {
  return {{"holds", r.holds},
          {"rank", r.rank},
          {"rows", r.rows},
          {"sigma_min", real_to_json(r.sigma_min)},
          {"active", r.active}};
}

namespace {

json interval_json(const Interval& i) { return json::array({real_to_json(i.lo), real_to_json(i.hi)}); }

}  // namespace

json to_json(const MultiplierSet& m) {
  json j{{"classification", to_string(m.classification)},
         {"family_dim", m.family_dim},
         {"residual", m.residual},
         {"particular", vector_to_json(m.particular)},
         {"kappa", vector_to_json(m.kappa)},
         {"lambda", vector_to_json(m.lambda)},
         {"mu", vector_to_json(m.mu)},
         {"n_pf", m.n_pf},
         {"n_eq", m.n_eq},
         {"n_active", m.n_active}};
  json basis = json::array();
  for (Eigen::Index c = 0; c < m.nullspace_basis.cols(); ++c) basis.push_back(vector_to_json(m.nullspace_basis.col(c)));
  j["nullspace_basis"] = basis;
  if (m.classification == Classification::Ray) {
    j["ray_direction"] = vector_to_json(m.ray_direction);
    j["zeta"] = interval_json(m.zeta);
    j["ray_shape"] = m.ray_shape;
  }
  json ranges = json::array();
  for (const auto& r : m.component_ranges) ranges.push_back(interval_json(r));
  j["component_ranges"] = ranges;
  j["sign_feasible"] = m.sign_feasible ? json(*m.sign_feasible) : json(nullptr);
  return j;
}

json to_json(const RankHypothesis& h) {
  json j{{"rank", h.rank}, {"required", h.required}, {"satisfied", h.satisfied}, {"sigma_min", h.sigma_min}};
  if (h.voltage_premise) {
    j["voltage_premise"] = *h.voltage_premise;
    j["min_v"] = h.min_v;
  }
  return j;
}

json to_json(const GenericityReport& r) {
  json j{{"case", r.case_name},
         {"model", to_string(r.model)},
         {"dimension", r.dimension},
         {"box_lower", vector_to_json(r.box_lower)},
         {"box_upper", vector_to_json(r.box_upper)},
         {"rng_seed", r.rng_seed},
         {"trials", r.trials},
         {"converged_count", r.converged_count},
         {"feasible_count", r.feasible_count},
         {"licq_pass_count", r.licq_pass_count},
         {"licq_failure_count", r.failures.size()},
         {"sigma_min_samples", r.sigma_min_samples},
         {"hypothesis_failures", r.hypothesis_failures},
         {"within_hypotheses", r.within_hypotheses},
         {"tolerances", to_json(r.tol)},
         {"scope", r.scope}};
  j["nominal_rank_hypothesis"] = r.nominal_hypothesis ? to_json(*r.nominal_hypothesis) : json(nullptr);
  j["nominal_fixed_licq"] = r.nominal_fixed_licq ? to_json(*r.nominal_fixed_licq) : json(nullptr);
  json failures = json::array();
  for (const auto& f : r.failures) {
    failures.push_back({{"trial", f.trial},
                        {"seed", f.seed},
                        {"xi", vector_to_json(f.xi)},
                        {"state", state_to_json(f.state)},
                        {"report", to_json(f.report)}});
  }
  j["failures"] = failures;
  json notes = json::array();
  for (const auto& rec : r.records) {
    if (!rec.note.empty()) notes.push_back({{"trial", rec.trial}, {"note", rec.note}});
  }
  j["trial_notes"] = notes;
  return j;
}

json to_json(const ProbeRow& r) {
  json j{{"delta", r.delta},
         {"solved", r.solved},
         {"sigma_min", real_to_json(r.sigma_min)},
         {"licq_holds", r.licq_holds},
         {"rank", r.rank},
         {"rows", r.rows}};
  if (!r.error.empty()) j["error"] = r.error;
  if (r.state) j["state"] = state_to_json(*r.state);
  return j;
}

void write_trials_csv(const GenericityReport& r, std::ostream& out) {
  out << "trial,seed,feasible,licq,sigma_min\n";
  const auto old = out.precision(17);
  for (const auto& rec : r.records) {
    out << rec.trial << ',' << rec.seed << ',' << (rec.feasible ? 1 : 0) << ',' << (rec.licq ? 1 : 0) << ',';
    if (rec.feasible) out << rec.sigma_min;
    out << '\n';
  }
  out.precision(old);
}

}  // namespace cqa
