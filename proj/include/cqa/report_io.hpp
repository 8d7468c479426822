#pragma once

#include "cqa/cqkit.hpp"
#include "cqa/perturb.hpp"

#include <json.hpp>

#include <ostream>

namespace cqa {

nlohmann::json to_json(const Tolerances& t);
nlohmann::json to_json(const AdmittanceMatrix& y);
nlohmann::json to_json(const CQReport& r);
nlohmann::json to_json(const FixedLicqResult& r);
nlohmann::json to_json(const MultiplierSet& m);
nlohmann::json to_json(const RankHypothesis& h);
nlohmann::json to_json(const GenericityReport& r);
nlohmann::json to_json(const ProbeRow& r);

nlohmann::json matrix_to_json(const Mat& m);
nlohmann::json vector_to_json(const Vec& v);

/// One row per trial: trial, seed, feasible, licq, sigma_min (empty when not evaluated).
void write_trials_csv(const GenericityReport& r, std::ostream& out);

}  // namespace cqa
