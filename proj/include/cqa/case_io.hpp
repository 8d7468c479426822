#pragma once

#include "cqa/case.hpp"

#include <json.hpp>

#include <string>

namespace cqa {

/// Parses a JSON case document. Schema violations throw InputError naming the
/// JSON path (e.g. "$.buses[1].type"); network invariant violations throw
/// InvariantError. Unknown keys are rejected.
///
///   { "name"?, "base_mva"?,
///     "buses": [{"id", "type": "slack|pv|pq", "p_load", "q_load", "g_shunt", "b_shunt",
///                "v_setpoint"?, "theta_setpoint"?}],
///     "lines": [{"from", "to", "g_series", "b_series", "g_shunt", "b_shunt"}],
///     "generators"?: [{"bus", "p", "q"}],
///     "constraints"?: [{"kind", "target", "params"}],
///     "cost"?: {"c2"?: [4N], "c1"?: [4N]} }
///
/// Constraint targets: box kinds take a state index or {"block": "pg|qg|v|theta", "bus"};
/// linear_eq takes a list of such targets with params {"coefficients", "offset"};
/// apparent_power and exp_load_eq take a bus index. Infinite bounds are written "inf".
Case load_case(const nlohmann::json& doc);
Case load_case_text(const std::string& text);
Case load_case_file(const std::string& path);

nlohmann::json case_to_json(const Case& c);

/// State as a flat array in (p^G, q^G, v, theta) order; the mask comes from the bus types.
/// An object {"x": [...], "free_mask": [...]} is also accepted.
SystemState load_state(const nlohmann::json& doc, const Network& net);
SystemState load_state_file(const std::string& path, const Network& net);
nlohmann::json state_to_json(const SystemState& x);

/// Doubles that may be infinite: finite values as numbers, infinities as "inf" / "-inf".
nlohmann::json real_to_json(double v);

std::string read_text_file(const std::string& path);

}  // namespace cqa
