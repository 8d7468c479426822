#include "cqa/case_io.hpp"
#include "cqa/cases.hpp"
#include "cqa/errors.hpp"

#include <doctest.h>

#include <cstring>

using namespace cqa;
using nlohmann::json;

namespace {

std::string error_path(const std::string& text) {
  try {
    load_case_text(text);
  } catch (const InputError& e) {
    return e.path();
  }
  return "<no error>";
}

json minimal() {
  return json::parse(R"({
    "buses": [
      {"id": 0, "type": "slack", "p_load": 0, "q_load": 0, "g_shunt": 0, "b_shunt": 0},
      {"id": 1, "type": "pq", "p_load": 0.1, "q_load": 0.05, "g_shunt": 0, "b_shunt": 0}
    ],
    "lines": [{"from": 0, "to": 1, "g_series": 0, "b_series": -1, "g_shunt": 0, "b_shunt": 0}]
  })");
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("built-in tangency case survives export and reload") {
  const Case c = example1(1.0).c;
  const Case back = load_case_text(case_to_json(c).dump());
  CHECK(back.network == c.network);
  CHECK(back.name == "ex1");
  const AdmittanceMatrix y = build_ybus(back.network);
  CHECK(y.b(0, 1) == 1.0);
  CHECK(y.b(0, 0) == -1.0);
  CHECK(back.cost.c1 == c.cost.c1);
  CHECK(back.cost.c2 == c.cost.c2);
  REQUIRE(back.constraints.size() == 2);
  const auto& box = std::get<BoxUpper>(back.constraints[1]);
  CHECK(bit_equal(box.bound, std::sqrt(2.0)));
}

TEST_CASE("round trip is bit-exact for random networks") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Network net = random_network(1 + static_cast<int>(seed % 8), seed, 2, true);
    const Case c{"r", net, {}, CostSpec::zero(4 * net.size()), 100.0};
    const std::string text = case_to_json(c).dump();
    const Case back = load_case_text(text);
    CHECK(back.network == net);
    CHECK(back.base_mva == std::optional<double>(100.0));
    CHECK(case_to_json(back).dump() == text);
  }
}

TEST_CASE("every constraint kind round trips, including infinite bounds") {
  const int n = 2;
  Case c = example2().c;
  c.constraints.push_back(BoxUpper{state_index(StateBlock::V, 1, n), std::numeric_limits<double>::infinity()});
  c.constraints.push_back(BoxLower{state_index(StateBlock::Theta, 1, n), -0.5});
  c.constraints.push_back(LinearEq{{{0, 1.0}, {5, -0.25}}, 0.125});
  const Case back = load_case_text(case_to_json(c).dump());
  REQUIRE(back.constraints.size() == c.constraints.size());
  CHECK(case_to_json(back) == case_to_json(c));
  CHECK(std::isinf(std::get<BoxUpper>(back.constraints[2]).bound));
}

TEST_CASE("constraint targets by index or by block and bus") {
  json doc = minimal();
  doc["constraints"] = json::parse(R"([
    {"kind": "box_upper", "target": 5, "params": {"bound": 1.1}},
    {"kind": "box_lower", "target": {"block": "v", "bus": 1}, "params": {"bound": 0.9}},
    {"kind": "linear_eq", "target": [{"block": "qg", "bus": 1}, 3], "params": {"coefficients": [1, -2]}},
    {"kind": "apparent_power", "target": 1, "params": {"s_max_sq": 1.5}},
    {"kind": "exp_load_eq", "target": 1, "params": {"alpha": 0.3, "p_load": 0.1}}
  ])");
  const Case c = load_case(doc);
  REQUIRE(c.constraints.size() == 5);
  CHECK(std::get<BoxUpper>(c.constraints[0]).index == 5);
  CHECK(std::get<BoxLower>(c.constraints[1]).index == 5);
  CHECK(std::get<LinearEq>(c.constraints[2]).terms[0].index == 3);
  CHECK(std::get<LinearEq>(c.constraints[2]).offset == 0.0);
}

TEST_CASE("schema violations name the JSON path") {
  json doc = minimal();
  doc["buses"] = json::array();
  CHECK(error_path(doc.dump()) == "$.buses");

  doc = minimal();
  doc["buses"][1]["type"] = "load";
  CHECK(error_path(doc.dump()) == "$.buses[1].type");

  doc = minimal();
  doc["buses"][0].erase("p_load");
  CHECK(error_path(doc.dump()) == "$.buses[0].p_load");

  doc = minimal();
  doc["lines"][0]["b_series"] = "big";
  CHECK(error_path(doc.dump()) == "$.lines[0].b_series");

  doc = minimal();
  doc["lines"][0]["rating"] = 3;
  CHECK(error_path(doc.dump()) == "$.lines[0].rating");

  doc = minimal();
  doc["extra"] = true;
  CHECK(error_path(doc.dump()) == "$.extra");

  doc = minimal();
  doc["constraints"] = json::parse(R"([{"kind": "box_upper", "target": 99, "params": {"bound": 1}}])");
  CHECK(error_path(doc.dump()) == "$.constraints[0].target");

  doc = minimal();
  doc["constraints"] = json::parse(R"([{"kind": "thermal", "target": 0, "params": {}}])");
  CHECK(error_path(doc.dump()) == "$.constraints[0].kind");

  doc = minimal();
  doc["cost"] = json::parse(R"({"c1": [1, 2]})");
  CHECK(error_path(doc.dump()) == "$.cost.c1");

  CHECK(error_path("{\"buses\": [") == "$");
}

TEST_CASE("invariant violations are reported as such") {
  json doc = minimal();
  doc["buses"][1]["type"] = "slack";
  CHECK_THROWS_AS(load_case(doc), InvariantError);
  doc = minimal();
  doc["lines"].push_back(doc["lines"][0]);
  CHECK_NOTHROW(load_case(doc));  // duplicates surface when Y is built
  CHECK_THROWS_AS(load_case(doc).system(), InvariantError);
}

TEST_CASE("states as flat arrays") {
  const Case c = example1(1.0).c;
  const SystemState x = example1(1.0).x_star;
  const SystemState back = load_state(state_to_json(x), c.network);
  CHECK(back == x);
  CHECK_THROWS_AS(load_state(json::array({1, 2, 3}), c.network), InputError);
  json obj{{"x", state_to_json(x)}, {"free_mask", std::vector<bool>(8, true)}};
  CHECK(load_state(obj, c.network).free_indices().size() == 8);
}

TEST_CASE("missing files") {
  CHECK_THROWS_AS(load_case_file("/nonexistent/case.json"), InputError);
}
