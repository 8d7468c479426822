#include "cqa/case_io.hpp"

#include "cqa/errors.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace cqa {

using nlohmann::json;

namespace {

std::string at(const std::string& path, const std::string& key) { return path + "." + key; }
std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void check_object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw InputError(path, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.contains(key)) throw InputError(at(path, key), "unknown field");
  }
}

const json& require(const json& j, const std::string& path, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw InputError(at(path, key), "missing required field");
  return *it;
}

double as_real(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw InputError(path, "expected a number");
}

double finite_real(const json& j, const std::string& path) {
  const double v = as_real(j, path);
  if (!std::isfinite(v)) throw InputError(path, "expected a finite number");
  return v;
}

double real_or(const json& obj, const std::string& path, const char* key, double fallback) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : finite_real(*it, at(path, key));
}

int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw InputError(path, "expected an integer");
  return j.get<int>();
}

const json& as_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw InputError(path, "expected an array");
  return j;
}

Vec real_array(const json& j, const std::string& path, Eigen::Index expected) {
  as_array(j, path);
  if (static_cast<Eigen::Index>(j.size()) != expected) {
    throw InputError(path, "expected " + std::to_string(expected) + " entries, found " + std::to_string(j.size()));
  }
  Vec v(expected);
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = finite_real(j[i], at(path, i));
  return v;
}

const char* block_name(StateBlock b) {
  switch (b) {
    case StateBlock::PGen: return "pg";
    case StateBlock::QGen: return "qg";
    case StateBlock::V: return "v";
    case StateBlock::Theta: return "theta";
  }
  return "?";
}

int state_target(const json& j, const std::string& path, int n) {
  if (j.is_number_integer()) {
    const int idx = j.get<int>();
    if (idx < 0 || idx >= 4 * n) throw InputError(path, "state index out of range 0.." + std::to_string(4 * n - 1));
    return idx;
  }
  check_object(j, path, {"block", "bus"});
  const json& b = require(j, path, "block");
  if (!b.is_string()) throw InputError(at(path, "block"), "expected a string");
  const std::string name = b.get<std::string>();
  StateBlock block;
  if (name == "pg") block = StateBlock::PGen;
  else if (name == "qg") block = StateBlock::QGen;
  else if (name == "v") block = StateBlock::V;
  else if (name == "theta") block = StateBlock::Theta;
  else throw InputError(at(path, "block"), "expected one of pg, qg, v, theta");
  const int bus = as_int(require(j, path, "bus"), at(path, "bus"));
  if (bus < 0 || bus >= n) throw InputError(at(path, "bus"), "bus index out of range");
  return state_index(block, bus, n);
}

json target_to_json(int idx, int n) {
  return json{{"block", block_name(static_cast<StateBlock>(idx / n))}, {"bus", idx % n}};
}

int bus_target(const json& j, const std::string& path, int n) {
  const int bus = as_int(j, path);
  if (bus < 0 || bus >= n) throw InputError(path, "bus index out of range");
  return bus;
}

OperationalConstraint parse_constraint(const json& j, const std::string& path, int n) {
  check_object(j, path, {"kind", "target", "params"});
  const json& kind_j = require(j, path, "kind");
  if (!kind_j.is_string()) throw InputError(at(path, "kind"), "expected a string");
  ConstraintKind kind;
  try {
    kind = constraint_kind_from_string(kind_j.get<std::string>());
  } catch (const Error& e) {
    throw InputError(at(path, "kind"), e.what());
  }
  const json& target = require(j, path, "target");
  const std::string tpath = at(path, "target");
  const std::string ppath = at(path, "params");
  const json params = j.contains("params") ? j.at("params") : json::object();
  switch (kind) {
    case ConstraintKind::BoxUpper:
    case ConstraintKind::BoxLower: {
      check_object(params, ppath, {"bound"});
      const int idx = state_target(target, tpath, n);
      const double bound = as_real(require(params, ppath, "bound"), at(ppath, "bound"));
      if (std::isnan(bound)) throw InputError(at(ppath, "bound"), "bound is NaN");
      if (kind == ConstraintKind::BoxUpper) return BoxUpper{idx, bound};
      return BoxLower{idx, bound};
    }
    case ConstraintKind::LinearEq: {
      check_object(params, ppath, {"coefficients", "offset"});
      as_array(target, tpath);
      const json& coefs = require(params, ppath, "coefficients");
      const Vec a = real_array(coefs, at(ppath, "coefficients"), static_cast<Eigen::Index>(target.size()));
      LinearEq eq;
      for (std::size_t i = 0; i < target.size(); ++i) {
        eq.terms.push_back(LinearTerm{state_target(target[i], at(tpath, i), n), a(static_cast<Eigen::Index>(i))});
      }
      eq.offset = real_or(params, ppath, "offset", 0.0);
      return eq;
    }
    case ConstraintKind::ApparentPower: {
      check_object(params, ppath, {"s_max_sq"});
      return ApparentPower{bus_target(target, tpath, n),
                           finite_real(require(params, ppath, "s_max_sq"), at(ppath, "s_max_sq"))};
    }
    case ConstraintKind::ExpLoadEq: {
      check_object(params, ppath, {"alpha", "p_load"});
      return ExpLoadEq{bus_target(target, tpath, n), finite_real(require(params, ppath, "alpha"), at(ppath, "alpha")),
                       finite_real(require(params, ppath, "p_load"), at(ppath, "p_load"))};
    }
  }
  throw InputError(path, "unsupported constraint kind");
}

json constraint_to_json(const OperationalConstraint& c, int n) {
  json j;
  j["kind"] = to_string(kind_of(c));
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, BoxUpper> || std::is_same_v<T, BoxLower>) {
          j["target"] = target_to_json(k.index, n);
          j["params"] = {{"bound", real_to_json(k.bound)}};
        } else if constexpr (std::is_same_v<T, LinearEq>) {
          json targets = json::array();
          json coefs = json::array();
          for (const auto& t : k.terms) {
            targets.push_back(target_to_json(t.index, n));
            coefs.push_back(t.coef);
          }
          j["target"] = targets;
          j["params"] = {{"coefficients", coefs}, {"offset", k.offset}};
        } else if constexpr (std::is_same_v<T, ApparentPower>) {
          j["target"] = k.bus;
          j["params"] = {{"s_max_sq", k.s_max_sq}};
        } else {
          j["target"] = k.bus;
          j["params"] = {{"alpha", k.alpha}, {"p_load", k.p_load}};
        }
      },
      c);
  return j;
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

json real_to_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

Case load_case(const json& doc) {
  const std::string root = "$";
  check_object(doc, root, {"name", "base_mva", "buses", "lines", "generators", "constraints", "cost"});

  const json& buses_j = as_array(require(doc, root, "buses"), at(root, "buses"));
  if (buses_j.empty()) throw InputError(at(root, "buses"), "a network needs at least one bus");
  std::vector<Bus> buses;
  for (std::size_t i = 0; i < buses_j.size(); ++i) {
    const std::string p = at(at(root, "buses"), i);
    const json& b = buses_j[i];
    check_object(b, p, {"id", "type", "p_load", "q_load", "g_shunt", "b_shunt", "v_setpoint", "theta_setpoint"});
    Bus bus;
    bus.id = as_int(require(b, p, "id"), at(p, "id"));
    const json& t = require(b, p, "type");
    if (!t.is_string()) throw InputError(at(p, "type"), "expected a string");
    try {
      bus.type = bus_type_from_string(t.get<std::string>());
    } catch (const Error& e) {
      throw InputError(at(p, "type"), e.what());
    }
    bus.p_load = finite_real(require(b, p, "p_load"), at(p, "p_load"));
    bus.q_load = finite_real(require(b, p, "q_load"), at(p, "q_load"));
    bus.g_shunt = finite_real(require(b, p, "g_shunt"), at(p, "g_shunt"));
    bus.b_shunt = finite_real(require(b, p, "b_shunt"), at(p, "b_shunt"));
    bus.v_setpoint = real_or(b, p, "v_setpoint", 1.0);
    bus.theta_setpoint = real_or(b, p, "theta_setpoint", 0.0);
    buses.push_back(bus);
  }

  const json& lines_j = as_array(require(doc, root, "lines"), at(root, "lines"));
  std::vector<Line> lines;
  for (std::size_t i = 0; i < lines_j.size(); ++i) {
    const std::string p = at(at(root, "lines"), i);
    const json& l = lines_j[i];
    check_object(l, p, {"from", "to", "g_series", "b_series", "g_shunt", "b_shunt"});
    Line line;
    line.from = as_int(require(l, p, "from"), at(p, "from"));
    line.to = as_int(require(l, p, "to"), at(p, "to"));
    line.g_series = finite_real(require(l, p, "g_series"), at(p, "g_series"));
    line.b_series = finite_real(require(l, p, "b_series"), at(p, "b_series"));
    line.g_shunt = finite_real(require(l, p, "g_shunt"), at(p, "g_shunt"));
    line.b_shunt = finite_real(require(l, p, "b_shunt"), at(p, "b_shunt"));
    lines.push_back(line);
  }

  std::vector<Generator> gens;
  if (auto it = doc.find("generators"); it != doc.end()) {
    as_array(*it, at(root, "generators"));
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string p = at(at(root, "generators"), i);
      const json& g = (*it)[i];
      check_object(g, p, {"bus", "p", "q"});
      gens.push_back(Generator{as_int(require(g, p, "bus"), at(p, "bus")), finite_real(require(g, p, "p"), at(p, "p")),
                               finite_real(require(g, p, "q"), at(p, "q"))});
    }
  }

  Network net(std::move(buses), std::move(lines), std::move(gens));
  const int n = net.size();

  std::vector<OperationalConstraint> cons;
  if (auto it = doc.find("constraints"); it != doc.end()) {
    as_array(*it, at(root, "constraints"));
    for (std::size_t i = 0; i < it->size(); ++i) cons.push_back(parse_constraint((*it)[i], at(at(root, "constraints"), i), n));
  }

  CostSpec cost = CostSpec::zero(4 * n);
  if (auto it = doc.find("cost"); it != doc.end()) {
    const std::string p = at(root, "cost");
    check_object(*it, p, {"c2", "c1"});
    if (it->contains("c2")) cost.c2 = real_array(it->at("c2"), at(p, "c2"), 4 * n);
    if (it->contains("c1")) cost.c1 = real_array(it->at("c1"), at(p, "c1"), 4 * n);
  }

  std::string name = "case";
  if (auto it = doc.find("name"); it != doc.end()) {
    if (!it->is_string()) throw InputError(at(root, "name"), "expected a string");
    name = it->get<std::string>();
  }
  std::optional<double> base;
  if (auto it = doc.find("base_mva"); it != doc.end()) base = finite_real(*it, at(root, "base_mva"));

  return Case{std::move(name), std::move(net), std::move(cons), std::move(cost), base};
}

Case load_case_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError("$", std::string("malformed JSON: ") + e.what());
  }
  return load_case(doc);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Case load_case_file(const std::string& path) { return load_case_text(read_text_file(path)); }

json case_to_json(const Case& c) {
  json doc;
  doc["name"] = c.name;
  if (c.base_mva) doc["base_mva"] = *c.base_mva;
  json buses = json::array();
  for (const Bus& b : c.network.buses()) {
    buses.push_back({{"id", b.id},
                     {"type", to_string(b.type)},
                     {"p_load", b.p_load},
                     {"q_load", b.q_load},
                     {"g_shunt", b.g_shunt},
                     {"b_shunt", b.b_shunt},
                     {"v_setpoint", b.v_setpoint},
                     {"theta_setpoint", b.theta_setpoint}});
  }
  doc["buses"] = buses;
  json lines = json::array();
  for (const Line& l : c.network.lines()) {
    lines.push_back({{"from", l.from},
                     {"to", l.to},
                     {"g_series", l.g_series},
                     {"b_series", l.b_series},
                     {"g_shunt", l.g_shunt},
                     {"b_shunt", l.b_shunt}});
  }
  doc["lines"] = lines;
  json gens = json::array();
  for (const Generator& g : c.network.generators()) gens.push_back({{"bus", g.bus}, {"p", g.p}, {"q", g.q}});
  doc["generators"] = gens;
  json cons = json::array();
  for (const auto& k : c.constraints) cons.push_back(constraint_to_json(k, c.network.size()));
  doc["constraints"] = cons;
  doc["cost"] = {{"c2", vec_json(c.cost.c2)}, {"c1", vec_json(c.cost.c1)}};
  return doc;
}

SystemState load_state(const json& doc, const Network& net) {
  const int n = net.size();
  if (doc.is_array()) return SystemState::from_flat(real_array(doc, "$", 4 * n), mask_from_bus_types(net));
  check_object(doc, "$", {"x", "free_mask"});
  const Vec x = real_array(require(doc, "$", "x"), "$.x", 4 * n);
  std::vector<bool> mask = mask_from_bus_types(net);
  if (auto it = doc.find("free_mask"); it != doc.end()) {
    as_array(*it, "$.free_mask");
    if (it->size() != static_cast<std::size_t>(4 * n)) throw InputError("$.free_mask", "expected 4N entries");
    for (std::size_t i = 0; i < it->size(); ++i) {
      if (!(*it)[i].is_boolean()) throw InputError(at("$.free_mask", i), "expected a boolean");
      mask[i] = (*it)[i].get<bool>();
    }
  }
  return SystemState::from_flat(x, std::move(mask));
}

SystemState load_state_file(const std::string& path, const Network& net) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw InputError(path, std::string("malformed JSON: ") + e.what());
  }
  return load_state(doc, net);
}

json state_to_json(const SystemState& x) { return vec_json(x.flatten()); }

}  // namespace cqa
