#include "cqa/netmodel.hpp"

#include "cqa/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

namespace cqa {

std::string to_string(BusType t) {
  switch (t) {
    case BusType::Slack: return "slack";
    case BusType::PV: return "pv";
    case BusType::PQ: return "pq";
  }
  return "?";
}

BusType bus_type_from_string(const std::string& s) {
  if (s == "slack") return BusType::Slack;
  if (s == "pv") return BusType::PV;
  if (s == "pq") return BusType::PQ;
  throw InvariantError("unknown bus type '" + s + "' (expected slack, pv or pq)");
}

Network::Network(std::vector<Bus> buses, std::vector<Line> lines, std::vector<Generator> generators)
    : buses_(std::move(buses)), lines_(std::move(lines)), generators_(std::move(generators)) {
  if (buses_.empty()) throw InvariantError("network has no buses");
  const int n = size();
  for (int k = 0; k < n; ++k) {
    const Bus& b = buses_[static_cast<std::size_t>(k)];
    if (b.id != k) {
      throw InvariantError("bus at position " + std::to_string(k) + " has id " + std::to_string(b.id) +
                           "; ids must be 0-based positions");
    }
    if (b.type == BusType::Slack) {
      if (slack_ >= 0) {
        throw InvariantError("more than one slack bus (buses " + std::to_string(slack_) + " and " +
                             std::to_string(k) + ")");
      }
      slack_ = k;
    }
    if (b.type != BusType::PQ && !(b.v_setpoint > 0.0)) {
      throw InvariantError("bus " + std::to_string(k) + ": v_setpoint must be > 0");
    }
  }
  if (slack_ < 0) throw InvariantError("network has no slack bus");

  for (std::size_t i = 0; i < lines_.size(); ++i) {
    const Line& l = lines_[i];
    if (l.from < 0 || l.from >= n || l.to < 0 || l.to >= n) {
      throw InvariantError("line " + std::to_string(i) + " references a bus outside 0.." + std::to_string(n - 1));
    }
    if (l.from == l.to) throw InvariantError("line " + std::to_string(i) + " is a self-loop");
  }
  for (std::size_t i = 0; i < generators_.size(); ++i) {
    const int b = generators_[i].bus;
    if (b < 0 || b >= n) throw InvariantError("generator " + std::to_string(i) + " references a missing bus");
  }
  if (!connected()) warnings_.push_back("line graph is not connected");
}

bool Network::connected() const {
  const int n = size();
  std::vector<int> parent(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) parent[static_cast<std::size_t>(k)] = k;
  auto find = [&](int k) {
    while (parent[static_cast<std::size_t>(k)] != k) {
      k = parent[static_cast<std::size_t>(k)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(k)])];
    }
    return k;
  };
  int components = n;
  for (const Line& l : lines_) {
    const int a = find(l.from);
    const int b = find(l.to);
    if (a != b) {
      parent[static_cast<std::size_t>(a)] = b;
      --components;
    }
  }
  return components == 1;
}

Vec Network::generation_p() const {
  Vec p = Vec::Zero(size());
  for (const Generator& g : generators_) p(g.bus) += g.p;
  return p;
}

Vec Network::generation_q() const {
  Vec q = Vec::Zero(size());
  for (const Generator& g : generators_) q(g.bus) += g.q;
  return q;
}

namespace {

Vec ordered_row_sums(const Mat& m) {
  const auto n = m.rows();
  Vec out(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double s = 0.0;
    for (Eigen::Index l = 0; l < n; ++l) {
      if (l != k) s += m(k, l);
    }
    out(k) = s + m(k, k);
  }
  return out;
}

}  // namespace

Vec AdmittanceMatrix::row_sum_g() const { return ordered_row_sums(g); }
Vec AdmittanceMatrix::row_sum_b() const { return ordered_row_sums(b); }

AdmittanceMatrix build_ybus(const Network& net) {
  const int n = net.size();
  AdmittanceMatrix y{Mat::Zero(n, n), Mat::Zero(n, n)};

  std::set<std::pair<int, int>> seen;
  for (const Line& l : net.lines()) {
    const auto key = std::minmax(l.from, l.to);
    if (!seen.insert(key).second) {
      throw InvariantError("duplicate line between buses " + std::to_string(key.first) + " and " +
                           std::to_string(key.second) + " (aggregate parallel lines first)");
    }
  }

  Vec lumped_g(n);
  Vec lumped_b(n);
  for (const Bus& b : net.buses()) {
    lumped_g(b.id) = b.g_shunt;
    lumped_b(b.id) = b.b_shunt;
  }
  for (const Line& l : net.lines()) {
    for (int end : {l.from, l.to}) {
      lumped_g(end) += 0.5 * l.g_shunt;
      lumped_b(end) += 0.5 * l.b_shunt;
    }
    y.g(l.from, l.to) -= l.g_series;
    y.g(l.to, l.from) -= l.g_series;
    y.b(l.from, l.to) -= l.b_series;
    y.b(l.to, l.from) -= l.b_series;
  }
  for (int k = 0; k < n; ++k) {
    double sg = 0.0;
    double sb = 0.0;
    for (int l = 0; l < n; ++l) {
      if (l == k) continue;
      sg += y.g(k, l);
      sb += y.b(k, l);
    }
    y.g(k, k) = lumped_g(k) - sg;
    y.b(k, k) = lumped_b(k) - sb;
  }
  return y;
}

}  // namespace cqa
