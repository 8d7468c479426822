#pragma once

#include "cqa/linalg.hpp"

#include <string>
#include <vector>

namespace cqa {

enum class BusType { Slack, PV, PQ };

std::string to_string(BusType t);
BusType bus_type_from_string(const std::string& s);

/// A network node. Loads and shunts are per-unit; angles in radians.
struct Bus {
  int id = 0;
  BusType type = BusType::PQ;
  double p_load = 0.0;
  double q_load = 0.0;
  double g_shunt = 0.0;
  double b_shunt = 0.0;
  double v_setpoint = 1.0;
  double theta_setpoint = 0.0;

  bool operator==(const Bus&) const = default;
};

/// Pi-model line: series admittance g + jb, total line-charging shunt split half per end.
struct Line {
  int from = 0;
  int to = 0;
  double g_series = 0.0;
  double b_series = 0.0;
  double g_shunt = 0.0;
  double b_shunt = 0.0;

  bool operator==(const Line&) const = default;
};

/// Generation setpoint attached to a bus. Several generators at one bus add up.
struct Generator {
  int bus = 0;
  double p = 0.0;
  double q = 0.0;

  bool operator==(const Generator&) const = default;
};

/// Immutable power network. Bus order is the construction order and is never re-sorted.
///
/// The constructor enforces: bus ids equal their position, exactly one slack
/// bus, positive voltage setpoints on slack/PV buses, line endpoints in range
/// and distinct, generator buses in range. Disconnected networks are accepted
/// but reported through warnings().
class Network {
 public:
  Network(std::vector<Bus> buses, std::vector<Line> lines, std::vector<Generator> generators = {});

  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Line>& lines() const { return lines_; }
  const std::vector<Generator>& generators() const { return generators_; }
  const Bus& bus(int k) const { return buses_.at(static_cast<std::size_t>(k)); }

  int size() const { return static_cast<int>(buses_.size()); }
  int line_count() const { return static_cast<int>(lines_.size()); }
  int slack_index() const { return slack_; }
  bool connected() const;
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Summed generator setpoints per bus.
  Vec generation_p() const;
  Vec generation_q() const;

  bool operator==(const Network& o) const {
    return buses_ == o.buses_ && lines_ == o.lines_ && generators_ == o.generators_;
  }

 private:
  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  std::vector<Generator> generators_;
  int slack_ = -1;
  std::vector<std::string> warnings_;
};

/// Nodal admittance matrix Y = G + jB.
struct AdmittanceMatrix {
  Mat g;
  Mat b;

  int size() const { return static_cast<int>(g.rows()); }

  /// Row sums Y*1 (the lumped nodal shunts), accumulated off-diagonals first in
  /// column order and then the diagonal. build_ybus forms each diagonal so that
  /// this sum is exactly 0.0 on a shunt-free network.
  Vec row_sum_g() const;
  Vec row_sum_b() const;
};

/// Builds Y from the Pi-model:
///   Y_kk = y^sh_k + sum_{i in N(k)} (y_ki + y^sh_ki / 2),  Y_kl = -y_kl,  0 otherwise.
/// The diagonal is stored as (lumped shunt) - (sum of the row's off-diagonals).
/// Throws InvariantError naming the pair if two lines join the same buses.
AdmittanceMatrix build_ybus(const Network& net);

}  // namespace cqa
