#pragma once

#include "cqa/constraints.hpp"
#include "cqa/cqkit.hpp"
#include "cqa/netmodel.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cqa {

/// A network together with its declarative operational constraints and cost.
struct Case {
  std::string name;
  Network network;
  std::vector<OperationalConstraint> constraints;
  CostSpec cost;
  std::optional<double> base_mva;  // carried through I/O, unused by the math

  ConstraintSystem system(const Tolerances& tol = {}) const { return ConstraintSystem(network, constraints, tol); }
  Case with_network(Network net) const {
    Case c = *this;
    c.network = std::move(net);
    return c;
  }
};

}  // namespace cqa
