#include "cqa/cases.hpp"
#include "cqa/errors.hpp"
#include "cqa/netmodel.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace cqa;

namespace {

Bus bus(int id, BusType t) {
  Bus b;
  b.id = id;
  b.type = t;
  return b;
}

}  // namespace

TEST_CASE("two-bus unit susceptance line") {
  const Network net = two_bus_network(0.0, -1.0);
  const AdmittanceMatrix y = build_ybus(net);
  CHECK(y.g == Mat::Zero(2, 2));
  Mat b(2, 2);
  b << -1.0, 1.0, 1.0, -1.0;
  CHECK(y.b == b);
}

TEST_CASE("single bus with shunt, no lines") {
  Bus b = bus(0, BusType::Slack);
  b.g_shunt = 0.1;
  b.b_shunt = 0.2;
  const AdmittanceMatrix y = build_ybus(Network({b}, {}));
  REQUIRE(y.size() == 1);
  CHECK(y.g(0, 0) == 0.1);
  CHECK(y.b(0, 0) == 0.2);
}

TEST_CASE("shunt-free networks have exactly zero row sums") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Network net = random_network(2 + static_cast<int>(seed % 8), seed, 3, false);
    const AdmittanceMatrix y = build_ybus(net);
    CHECK(y.row_sum_g().cwiseAbs().maxCoeff() == 0.0);
    CHECK(y.row_sum_b().cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("row sums equal lumped shunts, symmetry is exact, entries match the definition") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Network net = random_network(3 + static_cast<int>(seed % 6), seed, 2, true);
    const AdmittanceMatrix y = build_ybus(net);
    CHECK(y.g == y.g.transpose());
    CHECK(y.b == y.b.transpose());
    const auto ref = oracle::ybus(net);
    for (int k = 0; k < net.size(); ++k) {
      for (int l = 0; l < net.size(); ++l) {
        CHECK(y.g(k, l) == doctest::Approx(ref[k][l].real()).epsilon(1e-14));
        CHECK(y.b(k, l) == doctest::Approx(ref[k][l].imag()).epsilon(1e-14));
      }
      double lumped_g = net.bus(k).g_shunt;
      double lumped_b = net.bus(k).b_shunt;
      for (const Line& l : net.lines()) {
        if (l.from == k || l.to == k) {
          lumped_g += 0.5 * l.g_shunt;
          lumped_b += 0.5 * l.b_shunt;
        }
      }
      CHECK(y.row_sum_g()(k) == doctest::Approx(lumped_g).epsilon(1e-13));
      CHECK(y.row_sum_b()(k) == doctest::Approx(lumped_b).epsilon(1e-13));
    }
  }
}

TEST_CASE("duplicate lines are rejected with the pair") {
  std::vector<Bus> buses{bus(0, BusType::Slack), bus(1, BusType::PQ), bus(2, BusType::PQ)};
  std::vector<Line> lines{{0, 1, 1.0, -2.0, 0, 0}, {2, 1, 1.0, -2.0, 0, 0}, {1, 0, 0.5, -1.0, 0, 0}};
  const Network net(buses, lines);
  try {
    build_ybus(net);
    FAIL("expected rejection");
  } catch (const InvariantError& e) {
    CHECK(std::string(e.what()).find("buses 0 and 1") != std::string::npos);
  }
}

TEST_CASE("network invariants") {
  CHECK_THROWS_AS(Network({}, {}), InvariantError);
  CHECK_THROWS_AS(Network({bus(0, BusType::Slack), bus(1, BusType::Slack)}, {{0, 1, 0, -1, 0, 0}}), InvariantError);
  CHECK_THROWS_AS(Network({bus(0, BusType::PQ), bus(1, BusType::PQ)}, {{0, 1, 0, -1, 0, 0}}), InvariantError);
  CHECK_THROWS_AS(Network({bus(1, BusType::Slack)}, {}), InvariantError);
  CHECK_THROWS_AS(Network({bus(0, BusType::Slack), bus(1, BusType::PQ)}, {{0, 0, 0, -1, 0, 0}}), InvariantError);
  CHECK_THROWS_AS(Network({bus(0, BusType::Slack), bus(1, BusType::PQ)}, {{0, 2, 0, -1, 0, 0}}), InvariantError);
  CHECK_THROWS_AS(Network({bus(0, BusType::Slack)}, {}, {Generator{3, 0, 0}}), InvariantError);
  Bus pv = bus(1, BusType::PV);
  pv.v_setpoint = 0.0;
  CHECK_THROWS_AS(Network({bus(0, BusType::Slack), pv}, {{0, 1, 0, -1, 0, 0}}), InvariantError);
}

TEST_CASE("disconnected networks warn but construct") {
  const Network net({bus(0, BusType::Slack), bus(1, BusType::PQ), bus(2, BusType::PQ)}, {{0, 1, 0, -1, 0, 0}});
  CHECK_FALSE(net.connected());
  CHECK_FALSE(net.warnings().empty());
  CHECK(two_bus_network(0, -1).connected());
  CHECK(two_bus_network(0, -1).warnings().empty());
}

TEST_CASE("bus type names") {
  for (BusType t : {BusType::Slack, BusType::PV, BusType::PQ}) CHECK(bus_type_from_string(to_string(t)) == t);
  CHECK_THROWS(bus_type_from_string("ref"));
}

TEST_CASE("generation sums per bus") {
  const Network net({bus(0, BusType::Slack), bus(1, BusType::PQ)}, {{0, 1, 0, -1, 0, 0}},
                    {Generator{1, 0.5, 0.1}, Generator{1, 0.25, -0.3}});
  CHECK(net.generation_p()(1) == 0.75);
  CHECK(net.generation_q()(1) == doctest::Approx(-0.2));
  CHECK(net.generation_p()(0) == 0.0);
}
