#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "bcsr/errors.hpp"
#include "bcsr/protocol.hpp"

using namespace bcsr;

TEST(AdjacentProtocol, MeasurementCounts) {
  EXPECT_EQ(adjacent_protocol(16, false, false).num_measurements(), 256);
  EXPECT_EQ(adjacent_protocol(16, true, false).num_measurements(), 208);
  EXPECT_EQ(adjacent_protocol(16, true, true).num_measurements(), 104);
  EXPECT_EQ(adjacent_protocol(16, true, true).num_injections(), 16);
  // L (L - 3) / 2 in general
  EXPECT_EQ(adjacent_protocol(8, true, true).num_measurements(), 20);
  EXPECT_THROW(adjacent_protocol(3, false, false), InputError);
}

TEST(AdjacentProtocol, FilteredSetHasNoReciprocalCouples) {
  const auto p = adjacent_protocol(16, true, true);
  const auto& m = p.measurements();
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 1; j < m.size(); ++j) EXPECT_FALSE(reciprocal(p, m[i], m[j]));
  for (const auto& x : m) {
    const auto& inj = p.injections()[static_cast<std::size_t>(x.injection)];
    EXPECT_NE(x.positive, inj.source);
    EXPECT_NE(x.positive, inj.sink);
    EXPECT_NE(x.negative, inj.source);
    EXPECT_NE(x.negative, inj.sink);
  }
}

TEST(TankProtocol, FiftyFourInjections) {
  const auto p = tank_protocol({1, 5, 9, 13}, 16);
  EXPECT_EQ(p.num_injections(), 54);
  std::set<std::pair<int, int>> pairs;
  for (const auto& inj : p.injections()) pairs.insert({std::min(inj.source, inj.sink), std::max(inj.source, inj.sink)});
  EXPECT_EQ(pairs.size(), 54u);
  EXPECT_EQ(p.num_measurements(), 54 * 16);
  EXPECT_THROW(tank_protocol({0, 5}, 16), InputError);
  EXPECT_THROW(tank_protocol({}, 16), InputError);
}

TEST(Protocol, CurrentPatternsSumToZero) {
  const auto p = adjacent_protocol(16, false, false, 2.5);
  for (Index i = 0; i < p.num_injections(); ++i) {
    const auto c = p.current_pattern(i);
    EXPECT_DOUBLE_EQ(c.sum(), 0.0);
    EXPECT_DOUBLE_EQ(c.maxCoeff(), 2.5);
  }
}

TEST(Protocol, ValidatesEntries) {
  EXPECT_THROW(StimulationProtocol(4, {{0, 0, 1.0}}, {}), InputError);
  EXPECT_THROW(StimulationProtocol(4, {{0, 1, 0.0}}, {}), InputError);
  EXPECT_THROW(StimulationProtocol(4, {{0, 1, 1.0}}, {{0, 2, 2}}), InputError);
  EXPECT_THROW(StimulationProtocol(4, {{0, 1, 1.0}}, {{1, 2, 3}}), InputError);
  EXPECT_THROW(StimulationProtocol(4, {{0, 1, 1.0}}, {{0, 2, 3}, {0, 2, 3}}), InputError);
}

TEST(Protocol, MeasurementOperatorOrdering) {
  const StimulationProtocol p(3, {{0, 1, 1.0}, {1, 2, 1.0}}, {{0, 0, 2}, {1, 1, 0}});
  Eigen::VectorXd u0(3), u1(3);
  u0 << 1, 2, 4;
  u1 << 8, 16, 32;
  const auto v = measurement_operator(p, {u0, u1});
  EXPECT_DOUBLE_EQ(v(0), -3.0);
  EXPECT_DOUBLE_EQ(v(1), 8.0);
  EXPECT_THROW(measurement_operator(p, {u0}), InputError);
}

TEST(Protocol, SerializationIsCanonical) {
  EXPECT_EQ(adjacent_protocol(16, true, true).serialize(), adjacent_protocol(16, true, true).serialize());
  EXPECT_NE(adjacent_protocol(16, true, true).serialize(), adjacent_protocol(16, true, false).serialize());
}
