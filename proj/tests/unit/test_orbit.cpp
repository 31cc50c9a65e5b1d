#include <gtest/gtest.h>

#include "srn/errors.hpp"
#include "srn/orbit.hpp"

namespace srn {
namespace {

TEST(Orbit, ClassParameters) {
  EXPECT_EQ(orbit::kClassParams, (std::array<double, 5>{2.5, 3.5, 4.0, 4.1, 4.3}));
}

TEST(Orbit, OriginIsFixedPoint) {
  for (double r : orbit::kClassParams) {
    const auto cloud = orbit::generate_orbit({r, 5, 0, Point2{0.0, 0.0}});
    ASSERT_EQ(cloud.size(), 5u);
    for (const auto& p : cloud) EXPECT_EQ(p, (Point2{0.0, 0.0}));
  }
}

TEST(Orbit, HandEvaluatedStep) {
  // x1 = 0.5 + 2.5 * 0.25 = 1.125 -> 0.125;
  // y1 = 0.5 + 2.5 * 0.125 * 0.875 = 0.7734375.
  const auto cloud = orbit::generate_orbit({2.5, 2, 0, Point2{0.5, 0.5}});
  ASSERT_EQ(cloud.size(), 2u);
  EXPECT_EQ(cloud[0], (Point2{0.5, 0.5}));
  EXPECT_DOUBLE_EQ(cloud[1].x, 0.125);
  EXPECT_DOUBLE_EQ(cloud[1].y, 0.7734375);
}

TEST(Orbit, FirstPointIsStartAndCoordinatesInUnitInterval) {
  const auto cloud = orbit::generate_orbit({4.3, 500, 7, Point2{0.3, 0.9}});
  EXPECT_EQ(cloud.front(), (Point2{0.3, 0.9}));
  for (const auto& p : cloud) {
    EXPECT_GE(p.x, 0.0);
    EXPECT_LT(p.x, 1.0);
    EXPECT_GE(p.y, 0.0);
    EXPECT_LT(p.y, 1.0);
  }
}

TEST(Orbit, RejectsInvalidSpecs) {
  EXPECT_THROW(orbit::generate_orbit({0.0, 5, 0, std::nullopt}), ParameterError);
  EXPECT_THROW(orbit::generate_orbit({-1.0, 5, 0, std::nullopt}), ParameterError);
  EXPECT_THROW(orbit::generate_orbit({2.5, 0, 0, std::nullopt}), ParameterError);
  EXPECT_THROW(orbit::generate_orbit({2.5, 5, 0, Point2{1.5, 0.0}}), ParameterError);
  EXPECT_THROW(orbit::generate_orbit({2.5, 5, 0, Point2{0.0, -0.1}}), ParameterError);
}

TEST(Orbit, RandomStartDependsOnSeedOnly) {
  const auto a = orbit::generate_orbit({3.5, 50, 11, std::nullopt});
  const auto b = orbit::generate_orbit({3.5, 50, 11, std::nullopt});
  const auto c = orbit::generate_orbit({3.5, 50, 12, std::nullopt});
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Dataset, SizesLabelsAndClassOrder) {
  const auto data = orbit::generate_dataset(3, 20, 5);
  ASSERT_EQ(data.samples.size(), 15u);
  EXPECT_EQ(data.class_params, std::vector<double>(orbit::kClassParams.begin(), orbit::kClassParams.end()));
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    EXPECT_EQ(data.samples[i].label, static_cast<int>(i / 3));
    EXPECT_EQ(data.samples[i].cloud.size(), 20u);
  }
}

TEST(Dataset, DeterministicAndSamplesReproducibleInIsolation) {
  const auto a = orbit::generate_dataset(4, 30, 99);
  const auto b = orbit::generate_dataset(4, 30, 99);
  for (std::size_t i = 0; i < a.samples.size(); ++i) EXPECT_EQ(a.samples[i].cloud, b.samples[i].cloud);
  // Sample 2 of class 3 regenerated alone.
  const auto& s = a.samples[3 * 4 + 2];
  const auto alone = orbit::generate_orbit({orbit::kClassParams[3], 30, orbit::sample_seed(99, 3, 2), std::nullopt});
  EXPECT_EQ(s.cloud, alone);
}

TEST(Dataset, RejectsEmptyClass) {
  EXPECT_THROW(orbit::generate_dataset(0, 10, 1), ParameterError);
}

}  // namespace
}  // namespace srn
