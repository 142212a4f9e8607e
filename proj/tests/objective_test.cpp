#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "poison/objective.hpp"
#include "support/oracles.hpp"

namespace poison {
namespace {

TEST(NegLogisticLoss, AtZeroWeights) {
  EXPECT_NEAR(neg_logistic_loss(Vector::Zero(3), LabeledExample(Vector::Ones(3), 1)), -std::log(2.0), 1e-15);
}

TEST(NegLogisticLoss, LargeMarginIsStable) {
  Vector w(2), x(2);
  w << 10.0, 0.0;
  x << 1.0, 0.0;
  EXPECT_NEAR(neg_logistic_loss(w, LabeledExample(x, 1)), -std::log1p(std::exp(-10.0)), 1e-18);
  EXPECT_NEAR(neg_logistic_loss(w, LabeledExample(x, 1)), -4.5398899e-5, 1e-12);
  w << 1000.0, 0.0;
  EXPECT_NEAR(neg_logistic_loss(w, LabeledExample(x, -1)), -1000.0, 1e-9);
  EXPECT_LT(neg_logistic_loss(w, LabeledExample(x, 1)), 0.0 + 1e-300);
}

TEST(NegLogisticLoss, FlipSymmetryAndMonotonicity) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 100; ++k) {
    const Vector w = testing::random_vector(rng, 4, -3.0, 3.0);
    const LabeledExample e(testing::random_vector(rng, 4), testing::random_label(rng));
    EXPECT_EQ(neg_logistic_loss(w, e), neg_logistic_loss(-w, LabeledExample(e.x, -e.y)));
    EXPECT_LT(neg_logistic_loss(w, e), 0.0);
    // Moving w along y*x raises the margin.
    EXPECT_LT(neg_logistic_loss(w, e), neg_logistic_loss(w + 0.1 * e.y * e.x, e));
  }
}

TEST(InvertLabels, NegatesEveryLabel) {
  const Dataset d{{Vector::Ones(2), 1}, {Vector::Zero(2), -1}};
  const Dataset inv = invert_labels(d);
  EXPECT_EQ(inv[0].y, -1);
  EXPECT_EQ(inv[1].y, 1);
  EXPECT_EQ(inv[0].x, d[0].x);
  EXPECT_EQ(invert_labels(inv), d);
  EXPECT_TRUE(invert_labels({}).empty());
}

TEST(ObjectiveValue, SemiOnlineSinglePointAtZero) {
  Trajectory traj{{Vector::Ones(2), Vector::Zero(2)}};
  ObjectiveSpec spec{Setting::SemiOnline, {{Vector::Ones(2), -1}}, 10};
  EXPECT_NEAR(objective_value(traj, spec), -std::log(2.0), 1e-15);
}

TEST(ObjectiveValue, FullyOnlineCollapsesWhenGridExceedsLength) {
  const auto inst = testing::random_instance(2, 12, 3, Setting::FullyOnline, Schedule::SlowDecay, 40);
  const Trajectory traj = train_ogd(inst.stream, inst.config);
  ObjectiveSpec semi = inst.spec;
  semi.setting = Setting::SemiOnline;
  EXPECT_EQ(objective_value(traj, inst.spec), objective_value(traj, semi));
}

TEST(ObjectiveValue, FullyOnlineSumsGridTimes) {
  const auto inst = testing::random_instance(3, 30, 2, Setting::FullyOnline, Schedule::SlowDecay, 10);
  const Trajectory traj = train_ogd(inst.stream, inst.config);
  double expected = 0.0;
  for (std::size_t t : {10u, 20u, 30u}) {
    for (const auto& e : inst.spec.inverted_validation) expected += neg_logistic_loss(traj.iterates[t], e);
  }
  EXPECT_NEAR(objective_value(traj, inst.spec), expected, 1e-12);
}

TEST(ObjectiveValue, GridIncludesFinalTime) {
  ObjectiveSpec spec{Setting::FullyOnline, {{Vector::Ones(1), 1}}, 10};
  const auto scored = scored_times(25, spec);
  std::vector<std::size_t> times;
  for (std::size_t t = 0; t < scored.size(); ++t) {
    if (scored[t]) times.push_back(t);
  }
  EXPECT_EQ(times, (std::vector<std::size_t>{10, 20, 25}));
}

TEST(ObjectiveValue, NegationInvariance) {
  for (const auto setting : {Setting::SemiOnline, Setting::FullyOnline}) {
    const auto inst = testing::random_instance(4, 25, 3, setting);
    ObjectiveSpec negated = inst.spec;
    for (auto& e : negated.inverted_validation) e = LabeledExample(-e.x, -e.y);
    const double a = objective_value(train_ogd(inst.stream, inst.config), inst.spec);
    const double b = objective_value(train_ogd(negate_stream(inst.stream), inst.config), negated);
    EXPECT_EQ(a, b);
    EXPECT_LT(a, 0.0);
  }
}

TEST(ObjectiveValue, Errors) {
  Trajectory short_traj{{Vector::Zero(1)}};
  ObjectiveSpec spec{Setting::SemiOnline, {{Vector::Ones(1), 1}}, 10};
  EXPECT_THROW(objective_value(short_traj, spec), ArgumentError);
  ObjectiveSpec empty{Setting::SemiOnline, {}, 10};
  EXPECT_THROW(objective_value(Trajectory{{Vector::Zero(1), Vector::Zero(1)}}, empty), ArgumentError);
}

}  // namespace
}  // namespace poison
