#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "poison/gradient.hpp"

namespace poison {

struct GradientCheckReport {
  std::size_t instances = 0;
  double max_relative_error = 0.0;  // attack_gradients vs central differences
  double max_prefix_gap = 0.0;      // attack_gradients vs attack_gradients_naive, absolute
};

namespace detail {

inline DataStream random_check_stream(std::mt19937_64& rng, std::size_t T, std::size_t d) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  Dataset data;
  for (std::size_t t = 0; t < T; ++t) {
    Vector x(static_cast<Eigen::Index>(d));
    for (auto& v : x) v = u(rng);
    data.emplace_back(std::move(x), coin(rng) ? 1 : -1);
  }
  return DataStream(std::move(data));
}

inline double relative_error(const Vector& got, const Vector& want, double abs_floor) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < got.size(); ++j) {
    const double diff = std::abs(got[j] - want[j]);
    const double scale = std::max({std::abs(got[j]), std::abs(want[j]), abs_floor});
    worst = std::max(worst, diff / scale);
  }
  return worst;
}

}  // namespace detail

/// Finite-difference and prefix/naive agreement over random instances,
/// alternating semi- and fully-online objectives and cycling schedules.
inline GradientCheckReport check_gradients(std::size_t instances = 20, std::size_t T = 25, std::size_t d = 5,
                                           std::uint64_t seed = 0) {
  GradientCheckReport rep;
  rep.instances = instances;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const Schedule schedules[] = {Schedule::Constant, Schedule::SlowDecay, Schedule::FastDecay};
  for (std::size_t k = 0; k < instances; ++k) {
    const DataStream stream = detail::random_check_stream(rng, T, d);
    Vector w0(static_cast<Eigen::Index>(d));
    for (auto& v : w0) v = u(rng);
    const LearnerConfig config{w0, 0.4, schedules[(k / 2) % 3], 0.3};
    const ObjectiveSpec spec{k % 2 == 0 ? Setting::SemiOnline : Setting::FullyOnline,
                             invert_labels(detail::random_check_stream(rng, 12, d).examples()), 5};
    const AttackGradients g = attack_gradients(stream, config, spec);
    const AttackGradients naive = attack_gradients_naive(stream, config, spec);
    for (std::size_t i = 0; i < T; ++i) {
      rep.max_prefix_gap = std::max(rep.max_prefix_gap, (g.per_point[i] - naive.per_point[i]).cwiseAbs().maxCoeff());
      Vector fd(static_cast<Eigen::Index>(d));
      for (Eigen::Index j = 0; j < fd.size(); ++j) {
        const double h = 1e-5 * std::max(1.0, std::abs(stream[i].x[j]));
        DataStream plus = stream, minus = stream;
        Vector xp = stream[i].x, xm = stream[i].x;
        xp[j] += h;
        xm[j] -= h;
        plus.set_features(i, xp);
        minus.set_features(i, xm);
        fd[j] = (objective_value(train_ogd(plus, config), spec) - objective_value(train_ogd(minus, config), spec)) /
                (2.0 * h);
      }
      rep.max_relative_error = std::max(rep.max_relative_error, detail::relative_error(g.per_point[i], fd, 1e-8));
    }
  }
  return rep;
}

}  // namespace poison
