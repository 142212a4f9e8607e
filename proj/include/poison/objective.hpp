#pragma once

#include <string>
#include <vector>

#include "poison/core.hpp"
#include "poison/learner.hpp"

namespace poison {

enum class Setting { SemiOnline, FullyOnline };

inline const char* to_string(Setting s) { return s == Setting::SemiOnline ? "semi" : "fully"; }

inline Setting parse_setting(const std::string& s) {
  if (s == "semi") return Setting::SemiOnline;
  if (s == "fully") return Setting::FullyOnline;
  throw ArgumentError("unknown setting '" + s + "' (expected semi or fully)");
}

/// The attacker's smoothed objective. `inverted_validation` already carries
/// the negated labels.
struct ObjectiveSpec {
  Setting setting = Setting::SemiOnline;
  Dataset inverted_validation;
  std::size_t grid_step = 10;

  void validate() const {
    if (inverted_validation.empty()) throw ArgumentError("objective needs a nonempty inverted validation set");
    if (grid_step == 0) throw ArgumentError("grid_step must be >= 1");
  }
};

/// -log(1 + exp(-y w.x)); always negative, increasing in the margin.
inline double neg_logistic_loss(const Vector& w, const LabeledExample& example) {
  if (w.size() != example.x.size()) throw DimensionError("neg_logistic_loss: dimension mismatch");
  return -log1p_exp(-example.y * w.dot(example.x));
}

inline Dataset invert_labels(const Dataset& data) {
  Dataset out;
  out.reserve(data.size());
  for (const auto& e : data) out.emplace_back(e.x, -e.y);
  return out;
}

/// Times t in [1, T] whose iterate w_t enters the objective. Semi-online
/// scores only T; fully-online scores multiples of grid_step plus T.
inline std::vector<bool> scored_times(std::size_t T, const ObjectiveSpec& spec) {
  std::vector<bool> scored(T + 1, false);
  if (T == 0) return scored;
  scored[T] = true;
  if (spec.setting == Setting::FullyOnline) {
    for (std::size_t t = spec.grid_step; t <= T; t += spec.grid_step) scored[t] = true;
  }
  return scored;
}

inline double objective_at(const Vector& w, const Dataset& inverted_validation) {
  double sum = 0.0;
  for (const auto& e : inverted_validation) sum += neg_logistic_loss(w, e);
  return sum;
}

inline double objective_value(const Trajectory& traj, const ObjectiveSpec& spec) {
  spec.validate();
  if (traj.iterates.size() < 2) throw ArgumentError("objective_value: trajectory needs at least one step");
  const std::size_t T = traj.steps();
  const auto scored = scored_times(T, spec);
  double total = 0.0;
  for (std::size_t t = 1; t <= T; ++t) {
    if (scored[t]) total += objective_at(traj.iterates[t], spec.inverted_validation);
  }
  return total;
}

}  // namespace poison
