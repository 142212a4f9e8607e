#pragma once

#include <vector>

#include "poison/core.hpp"
#include "poison/learner.hpp"
#include "poison/objective.hpp"

namespace poison {

/// d(objective)/d(x_i) for every stream position, plus the objective value of
/// the trajectory the gradients were taken on.
struct AttackGradients {
  std::vector<Vector> per_point;
  double objective = 0.0;
};

/// Gradient in w of the summed negative logistic loss over the inverted set.
inline Vector grad_obj_wrt_w(const Vector& w, const Dataset& s_inv) {
  Vector g = Vector::Zero(w.size());
  for (const auto& e : s_inv) {
    if (e.x.size() != w.size()) throw DimensionError("grad_obj_wrt_w: dimension mismatch");
    g += (e.y * sigmoid(-e.y * w.dot(e.x))) * e.x;
  }
  return g;
}

/// Jacobian of ogd_step with respect to its weight argument (symmetric).
inline Matrix jac_step_wrt_w(const Vector& w, const LabeledExample& example, double eta, double lambda) {
  const auto d = w.size();
  const double curvature = sigmoid_slope(example.y * w.dot(example.x));
  Matrix j = (1.0 - eta * lambda) * Matrix::Identity(d, d);
  j.noalias() -= (eta * curvature) * example.x * example.x.transpose();
  return j;
}

/// Jacobian of ogd_step with respect to the example's feature vector.
inline Matrix jac_step_wrt_x(const Vector& w, const LabeledExample& example, double eta) {
  const auto d = w.size();
  const double margin = example.y * w.dot(example.x);
  Matrix j = (eta * example.y * sigmoid(-margin)) * Matrix::Identity(d, d);
  j.noalias() -= (eta * sigmoid_slope(margin)) * example.x * w.transpose();
  return j;
}

namespace detail {

inline double step_rate(const LearnerConfig& config, std::size_t consumed_index) {
  return learning_rate(config.schedule, config.eta0, config.lambda, consumed_index + 1);
}

}  // namespace detail

/// All per-point gradients from one backward sweep over the trajectory.
///
/// `prefix` holds the gradient of the scored part of the objective with
/// respect to w_{i+1}. Walking i from T-1 down to 0 it picks up the direct
/// term of w_{i+1} when that time is scored, emits prefix * dw_{i+1}/dx_i, and
/// is then pulled back through dw_{i+1}/dw_i. One O(d^2) product per step.
inline AttackGradients attack_gradients(const DataStream& stream, const LearnerConfig& config,
                                        const ObjectiveSpec& spec) {
  spec.validate();
  const Trajectory traj = train_ogd(stream, config);
  const std::size_t T = stream.size();
  const auto scored = scored_times(T, spec);

  AttackGradients out;
  out.per_point.assign(T, Vector::Zero(static_cast<Eigen::Index>(stream.dimension())));
  out.objective = objective_value(traj, spec);

  Eigen::RowVectorXd prefix = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(stream.dimension()));
  for (std::size_t i = T; i-- > 0;) {
    if (scored[i + 1]) prefix += grad_obj_wrt_w(traj.iterates[i + 1], spec.inverted_validation).transpose();
    const double eta = detail::step_rate(config, i);
    out.per_point[i] = (prefix * jac_step_wrt_x(traj.iterates[i], stream[i], eta)).transpose();
    if (i > 0) prefix = prefix * jac_step_wrt_w(traj.iterates[i], stream[i], eta, config.lambda);
  }
  return out;
}

/// Reference implementation: every (i, t) chain product evaluated from
/// scratch, O(T^2 d^2) per scored time. Used to check attack_gradients.
inline AttackGradients attack_gradients_naive(const DataStream& stream, const LearnerConfig& config,
                                              const ObjectiveSpec& spec) {
  spec.validate();
  const Trajectory traj = train_ogd(stream, config);
  const std::size_t T = stream.size();
  const auto scored = scored_times(T, spec);

  AttackGradients out;
  out.per_point.assign(T, Vector::Zero(static_cast<Eigen::Index>(stream.dimension())));
  out.objective = objective_value(traj, spec);

  for (std::size_t t = 1; t <= T; ++t) {
    if (!scored[t]) continue;
    const Eigen::RowVectorXd direct = grad_obj_wrt_w(traj.iterates[t], spec.inverted_validation).transpose();
    for (std::size_t i = 0; i < t; ++i) {
      Eigen::RowVectorXd chain = direct;
      for (std::size_t s = t - 1; s > i; --s) {
        chain = chain * jac_step_wrt_w(traj.iterates[s], stream[s], detail::step_rate(config, s), config.lambda);
      }
      const Matrix jx = jac_step_wrt_x(traj.iterates[i], stream[i], detail::step_rate(config, i));
      out.per_point[i] += (chain * jx).transpose();
    }
  }
  return out;
}

}  // namespace poison
