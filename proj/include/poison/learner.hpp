#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "poison/core.hpp"

namespace poison {

enum class Schedule { Constant, SlowDecay, FastDecay };

inline const char* to_string(Schedule s) {
  switch (s) {
    case Schedule::Constant: return "constant";
    case Schedule::SlowDecay: return "slow";
    case Schedule::FastDecay: return "fast";
  }
  return "?";
}

inline Schedule parse_schedule(const std::string& s) {
  if (s == "constant") return Schedule::Constant;
  if (s == "slow") return Schedule::SlowDecay;
  if (s == "fast") return Schedule::FastDecay;
  throw ArgumentError("unknown schedule '" + s + "' (expected constant, slow or fast)");
}

struct LearnerConfig {
  Vector w0;
  double lambda = 0.4;
  Schedule schedule = Schedule::SlowDecay;
  double eta0 = 0.1;

  void validate(std::size_t dimension) const {
    if (!(lambda > 0.0)) throw ArgumentError("lambda must be positive");
    if (!(eta0 > 0.0)) throw ArgumentError("eta0 must be positive");
    if (static_cast<std::size_t>(w0.size()) != dimension) {
      throw DimensionError("w0 dimension does not match the stream");
    }
  }
};

/// Iterates w_0 .. w_T of one pass over a stream.
struct Trajectory {
  std::vector<Vector> iterates;

  std::size_t steps() const { return iterates.empty() ? 0 : iterates.size() - 1; }
  const Vector& final() const { return iterates.back(); }
};

// Logistic function, evaluated without overflow for either sign of z.
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// d/dz sigmoid(z) = e^z / (1 + e^z)^2.
inline double sigmoid_slope(double z) { return sigmoid(z) * sigmoid(-z); }

/// Step size for the update that consumes the t-th example (t >= 1).
inline double learning_rate(Schedule schedule, double eta0, double lambda, std::size_t t) {
  if (t == 0) throw ArgumentError("learning_rate: step index starts at 1");
  switch (schedule) {
    case Schedule::Constant: return eta0;
    case Schedule::SlowDecay: return eta0 / std::sqrt(static_cast<double>(t));
    case Schedule::FastDecay: return eta0 / (lambda * static_cast<double>(t));
  }
  return eta0;
}

/// One OGD step on the L2-regularized logistic loss:
/// w' = (1 - eta*lambda) w + eta * y * x * sigmoid(-y w.x)
inline Vector ogd_step(const Vector& w, const LabeledExample& example, double eta, double lambda) {
  if (w.size() != example.x.size()) throw DimensionError("ogd_step: w and x disagree on dimension");
  const double y = example.y;
  const double push = eta * y * sigmoid(-y * w.dot(example.x));
  return (1.0 - eta * lambda) * w + push * example.x;
}

inline Trajectory train_ogd(const DataStream& stream, const LearnerConfig& config) {
  config.validate(stream.dimension());
  Trajectory traj;
  traj.iterates.reserve(stream.size() + 1);
  traj.iterates.push_back(config.w0);
  for (std::size_t t = 0; t < stream.size(); ++t) {
    const double eta = learning_rate(config.schedule, config.eta0, config.lambda, t + 1);
    traj.iterates.push_back(ogd_step(traj.iterates.back(), stream[t], eta, config.lambda));
  }
  return traj;
}

// log(1 + e^z) without overflow.
inline double log1p_exp(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

struct OfflineFit {
  Vector w;
  bool converged = false;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
};

namespace detail {

inline double regularized_risk(const Vector& w, const Dataset& data, double lambda) {
  double sum = 0.0;
  for (const auto& e : data) sum += log1p_exp(-e.y * w.dot(e.x));
  return sum / static_cast<double>(data.size()) + 0.5 * lambda * w.squaredNorm();
}

inline Vector regularized_risk_gradient(const Vector& w, const Dataset& data, double lambda) {
  Vector g = Vector::Zero(w.size());
  for (const auto& e : data) g -= (e.y * sigmoid(-e.y * w.dot(e.x))) * e.x;
  return g / static_cast<double>(data.size()) + lambda * w;
}

// Full-batch gradient descent with Armijo backtracking (step halves from 1.0).
inline OfflineFit fit_logreg(const Dataset& data, double lambda, double tol, std::size_t max_iter, Vector w) {
  OfflineFit fit;
  double f = regularized_risk(w, data, lambda);
  Vector g = regularized_risk_gradient(w, data, lambda);
  std::size_t it = 0;
  for (; it < max_iter && g.norm() > tol; ++it) {
    const double gg = g.squaredNorm();
    double step = 1.0;
    Vector next = w - step * g;
    double f_next = regularized_risk(next, data, lambda);
    // The slack term keeps the test meaningful once decreases reach rounding
    // level in f.
    const double slack = 4.0 * std::numeric_limits<double>::epsilon() * std::abs(f);
    while (f_next > f - 0.5 * step * gg + slack && step > 1e-20) {
      step *= 0.5;
      next = w - step * g;
      f_next = regularized_risk(next, data, lambda);
    }
    if (!(f_next <= f + slack)) break;
    w = std::move(next);
    f = f_next;
    g = regularized_risk_gradient(w, data, lambda);
  }
  fit.gradient_norm = g.norm();
  fit.converged = fit.gradient_norm <= tol;
  fit.iterations = it;
  fit.w = std::move(w);
  return fit;
}

}  // namespace detail

/// Minimizer of mean logistic loss + (lambda/2)|w|^2, started at 0.
inline OfflineFit train_offline_logreg(const Dataset& data, double lambda, double tol = 1e-8,
                                       std::size_t max_iter = 10000) {
  if (data.empty()) throw ArgumentError("train_offline_logreg: empty data");
  if (!(lambda > 0.0)) throw ArgumentError("train_offline_logreg: lambda must be positive");
  return detail::fit_logreg(data, lambda, tol, max_iter, Vector::Zero(data.front().x.size()));
}

inline double test_accuracy(const Vector& w, const Dataset& data) {
  if (data.empty()) throw ArgumentError("test_accuracy: empty data");
  std::size_t correct = 0;
  for (const auto& e : data) {
    if (sign(w.dot(e.x)) == e.y) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace poison
