#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "poison/core.hpp"
#include "poison/gradient.hpp"
#include "poison/learner.hpp"
#include "poison/objective.hpp"

namespace poison {

enum class AttackKind { Incremental, Interval, TeachAndReinforce, LabelFlip, OfflineBaseline, None };
enum class FlipStrategy { Head, Tail, Random };

inline const char* to_string(AttackKind k) {
  switch (k) {
    case AttackKind::Incremental: return "incremental";
    case AttackKind::Interval: return "interval";
    case AttackKind::TeachAndReinforce: return "teach";
    case AttackKind::LabelFlip: return "labelflip";
    case AttackKind::OfflineBaseline: return "offline";
    case AttackKind::None: return "none";
  }
  return "?";
}

inline AttackKind parse_attack(const std::string& s) {
  if (s == "incremental") return AttackKind::Incremental;
  if (s == "interval") return AttackKind::Interval;
  if (s == "teach") return AttackKind::TeachAndReinforce;
  if (s == "labelflip") return AttackKind::LabelFlip;
  if (s == "offline") return AttackKind::OfflineBaseline;
  if (s == "none") return AttackKind::None;
  throw ArgumentError("unknown attack '" + s + "'");
}

inline const char* to_string(FlipStrategy f) {
  switch (f) {
    case FlipStrategy::Head: return "head";
    case FlipStrategy::Tail: return "tail";
    case FlipStrategy::Random: return "random";
  }
  return "?";
}

inline FlipStrategy parse_flip_strategy(const std::string& s) {
  if (s == "head") return FlipStrategy::Head;
  if (s == "tail") return FlipStrategy::Tail;
  if (s == "random") return FlipStrategy::Random;
  throw ArgumentError("unknown flip strategy '" + s + "'");
}

struct AttackSpec {
  AttackKind kind = AttackKind::Incremental;
  std::size_t budget = 0;  // K
  // Gradient-ascent base step; unset means sqrt(d)/100.
  std::optional<double> eps0;
  std::size_t max_iter = 100;
  // Interval window stride; unset means max(1, floor(T/40)).
  std::optional<std::size_t> interval_stride;
  double alpha = 0.0;
  FlipStrategy flip_strategy = FlipStrategy::Head;
  std::uint64_t seed = 0;
};

struct AttackResult {
  DataStream poisoned;
  std::vector<std::size_t> modified_indices;
  std::vector<double> objective_trace;
  std::size_t iterations_used = 0;
  double objective = 0.0;  // attacker objective on the poisoned stream
  // Interval: objective reached by each scanned window, in scan order.
  std::vector<double> candidate_objectives;
  std::vector<std::size_t> candidate_starts;
  bool hessian_damped = false;  // offline baseline only
};

inline double default_eps0(std::size_t d) { return std::sqrt(static_cast<double>(d)) / 100.0; }

/// eps_n = eps0 / sqrt(1 + n/20)
inline double step_size(double eps0, std::size_t n_iter) {
  return eps0 / std::sqrt(1.0 + static_cast<double>(n_iter) / 20.0);
}

inline double stream_objective(const DataStream& stream, const ObjectiveSpec& obj, const LearnerConfig& config) {
  return objective_value(train_ogd(stream, config), obj);
}

namespace detail {

inline double resolve_eps0(const AttackSpec& spec, std::size_t d) {
  const double eps0 = spec.eps0.value_or(default_eps0(d));
  if (!(eps0 > 0.0)) throw ArgumentError("eps0 must be positive");
  return eps0;
}

inline void check_budget(std::size_t K, std::size_t T) {
  if (K > T) throw ArgumentError("budget K=" + std::to_string(K) + " exceeds stream length " + std::to_string(T));
}

inline AttackResult unchanged(const DataStream& stream, const ObjectiveSpec& obj, const LearnerConfig& config) {
  AttackResult r{stream, {}, {}, 0, stream_objective(stream, obj, config), {}, {}, false};
  return r;
}

struct Ascent {
  DataStream stream;
  std::vector<double> trace;
  std::size_t iterations = 0;
};

// Projected gradient ascent on a fixed set of positions. The trace holds the
// objective before each outer iteration followed by the final value.
inline Ascent ascend_positions(DataStream stream, std::span<const std::size_t> positions, const AttackSpec& spec,
                               const ObjectiveSpec& obj, const LearnerConfig& config) {
  Ascent a{std::move(stream), {}, 0};
  if (positions.empty() || spec.max_iter == 0) return a;
  const double eps0 = resolve_eps0(spec, a.stream.dimension());
  for (std::size_t n = 0; n < spec.max_iter; ++n) {
    const AttackGradients g = attack_gradients(a.stream, config, obj);
    a.trace.push_back(g.objective);
    const double eps = step_size(eps0, n);
    for (const std::size_t p : positions) {
      a.stream.set_features(p, project_feasible(Vector(a.stream[p].x + eps * g.per_point[p])));
    }
    a.iterations = n + 1;
  }
  a.trace.push_back(stream_objective(a.stream, obj, config));
  return a;
}

inline void check_positions(std::span<const std::size_t> positions, std::size_t T) {
  std::vector<std::size_t> sorted(positions.begin(), positions.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ArgumentError("modification positions must be distinct");
  }
  if (!sorted.empty() && sorted.back() >= T) throw ArgumentError("modification position out of range");
}

}  // namespace detail

/// Gradient ascent over the features at `positions`, all other examples and
/// every label held fixed. Gradients are refreshed once per outer iteration.
inline DataStream find_best_modification(const DataStream& stream, std::span<const std::size_t> positions,
                                         const AttackSpec& spec, const ObjectiveSpec& obj,
                                         const LearnerConfig& config) {
  detail::check_positions(positions, stream.size());
  return detail::ascend_positions(stream, positions, spec, obj, config).stream;
}

/// Greedy steepest-coordinate ascent: each iteration moves the single point
/// with the largest gradient norm among those that can still move. Stops
/// before a (K+1)-th distinct point would be touched, after max_iter
/// iterations, or when no point can move.
inline AttackResult incremental_attack(const DataStream& stream, const AttackSpec& spec, const ObjectiveSpec& obj,
                                       const LearnerConfig& config) {
  const std::size_t T = stream.size();
  detail::check_budget(spec.budget, T);
  if (spec.budget == 0 || spec.max_iter == 0) return detail::unchanged(stream, obj, config);
  const double eps0 = detail::resolve_eps0(spec, stream.dimension());

  DataStream current = stream;
  std::vector<bool> touched(T, false);
  std::size_t n_touched = 0;
  std::vector<double> trace;
  std::size_t n = 0;
  while (n < spec.max_iter) {
    const AttackGradients g = attack_gradients(current, config, obj);
    trace.push_back(g.objective);
    // A point pinned against the box by its own gradient cannot move and is
    // passed over.
    const double eps = step_size(eps0, n);
    std::size_t best = 0;
    double best_norm = 0.0;
    Vector best_x;
    for (std::size_t k = 0; k < T; ++k) {
      const double norm = g.per_point[k].norm();
      if (norm <= best_norm) continue;
      Vector moved = project_feasible(Vector(current[k].x + eps * g.per_point[k]));
      if (moved == current[k].x) continue;
      best_norm = norm;
      best = k;
      best_x = std::move(moved);
    }
    if (best_norm <= 0.0) break;
    if (!touched[best] && n_touched == spec.budget) break;
    current.set_features(best, best_x);
    if (!touched[best]) {
      touched[best] = true;
      ++n_touched;
    }
    ++n;
  }

  AttackResult r{current, {}, std::move(trace), n, 0.0, {}, {}, false};
  for (std::size_t k = 0; k < T; ++k) {
    if (touched[k]) r.modified_indices.push_back(k);
  }
  r.objective = stream_objective(r.poisoned, obj, config);
  r.objective_trace.push_back(r.objective);
  return r;
}

/// Window starts scanned by the interval attack: 0, s, 2s, ... up to T-K.
inline std::vector<std::size_t> interval_window_starts(std::size_t T, std::size_t K, std::size_t stride) {
  if (stride == 0) throw ArgumentError("interval stride must be >= 1");
  std::vector<std::size_t> starts;
  for (std::size_t t = 0; t + K <= T; t += stride) starts.push_back(t);
  return starts;
}

inline std::size_t default_interval_stride(std::size_t T) { return std::max<std::size_t>(1, T / 40); }

/// Optimize each contiguous window [t, t+K) independently and keep the
/// candidate with the largest objective (earliest window on ties).
inline AttackResult interval_attack(const DataStream& stream, const AttackSpec& spec, const ObjectiveSpec& obj,
                                    const LearnerConfig& config) {
  const std::size_t T = stream.size();
  const std::size_t K = spec.budget;
  detail::check_budget(K, T);
  if (K == 0) return detail::unchanged(stream, obj, config);
  const std::size_t stride = spec.interval_stride.value_or(default_interval_stride(T));

  std::optional<AttackResult> best;
  std::vector<double> objectives;
  const auto starts = interval_window_starts(T, K, stride);
  for (const std::size_t start : starts) {
    std::vector<std::size_t> window(K);
    std::iota(window.begin(), window.end(), start);
    detail::Ascent a = detail::ascend_positions(stream, window, spec, obj, config);
    const double value = a.trace.empty() ? stream_objective(a.stream, obj, config) : a.trace.back();
    objectives.push_back(value);
    if (!best || value > best->objective) {
      best = AttackResult{std::move(a.stream), window, std::move(a.trace), a.iterations, value, {}, {}, false};
    }
  }
  best->candidate_objectives = std::move(objectives);
  best->candidate_starts = starts;
  return *best;
}

/// First floor(alpha*K) positions, then K - floor(alpha*K) positions spaced
/// s = ceil((T - teach) / reinforce) apart, capped at T-1.
inline std::vector<std::size_t> teach_and_reinforce_positions(std::size_t T, std::size_t K, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in [0, 1)");
  detail::check_budget(K, T);
  std::vector<std::size_t> positions;
  if (K == 0) return positions;
  const auto teach = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(K)));
  const std::size_t reinforce = K - teach;
  const std::size_t stride = (T - teach + reinforce - 1) / reinforce;
  for (std::size_t i = 0; i < teach; ++i) positions.push_back(i);
  for (std::size_t j = 0; j < reinforce; ++j) {
    const std::size_t p = teach + j * stride;
    if (p >= T) break;
    positions.push_back(p);
  }
  return positions;
}

inline AttackResult teach_and_reinforce(const DataStream& stream, const AttackSpec& spec, const ObjectiveSpec& obj,
                                        const LearnerConfig& config) {
  const auto positions = teach_and_reinforce_positions(stream.size(), spec.budget, spec.alpha);
  if (positions.empty()) return detail::unchanged(stream, obj, config);
  detail::Ascent a = detail::ascend_positions(stream, positions, spec, obj, config);
  AttackResult r{std::move(a.stream), positions, std::move(a.trace), a.iterations, 0.0, {}, {}, false};
  r.objective = r.objective_trace.empty() ? stream_objective(r.poisoned, obj, config) : r.objective_trace.back();
  return r;
}

inline std::vector<std::size_t> sample_positions(std::size_t T, std::size_t K, std::uint64_t seed) {
  std::vector<std::size_t> all(T);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(K);
  std::sort(all.begin(), all.end());
  return all;
}

/// Negate K labels at the head, the tail, or seeded random positions.
/// The objective is left at 0; use the overload taking an objective to fill it.
inline AttackResult label_flip_attack(const DataStream& stream, std::size_t K, FlipStrategy strategy,
                                      std::uint64_t seed) {
  const std::size_t T = stream.size();
  detail::check_budget(K, T);
  std::vector<std::size_t> positions;
  switch (strategy) {
    case FlipStrategy::Head:
      for (std::size_t i = 0; i < K; ++i) positions.push_back(i);
      break;
    case FlipStrategy::Tail:
      for (std::size_t i = T - K; i < T; ++i) positions.push_back(i);
      break;
    case FlipStrategy::Random:
      positions = sample_positions(T, K, seed);
      break;
  }
  DataStream poisoned = stream;
  for (const std::size_t p : positions) poisoned.replace(p, LabeledExample(stream[p].x, -stream[p].y));
  return AttackResult{std::move(poisoned), std::move(positions), {}, 0, 0.0, {}, {}, false};
}

/// Regularized-ERM sensitivities at an optimum w of
/// (1/N) sum logistic loss + (lambda/2)|w|^2 over `data`.
struct ErmSensitivity {
  // d w* / d x_c for each requested point, d x d.
  std::vector<Matrix> weight_jacobians;
  bool damped = false;
};

/// Implicit differentiation of the optimality condition:
/// H dw = -(1/N) d(grad loss_c)/dx_c, H = lambda I + (1/N) sum s'(m_i) x_i x_i^T.
inline ErmSensitivity erm_weight_jacobians(const Dataset& data, std::span<const std::size_t> points, const Vector& w,
                                           double lambda) {
  const auto d = w.size();
  const double n = static_cast<double>(data.size());
  Matrix h = lambda * Matrix::Identity(d, d);
  for (const auto& e : data) h.noalias() += (sigmoid_slope(e.y * w.dot(e.x)) / n) * e.x * e.x.transpose();

  ErmSensitivity out;
  Eigen::LDLT<Matrix> solver(h);
  if (solver.info() != Eigen::Success || !solver.isPositive()) {
    out.damped = true;
    solver.compute(h + 1e-6 * Matrix::Identity(d, d));
  }
  for (const std::size_t c : points) {
    const auto& e = data.at(c);
    const double margin = e.y * w.dot(e.x);
    // d/dx of the per-example loss gradient -y s(-m) x.
    Matrix mixed = (-e.y * sigmoid(-margin)) * Matrix::Identity(d, d);
    mixed.noalias() += sigmoid_slope(margin) * e.x * w.transpose();
    out.weight_jacobians.push_back(-solver.solve(mixed) / n);
  }
  return out;
}

/// Order-oblivious baseline: K poison points are shaped by gradient ascent of
/// the inverted-validation objective against the offline ERM classifier
/// trained on clean stream plus poison, then written over K random positions.
inline AttackResult offline_baseline_attack(const DataStream& stream, std::size_t K, const AttackSpec& spec,
                                            const ObjectiveSpec& obj, const LearnerConfig& config,
                                            std::uint64_t seed) {
  const std::size_t T = stream.size();
  detail::check_budget(K, T);
  obj.validate();
  if (K == 0) return detail::unchanged(stream, obj, config);
  const std::size_t d = stream.dimension();
  const double eps0 = detail::resolve_eps0(spec, d);

  std::mt19937_64 rng(seed);
  Dataset pool = stream.examples();
  std::vector<std::size_t> poison_idx;
  for (std::size_t j = 0; j < K; ++j) {
    const int label = j % 2 == 0 ? +1 : -1;
    // Start from a clean point of the opposite class, relabelled.
    std::vector<std::size_t> opposite;
    for (std::size_t t = 0; t < T; ++t) {
      if (stream[t].y == -label) opposite.push_back(t);
    }
    const std::size_t src = opposite.empty() ? std::uniform_int_distribution<std::size_t>(0, T - 1)(rng)
                                             : opposite[std::uniform_int_distribution<std::size_t>(
                                                   0, opposite.size() - 1)(rng)];
    poison_idx.push_back(pool.size());
    pool.emplace_back(stream[src].x, label);
  }

  AttackResult r{stream, {}, {}, 0, 0.0, {}, {}, false};
  Vector w = Vector::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t n = 0; n < spec.max_iter; ++n) {
    w = detail::fit_logreg(pool, config.lambda, 1e-8, 5000, w).w;
    r.objective_trace.push_back(objective_at(w, obj.inverted_validation));
    const Vector outer = grad_obj_wrt_w(w, obj.inverted_validation);
    const ErmSensitivity sens = erm_weight_jacobians(pool, poison_idx, w, config.lambda);
    r.hessian_damped = r.hessian_damped || sens.damped;
    // Unit-direction steps of length eps_n * sqrt(d): the raw implicit
    // gradient carries a 1/N factor that would stall fixed-size steps.
    const double eps = step_size(eps0, n) * std::sqrt(static_cast<double>(d));
    for (std::size_t j = 0; j < K; ++j) {
      const Vector g = sens.weight_jacobians[j].transpose() * outer;
      const double norm = g.norm();
      if (norm == 0.0) continue;
      auto& p = pool[poison_idx[j]];
      p.x = project_feasible(Vector(p.x + (eps / norm) * g));
    }
    r.iterations_used = n + 1;
  }

  r.modified_indices = sample_positions(T, K, rng());
  for (std::size_t j = 0; j < K; ++j) r.poisoned.replace(r.modified_indices[j], pool[poison_idx[j]]);
  r.objective = stream_objective(r.poisoned, obj, config);
  return r;
}

/// Dispatch on spec.kind. Label flip uses spec.flip_strategy and spec.seed;
/// the offline baseline uses spec.seed.
inline AttackResult run_attack(const DataStream& stream, const AttackSpec& spec, const ObjectiveSpec& obj,
                               const LearnerConfig& config) {
  switch (spec.kind) {
    case AttackKind::Incremental: return incremental_attack(stream, spec, obj, config);
    case AttackKind::Interval: return interval_attack(stream, spec, obj, config);
    case AttackKind::TeachAndReinforce: return teach_and_reinforce(stream, spec, obj, config);
    case AttackKind::LabelFlip: {
      AttackResult r = label_flip_attack(stream, spec.budget, spec.flip_strategy, spec.seed);
      r.objective = stream_objective(r.poisoned, obj, config);
      return r;
    }
    case AttackKind::OfflineBaseline:
      return offline_baseline_attack(stream, spec.budget, spec, obj, config, spec.seed);
    case AttackKind::None: return detail::unchanged(stream, obj, config);
  }
  return detail::unchanged(stream, obj, config);
}

}  // namespace poison
