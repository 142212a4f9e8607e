#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "poison/attacks.hpp"
#include "poison/core.hpp"
#include "poison/datasets.hpp"
#include "poison/learner.hpp"
#include "poison/objective.hpp"

namespace poison {

/// Where the data comes from. Synthetic class means sit at +-mean_norm along
/// the all-ones direction, so every dimension has the same class separation.
struct DatasetSource {
  std::string kind = "synthetic";  // synthetic | csv
  std::size_t dim = 2;
  double mean_norm = std::sqrt(0.5);  // (0.5, 0.5) in two dimensions
  double sigma = 0.3;

  std::string path;
  std::variant<std::string, std::size_t> label_column = std::size_t{0};
  std::string positive_token = "1";
  std::optional<std::string> negative_token;
  std::optional<std::size_t> project_dim;

  std::size_t train_n = 400;
  std::size_t valid_n = 200;
  std::optional<std::size_t> test_n;  // synthetic default 1000, csv default: rest
};

struct ExperimentConfig {
  DatasetSource dataset;
  Setting setting = Setting::SemiOnline;
  Schedule schedule = Schedule::SlowDecay;
  std::optional<double> eta0;  // default 0.005 for Constant, 0.1 otherwise
  double lambda = 0.4;
  std::size_t grid_step = 10;

  AttackSpec attack;  // budget and seed are filled per cell
  // Teach-and-Reinforce picks the alpha with the best attacker objective.
  std::vector<double> teach_alphas{0.0, 0.25, 0.5, 0.75};
  // Label flip: unset tries head, tail and random and keeps the lowest
  // attacked accuracy.
  std::optional<FlipStrategy> flip_strategy;

  std::vector<double> budget_fractions{0.0, 0.1, 0.2, 0.3, 0.4};
  std::size_t repeats = 8;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string out_dir = "out";
  // Histogram pools every row with K > 0 unless a single fraction is named.
  std::optional<double> histogram_budget_fraction;

  double resolved_eta0() const { return eta0.value_or(schedule == Schedule::Constant ? 0.005 : 0.1); }

  void validate() const {
    if (repeats == 0) throw ArgumentError("repeats must be >= 1");
    for (const double f : budget_fractions) {
      if (!(f >= 0.0 && f <= 1.0)) throw ArgumentError("budget fractions must lie in [0, 1]");
    }
    if (!(lambda > 0.0)) throw ArgumentError("lambda must be positive");
    if (!(resolved_eta0() > 0.0)) throw ArgumentError("eta0 must be positive");
    if (grid_step == 0) throw ArgumentError("grid_step must be >= 1");
    if (dataset.kind != "synthetic" && dataset.kind != "csv") {
      throw ArgumentError("dataset kind must be synthetic or csv");
    }
    if (teach_alphas.empty()) throw ArgumentError("teach_alphas must not be empty");
  }
};

struct ReportRow {
  double budget_fraction = 0.0;
  std::size_t run_id = 0;
  std::size_t budget = 0;
  double clean_accuracy = 0.0;
  double attacked_accuracy = 0.0;
  double objective = 0.0;
  std::string variant;  // chosen alpha or flip strategy, empty otherwise
  std::vector<std::size_t> modified_indices;
};

struct Histogram {
  std::vector<double> frequency;
  std::size_t total = 0;
  bool empty() const { return total == 0; }
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  Histogram histogram;
  std::size_t stream_length = 0;
};

/// Bin b counts indices in [b*T/bins, (b+1)*T/bins), normalized by the total
/// count. No indices gives an all-zero histogram with total = 0.
inline Histogram position_histogram(const std::vector<std::size_t>& indices, std::size_t T, std::size_t bins = 20) {
  if (T == 0 || bins == 0) throw ArgumentError("position_histogram: T and bins must be positive");
  Histogram h{std::vector<double>(bins, 0.0), indices.size()};
  for (const std::size_t i : indices) {
    if (i >= T) throw ArgumentError("position_histogram: index " + std::to_string(i) + " outside [0, T)");
    h.frequency[(i * bins) / T] += 1.0;
  }
  if (h.total > 0) {
    for (auto& f : h.frequency) f /= static_cast<double>(h.total);
  }
  return h;
}

namespace detail {

inline DatasetBundle build_bundle(const DatasetSource& src, std::uint64_t seed) {
  if (src.kind == "synthetic") {
    const std::size_t test_n = src.test_n.value_or(1000);
    const std::size_t n = 2 * src.train_n + src.valid_n + test_n;
    const double per_coord = src.mean_norm / std::sqrt(static_cast<double>(src.dim));
    const Dataset all = gen_gaussian_mixture(static_cast<std::int64_t>(n), src.dim, Vector::Constant(src.dim, per_coord),
                                             Vector::Constant(src.dim, -per_coord), src.sigma, seed);
    return split(all, src.train_n, src.valid_n, test_n, seed);
  }
  CsvOptions opts;
  opts.label_column = src.label_column;
  opts.positive_token = src.positive_token;
  opts.negative_token = src.negative_token;
  Dataset all = load_csv(src.path, opts);
  // The projection matrix is a property of the dataset, not of the repeat.
  if (src.project_dim) all = random_projection(all, *src.project_dim, 0x5eedULL);
  return split(all, src.train_n, src.valid_n, src.test_n, seed);
}

// SemiOnline: accuracy of w_T. FullyOnline: mean accuracy over scored times.
inline double reported_accuracy(const Trajectory& traj, const Dataset& test, const ObjectiveSpec& spec) {
  if (spec.setting == Setting::SemiOnline) return test_accuracy(traj.final(), test);
  const auto scored = scored_times(traj.steps(), spec);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 1; t < scored.size(); ++t) {
    if (!scored[t]) continue;
    sum += test_accuracy(traj.iterates[t], test);
    ++count;
  }
  return sum / static_cast<double>(count);
}

inline std::string format_alpha(double a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "alpha=%g", a);
  return buf;
}

struct CellOutcome {
  AttackResult result;
  double accuracy = 0.0;
  std::string variant;
};

inline CellOutcome run_cell(const ExperimentConfig& cfg, const DataStream& stream, const Dataset& test,
                            const ObjectiveSpec& obj, const LearnerConfig& learner, std::size_t K,
                            std::uint64_t cell_seed) {
  AttackSpec spec = cfg.attack;
  spec.budget = K;
  spec.seed = cell_seed;
  auto evaluate = [&](AttackResult r, std::string variant) {
    const double acc = reported_accuracy(train_ogd(r.poisoned, learner), test, obj);
    return CellOutcome{std::move(r), acc, std::move(variant)};
  };

  if (K == 0 || spec.kind == AttackKind::None) {
    spec.kind = AttackKind::None;
    return evaluate(run_attack(stream, spec, obj, learner), "");
  }
  if (spec.kind == AttackKind::TeachAndReinforce) {
    std::optional<CellOutcome> best;
    for (const double alpha : cfg.teach_alphas) {
      spec.alpha = alpha;
      AttackResult r = run_attack(stream, spec, obj, learner);
      if (!best || r.objective > best->result.objective) best = evaluate(std::move(r), format_alpha(alpha));
    }
    return std::move(*best);
  }
  if (spec.kind == AttackKind::LabelFlip) {
    std::vector<FlipStrategy> strategies{FlipStrategy::Head, FlipStrategy::Tail, FlipStrategy::Random};
    if (cfg.flip_strategy) strategies = {*cfg.flip_strategy};
    std::optional<CellOutcome> best;
    for (const auto s : strategies) {
      spec.flip_strategy = s;
      CellOutcome c = evaluate(run_attack(stream, spec, obj, learner), to_string(s));
      if (!best || c.accuracy < best->accuracy) best = std::move(c);
    }
    return std::move(*best);
  }
  return evaluate(run_attack(stream, spec, obj, learner), "");
}

inline std::vector<ReportRow> run_repeat(const ExperimentConfig& cfg, std::size_t r) {
  const std::uint64_t seed = cfg.seed + r;
  const DatasetBundle bundle = build_bundle(cfg.dataset, seed);
  const DataStream& stream = bundle.train_stream;
  const LearnerConfig learner{train_offline_logreg(bundle.init_heldout, cfg.lambda).w, cfg.lambda, cfg.schedule,
                              cfg.resolved_eta0()};
  const ObjectiveSpec obj{cfg.setting, invert_labels(bundle.validation), cfg.grid_step};
  const double clean = reported_accuracy(train_ogd(stream, learner), bundle.test, obj);

  std::vector<ReportRow> rows;
  for (std::size_t b = 0; b < cfg.budget_fractions.size(); ++b) {
    const double f = cfg.budget_fractions[b];
    const auto K = static_cast<std::size_t>(std::llround(f * static_cast<double>(stream.size())));
    const std::uint64_t cell_seed = seed * 1000003ULL + b;
    CellOutcome c = run_cell(cfg, stream, bundle.test, obj, learner, K, cell_seed);
    rows.push_back(ReportRow{f, r, K, clean, c.accuracy, c.result.objective, std::move(c.variant),
                             std::move(c.result.modified_indices)});
  }
  return rows;
}

}  // namespace detail

/// Repeats run on up to cfg.workers threads; rows come back ordered by
/// (budget fraction, run id) regardless of scheduling.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<ReportRow>> per_repeat(cfg.repeats);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t r = next++; r < cfg.repeats; r = next++) {
      try {
        per_repeat[r] = detail::run_repeat(cfg, r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(cfg.workers, cfg.repeats));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentReport report;
  report.stream_length = cfg.dataset.train_n;
  for (std::size_t b = 0; b < cfg.budget_fractions.size(); ++b) {
    for (std::size_t r = 0; r < cfg.repeats; ++r) report.rows.push_back(per_repeat[r][b]);
  }
  std::vector<std::size_t> pooled;
  for (const auto& row : report.rows) {
    if (row.budget == 0) continue;
    if (cfg.histogram_budget_fraction && row.budget_fraction != *cfg.histogram_budget_fraction) continue;
    pooled.insert(pooled.end(), row.modified_indices.begin(), row.modified_indices.end());
  }
  report.histogram = position_histogram(pooled, report.stream_length);
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string join_indices(const std::vector<std::size_t>& idx) {
  std::string out;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(idx[i]);
  }
  return out;
}

inline constexpr const char* kResultsHeader =
    "budget_fraction,run_id,budget,clean_accuracy,attacked_accuracy,objective,variant,n_modified,modified_indices";

inline void write_results_csv(const ExperimentReport& report, std::ostream& out) {
  out << kResultsHeader << '\n';
  for (const auto& r : report.rows) {
    out << format_double(r.budget_fraction) << ',' << r.run_id << ',' << r.budget << ','
        << format_double(r.clean_accuracy) << ',' << format_double(r.attacked_accuracy) << ','
        << format_double(r.objective) << ',' << r.variant << ',' << r.modified_indices.size() << ','
        << join_indices(r.modified_indices) << '\n';
  }
}

inline void write_histogram_csv(const Histogram& h, std::ostream& out) {
  out << "bin_index,frequency\n";
  for (std::size_t b = 0; b < h.frequency.size(); ++b) out << b << ',' << format_double(h.frequency[b]) << '\n';
}

/// One parsed results.csv row, enough to rebuild histograms.
struct StoredRow {
  double budget_fraction = 0.0;
  std::size_t budget = 0;
  std::vector<std::size_t> modified_indices;
};

inline std::vector<StoredRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kResultsHeader) {
    throw DataError("results CSV header does not match the expected schema");
  }
  std::vector<StoredRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 9) throw ParseError("results row has " + std::to_string(cells.size()) + " cells", lineno, 0);
    StoredRow row;
    const auto f = detail::parse_double(cells[0]);
    const auto k = detail::parse_double(cells[2]);
    if (!f) throw ParseError("bad budget_fraction", lineno, 0);
    if (!k) throw ParseError("bad budget", lineno, 2);
    row.budget_fraction = *f;
    row.budget = static_cast<std::size_t>(*k);
    std::istringstream idx(cells[8]);
    std::string tok;
    while (std::getline(idx, tok, ';')) {
      const auto v = detail::parse_double(tok);
      if (!v || *v < 0) throw ParseError("bad modified index '" + tok + "'", lineno, 8);
      row.modified_indices.push_back(static_cast<std::size_t>(*v));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Config <-> JSON

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json ds{{"kind", c.dataset.kind},       {"dim", c.dataset.dim},
                    {"mean_norm", c.dataset.mean_norm}, {"sigma", c.dataset.sigma},
                    {"train", c.dataset.train_n},   {"valid", c.dataset.valid_n}};
  if (c.dataset.test_n) ds["test"] = *c.dataset.test_n;
  if (c.dataset.kind == "csv") {
    ds["path"] = c.dataset.path;
    if (const auto* name = std::get_if<std::string>(&c.dataset.label_column)) {
      ds["label_column"] = *name;
    } else {
      ds["label_column"] = std::get<std::size_t>(c.dataset.label_column);
    }
    ds["positive_token"] = c.dataset.positive_token;
    if (c.dataset.negative_token) ds["negative_token"] = *c.dataset.negative_token;
    if (c.dataset.project_dim) ds["project_dim"] = *c.dataset.project_dim;
  }
  nlohmann::json attack{{"kind", to_string(c.attack.kind)}, {"max_iter", c.attack.max_iter},
                        {"teach_alphas", c.teach_alphas},
                        {"flip_strategy", c.flip_strategy ? to_string(*c.flip_strategy) : "best"}};
  if (c.attack.eps0) attack["eps0"] = *c.attack.eps0;
  if (c.attack.interval_stride) attack["interval_stride"] = *c.attack.interval_stride;
  nlohmann::json j{{"dataset", ds},
                   {"setting", to_string(c.setting)},
                   {"schedule", to_string(c.schedule)},
                   {"eta0", c.resolved_eta0()},
                   {"lambda", c.lambda},
                   {"grid_step", c.grid_step},
                   {"attack", attack},
                   {"budget_fractions", c.budget_fractions},
                   {"repeats", c.repeats},
                   {"seed", c.seed},
                   {"workers", c.workers},
                   {"out_dir", c.out_dir}};
  if (c.histogram_budget_fraction) j["histogram_budget_fraction"] = *c.histogram_budget_fraction;
  return j;
}

/// Keys absent from `j` keep the values already in `c`.
inline void apply_json(const nlohmann::json& j, ExperimentConfig& c) {
  static const std::vector<std::string> known{"dataset", "setting",  "schedule", "eta0",    "lambda",
                                              "grid_step", "attack", "budget_fractions", "repeats", "seed",
                                              "workers",  "out_dir", "histogram_budget_fraction"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ArgumentError("unknown config key '" + key + "'");
  }
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    auto& s = c.dataset;
    if (d.contains("kind")) s.kind = d.at("kind").get<std::string>();
    if (d.contains("dim")) s.dim = d.at("dim").get<std::size_t>();
    if (d.contains("mean_norm")) s.mean_norm = d.at("mean_norm").get<double>();
    if (d.contains("sigma")) s.sigma = d.at("sigma").get<double>();
    if (d.contains("train")) s.train_n = d.at("train").get<std::size_t>();
    if (d.contains("valid")) s.valid_n = d.at("valid").get<std::size_t>();
    if (d.contains("test")) s.test_n = d.at("test").get<std::size_t>();
    if (d.contains("path")) s.path = d.at("path").get<std::string>();
    if (d.contains("label_column")) {
      const auto& lc = d.at("label_column");
      if (lc.is_string()) {
        s.label_column = lc.get<std::string>();
      } else {
        s.label_column = lc.get<std::size_t>();
      }
    }
    if (d.contains("positive_token")) s.positive_token = d.at("positive_token").get<std::string>();
    if (d.contains("negative_token")) s.negative_token = d.at("negative_token").get<std::string>();
    if (d.contains("project_dim")) s.project_dim = d.at("project_dim").get<std::size_t>();
  }
  if (j.contains("setting")) c.setting = parse_setting(j.at("setting").get<std::string>());
  if (j.contains("schedule")) c.schedule = parse_schedule(j.at("schedule").get<std::string>());
  if (j.contains("eta0")) c.eta0 = j.at("eta0").get<double>();
  if (j.contains("lambda")) c.lambda = j.at("lambda").get<double>();
  if (j.contains("grid_step")) c.grid_step = j.at("grid_step").get<std::size_t>();
  if (j.contains("attack")) {
    const auto& a = j.at("attack");
    if (a.contains("kind")) c.attack.kind = parse_attack(a.at("kind").get<std::string>());
    if (a.contains("eps0")) c.attack.eps0 = a.at("eps0").get<double>();
    if (a.contains("max_iter")) c.attack.max_iter = a.at("max_iter").get<std::size_t>();
    if (a.contains("interval_stride")) c.attack.interval_stride = a.at("interval_stride").get<std::size_t>();
    if (a.contains("teach_alphas")) c.teach_alphas = a.at("teach_alphas").get<std::vector<double>>();
    if (a.contains("flip_strategy")) {
      const auto s = a.at("flip_strategy").get<std::string>();
      c.flip_strategy = s == "best" ? std::nullopt : std::optional<FlipStrategy>(parse_flip_strategy(s));
    }
  }
  if (j.contains("budget_fractions")) c.budget_fractions = j.at("budget_fractions").get<std::vector<double>>();
  if (j.contains("repeats")) c.repeats = j.at("repeats").get<std::size_t>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("workers")) c.workers = j.at("workers").get<std::size_t>();
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("histogram_budget_fraction")) c.histogram_budget_fraction = j.at("histogram_budget_fraction").get<double>();
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("config file " + path + " is not valid JSON: " + e.what());
  }
  ExperimentConfig c;
  try {
    apply_json(j, c);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("config file " + path + ": " + e.what());
  }
  return c;
}

inline nlohmann::json build_meta(const ExperimentConfig& c, const ExperimentReport& report) {
  return nlohmann::json{
      {"config", to_json(c)},
      {"stream_length", report.stream_length},
      {"histogram_points", report.histogram.total},
      {"histogram_empty", report.histogram.empty()},
      {"versions",
       {{"poison", kVersion},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"compiler", __VERSION__}}}};
}

/// results.csv, histogram.csv and meta.json under cfg.out_dir.
inline void write_report(const ExperimentConfig& cfg, const ExperimentReport& report) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  auto open = [&](const char* name) {
    std::ofstream f(fs::path(cfg.out_dir) / name, std::ios::binary);
    if (!f) throw DataError("cannot write " + (fs::path(cfg.out_dir) / name).string());
    return f;
  };
  {
    auto f = open("results.csv");
    write_results_csv(report, f);
  }
  {
    auto f = open("histogram.csv");
    write_histogram_csv(report.histogram, f);
  }
  {
    auto f = open("meta.json");
    f << build_meta(cfg, report).dump(2) << '\n';
  }
}

}  // namespace poison
