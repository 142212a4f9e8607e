#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "poison/cli.hpp"
#include "poison/harness.hpp"

namespace poison {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("poison_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small enough to run every attack in well under a second.
ExperimentConfig small_config(AttackKind kind) {
  ExperimentConfig c;
  c.dataset.train_n = 60;
  c.dataset.valid_n = 30;
  c.dataset.test_n = 100;
  c.attack.kind = kind;
  c.attack.max_iter = 8;
  c.budget_fractions = {0.0, 0.1, 0.25};
  c.repeats = 3;
  c.seed = 11;
  return c;
}

int run_cli(std::vector<std::string> args, std::string* out = nullptr, std::string* err = nullptr) {
  args.insert(args.begin(), "poison_cli");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream o, e;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  if (err) *err = e.str();
  return code;
}

TEST(PositionHistogram, Examples) {
  const Histogram h = position_histogram({0, 5, 399}, 400);
  ASSERT_EQ(h.frequency.size(), 20u);
  EXPECT_DOUBLE_EQ(h.frequency[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(h.frequency[19], 1.0 / 3.0);
  EXPECT_EQ(std::accumulate(h.frequency.begin() + 1, h.frequency.begin() + 19, 0.0), 0.0);

  const Histogram last = position_histogram({380, 390, 399}, 400);
  std::vector<double> e19(20, 0.0);
  e19[19] = 1.0;
  EXPECT_EQ(last.frequency, e19);
}

TEST(PositionHistogram, BinEdges) {
  // T = 30 does not divide into 20 bins evenly; bin b holds [1.5b, 1.5b + 1.5).
  const Histogram h = position_histogram({0, 1, 2, 3, 29}, 30);
  EXPECT_DOUBLE_EQ(h.frequency[0], 0.4);
  EXPECT_DOUBLE_EQ(h.frequency[1], 0.2);
  EXPECT_DOUBLE_EQ(h.frequency[2], 0.2);
  EXPECT_DOUBLE_EQ(h.frequency[19], 0.2);
}

TEST(PositionHistogram, SumsToOne) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t T = 1 + rng() % 500;
    std::vector<std::size_t> idx(1 + rng() % 40);
    for (auto& i : idx) i = rng() % T;
    const Histogram h = position_histogram(idx, T);
    EXPECT_NEAR(std::accumulate(h.frequency.begin(), h.frequency.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(PositionHistogram, EmptyIsFlaggedZero) {
  const Histogram h = position_histogram({}, 400);
  EXPECT_TRUE(h.empty());
  EXPECT_EQ(h.frequency, std::vector<double>(20, 0.0));
}

TEST(PositionHistogram, RejectsOutOfRange) {
  EXPECT_THROW(position_histogram({400}, 400), ArgumentError);
  EXPECT_THROW(position_histogram({0}, 0), ArgumentError);
}

TEST(ExperimentConfig, Validation) {
  ExperimentConfig c;
  c.repeats = 0;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = ExperimentConfig{};
  c.budget_fractions = {0.1, 1.5};
  EXPECT_THROW(c.validate(), ArgumentError);
  c = ExperimentConfig{};
  c.schedule = Schedule::Constant;
  EXPECT_DOUBLE_EQ(c.resolved_eta0(), 0.005);
  c.schedule = Schedule::FastDecay;
  EXPECT_DOUBLE_EQ(c.resolved_eta0(), 0.1);
}

TEST(ExperimentConfig, JsonRoundTrip) {
  ExperimentConfig c = small_config(AttackKind::Interval);
  c.attack.interval_stride = 3;
  c.flip_strategy = FlipStrategy::Tail;
  c.histogram_budget_fraction = 0.25;
  ExperimentConfig back;
  apply_json(to_json(c), back);
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(ExperimentConfig, UnknownKeyIsRejected) {
  ExperimentConfig c;
  EXPECT_THROW(apply_json(nlohmann::json{{"repeat", 3}}, c), ArgumentError);
}

TEST(ExperimentConfig, MissingFileNamesThePath) {
  try {
    load_config("/nonexistent/cfg.json");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/cfg.json"), std::string::npos);
  }
}

TEST(RunExperiment, NoAttackKeepsCleanAccuracy) {
  const ExperimentReport r = run_experiment(small_config(AttackKind::None));
  ASSERT_EQ(r.rows.size(), 9u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.attacked_accuracy, row.clean_accuracy);
    EXPECT_TRUE(row.modified_indices.empty());
  }
  EXPECT_TRUE(r.histogram.empty());
}

TEST(RunExperiment, ZeroFractionLeavesStreamClean) {
  for (const auto kind : {AttackKind::Incremental, AttackKind::LabelFlip, AttackKind::OfflineBaseline}) {
    ExperimentConfig c = small_config(kind);
    c.budget_fractions = {0.0};
    for (const auto& row : run_experiment(c).rows) {
      EXPECT_EQ(row.budget, 0u);
      EXPECT_TRUE(row.modified_indices.empty());
      EXPECT_EQ(row.attacked_accuracy, row.clean_accuracy);
    }
  }
}

TEST(RunExperiment, RowsRespectBudgetsAndRanges) {
  for (const auto kind : {AttackKind::Incremental, AttackKind::Interval, AttackKind::TeachAndReinforce,
                          AttackKind::LabelFlip, AttackKind::OfflineBaseline}) {
    const ExperimentReport r = run_experiment(small_config(kind));
    for (std::size_t k = 0; k < r.rows.size(); ++k) {
      const auto& row = r.rows[k];
      EXPECT_EQ(row.run_id, k % 3);
      EXPECT_EQ(row.budget, static_cast<std::size_t>(std::llround(row.budget_fraction * 60)));
      EXPECT_LE(row.modified_indices.size(), row.budget);
      EXPECT_GE(row.clean_accuracy, 0.0);
      EXPECT_LE(row.clean_accuracy, 1.0);
      EXPECT_GE(row.attacked_accuracy, 0.0);
      EXPECT_LE(row.attacked_accuracy, 1.0);
    }
    if (!r.histogram.empty()) {
      EXPECT_NEAR(std::accumulate(r.histogram.frequency.begin(), r.histogram.frequency.end(), 0.0), 1.0, 1e-12);
    }
  }
}

TEST(RunExperiment, CleanAccuracyIsSharedAcrossBudgets) {
  const ExperimentReport r = run_experiment(small_config(AttackKind::LabelFlip));
  for (std::size_t k = 3; k < r.rows.size(); ++k) EXPECT_EQ(r.rows[k].clean_accuracy, r.rows[k % 3].clean_accuracy);
}

TEST(RunExperiment, TeachPicksBestAlpha) {
  ExperimentConfig c = small_config(AttackKind::TeachAndReinforce);
  c.budget_fractions = {0.25};
  c.repeats = 1;
  const ReportRow best = run_experiment(c).rows.at(0);
  for (const double alpha : c.teach_alphas) {
    ExperimentConfig one = c;
    one.teach_alphas = {alpha};
    EXPECT_GE(best.objective, run_experiment(one).rows.at(0).objective);
  }
  EXPECT_EQ(best.variant.rfind("alpha=", 0), 0u);
}

TEST(RunExperiment, LabelFlipPicksLowestAccuracy) {
  ExperimentConfig c = small_config(AttackKind::LabelFlip);
  c.budget_fractions = {0.25};
  const ExperimentReport best = run_experiment(c);
  for (const auto s : {FlipStrategy::Head, FlipStrategy::Tail, FlipStrategy::Random}) {
    ExperimentConfig one = c;
    one.flip_strategy = s;
    const ExperimentReport r = run_experiment(one);
    for (std::size_t k = 0; k < r.rows.size(); ++k) {
      EXPECT_LE(best.rows[k].attacked_accuracy, r.rows[k].attacked_accuracy);
      EXPECT_EQ(r.rows[k].variant, to_string(s));
    }
  }
}

TEST(RunExperiment, FullyOnlineAveragesOverScoredIterates) {
  ExperimentConfig c = small_config(AttackKind::None);
  c.setting = Setting::FullyOnline;
  c.repeats = 1;
  c.budget_fractions = {0.0};
  const double reported = run_experiment(c).rows.at(0).clean_accuracy;

  const DatasetBundle b = detail::build_bundle(c.dataset, c.seed);
  const Trajectory traj = train_ogd(b.train_stream, LearnerConfig{train_offline_logreg(b.init_heldout, c.lambda).w,
                                                                   c.lambda, c.schedule, c.resolved_eta0()});
  double sum = 0.0;
  int n = 0;
  for (std::size_t t = 10; t <= 60; t += 10, ++n) sum += test_accuracy(traj.iterates[t], b.test);
  EXPECT_DOUBLE_EQ(reported, sum / n);
}

TEST(RunExperiment, WorkersDoNotChangeResults) {
  ExperimentConfig c = small_config(AttackKind::Incremental);
  std::ostringstream serial, parallel;
  write_results_csv(run_experiment(c), serial);
  c.workers = 3;
  write_results_csv(run_experiment(c), parallel);
  EXPECT_EQ(serial.str(), parallel.str());
}

TEST(WriteReport, ByteIdenticalAcrossRuns) {
  ExperimentConfig c = small_config(AttackKind::TeachAndReinforce);
  const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  c.out_dir = a.string();
  write_report(c, run_experiment(c));
  const std::string meta_a = slurp(a / "meta.json");
  c.out_dir = b.string();
  write_report(c, run_experiment(c));
  for (const char* f : {"results.csv", "histogram.csv"}) {
    EXPECT_FALSE(slurp(a / f).empty());
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  // meta.json records the output directory, which differs by construction.
  nlohmann::json ja = nlohmann::json::parse(meta_a), jb = nlohmann::json::parse(slurp(b / "meta.json"));
  ja["config"].erase("out_dir");
  jb["config"].erase("out_dir");
  EXPECT_EQ(ja, jb);
  EXPECT_TRUE(ja.contains("versions"));
}

TEST(WriteReport, ResultsParseBack) {
  ExperimentConfig c = small_config(AttackKind::Interval);
  const ExperimentReport r = run_experiment(c);
  std::stringstream ss;
  write_results_csv(r, ss);
  const auto rows = read_results_csv(ss);
  ASSERT_EQ(rows.size(), r.rows.size());
  std::vector<std::size_t> pooled;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(rows[k].modified_indices, r.rows[k].modified_indices);
    EXPECT_EQ(rows[k].budget, r.rows[k].budget);
    if (rows[k].budget > 0) pooled.insert(pooled.end(), rows[k].modified_indices.begin(), rows[k].modified_indices.end());
  }
  EXPECT_EQ(position_histogram(pooled, 60).frequency, r.histogram.frequency);
}

TEST(WriteReport, HistogramCsvShape) {
  std::ostringstream out;
  write_histogram_csv(position_histogram({0, 5, 399}, 400), out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "bin_index,frequency");
  int n = 0;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, 20);
}

TEST(ReadResults, RejectsWrongHeader) {
  std::istringstream in("a,b,c\n");
  EXPECT_THROW(read_results_csv(in), DataError);
}

TEST(Cli, RunWithConfigWritesFiles) {
  const fs::path dir = scratch_dir("cli_run");
  ExperimentConfig c = small_config(AttackKind::Incremental);
  c.out_dir = (dir / "out").string();
  std::ofstream(dir / "c.json") << to_json(c).dump(2);
  std::string out, err;
  EXPECT_EQ(run_cli({"run", "--config", (dir / "c.json").string()}, &out, &err), 0) << err;
  for (const char* f : {"results.csv", "histogram.csv", "meta.json"}) EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
}

TEST(Cli, FlagsOverrideConfig) {
  const fs::path dir = scratch_dir("cli_flags");
  ExperimentConfig c = small_config(AttackKind::Incremental);
  std::ofstream(dir / "c.json") << to_json(c).dump(2);
  EXPECT_EQ(run_cli({"run", "--config", (dir / "c.json").string(), "--attack", "none", "--setting", "fully",
                     "--schedule", "fast", "--budget-fractions", "0,0.5", "--repeats", "2", "--seed", "4", "--out",
                     (dir / "o").string(), "--workers", "2"}),
            0);
  const auto meta = nlohmann::json::parse(slurp(dir / "o" / "meta.json"));
  EXPECT_EQ(meta["config"]["attack"]["kind"], "none");
  EXPECT_EQ(meta["config"]["setting"], "fully");
  EXPECT_EQ(meta["config"]["schedule"], "fast");
  EXPECT_EQ(meta["config"]["budget_fractions"], (std::vector<double>{0.0, 0.5}));
  EXPECT_EQ(meta["config"]["repeats"], 2);
  EXPECT_EQ(meta["config"]["seed"], 4);
  EXPECT_EQ(meta["config"]["workers"], 2);
}

TEST(Cli, MissingConfigExitsOneWithPath) {
  std::string err;
  EXPECT_EQ(run_cli({"run", "--config", "/no/such/config.json"}, nullptr, &err), 1);
  EXPECT_NE(err.find("/no/such/config.json"), std::string::npos);
}

TEST(Cli, BadUsageExitsTwo) {
  std::string err;
  EXPECT_EQ(run_cli({"run", "--no-such-flag"}, nullptr, &err), 2);
  EXPECT_NE(err.find("--config"), std::string::npos);
  EXPECT_EQ(run_cli({}, nullptr, &err), 2);
  EXPECT_EQ(run_cli({"frobnicate"}, nullptr, &err), 2);
}

TEST(Cli, BadValueExitsOne) {
  std::string err;
  EXPECT_EQ(run_cli({"run", "--attack", "bogus", "--out", scratch_dir("cli_bad").string()}, nullptr, &err), 1);
  EXPECT_NE(err.find("bogus"), std::string::npos);
}

TEST(Cli, ValidatePrintsMaxRelativeError) {
  std::string out;
  EXPECT_EQ(run_cli({"validate", "--instances", "4"}, &out), 0);
  EXPECT_NE(out.find("max relative error: "), std::string::npos);
}

TEST(Cli, HistogramRecomputesStoredIndices) {
  const fs::path dir = scratch_dir("cli_hist");
  ExperimentConfig c = small_config(AttackKind::Interval);
  c.out_dir = dir.string();
  write_report(c, run_experiment(c));
  const std::string original = slurp(dir / "histogram.csv");
  EXPECT_EQ(run_cli({"histogram", "--in", (dir / "results.csv").string(), "--out", (dir / "again.csv").string()}), 0);
  EXPECT_EQ(slurp(dir / "again.csv"), original);
}

TEST(Cli, SweepWritesEveryCell) {
  const fs::path dir = scratch_dir("cli_sweep");
  EXPECT_EQ(run_cli({"sweep", "--settings", "semi,fully", "--schedules", "slow", "--attacks", "none,labelflip",
                     "--repeats", "1", "--budget-fractions", "0.1", "--out", dir.string()}),
            0);
  for (const char* cell : {"semi-slow-none", "semi-slow-labelflip", "fully-slow-none", "fully-slow-labelflip"}) {
    EXPECT_TRUE(fs::exists(dir / cell / "results.csv")) << cell;
  }
}

TEST(Cli, BinaryExitCodes) {
  const std::string cli = POISON_CLI_PATH;
  EXPECT_EQ(WEXITSTATUS(std::system((cli + " run --bogus >/dev/null 2>&1").c_str())), 2);
  EXPECT_EQ(WEXITSTATUS(std::system((cli + " run --config /no/such.json >/dev/null 2>&1").c_str())), 1);
  EXPECT_EQ(WEXITSTATUS(std::system((cli + " --help >/dev/null 2>&1").c_str())), 0);
}

}  // namespace
}  // namespace poison
