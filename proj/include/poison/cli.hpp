#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "poison/harness.hpp"
#include "poison/selfcheck.hpp"

namespace poison {

namespace detail {

struct RunFlags {
  std::string config;
  std::string dataset;
  std::string setting;
  std::string schedule;
  std::string attack;
  std::vector<double> budget_fractions;
  std::optional<std::size_t> repeats;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> workers;
};

inline void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config");
  cmd->add_option("--dataset", f.dataset, "'synthetic' or a CSV path");
  cmd->add_option("--setting", f.setting, "semi | fully");
  cmd->add_option("--schedule", f.schedule, "constant | slow | fast");
  cmd->add_option("--attack", f.attack, "incremental | interval | teach | labelflip | offline | none");
  cmd->add_option("--budget-fractions", f.budget_fractions, "comma-separated fractions of T")->delimiter(',');
  cmd->add_option("--repeats", f.repeats, "number of repeats");
  cmd->add_option("--seed", f.seed, "base seed; repeat r uses seed + r");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--workers", f.workers, "concurrent repeats");
}

inline ExperimentConfig resolve_config(const RunFlags& f) {
  ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  if (!f.dataset.empty()) {
    if (f.dataset == "synthetic") {
      c.dataset.kind = "synthetic";
    } else {
      c.dataset.kind = "csv";
      c.dataset.path = f.dataset;
    }
  }
  if (!f.setting.empty()) c.setting = parse_setting(f.setting);
  if (!f.schedule.empty()) c.schedule = parse_schedule(f.schedule);
  if (!f.attack.empty()) c.attack.kind = parse_attack(f.attack);
  if (!f.budget_fractions.empty()) c.budget_fractions = f.budget_fractions;
  if (f.repeats) c.repeats = *f.repeats;
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.out_dir = f.out;
  if (f.workers) c.workers = *f.workers;
  return c;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

inline std::size_t stream_length_from_meta(const std::filesystem::path& meta) {
  std::ifstream in(meta);
  if (!in) throw DataError("no --length given and cannot open " + meta.string());
  nlohmann::json j;
  try {
    in >> j;
    return j.at("stream_length").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(meta.string() + ": " + e.what());
  }
}

}  // namespace detail

/// Entry point of the command-line tool. Returns the process exit code:
/// 0 success, 1 runtime failure, 2 bad usage.
inline int cli_main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Poisoning attacks against online gradient descent", "poison_cli"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  detail::RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run one experiment and write results.csv, histogram.csv, meta.json");
  detail::add_run_flags(run, run_flags);

  detail::RunFlags sweep_flags;
  std::string sweep_settings = "semi,fully", sweep_schedules = "constant,slow,fast",
              sweep_attacks = "incremental,interval,teach,labelflip,offline";
  auto* sweep = app.add_subcommand("sweep", "run every setting x schedule x attack cell into <out>/<cell>/");
  detail::add_run_flags(sweep, sweep_flags);
  sweep->add_option("--settings", sweep_settings, "comma-separated settings");
  sweep->add_option("--schedules", sweep_schedules, "comma-separated schedules");
  sweep->add_option("--attacks", sweep_attacks, "comma-separated attacks");

  std::string hist_in, hist_out;
  std::optional<std::size_t> hist_length;
  std::optional<double> hist_fraction;
  std::size_t hist_bins = 20;
  auto* hist = app.add_subcommand("histogram", "recompute the position histogram from a stored results.csv");
  hist->add_option("--in", hist_in, "results.csv")->required();
  hist->add_option("--out", hist_out, "output CSV (default: histogram.csv next to --in)");
  hist->add_option("--length", hist_length, "stream length T (default: read meta.json next to --in)");
  hist->add_option("--budget-fraction", hist_fraction, "only count rows with this budget fraction");
  hist->add_option("--bins", hist_bins, "number of bins")->check(CLI::PositiveNumber);

  std::size_t check_instances = 20;
  std::uint64_t check_seed = 0;
  auto* validate = app.add_subcommand("validate", "finite-difference self-test of the attack gradients");
  validate->add_option("--instances", check_instances, "random instances")->check(CLI::PositiveNumber);
  validate->add_option("--seed", check_seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (*run) {
      const ExperimentConfig cfg = detail::resolve_config(run_flags);
      const ExperimentReport report = run_experiment(cfg);
      write_report(cfg, report);
      out << "wrote " << report.rows.size() << " rows to " << cfg.out_dir << '\n';
      if (report.histogram.empty()) out << "note: no modified points, histogram is all zeros\n";
    } else if (*sweep) {
      const ExperimentConfig base = detail::resolve_config(sweep_flags);
      for (const auto& s : detail::split_list(sweep_settings)) {
        for (const auto& sch : detail::split_list(sweep_schedules)) {
          for (const auto& a : detail::split_list(sweep_attacks)) {
            ExperimentConfig cfg = base;
            cfg.setting = parse_setting(s);
            cfg.schedule = parse_schedule(sch);
            cfg.attack.kind = parse_attack(a);
            cfg.out_dir = (std::filesystem::path(base.out_dir) / (s + "-" + sch + "-" + a)).string();
            write_report(cfg, run_experiment(cfg));
            out << "wrote " << cfg.out_dir << '\n';
          }
        }
      }
    } else if (*hist) {
      const std::filesystem::path in_path(hist_in);
      std::ifstream in(in_path);
      if (!in) throw DataError("cannot open results file: " + hist_in);
      const std::size_t T = hist_length ? *hist_length : detail::stream_length_from_meta(in_path.parent_path() / "meta.json");
      std::vector<std::size_t> pooled;
      for (const auto& row : read_results_csv(in)) {
        if (row.budget == 0) continue;
        if (hist_fraction && row.budget_fraction != *hist_fraction) continue;
        pooled.insert(pooled.end(), row.modified_indices.begin(), row.modified_indices.end());
      }
      const Histogram h = position_histogram(pooled, T, hist_bins);
      const std::string target = hist_out.empty() ? (in_path.parent_path() / "histogram.csv").string() : hist_out;
      std::ofstream f(target, std::ios::binary);
      if (!f) throw DataError("cannot write " + target);
      write_histogram_csv(h, f);
      out << "wrote " << target << " (" << h.total << " points)\n";
    } else if (*validate) {
      const GradientCheckReport rep = check_gradients(check_instances, 25, 5, check_seed);
      const bool ok = rep.max_relative_error <= 1e-4 && rep.max_prefix_gap <= 1e-10;
      out << "instances: " << rep.instances << '\n'
          << "max relative error: " << format_double(rep.max_relative_error) << '\n'
          << "max prefix/naive gap: " << format_double(rep.max_prefix_gap) << '\n'
          << (ok ? "ok" : "FAILED") << '\n';
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace poison
