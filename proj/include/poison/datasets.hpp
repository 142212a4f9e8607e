#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "poison/core.hpp"

namespace poison {

struct DatasetBundle {
  DataStream train_stream;
  Dataset init_heldout;
  Dataset validation;
  Dataset test;
};

/// Two spherical Gaussians, one per class; the class of each draw is a fair
/// coin. Features are clamped into the feasible box.
inline Dataset gen_gaussian_mixture(std::int64_t n, std::size_t d, const Vector& mean_pos,
                                    const Vector& mean_neg, double sigma, std::uint64_t seed) {
  if (n < 0) throw ArgumentError("gen_gaussian_mixture: n must be nonnegative");
  if (d == 0) throw ArgumentError("gen_gaussian_mixture: d must be >= 1");
  if (!(sigma > 0.0)) throw ArgumentError("gen_gaussian_mixture: sigma must be positive");
  if (static_cast<std::size_t>(mean_pos.size()) != d || static_cast<std::size_t>(mean_neg.size()) != d) {
    throw DimensionError("gen_gaussian_mixture: class means must have dimension d");
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> noise(0.0, sigma);
  Dataset out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const int y = coin(rng) ? +1 : -1;
    const Vector& mean = y > 0 ? mean_pos : mean_neg;
    Vector x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = mean[j] + noise(rng);
    out.emplace_back(project_feasible(x), y);
  }
  return out;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  try {
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// Per-column min-max map onto [-1, 1]; zero-range columns become 0.
inline void rescale_columns(std::vector<Vector>& rows) {
  if (rows.empty()) return;
  const auto d = rows.front().size();
  Vector lo = rows.front(), hi = rows.front();
  for (const auto& r : rows) {
    lo = lo.cwiseMin(r);
    hi = hi.cwiseMax(r);
  }
  for (auto& r : rows) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double range = hi[j] - lo[j];
      r[j] = range > 0.0 ? 2.0 * (r[j] - lo[j]) / range - 1.0 : 0.0;
    }
    r = project_feasible(r);
  }
}

}  // namespace detail

struct CsvOptions {
  // Column name (needs a header row) or zero-based index.
  std::variant<std::string, std::size_t> label_column = std::size_t{0};
  std::string positive_token = "1";
  // When unset, every non-positive token is negative provided the column has
  // at most two distinct tokens.
  std::optional<std::string> negative_token;
  // When unset, the first row is a header iff none of its feature cells parse
  // as numbers.
  std::optional<bool> has_header;
};

/// Read a comma-separated numeric table. Row order is preserved, features are
/// min-max rescaled per column onto [-1, 1].
inline Dataset load_csv(const std::string& path, const CsvOptions& opts) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file: " + path);

  std::vector<std::vector<std::string>> table;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    table.push_back(detail::split_csv_line(line));
  }
  if (table.empty()) throw DataError("CSV file is empty: " + path);

  const std::size_t ncols = table.front().size();
  bool header = false;
  std::size_t label_idx = 0;
  if (const auto* name = std::get_if<std::string>(&opts.label_column)) {
    if (opts.has_header.has_value() && !*opts.has_header) {
      throw ArgumentError("label column selected by name but has_header is false");
    }
    header = true;
    const auto& h = table.front();
    const auto it = std::find(h.begin(), h.end(), *name);
    if (it == h.end()) throw DataError("label column '" + *name + "' not found in header of " + path);
    label_idx = static_cast<std::size_t>(it - h.begin());
  } else {
    label_idx = std::get<std::size_t>(opts.label_column);
    if (label_idx >= ncols) throw ArgumentError("label column index out of range");
    if (opts.has_header.has_value()) {
      header = *opts.has_header;
    } else {
      header = true;
      for (std::size_t j = 0; j < ncols; ++j) {
        if (j != label_idx && detail::parse_double(table.front()[j]).has_value()) header = false;
      }
      if (ncols == 1) header = false;
    }
  }
  if (ncols < 2) throw DataError("CSV needs at least one feature column besides the label");

  const std::size_t first = header ? 1 : 0;
  std::set<std::string> tokens;
  std::vector<Vector> features;
  std::vector<std::string> raw_labels;
  for (std::size_t r = first; r < table.size(); ++r) {
    const auto& row = table[r];
    if (row.size() != ncols) {
      throw ParseError("row has " + std::to_string(row.size()) + " cells, expected " + std::to_string(ncols),
                       r, row.size());
    }
    Vector x(static_cast<Eigen::Index>(ncols - 1));
    Eigen::Index k = 0;
    for (std::size_t j = 0; j < ncols; ++j) {
      if (j == label_idx) continue;
      const auto v = detail::parse_double(row[j]);
      if (!v) throw ParseError("non-numeric feature cell '" + row[j] + "'", r, j);
      x[k++] = *v;
    }
    features.push_back(std::move(x));
    raw_labels.push_back(row[label_idx]);
    tokens.insert(row[label_idx]);
  }

  if (!opts.negative_token) {
    tokens.erase(opts.positive_token);
    if (tokens.size() > 1) {
      throw DataError("label column has more than two distinct tokens; set a negative token");
    }
  }

  detail::rescale_columns(features);
  Dataset out;
  out.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    int y = -1;
    if (raw_labels[i] == opts.positive_token) {
      y = +1;
    } else if (opts.negative_token && raw_labels[i] != *opts.negative_token) {
      throw DataError("unknown label token '" + raw_labels[i] + "' at row " + std::to_string(i + first));
    }
    out.emplace_back(std::move(features[i]), y);
  }
  return out;
}

/// Gaussian matrix with N(0, 1/d_out) entries, d_out x d_in.
inline Matrix gaussian_projection_matrix(std::size_t d_in, std::size_t d_out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> entry(0.0, 1.0 / std::sqrt(static_cast<double>(d_out)));
  Matrix r(d_out, d_in);
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index j = 0; j < r.cols(); ++j) r(i, j) = entry(rng);
  }
  return r;
}

/// x -> R x with one seeded R for the whole dataset, then per-coordinate
/// rescale onto [-1, 1]. `matrix_override` replaces R (tests use identity).
inline Dataset random_projection(const Dataset& data, std::size_t d_out, std::uint64_t seed,
                                 const std::optional<Matrix>& matrix_override = std::nullopt) {
  if (data.empty()) throw ArgumentError("random_projection: empty dataset");
  if (d_out == 0) throw ArgumentError("random_projection: d_out must be >= 1");
  const std::size_t d_in = data.front().dimension();
  const Matrix r = matrix_override ? *matrix_override : gaussian_projection_matrix(d_in, d_out, seed);
  if (static_cast<std::size_t>(r.rows()) != d_out || static_cast<std::size_t>(r.cols()) != d_in) {
    throw DimensionError("random_projection: projection matrix has the wrong shape");
  }
  std::vector<Vector> rows;
  rows.reserve(data.size());
  for (const auto& e : data) {
    if (e.dimension() != d_in) throw DimensionError("random_projection: inconsistent input dimension");
    rows.emplace_back(r * e.x);
  }
  detail::rescale_columns(rows);
  Dataset out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.emplace_back(std::move(rows[i]), data[i].y);
  return out;
}

/// Seeded shuffle, then disjoint slices in the order train, init_heldout
/// (same size as train), validation, test. test_n unset takes the rest.
inline DatasetBundle split(const Dataset& data, std::size_t train_n, std::size_t valid_n,
                           std::optional<std::size_t> test_n, std::uint64_t seed) {
  if (train_n == 0) throw ArgumentError("split: train_n must be >= 1");
  const std::size_t fixed = 2 * train_n + valid_n;
  if (fixed > data.size() || (test_n && fixed + *test_n > data.size())) {
    throw ArgumentError("split: not enough rows (" + std::to_string(data.size()) + ") for the requested sizes");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto take = [&](std::size_t from, std::size_t count) {
    Dataset part;
    part.reserve(count);
    for (std::size_t i = from; i < from + count; ++i) part.push_back(data[order[i]]);
    return part;
  };
  const std::size_t tn = test_n.value_or(data.size() - fixed);
  return DatasetBundle{DataStream(take(0, train_n)), take(train_n, train_n), take(2 * train_n, valid_n),
                       take(fixed, tn)};
}

}  // namespace poison
