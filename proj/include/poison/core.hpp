#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace poison {

inline constexpr const char* kVersion = "0.1.0";

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Error hierarchy. Argument-shaped problems derive from std::invalid_argument,
// problems with external data from std::runtime_error.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : std::runtime_error(what + " (row " + std::to_string(row) + ", column " +
                           std::to_string(column) + ")"),
        row(row),
        column(column) {}
  std::size_t row;
  std::size_t column;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// sgn with the tie broken towards +1.
inline int sign(double v) { return v >= 0.0 ? +1 : -1; }

/// One element of a stream: a feature vector and a label in {-1, +1}.
struct LabeledExample {
  Vector x;
  int y = +1;

  LabeledExample() = default;
  LabeledExample(Vector features, int label) : x(std::move(features)), y(label) {
    if (label != -1 && label != +1) {
      throw ArgumentError("label must be -1 or +1, got " + std::to_string(label));
    }
  }

  std::size_t dimension() const { return static_cast<std::size_t>(x.size()); }

  friend bool operator==(const LabeledExample& a, const LabeledExample& b) {
    return a.y == b.y && a.x.size() == b.x.size() && (a.x.array() == b.x.array()).all();
  }
};

using Dataset = std::vector<LabeledExample>;

/// Ordered, nonempty, dimension-consistent sequence of examples.
class DataStream {
 public:
  explicit DataStream(std::vector<LabeledExample> examples) : examples_(std::move(examples)) {
    if (examples_.empty()) throw ArgumentError("a data stream needs at least one example");
    const std::size_t d = examples_.front().dimension();
    if (d == 0) throw DimensionError("stream examples must have dimension >= 1");
    for (const auto& e : examples_) {
      if (e.dimension() != d) throw DimensionError("stream examples disagree on dimension");
    }
  }

  std::size_t size() const { return examples_.size(); }
  std::size_t dimension() const { return examples_.front().dimension(); }

  const LabeledExample& operator[](std::size_t t) const { return examples_[t]; }
  const LabeledExample& at(std::size_t t) const { return examples_.at(t); }

  auto begin() const { return examples_.begin(); }
  auto end() const { return examples_.end(); }

  const std::vector<LabeledExample>& examples() const { return examples_; }

  void set_features(std::size_t t, Vector x) {
    if (static_cast<std::size_t>(x.size()) != dimension()) {
      throw DimensionError("replacement features have the wrong dimension");
    }
    examples_.at(t).x = std::move(x);
  }

  void replace(std::size_t t, LabeledExample e) {
    if (e.dimension() != dimension()) {
      throw DimensionError("replacement example has the wrong dimension");
    }
    examples_.at(t) = std::move(e);
  }

  friend bool operator==(const DataStream& a, const DataStream& b) {
    return a.examples_ == b.examples_;
  }

 private:
  std::vector<LabeledExample> examples_;
};

/// Sorted positions at which two equal-length streams differ.
struct StreamDiff {
  std::vector<std::size_t> indices;
  std::size_t cardinality() const { return indices.size(); }
};

/// Clamp every coordinate to [-1, 1].
inline Vector project_feasible(const Vector& x) {
  if (x.size() == 0) throw DimensionError("cannot project an empty vector");
  return x.cwiseMax(-1.0).cwiseMin(1.0);
}

inline LabeledExample project_feasible(const LabeledExample& e) {
  return LabeledExample(project_feasible(e.x), e.y);
}

inline bool is_feasible(const Vector& x) {
  return x.size() > 0 && (x.array() >= -1.0).all() && (x.array() <= 1.0).all();
}

// Exact comparison: any bit-level change in x or a label flip counts.
inline StreamDiff stream_diff(const DataStream& a, const DataStream& b) {
  if (a.size() != b.size()) throw ShapeError("stream_diff: streams have different lengths");
  if (a.dimension() != b.dimension()) throw ShapeError("stream_diff: streams have different dimensions");
  StreamDiff diff;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (!(a[t] == b[t])) diff.indices.push_back(t);
  }
  return diff;
}

// Negate every example: (x, y) -> (-x, -y).
inline DataStream negate_stream(const DataStream& s) {
  std::vector<LabeledExample> out;
  out.reserve(s.size());
  for (const auto& e : s) out.emplace_back(-e.x, -e.y);
  return DataStream(std::move(out));
}

}  // namespace poison
