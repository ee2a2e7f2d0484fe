#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace geoval {

/// Failure categories. They map one-to-one onto the CLI exit codes.
enum class ErrorKind { config, data, pipeline };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class PipelineError : public Error {
 public:
  explicit PipelineError(const std::string& what) : Error(ErrorKind::pipeline, what) {}
};

/// Non-fatal notes emitted by numerical routines (degenerate inputs, clamped
/// values, fallbacks). Routines accept an optional sink; passing nullptr
/// discards the messages.
struct Diagnostics {
  std::vector<std::string> messages;

  void add(std::string msg) { messages.push_back(std::move(msg)); }
  bool empty() const noexcept { return messages.empty(); }
};

inline void note(Diagnostics* diag, std::string msg) {
  if (diag != nullptr) diag->add(std::move(msg));
}

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  std::vector<double> column(std::size_t c) const;
  Matrix select_rows(std::span<const std::size_t> rows) const;
  Matrix select_cols(std::span<const std::size_t> cols) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Seeded generator with platform-independent derived distributions.
/// The standard library distributions are implementation-defined, so
/// uniform/normal/index draws are built directly on the 64-bit engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // N(0, 1)
  std::size_t index(std::size_t n);       // [0, n)

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

  /// `count` distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count);

 private:
  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Mixes a base seed with a stream index (SplitMix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Linear-interpolation quantile between order statistics ("type 7").
/// `sorted` must be ascending and non-empty; p in [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);
double quantile(std::vector<double> values, double p);
double median(std::vector<double> values);
double iqr(std::vector<double> values);

double mean(std::span<const double> v);

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace geoval
