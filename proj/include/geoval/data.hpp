#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geoval/common.hpp"

namespace geoval {

enum class DepthClass { d0_30, d30_60, d60_plus };

/// CSV tokens: "0-30", "30-60", "60+".
std::string_view to_token(DepthClass d);
std::optional<DepthClass> parse_depth_class(std::string_view token);

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
  bool operator==(const LatLon&) const = default;
};

struct SampleRecord {
  std::string id;
  LatLon location;
  int year = 0;
  DepthClass depth = DepthClass::d0_30;
  std::string stratum;
  std::map<std::string, std::optional<double>> targets;
  std::vector<double> covariates;

  std::optional<double> target(const std::string& name) const;
  bool operator==(const SampleRecord&) const = default;
};

/// Immutable after construction; check() enforces the record invariants.
struct Dataset {
  std::vector<SampleRecord> records;
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;

  std::size_t size() const noexcept { return records.size(); }
  std::size_t width() const noexcept { return feature_names.size(); }

  /// Throws DataError when ids repeat, widths disagree or a record is invalid.
  void check() const;

  Matrix covariate_matrix() const;
  std::vector<std::string> strata() const;
  std::vector<DepthClass> depths() const;

  bool operator==(const Dataset&) const = default;
};

/// Physical range checks for recognised target names (pH in (0, 14);
/// SOC, N, P, K non-negative). Returns an error message or nullopt.
std::optional<std::string> check_target_value(const std::string& name, double value);

/// True for targets that cannot be negative (SOC, N, P, K).
bool is_nonnegative_target(const std::string& name);

/// Maps CSV header names onto record fields. Empty `covariates` means every
/// column that is not otherwise mapped.
struct ColumnMapping {
  std::string id = "id";
  std::string lat = "lat";
  std::string lon = "lon";
  std::string year = "year";
  std::string depth_class = "depth_class";
  std::string stratum = "stratum";
  std::vector<std::string> targets;
  std::vector<std::string> covariates;
};

struct RowDiagnostic {
  std::size_t row = 0;  // 1-based data row (header excluded)
  std::string column;
  std::string message;
};

struct LoadResult {
  Dataset dataset;
  std::vector<RowDiagnostic> rejected;
};

/// Reads a comma-delimited file with a header row. Rows that break a record
/// invariant are dropped and reported; structural problems (missing column,
/// duplicate id, empty result) throw DataError.
LoadResult load_dataset(const std::filesystem::path& path, const ColumnMapping& mapping);

/// Writes the canonical CSV layout that load_dataset reads back unchanged.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

struct ValueSummary {
  std::size_t count = 0;
  double median = kNaN;
  double iqr = kNaN;
};

struct TargetSummary {
  std::string target;
  ValueSummary overall;
  std::map<std::string, ValueSummary> by_stratum;
};

std::vector<TargetSummary> summarize(const Dataset& ds);

// Minimal RFC-4180 CSV support shared by the loaders.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);
std::string csv_escape(std::string_view field);
std::string format_double(double v);

}  // namespace geoval
