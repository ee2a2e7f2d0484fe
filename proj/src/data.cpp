#include "geoval/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace geoval {

std::string_view to_token(DepthClass d) {
  switch (d) {
    case DepthClass::d0_30: return "0-30";
    case DepthClass::d30_60: return "30-60";
    case DepthClass::d60_plus: return "60+";
  }
  return "0-30";
}

std::optional<DepthClass> parse_depth_class(std::string_view token) {
  if (token == "0-30") return DepthClass::d0_30;
  if (token == "30-60") return DepthClass::d30_60;
  if (token == "60+") return DepthClass::d60_plus;
  return std::nullopt;
}

std::optional<double> SampleRecord::target(const std::string& name) const {
  auto it = targets.find(name);
  if (it == targets.end()) return std::nullopt;
  return it->second;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

bool is_missing_token(std::string_view s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null";
}

std::optional<std::string> check_location(const LatLon& p) {
  if (!std::isfinite(p.lat) || p.lat < -90.0 || p.lat > 90.0) return "latitude out of [-90, 90]";
  if (!std::isfinite(p.lon) || p.lon < -180.0 || p.lon > 180.0) return "longitude out of [-180, 180]";
  return std::nullopt;
}

}  // namespace

bool is_nonnegative_target(const std::string& name) {
  const auto n = lower(name);
  return n == "soc" || n == "n" || n == "p" || n == "k";
}

std::optional<std::string> check_target_value(const std::string& name, double value) {
  if (!std::isfinite(value)) return "target value is not finite";
  const auto n = lower(name);
  if (n == "ph" && !(value > 0.0 && value < 14.0)) return "pH outside (0, 14)";
  if (is_nonnegative_target(name) && value < 0.0) return name + " must be non-negative";
  return std::nullopt;
}

void Dataset::check() const {
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!ids.insert(r.id).second) throw DataError("duplicate sample id '" + r.id + "'");
    if (auto err = check_location(r.location)) throw DataError("record '" + r.id + "': " + *err);
    if (r.covariates.size() != feature_names.size())
      throw DataError("record '" + r.id + "': covariate width " + std::to_string(r.covariates.size()) +
                      " differs from " + std::to_string(feature_names.size()) + " feature names");
    for (double v : r.covariates)
      if (!std::isfinite(v)) throw DataError("record '" + r.id + "': non-finite covariate");
    for (const auto& [name, value] : r.targets) {
      if (!value) continue;
      if (auto err = check_target_value(name, *value)) throw DataError("record '" + r.id + "': " + *err);
    }
  }
}

Matrix Dataset::covariate_matrix() const {
  Matrix x(records.size(), width());
  for (std::size_t i = 0; i < records.size(); ++i)
    std::copy(records[i].covariates.begin(), records[i].covariates.end(), x.row(i).begin());
  return x;
}

std::vector<std::string> Dataset::strata() const {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.stratum);
  return out;
}

std::vector<DepthClass> Dataset::depths() const {
  std::vector<DepthClass> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.depth);
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  std::size_t i = 0;
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) i = 3;  // UTF-8 BOM
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field.push_back(c);
      any = true;
    }
  }
  if (quoted) throw DataError("'" + path.string() + "': unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip form
  return std::string(buf, ptr);
}

LoadResult load_dataset(const std::filesystem::path& path, const ColumnMapping& mapping) {
  const auto rows = read_csv(path);
  if (rows.empty()) throw DataError("'" + path.string() + "': missing header row");
  const auto& header = rows.front();

  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (!col.emplace(header[j], j).second) throw DataError("duplicated column '" + header[j] + "'");
  }
  auto require = [&](const std::string& name) -> std::size_t {
    auto it = col.find(name);
    if (it == col.end()) throw DataError("missing required column '" + name + "'");
    return it->second;
  };

  const std::size_t c_id = require(mapping.id);
  const std::size_t c_lat = require(mapping.lat);
  const std::size_t c_lon = require(mapping.lon);
  const std::size_t c_year = require(mapping.year);
  const std::size_t c_depth = require(mapping.depth_class);
  const std::size_t c_stratum = require(mapping.stratum);

  std::vector<std::pair<std::string, std::size_t>> target_cols;
  for (const auto& t : mapping.targets) target_cols.emplace_back(t, require(t));

  std::vector<std::pair<std::string, std::size_t>> cov_cols;
  if (!mapping.covariates.empty()) {
    for (const auto& c : mapping.covariates) cov_cols.emplace_back(c, require(c));
  } else {
    std::set<std::size_t> used = {c_id, c_lat, c_lon, c_year, c_depth, c_stratum};
    for (const auto& [_, j] : target_cols) used.insert(j);
    for (std::size_t j = 0; j < header.size(); ++j)
      if (!used.count(j)) cov_cols.emplace_back(header[j], j);
  }

  LoadResult result;
  auto& ds = result.dataset;
  for (const auto& [name, _] : cov_cols) ds.feature_names.push_back(name);
  for (const auto& [name, _] : target_cols) ds.target_names.push_back(name);

  std::unordered_map<std::string, std::size_t> seen_ids;
  std::vector<std::string> duplicates;

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    auto reject = [&](const std::string& column, std::string message) {
      result.rejected.push_back({r, column, std::move(message)});
    };
    if (cells.size() != header.size()) {
      reject("", "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(cells.size()));
      continue;
    }

    SampleRecord rec;
    rec.id = cells[c_id];
    if (rec.id.empty()) {
      reject(mapping.id, "empty id");
      continue;
    }
    auto lat = parse_double(cells[c_lat]);
    auto lon = parse_double(cells[c_lon]);
    if (!lat) { reject(mapping.lat, "non-numeric latitude"); continue; }
    if (!lon) { reject(mapping.lon, "non-numeric longitude"); continue; }
    rec.location = {*lat, *lon};
    if (*lat < -90.0 || *lat > 90.0) { reject(mapping.lat, "latitude out of [-90, 90]"); continue; }
    if (*lon < -180.0 || *lon > 180.0) { reject(mapping.lon, "longitude out of [-180, 180]"); continue; }

    auto year = parse_double(cells[c_year]);
    if (!year || *year != std::floor(*year)) { reject(mapping.year, "year is not an integer"); continue; }
    rec.year = static_cast<int>(*year);

    auto depth = parse_depth_class(cells[c_depth]);
    if (!depth) { reject(mapping.depth_class, "unknown depth class '" + cells[c_depth] + "'"); continue; }
    rec.depth = *depth;

    rec.stratum = cells[c_stratum];
    if (rec.stratum.empty()) { reject(mapping.stratum, "empty stratum"); continue; }

    bool ok = true;
    for (const auto& [name, j] : target_cols) {
      if (is_missing_token(cells[j])) {
        rec.targets[name] = std::nullopt;
        continue;
      }
      auto v = parse_double(cells[j]);
      if (!v) { reject(name, "non-numeric target value"); ok = false; break; }
      if (auto err = check_target_value(name, *v)) { reject(name, *err); ok = false; break; }
      rec.targets[name] = *v;
    }
    if (!ok) continue;

    rec.covariates.reserve(cov_cols.size());
    for (const auto& [name, j] : cov_cols) {
      auto v = parse_double(cells[j]);
      if (!v || !std::isfinite(*v)) {
        reject(name, is_missing_token(cells[j]) ? "missing covariate" : "non-numeric covariate");
        ok = false;
        break;
      }
      rec.covariates.push_back(*v);
    }
    if (!ok) continue;

    if (seen_ids.count(rec.id)) {
      duplicates.push_back(rec.id);
      continue;
    }
    seen_ids.emplace(rec.id, r);
    ds.records.push_back(std::move(rec));
  }

  if (!duplicates.empty()) {
    std::string list;
    for (const auto& d : duplicates) list += (list.empty() ? "" : ", ") + d;
    throw DataError("duplicate sample ids: " + list);
  }
  if (ds.records.empty()) throw DataError("'" + path.string() + "': no valid records");
  ds.check();
  return result;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PipelineError("cannot write '" + path.string() + "'");
  out << "id,lat,lon,year,depth_class,stratum";
  for (const auto& t : ds.target_names) out << ',' << csv_escape(t);
  for (const auto& f : ds.feature_names) out << ',' << csv_escape(f);
  out << '\n';
  for (const auto& r : ds.records) {
    out << csv_escape(r.id) << ',' << format_double(r.location.lat) << ',' << format_double(r.location.lon) << ','
        << r.year << ',' << to_token(r.depth) << ',' << csv_escape(r.stratum);
    for (const auto& t : ds.target_names) {
      out << ',';
      if (auto v = r.target(t)) out << format_double(*v);
    }
    for (double v : r.covariates) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw PipelineError("write failed for '" + path.string() + "'");
}

namespace {

ValueSummary summarize_values(std::vector<double> v) {
  ValueSummary s;
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.median = quantile_sorted(v, 0.5);
  s.iqr = quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
  return s;
}

}  // namespace

std::vector<TargetSummary> summarize(const Dataset& ds) {
  if (ds.records.empty()) throw DataError("cannot summarize an empty dataset");
  std::vector<TargetSummary> out;
  for (const auto& t : ds.target_names) {
    std::vector<double> all;
    std::map<std::string, std::vector<double>> groups;
    for (const auto& r : ds.records) {
      if (auto v = r.target(t)) {
        all.push_back(*v);
        groups[r.stratum].push_back(*v);
      }
    }
    TargetSummary ts;
    ts.target = t;
    ts.overall = summarize_values(std::move(all));
    for (auto& [s, v] : groups) ts.by_stratum[s] = summarize_values(std::move(v));
    out.push_back(std::move(ts));
  }
  return out;
}

}  // namespace geoval
