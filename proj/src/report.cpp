#include <fstream>
#include <sstream>

#include "report_json.hpp"

namespace geoval {

std::string schema_version_string() { return std::to_string(kSchemaMajor) + "." + std::to_string(kSchemaMinor); }

void check_schema_version(const Json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("schema_version") || !j["schema_version"].is_string())
    throw DataError(what + " has no schema_version");
  const auto v = j["schema_version"].get<std::string>();
  const auto dot = v.find('.');
  int major = -1;
  try {
    major = std::stoi(v.substr(0, dot));
  } catch (const std::exception&) {
    throw DataError(what + " has a malformed schema_version '" + v + "'");
  }
  if (major != kSchemaMajor)
    throw DataError(what + " schema version " + v + " is not supported (expected major " +
                    std::to_string(kSchemaMajor) + ")");
}

Json to_json(const MetricsRow& r) {
  return Json{{"target", r.target},
              {"scope", r.scope},
              {"group", r.group},
              {"label", r.label},
              {"n", r.n},
              {"rmse", r.rmse},
              {"mae", r.mae},
              {"ccc_log1p", r.ccc_log1p},
              {"willmott_d15", r.willmott_d15},
              {"rpiq", r.rpiq},
              {"bias", r.bias},
              {"nrmse_minmax", r.nrmse_minmax},
              {"unstable", r.unstable},
              {"diagnostics", r.diagnostics}};
}

namespace {

double num(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) return kNaN;
  return j[key].get<double>();
}

}  // namespace

MetricsRow metrics_row_from_json(const Json& j) {
  MetricsRow r;
  r.target = j.value("target", "");
  r.scope = j.value("scope", "");
  r.group = j.value("group", "");
  r.label = j.value("label", "");
  r.n = j.value("n", std::size_t{0});
  r.rmse = num(j, "rmse");
  r.mae = num(j, "mae");
  r.ccc_log1p = num(j, "ccc_log1p");
  r.willmott_d15 = num(j, "willmott_d15");
  r.rpiq = num(j, "rpiq");
  r.bias = num(j, "bias");
  r.nrmse_minmax = num(j, "nrmse_minmax");
  r.unstable = j.value("unstable", false);
  return r;
}

Json to_json(const std::vector<MetricsRow>& rows) {
  Json a = Json::array();
  for (const auto& r : rows) a.push_back(to_json(r));
  return a;
}

Json to_json(const TestResult& r) {
  Json j{{"method", r.method == TestMethod::ks ? "ks" : "ad"},
         {"statistic", r.statistic},
         {"p_value", r.p_value},
         {"n1", r.n1},
         {"n2", r.n2},
         {"approximate", r.approximate}};
  if (r.method == TestMethod::ad) {
    j["standardized"] = r.standardized;
    j["clamped"] = r.clamped;
  }
  return j;
}

Json to_json(const NNDistanceReport& r, bool with_distances) {
  Json j{{"n_test_blocks", r.n_test_blocks},
         {"n_train_blocks", r.n_train_blocks},
         {"mean_km", r.mean_km},
         {"median_km", r.median_km},
         {"p95_km", r.p95_km},
         {"min_km", r.min_km}};
  if (with_distances) j["distances_km"] = r.distances_km;
  return j;
}

Json to_json(const FoldDiagnostic& d) {
  return Json{{"fold", d.fold},     {"n_fold", d.n_fold},          {"n_rest", d.n_rest},
              {"ks", to_json(d.ks)}, {"ad", to_json(d.ad)}, {"nn", to_json(d.nn, false)}};
}

Json to_json(const FoldPlan& plan, const std::vector<SpatialBlock>& blocks) {
  Json assignment = Json::array();
  for (std::size_t b = 0; b < blocks.size(); ++b)
    assignment.push_back({{"block_id", blocks[b].block_id}, {"n", blocks[b].size()}, {"fold", plan.block_to_fold[b]}});
  Json counts = Json::array();
  for (const auto& row : plan.stratum_counts) counts.push_back(row);
  return Json{{"k", plan.k},
              {"fold_sizes", plan.fold_sizes},
              {"strata", plan.strata},
              {"stratum_counts", counts},
              {"max_share_deviation", plan.max_share_deviation()},
              {"oversized_blocks", plan.oversized_blocks},
              {"diagnostics", plan.diagnostics},
              {"blocks", assignment}};
}

Json to_json(const StabilityReport& r) {
  Json ranked = Json::array();
  for (std::size_t pos : r.ranked)
    ranked.push_back({{"feature", r.names[pos]}, {"column", r.columns[pos]}, {"pi", r.pi[pos]}});
  Json selected = Json::array();
  for (std::size_t c : r.selected) {
    for (std::size_t pos = 0; pos < r.columns.size(); ++pos)
      if (r.columns[pos] == c) selected.push_back(r.names[pos]);
  }
  return Json{{"iterations", r.iterations},
              {"top_k", r.top_k},
              {"threshold", r.threshold},
              {"stage_counts",
               {{"initial", r.stage_counts.initial},
                {"after_correlation", r.stage_counts.after_stage1},
                {"after_stability", r.stage_counts.after_stage2}}},
              {"ranked", ranked},
              {"selected", selected},
              {"diagnostics", r.diagnostics}};
}

Json to_json(const CategoryStability& c) {
  Json a = Json::array();
  for (std::size_t i = 0; i < c.categories.size(); ++i)
    a.push_back({{"category", c.categories[i]}, {"total_pi", c.total[i]}, {"share", c.share[i]}});
  return a;
}

Json to_json(const IntervalReport& r) {
  Json j{{"label", r.label}, {"n", r.n}, {"picp", r.picp}, {"mpiw", r.mpiw}, {"pinaw", r.pinaw}};
  if (r.label != "all") j["avg_rank"] = r.avg_rank;
  return j;
}

Json to_json(const AffineCorrection& a) {
  return Json{{"a", a.a}, {"b", a.b}, {"n", a.n}, {"fallback", a.fallback}, {"identity_forced", a.identity_forced}};
}

Json to_json(const StratumCalibrator& c) {
  Json per = Json::object();
  for (const auto& [s, a] : c.per_stratum) per[s] = to_json(a);
  return Json{{"min_count", c.min_count}, {"global", to_json(c.global)}, {"per_stratum", per}};
}

Json to_json(const ConformalModel& m) {
  Json per = Json::object();
  for (const auto& [s, q] : m.per_stratum_q) {
    Json e{{"q", q}};
    if (auto it = m.calibration_n.find(s); it != m.calibration_n.end()) e["n"] = it->second;
    if (auto it = m.fallback.find(s); it != m.fallback.end()) e["fallback"] = it->second;
    per[s] = e;
  }
  return Json{{"alpha", m.alpha},
              {"stratified", m.stratified},
              {"min_stratum_count", m.min_stratum_count},
              {"global_q", m.global_q},
              {"global_n", m.global_n},
              {"per_stratum", per}};
}

Json to_json(const SynthTruth& t) {
  Json effects = Json::object();
  for (const auto& [s, e] : t.stratum_effects) effects[s] = e;
  Json super = Json::object();
  for (const auto& [s, c] : t.superclass_of) super[s] = c;
  Json centers = Json::array();
  for (const auto& c : t.stratum_centers) centers.push_back({c.lat, c.lon});
  return Json{{"informative", t.informative}, {"coefficients", t.coefficients}, {"redundant", t.redundant},
              {"noise", t.noise},             {"stratum_effects", effects},     {"superclass_of", super},
              {"stratum_centers", centers}};
}

Json to_json(const TargetModel& m) {
  Json trees = Json::array();
  for (const auto& t : m.gbrt.trees()) {
    Json nodes = Json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    trees.push_back(nodes);
  }
  Json j{{"target", m.target},
         {"transform", std::string(to_string(m.transform))},
         {"floor_zero", m.floor_zero},
         {"features", m.feature_names},
         {"base", m.gbrt.base()},
         {"importances", m.gbrt.feature_importances()},
         {"trees", trees}};
  if (m.calibrator) j["calibrator"] = to_json(*m.calibrator);
  return j;
}

namespace {

AffineCorrection affine_from_json(const Json& j) {
  AffineCorrection a;
  a.a = j.at("a").get<double>();
  a.b = j.at("b").get<double>();
  a.n = j.value("n", std::size_t{0});
  a.fallback = j.value("fallback", false);
  a.identity_forced = j.value("identity_forced", false);
  return a;
}

}  // namespace

StratumCalibrator calibrator_from_json(const Json& j) {
  StratumCalibrator c;
  c.min_count = j.value("min_count", std::size_t{50});
  c.global = affine_from_json(j.at("global"));
  for (const auto& [s, a] : j.at("per_stratum").items()) c.per_stratum[s] = affine_from_json(a);
  return c;
}

ConformalModel conformal_from_json(const Json& j) {
  ConformalModel m;
  m.alpha = j.at("alpha").get<double>();
  m.stratified = j.at("stratified").get<bool>();
  m.min_stratum_count = j.value("min_stratum_count", std::size_t{100});
  m.global_q = j.at("global_q").get<double>();
  m.global_n = j.value("global_n", std::size_t{0});
  for (const auto& [s, e] : j.at("per_stratum").items()) {
    m.per_stratum_q[s] = e.at("q").get<double>();
    if (e.contains("n")) m.calibration_n[s] = e["n"].get<std::size_t>();
    if (e.contains("fallback")) m.fallback[s] = e["fallback"].get<bool>();
  }
  return m;
}

TargetModel target_model_from_json(const Json& j) {
  TargetModel m;
  m.target = j.at("target").get<std::string>();
  m.transform = parse_transform(j.at("transform").get<std::string>());
  m.floor_zero = j.at("floor_zero").get<bool>();
  m.feature_names = j.at("features").get<std::vector<std::string>>();
  m.gbrt = GbrtModel(j.at("base").get<double>(), m.feature_names.size());
  for (const auto& tj : j.at("trees")) {
    RegressionTree t;
    for (const auto& nj : tj) {
      TreeNode n;
      n.feature = nj.at(0).get<int>();
      n.threshold = nj.at(1).get<double>();
      n.left = nj.at(2).get<int>();
      n.right = nj.at(3).get<int>();
      n.value = nj.at(4).get<double>();
      t.nodes.push_back(n);
    }
    m.gbrt.add_tree(std::move(t));
  }
  if (j.contains("importances")) m.gbrt.set_importances(j["importances"].get<std::vector<double>>());
  if (j.contains("calibrator")) m.calibrator = calibrator_from_json(j["calibrator"]);
  // Until bound to a dataset layout, the model expects exactly its own features.
  m.bind(m.feature_names);
  return m;
}

std::vector<ModelBundle> load_model_file(const Json& model_json) {
  check_schema_version(model_json, "model file");
  std::vector<ModelBundle> out;
  try {
    for (const auto& t : model_json.at("targets")) {
      ModelBundle b{target_model_from_json(t), std::nullopt};
      if (t.contains("conformal")) b.conformal = conformal_from_json(t["conformal"]);
      out.push_back(std::move(b));
    }
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
  return out;
}

void write_json(const Json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PipelineError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw PipelineError("failed writing '" + path.string() + "'");
}

Json load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open report '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw DataError("report '" + path.string() + "' is not valid JSON: " + e.what());
  }
  check_schema_version(j, "report '" + path.string() + "'");
  return j;
}

namespace {

void collect_rows(const Json& j, std::vector<MetricsRow>& out) {
  if (j.is_object()) {
    if (j.contains("scope") && j.contains("rmse") && j.contains("group")) {
      out.push_back(metrics_row_from_json(j));
      return;
    }
    for (const auto& [k, v] : j.items()) {
      if (k == "predictions" || k == "config") continue;
      collect_rows(v, out);
    }
  } else if (j.is_array()) {
    for (const auto& v : j) collect_rows(v, out);
  }
}

}  // namespace

std::string metrics_table_from_report(const Json& report) {
  std::vector<MetricsRow> rows;
  collect_rows(report, rows);
  return metrics_table(rows);
}

}  // namespace geoval
