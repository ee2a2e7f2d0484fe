#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "geoval/pipeline.hpp"

namespace geoval {

struct ConfigTree::Impl {
  YAML::Node root{YAML::NodeType::Map};
};

ConfigTree::ConfigTree() : impl_(std::make_shared<Impl>()) {}

ConfigTree ConfigTree::from_string(const std::string& text) {
  ConfigTree t;
  try {
    YAML::Node n = YAML::Load(text);
    if (n.IsNull()) return t;
    if (!n.IsMap()) throw ConfigError("configuration must be a key/value mapping at the top level");
    t.impl_->root = n;
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("cannot parse configuration: ") + e.what());
  }
  return t;
}

ConfigTree ConfigTree::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

namespace {

std::vector<std::string> split_key(const std::string& dotted) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : dotted) {
    if (c == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  for (const auto& p : parts)
    if (p.empty()) throw ConfigError("malformed configuration key '" + dotted + "'");
  return parts;
}

void set_path(YAML::Node node, const std::vector<std::string>& parts, std::size_t i, const YAML::Node& value) {
  if (i + 1 == parts.size()) {
    node[parts[i]] = value;
    return;
  }
  if (!node[parts[i]].IsMap()) node[parts[i]] = YAML::Node(YAML::NodeType::Map);
  set_path(node[parts[i]], parts, i + 1, value);
}

// Reads one mapping and remembers which keys were consumed so that typos
// surface as errors instead of silently falling back to defaults.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(path_ + " must be a mapping");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    used_.insert(key);
    return node_ && node_.IsMap() && node_[key] && !node_[key].IsNull();
  }

  YAML::Node raw(const std::string& key) {
    used_.insert(key);
    return node_ && node_.IsMap() ? node_[key] : YAML::Node();
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    try {
      return node_[key].as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(field(key) + ": cannot read value '" + scalar_text(node_[key]) + "'");
    }
  }

  Section sub(const std::string& key) { return Section(raw(key), field(key)); }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.count(key)) throw ConfigError("unknown configuration key '" + field(key) + "'");
    }
  }

  static std::string scalar_text(const YAML::Node& n) {
    if (n.IsScalar()) return n.Scalar();
    YAML::Emitter e;
    e << YAML::Flow << n;
    return e.c_str();
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
};

std::vector<std::string> string_list(Section& s, const std::string& key) {
  std::vector<std::string> out;
  if (!s.has(key)) return out;
  YAML::Node n = s.raw(key);
  if (n.IsScalar()) return {n.Scalar()};
  if (!n.IsSequence()) throw ConfigError(s.field(key) + " must be a list of names");
  for (const auto& item : n) out.push_back(item.as<std::string>());
  return out;
}

std::map<std::string, std::string> string_map(Section& s, const std::string& key) {
  std::map<std::string, std::string> out;
  if (!s.has(key)) return out;
  YAML::Node n = s.raw(key);
  if (!n.IsMap()) throw ConfigError(s.field(key) + " must be a mapping");
  for (const auto& kv : n) out[kv.first.as<std::string>()] = kv.second.as<std::string>();
  return out;
}

std::pair<double, double> pair_of(Section& s, const std::string& key, std::pair<double, double> fallback) {
  if (!s.has(key)) return fallback;
  YAML::Node n = s.raw(key);
  try {
    if (n.IsSequence() && n.size() == 2) return {n[0].as<double>(), n[1].as<double>()};
    if (n.IsScalar()) {
      const double v = n.as<double>();
      return {v, v};
    }
  } catch (const YAML::Exception&) {
  }
  throw ConfigError(s.field(key) + " must be a number or a [x, y] pair");
}

void read_gbrt(Section s, GbrtParams& p) {
  p.n_trees = s.get("n_trees", p.n_trees);
  p.max_depth = s.get("max_depth", p.max_depth);
  p.learning_rate = s.get("learning_rate", p.learning_rate);
  p.min_samples_leaf = s.get("min_samples_leaf", p.min_samples_leaf);
  p.subsample_rows = s.get("subsample_rows", p.subsample_rows);
  s.finish();
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    // validate() names fields as "gbrt.x"; rewrite to the section in use.
    if (msg.rfind("gbrt.", 0) == 0) msg = s.field(msg.substr(5));
    throw ConfigError(msg);
  }
}

SynthConfig read_synth(Section s, std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed;
  c.n_samples = s.get<std::size_t>("n_samples", c.n_samples);
  std::tie(c.extent_width_km, c.extent_height_km) =
      pair_of(s, "extent_km", {c.extent_width_km, c.extent_height_km});
  std::tie(c.origin_x_km, c.origin_y_km) = pair_of(s, "origin_km", {c.origin_x_km, c.origin_y_km});
  c.spatial_range_km = s.get("spatial_range_km", c.spatial_range_km);
  c.n_informative = s.get("n_informative", c.n_informative);
  c.n_noise = s.get("n_noise", c.n_noise);
  c.n_redundant = s.get("n_redundant", c.n_redundant);
  c.noise_sd = s.get("noise_sd", c.noise_sd);
  c.covariate_noise_sd = s.get("covariate_noise_sd", c.covariate_noise_sd);
  c.latent_sd = s.get("latent_sd", c.latent_sd);
  const auto skew = s.get<std::string>("target_skew", "lognormal");
  if (skew == "lognormal") {
    c.target_skew = TargetSkew::lognormal;
  } else if (skew == "none") {
    c.target_skew = TargetSkew::none;
  } else {
    throw ConfigError(s.field("target_skew") + ": expected 'none' or 'lognormal', got '" + skew + "'");
  }
  c.target_scale = s.get("target_scale", c.target_scale);
  c.link_scale = s.get("link_scale", c.link_scale);
  c.n_strata = s.get("n_strata", c.n_strata);
  c.stratum_effect_sd = s.get("stratum_effect_sd", c.stratum_effect_sd);
  if (s.has("trend")) {
    Section t = s.sub("trend");
    SynthTrend trend;
    const auto dir = t.get<std::string>("direction", "north");
    if (dir == "north") {
      trend.direction = TrendDirection::north;
    } else if (dir == "east") {
      trend.direction = TrendDirection::east;
    } else {
      throw ConfigError(t.field("direction") + ": expected 'north' or 'east', got '" + dir + "'");
    }
    trend.magnitude = t.get("magnitude", 0.0);
    t.finish();
    c.trend = trend;
  }
  c.nonlinear = s.get("nonlinear", c.nonlinear);
  c.smooth_noise_features = s.get("smooth_noise_features", c.smooth_noise_features);
  c.white_noise = s.get("white_noise", c.white_noise);
  c.basis_functions = s.get("basis_functions", c.basis_functions);
  c.target_name = s.get("target_name", c.target_name);
  c.seed = s.get<std::uint64_t>("seed", c.seed);
  s.finish();
  c.validate();
  return c;
}

}  // namespace

void ConfigTree::set(const std::string& dotted_key, const std::string& value) {
  YAML::Node v;
  try {
    v = YAML::Load(value);
  } catch (const YAML::Exception&) {
    v = YAML::Node(value);
  }
  if (!v.IsDefined() || (v.IsNull() && !value.empty() && value != "null" && value != "~")) v = YAML::Node(value);
  set_path(impl_->root, split_key(dotted_key), 0, v);
}

std::optional<std::string> ConfigTree::get_scalar(const std::string& dotted_key) const {
  YAML::Node cur = YAML::Clone(impl_->root);
  for (const auto& part : split_key(dotted_key)) {
    if (!cur.IsMap() || !cur[part]) return std::nullopt;
    YAML::Node next = cur[part];
    cur.reset(next);
  }
  if (!cur.IsScalar()) return std::nullopt;
  return cur.Scalar();
}

RunConfig ConfigTree::resolve() const {
  RunConfig c;
  Section top(impl_->root, "");

  if (!top.has("seed")) throw ConfigError("seed is required");
  c.seed = top.get<std::uint64_t>("seed", 0);

  const bool has_input = top.has("input");
  const bool has_synth = top.has("synth");
  if (has_input == has_synth) throw ConfigError("exactly one of 'input' or 'synth' must be given");
  if (has_input) c.input = top.get<std::string>("input", "");
  if (has_synth) {
    if (top.raw("synth").IsScalar()) {
      // "synth: true" (or an empty mapping) selects every generator default.
      if (!top.raw("synth").as<bool>(false)) throw ConfigError("synth must be a mapping or 'true'");
      SynthConfig s;
      s.seed = c.seed;
      c.synth = s;
    } else {
      c.synth = read_synth(top.sub("synth"), c.seed);
    }
  }

  {
    Section s = top.sub("schema");
    c.schema.id = s.get("id", c.schema.id);
    c.schema.lat = s.get("lat", c.schema.lat);
    c.schema.lon = s.get("lon", c.schema.lon);
    c.schema.year = s.get("year", c.schema.year);
    c.schema.depth_class = s.get("depth_class", c.schema.depth_class);
    c.schema.stratum = s.get("stratum", c.schema.stratum);
    c.schema.targets = string_list(s, "targets");
    c.schema.covariates = string_list(s, "covariates");
    s.finish();
  }
  c.targets = string_list(top, "targets");
  if (c.input && c.schema.targets.empty()) c.schema.targets = c.targets;
  if (c.input && c.schema.targets.empty())
    throw ConfigError("targets: at least one target column must be named for CSV input");

  c.block_km = top.get("block_km", c.block_km);
  if (!(c.block_km > 0.0)) throw ConfigError("block_km must be positive");
  c.block_random_offset = top.get("block_random_offset", c.block_random_offset);
  c.k = top.get("k", c.k);
  if (c.k < 2) throw ConfigError("k must be at least 2 (got " + std::to_string(c.k) + ")");
  c.test_fraction = top.get("test_fraction", c.test_fraction);
  if (!(c.test_fraction >= 0.0 && c.test_fraction < 0.5))
    throw ConfigError("test_fraction must lie in [0, 0.5)");

  {
    Section s = top.sub("featsel");
    auto& f = c.featsel;
    f.enabled = s.get("enabled", f.enabled);
    f.corr_threshold = s.get("corr_threshold", f.corr_threshold);
    if (!(f.corr_threshold > 0.0 && f.corr_threshold <= 1.0))
      throw ConfigError("featsel.corr_threshold must lie in (0, 1]");
    f.stability.iterations = s.get("iterations", f.stability.iterations);
    f.stability.subsample = s.get("subsample", f.stability.subsample);
    f.stability.top_k = s.get("top_k", f.stability.top_k);
    f.stability.pi_threshold = s.get("pi_threshold", f.stability.pi_threshold);
    read_gbrt(s.sub("oracle"), f.stability.oracle);
    s.finish();
    f.stability.seed = derive_seed(c.seed, 21);
    f.stability.oracle.seed = derive_seed(c.seed, 22);
    try {
      f.stability.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("featsel: ") + e.what());
    }
  }
  read_gbrt(top.sub("gbrt"), c.gbrt);
  c.gbrt.seed = derive_seed(c.seed, 23);

  {
    if (top.raw("transform").IsScalar()) {
      c.transform_default = top.raw("transform").Scalar();
    } else {
      for (auto& [k, v] : string_map(top, "transform")) {
        if (k == "default") {
          c.transform_default = v;
        } else {
          c.transform[k] = v;
        }
      }
    }
    auto check = [](const std::string& field, const std::string& v) {
      if (v != "auto" && v != "identity" && v != "log1p")
        throw ConfigError(field + ": expected auto, identity or log1p, got '" + v + "'");
    };
    check("transform.default", c.transform_default);
    for (const auto& [k, v] : c.transform) check("transform." + k, v);
  }

  {
    Section s = top.sub("calibration");
    const auto mode = s.get<std::string>("mode", "stratified");
    if (mode == "stratified") {
      c.calibration = CalibrationMode::stratified;
    } else if (mode == "global") {
      c.calibration = CalibrationMode::global;
    } else if (mode == "none") {
      c.calibration = CalibrationMode::none;
    } else {
      throw ConfigError("calibration.mode: expected stratified, global or none, got '" + mode + "'");
    }
    c.calibration_min_count = s.get("min_count", c.calibration_min_count);
    if (c.calibration_min_count < 3) throw ConfigError("calibration.min_count must be at least 3");
    s.finish();
  }
  c.alpha = top.get("alpha", c.alpha);
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  {
    Section s = top.sub("conformal");
    c.conformal_stratified = s.get("stratified", c.conformal_stratified);
    c.conformal_min_count = s.get("min_count", c.conformal_min_count);
    s.finish();
  }
  c.min_labeled = top.get("min_labeled", c.min_labeled);
  c.unstable_floor = top.get("unstable_floor", c.unstable_floor);
  c.superclasses = string_map(top, "superclasses");
  c.output_dir = top.get<std::string>("output_dir", "");
  c.plots = top.get("plots", c.plots);
  top.finish();
  return c;
}

Transform RunConfig::transform_for(const std::string& target) const {
  auto it = transform.find(target);
  const std::string& name = it != transform.end() ? it->second : transform_default;
  if (name == "auto") return floor_for(target) ? Transform::log1p : Transform::identity;
  return parse_transform(name);
}

bool RunConfig::floor_for(const std::string& target) const {
  if (is_nonnegative_target(target)) return true;
  return synth && synth->target_name == target && synth->target_skew == TargetSkew::lognormal;
}

namespace {

Json gbrt_json(const GbrtParams& p) {
  return Json{{"n_trees", p.n_trees},
              {"max_depth", p.max_depth},
              {"learning_rate", p.learning_rate},
              {"min_samples_leaf", p.min_samples_leaf},
              {"subsample_rows", p.subsample_rows}};
}

}  // namespace

Json config_to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  if (c.input) j["input"] = c.input->string();
  if (c.synth) {
    const auto& s = *c.synth;
    Json sj;
    sj["n_samples"] = s.n_samples;
    sj["extent_km"] = {s.extent_width_km, s.extent_height_km};
    sj["origin_km"] = {s.origin_x_km, s.origin_y_km};
    sj["spatial_range_km"] = s.spatial_range_km;
    sj["n_informative"] = s.n_informative;
    sj["n_noise"] = s.n_noise;
    sj["n_redundant"] = s.n_redundant;
    sj["noise_sd"] = s.noise_sd;
    sj["covariate_noise_sd"] = s.covariate_noise_sd;
    sj["latent_sd"] = s.latent_sd;
    sj["target_skew"] = s.target_skew == TargetSkew::lognormal ? "lognormal" : "none";
    sj["target_scale"] = s.target_scale;
    sj["link_scale"] = s.link_scale;
    sj["n_strata"] = s.n_strata;
    sj["stratum_effect_sd"] = s.stratum_effect_sd;
    if (s.trend) {
      sj["trend"] = {{"direction", s.trend->direction == TrendDirection::north ? "north" : "east"},
                     {"magnitude", s.trend->magnitude}};
    }
    sj["nonlinear"] = s.nonlinear;
    sj["smooth_noise_features"] = s.smooth_noise_features;
    sj["white_noise"] = s.white_noise;
    sj["basis_functions"] = s.basis_functions;
    sj["target_name"] = s.target_name;
    sj["seed"] = s.seed;
    j["synth"] = sj;
  }
  if (c.input) {
    Json sc{{"id", c.schema.id},
            {"lat", c.schema.lat},
            {"lon", c.schema.lon},
            {"year", c.schema.year},
            {"depth_class", c.schema.depth_class},
            {"stratum", c.schema.stratum},
            {"targets", c.schema.targets}};
    if (!c.schema.covariates.empty()) sc["covariates"] = c.schema.covariates;
    j["schema"] = sc;
  }
  j["targets"] = c.targets;
  j["block_km"] = c.block_km;
  j["block_random_offset"] = c.block_random_offset;
  j["k"] = c.k;
  j["test_fraction"] = c.test_fraction;
  j["featsel"] = {{"enabled", c.featsel.enabled},
                  {"corr_threshold", c.featsel.corr_threshold},
                  {"iterations", c.featsel.stability.iterations},
                  {"subsample", c.featsel.stability.subsample},
                  {"top_k", c.featsel.stability.top_k},
                  {"pi_threshold", c.featsel.stability.pi_threshold},
                  {"oracle", gbrt_json(c.featsel.stability.oracle)}};
  j["gbrt"] = gbrt_json(c.gbrt);
  Json tj{{"default", c.transform_default}};
  for (const auto& [k, v] : c.transform) tj[k] = v;
  j["transform"] = tj;
  static const char* const kModes[] = {"none", "global", "stratified"};
  j["calibration"] = {{"mode", kModes[static_cast<int>(c.calibration)]}, {"min_count", c.calibration_min_count}};
  j["alpha"] = c.alpha;
  j["conformal"] = {{"stratified", c.conformal_stratified}, {"min_count", c.conformal_min_count}};
  j["min_labeled"] = c.min_labeled;
  j["unstable_floor"] = c.unstable_floor;
  j["superclasses"] = Json::object();
  for (const auto& [k, v] : c.superclasses) j["superclasses"][k] = v;
  return j;
}

std::string run_id_for(const Json& config_echo) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : config_echo.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace geoval
