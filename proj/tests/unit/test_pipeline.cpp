#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "geoval/pipeline.hpp"
#include "helpers.hpp"

using namespace geoval;

namespace {

const char* kSmall = R"(seed: 5
synth:
  n_samples: 400
  n_informative: 3
  n_noise: 4
  n_redundant: 2
  n_strata: 2
targets: [SOC]
k: 3
test_fraction: 0.2
featsel:
  iterations: 8
  top_k: 4
  oracle: {n_trees: 10, max_depth: 2}
gbrt:
  n_trees: 30
plots: false
)";

RunConfig small_config() { return ConfigTree::from_string(kSmall).resolve(); }

Json without_timing(Json j) {
  j.erase("timing");
  return j;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("configuration errors name the problem") {
    CHECK_THROWS_WITH_AS(ConfigTree::from_string("seed: 1\nsynth: true\nk: 1\n").resolve(),
                         doctest::Contains("k must be at least 2"), ConfigError);
    CHECK_THROWS_WITH_AS(ConfigTree::from_string("synth: true\n").resolve(), doctest::Contains("seed is required"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(ConfigTree::from_string("seed: 1\nsynth: true\nbogus: 3\n").resolve(),
                         doctest::Contains("bogus"), ConfigError);
    CHECK_THROWS_AS(ConfigTree::from_string("seed: 1\n").resolve(), ConfigError);
    CHECK_THROWS_AS(ConfigTree::from_string("seed: 1\nsynth: true\ninput: a.csv\n").resolve(), ConfigError);
    CHECK_THROWS_AS(ConfigTree::from_string("seed: 1\nsynth: true\nalpha: 1.5\n").resolve(), ConfigError);
    CHECK_THROWS_AS(ConfigTree::from_string("seed: [1\n"), ConfigError);
  }

  TEST_CASE("dotted overrides reach nested sections") {
    auto t = ConfigTree::from_string(kSmall);
    t.set("gbrt.max_depth", "2");
    t.set("synth.n_samples", "250");
    const auto c = t.resolve();
    CHECK(c.gbrt.max_depth == 2);
    CHECK(c.synth->n_samples == 250);
    CHECK(t.get_scalar("gbrt.max_depth") == std::optional<std::string>("2"));
  }

  TEST_CASE("the configuration echo reloads to the same configuration") {
    const auto a = config_to_json(small_config());
    const auto b = config_to_json(ConfigTree::from_string(a.dump()).resolve());
    CHECK(a == b);
    CHECK(run_id_for(a) == run_id_for(b));
  }

  TEST_CASE("runs are deterministic and the report has the documented layout") {
    const auto cfg = small_config();
    const auto a = run(cfg);
    const auto b = run(cfg);
    CHECK(without_timing(a.report) == without_timing(b.report));
    CHECK(a.model == b.model);

    const auto& r = a.report;
    CHECK(r["schema_version"] == "1.0");
    CHECK(r["kind"] == "run");
    REQUIRE(r["targets"].size() == 1);
    const auto& t = r["targets"][0];
    CHECK(t["target"] == "SOC");
    CHECK(t["transform"] == "log1p");
    CHECK(t["model_summary"]["train_loss_non_increasing"] == true);
    CHECK(t["metrics"]["oof"]["pooled"]["n"].get<std::size_t>() == t["n_labeled_calibration"].get<std::size_t>());
    for (const auto& p : t["predictions"]) {
      CHECK(p["lower"].get<double>() <= p["predicted"].get<double>());
      CHECK(p["predicted"].get<double>() <= p["upper"].get<double>());
      CHECK(p["lower"].get<double>() >= 0.0);
    }
  }

  TEST_CASE("a reloaded model reproduces the test predictions") {
    const auto cfg = small_config();
    const auto out = run(cfg);
    const auto data = load_data(cfg);
    auto bundles = load_model_file(out.model);
    REQUIRE(bundles.size() == 1);
    auto& m = bundles[0].model;
    m.bind(data.dataset.feature_names);
    std::map<std::string, const SampleRecord*> by_id;
    for (const auto& rec : data.dataset.records) by_id[rec.id] = &rec;
    int checked = 0;
    for (const auto& p : out.report["targets"][0]["predictions"]) {
      if (p["set"] != "test") continue;
      const SampleRecord& rec = *by_id.at(p["id"].get<std::string>());
      CHECK(m.predict_calibrated(rec.covariates, rec.stratum) ==
            doctest::Approx(p["predicted"].get<double>()).epsilon(1e-12));
      ++checked;
    }
    CHECK(checked > 0);
    REQUIRE(bundles[0].conformal);
  }

  TEST_CASE("compare-cv reports both modes with deltas") {
    const auto out = compare_cv_modes(small_config());
    CHECK(out.report["modes"] == Json::array({"blocked", "random"}));
    const auto& t = out.report["targets"][0];
    const double d = t["delta_blocked_minus_random"]["rmse"].get<double>();
    CHECK(d == doctest::Approx(t["blocked"]["pooled"]["rmse"].get<double>() -
                               t["random"]["pooled"]["rmse"].get<double>()));
  }

  TEST_CASE("report loading checks the schema version") {
    testutil::TempDir dir("report");
    Json j{{"schema_version", "2.0"}, {"kind", "run"}, {"targets", Json::array()}};
    write_json(j, dir / "r.json");
    CHECK_THROWS_AS(load_report(dir / "r.json"), DataError);
    j["schema_version"] = "1.3";
    write_json(j, dir / "r.json");
    CHECK_NOTHROW(load_report(dir / "r.json"));
    testutil::write_text(dir / "bad.json", "{not json");
    CHECK_THROWS_AS(load_report(dir / "bad.json"), DataError);
  }

  TEST_CASE("plots: four figures per target, missing sections become warnings") {
    testutil::TempDir dir("plots");
    const auto out = run(small_config());
    const auto res = emit_plots(out.report, dir.path());
    CHECK(res.written.size() == 4);
    for (const char* f : {"SOC_obs_pred.svg", "SOC_stability.svg", "SOC_stratum_nrmse.svg", "SOC_depth_ccc.svg"}) {
      const auto text = testutil::read_text(dir / f);
      CHECK(text.rfind("<?xml", 0) == 0);
      CHECK(text.find("<svg") != std::string::npos);
      CHECK(text.find("</svg>") != std::string::npos);
    }
    Json stripped = out.report;
    stripped["targets"][0].erase("stability");
    const auto partial = emit_plots(stripped, dir / "partial");
    CHECK(partial.written.size() == 3);
    CHECK(partial.warnings.size() == 1);
  }

  TEST_CASE("evaluate computes pooled and grouped metrics from a CSV") {
    testutil::TempDir dir("eval");
    testutil::write_text(dir / "p.csv",
                         "target,observed,predicted,stratum\n"
                         "SOC,1,1.5,a\nSOC,2,2,a\nSOC,3,2.5,b\nSOC,4,4,b\nSOC,NA,1,b\n");
    EvaluateColumns cols;
    cols.stratum = "stratum";
    const auto j = evaluate_predictions_csv(dir / "p.csv", cols);
    CHECK(j["kind"] == "evaluate");
    CHECK(j["skipped_rows"] == 1);
    const auto& t = j["targets"][0];
    CHECK(t["pooled"]["n"] == 4);
    CHECK(t["pooled"]["rmse"].get<double>() == doctest::Approx(std::sqrt(0.125)).epsilon(1e-14));
    CHECK(t["pooled"]["mae"].get<double>() == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(t["by_stratum"].size() == 2);
    const auto table = metrics_table_from_report(j);
    CHECK(table.rfind("target,scope,group,label,n,RMSE", 0) == 0);
    CHECK(std::count(table.begin(), table.end(), '\n') == 4);

    cols.observed = "missing";
    CHECK_THROWS_AS(evaluate_predictions_csv(dir / "p.csv", cols), DataError);
  }
}
