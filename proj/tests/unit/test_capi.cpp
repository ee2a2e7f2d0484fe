#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "geoval/geoval.h"

namespace {

const double kA[] = {0.12, 1.7, 2.3, 3.9, 4.4, 5.1, 6.8, 7.2, 8.9, 9.5};
const double kB[] = {2.2, 3.1, 4.7, 5.5, 6.1, 7.9, 8.4, 9.9, 10.6, 11.3, 12.0, 13.7};

const char* kSmall =
    "seed: 5\n"
    "synth: {n_samples: 300, n_informative: 3, n_noise: 3, n_redundant: 1, n_strata: 2}\n"
    "targets: [SOC]\n"
    "k: 3\n"
    "featsel: {iterations: 6, top_k: 3, oracle: {n_trees: 5, max_depth: 2}}\n"
    "gbrt: {n_trees: 20}\n";

std::string take(char* s) {
  std::string r = s ? s : "";
  gv_string_free(s);
  return r;
}

}  // namespace

TEST_SUITE("capi") {
  TEST_CASE("null pointers are invalid arguments with a message") {
    CHECK(gv_config_create(nullptr) == GV_ERR_INVALID_ARGUMENT);
    CHECK(std::string(gv_last_error()).find("must not be NULL") != std::string::npos);
    double out = 0;
    CHECK(gv_haversine_km(0, 0, 1, 1, nullptr) == GV_ERR_INVALID_ARGUMENT);
    CHECK(gv_ccc(nullptr, nullptr, 3, 0, &out) == GV_ERR_INVALID_ARGUMENT);
    CHECK(gv_run(nullptr, nullptr) == GV_ERR_INVALID_ARGUMENT);
  }

  TEST_CASE("configuration errors map to the config status") {
    gv_config* cfg = nullptr;
    CHECK(gv_config_parse("seed: 1\nsynth: true\nk: 1\n", &cfg) == GV_OK);
    char* json = nullptr;
    CHECK(gv_config_resolved_json(cfg, &json) == GV_ERR_CONFIG);
    CHECK(json == nullptr);
    CHECK(std::string(gv_last_error()).find("k must be at least 2") != std::string::npos);
    CHECK(gv_config_set(cfg, "k", "4") == GV_OK);
    REQUIRE(gv_config_resolved_json(cfg, &json) == GV_OK);
    CHECK(take(json).find("\"k\": 4") != std::string::npos);
    char* v = nullptr;
    REQUIRE(gv_config_get(cfg, "k", &v) == GV_OK);
    CHECK(take(v) == "4");
    gv_config_destroy(cfg);
    CHECK(gv_config_load("/nonexistent/geoval.yaml", &cfg) == GV_ERR_CONFIG);
  }

  TEST_CASE("numeric kernels match frozen values") {
    gv_test_result r{};
    REQUIRE(gv_ks_two_sample(kA, 10, kB, 12, &r) == GV_OK);
    CHECK(r.statistic == doctest::Approx(0.41666666666666663).epsilon(1e-14));
    CHECK(r.p_value == doctest::Approx(0.2999303117542793).epsilon(1e-10));
    CHECK(std::isnan(r.standardized));
    REQUIRE(gv_ad_two_sample(kA, 10, kB, 12, &r) == GV_OK);
    CHECK(r.standardized == doctest::Approx(1.480109152827676).epsilon(1e-12));
    CHECK(r.p_value == doctest::Approx(0.07869114804647291).epsilon(1e-10));
    CHECK(gv_ks_two_sample(kA, 0, kB, 12, &r) == GV_ERR_INVALID_ARGUMENT);

    double d = 0;
    REQUIRE(gv_haversine_km(0, 0, 0, 1, &d) == GV_OK);
    CHECK(d == doctest::Approx(6371.0 * M_PI / 180.0).epsilon(1e-12));

    std::vector<double> res;
    for (int i = 1; i <= 99; ++i) res.push_back(i);
    REQUIRE(gv_conformal_quantile(res.data(), res.size(), 0.1, &d) == GV_OK);
    CHECK(d == 90.0);
    CHECK(gv_conformal_quantile(res.data(), 5, 0.1, &d) == GV_ERR_INVALID_ARGUMENT);

    const double y[] = {1, 2, 3, 4};
    const double p[] = {1.5, 2, 2.5, 4};
    gv_metrics m{};
    REQUIRE(gv_compute_metrics(y, p, 4, &m) == GV_OK);
    CHECK(m.n == 4);
    CHECK(m.rmse == doctest::Approx(std::sqrt(0.125)).epsilon(1e-14));
    CHECK(m.mae == 0.25);
    const double c[] = {2, 2, 2, 2};
    CHECK(gv_ccc(c, c, 4, 0, &d) != GV_OK);
  }

  TEST_CASE("run, report round trip and log callback") {
    std::vector<std::string> lines;
    gv_set_log_callback([](const char* line, void* user) { static_cast<std::vector<std::string>*>(user)->push_back(line); },
                        &lines);
    gv_config* cfg = nullptr;
    REQUIRE(gv_config_parse(kSmall, &cfg) == GV_OK);
    gv_report* rep = nullptr;
    REQUIRE(gv_run(cfg, &rep) == GV_OK);
    CHECK_FALSE(lines.empty());
    CHECK(lines.front().find("\"run_id\"") != std::string::npos);

    char* json = nullptr;
    REQUIRE(gv_report_json(rep, &json) == GV_OK);
    CHECK(take(json).find("\"schema_version\": \"1.0\"") != std::string::npos);
    char* table = nullptr;
    REQUIRE(gv_report_metrics_table(rep, &table) == GV_OK);
    CHECK(take(table).find(",RMSE,") != std::string::npos);
    // A regular file as parent directory cannot be created over.
    CHECK(gv_report_write(rep, "/proc/version/report.json") != GV_OK);

    gv_report* loaded = nullptr;
    CHECK(gv_report_load("/nonexistent/report.json", &loaded) == GV_ERR_DATA);
    gv_report_destroy(rep);
    gv_config_destroy(cfg);

    gv_set_log_enabled(0);
    const std::size_t before = lines.size();
    REQUIRE(gv_config_parse(kSmall, &cfg) == GV_OK);
    REQUIRE(gv_diagnose(cfg, &rep) == GV_OK);
    CHECK(lines.size() == before);
    gv_report_destroy(rep);
    gv_config_destroy(cfg);
    gv_set_log_enabled(1);
    gv_set_log_callback(nullptr, nullptr);
  }

  TEST_CASE("data errors map to the data status") {
    gv_config* cfg = nullptr;
    REQUIRE(gv_config_parse("seed: 1\ninput: /nonexistent/data.csv\ntargets: [SOC]\n", &cfg) == GV_OK);
    gv_report* rep = nullptr;
    CHECK(gv_run(cfg, &rep) == GV_ERR_DATA);
    CHECK(rep == nullptr);
    CHECK(std::strlen(gv_last_error()) > 0);
    gv_config_destroy(cfg);
  }
}
