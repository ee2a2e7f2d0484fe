#include <doctest.h>

#include <numeric>

#include "geoval/common.hpp"
#include "geoval/data.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace geoval;

TEST_SUITE("common") {
  TEST_CASE("type-7 quantiles match frozen reference values") {
    // numpy.quantile(..., method="linear")
    const std::vector<double> v = {7, 1, 4, 9, 2.5, 6};
    const std::vector<std::pair<double, double>> expected = {
        {0.0, 1.0}, {0.1, 1.75}, {0.25, 2.875}, {0.5, 5.0}, {0.75, 6.75}, {0.9, 8.0}, {1.0, 9.0}};
    for (auto [p, q] : expected) {
      CHECK(quantile(v, p) == doctest::Approx(q).epsilon(1e-15));
      CHECK(quantile(v, p) == doctest::Approx(oracle::quantile7(v, p)).epsilon(1e-15));
    }
  }

  TEST_CASE("median and IQR of four points") {
    CHECK(median({1, 2, 3, 4}) == 2.5);
    CHECK(iqr({1, 2, 3, 4}) == 1.5);
    CHECK(median({42}) == 42);
    CHECK(iqr({42}) == 0);
  }

  TEST_CASE("quantile agrees with the oracle on random vectors") {
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
      auto v = testutil::normals(rng, 1 + rng.index(40));
      const double p = rng.uniform();
      CHECK(quantile(v, p) == doctest::Approx(oracle::quantile7(v, p)).epsilon(1e-12));
    }
  }

  TEST_CASE("Rng is deterministic and streams differ") {
    Rng a(99), b(99), c(derive_seed(99, 1));
    bool any_diff = false;
    for (int i = 0; i < 100; ++i) {
      const auto x = a.next_u64();
      CHECK(x == b.next_u64());
      any_diff |= x != c.next_u64();
    }
    CHECK(any_diff);
    Rng u(5);
    for (int i = 0; i < 1000; ++i) {
      const double x = u.uniform();
      CHECK(x >= 0.0);
      CHECK(x < 1.0);
      CHECK(u.index(7) < 7);
    }
  }

  TEST_CASE("sampling without replacement yields distinct indices") {
    Rng rng(11);
    auto s = rng.sample_without_replacement(50, 20);
    REQUIRE(s.size() == 20);
    std::sort(s.begin(), s.end());
    CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
    CHECK(s.back() < 50);
  }
}

namespace {

Dataset small_dataset() {
  Dataset ds;
  ds.feature_names = {"EO_a", "CLIM_b"};
  ds.target_names = {"SOC", "pH"};
  for (int i = 0; i < 3; ++i) {
    SampleRecord r;
    r.id = "s" + std::to_string(i);
    r.location = {45.0 + 0.1 * i, 7.5 - 0.25 * i};
    r.year = 2015 + i;
    r.depth = static_cast<DepthClass>(i);
    r.stratum = i < 2 ? "temperate" : "boreal";
    r.targets["SOC"] = 12.5 + i;
    r.targets["pH"] = i == 1 ? std::optional<double>{} : std::optional<double>{6.1 + 0.3 * i};
    r.covariates = {0.1 * i + 1.0 / 3.0, -2.5e-7 * i};
    ds.records.push_back(r);
  }
  return ds;
}

ColumnMapping mapping_for(const Dataset& ds) {
  ColumnMapping m;
  m.targets = ds.target_names;
  return m;
}

const char* kHeader = "id,lat,lon,year,depth_class,stratum,SOC,c1,c2\n";

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("three-row file loads with width 2") {
    testutil::TempDir dir("data");
    testutil::write_text(dir / "a.csv", std::string(kHeader) +
                                            "a,45.1,7.2,2018,0-30,temperate,10.5,0.1,0.2\n"
                                            "b,45.2,7.3,2018,30-60,temperate,11.5,0.3,0.4\n"
                                            "c,45.3,7.4,2019,60+,boreal,,0.5,0.6\n");
    ColumnMapping m;
    m.targets = {"SOC"};
    const auto res = load_dataset(dir / "a.csv", m);
    CHECK(res.dataset.size() == 3);
    CHECK(res.dataset.width() == 2);
    CHECK(res.rejected.empty());
    CHECK(res.dataset.records[2].depth == DepthClass::d60_plus);
    CHECK_FALSE(res.dataset.records[2].target("SOC").has_value());
  }

  TEST_CASE("save then load is the identity") {
    testutil::TempDir dir("data");
    const auto ds = small_dataset();
    save_dataset(ds, dir / "rt.csv");
    const auto back = load_dataset(dir / "rt.csv", mapping_for(ds));
    CHECK(back.rejected.empty());
    CHECK(back.dataset == ds);
  }

  TEST_CASE("out-of-range latitude is rejected with row and column") {
    testutil::TempDir dir("data");
    testutil::write_text(dir / "b.csv", std::string(kHeader) +
                                            "a,45.1,7.2,2018,0-30,temperate,10.5,0.1,0.2\n"
                                            "b,95.0,7.3,2018,0-30,temperate,11.5,0.3,0.4\n");
    ColumnMapping m;
    m.targets = {"SOC"};
    const auto res = load_dataset(dir / "b.csv", m);
    CHECK(res.dataset.size() == 1);
    REQUIRE(res.rejected.size() == 1);
    CHECK(res.rejected[0].row == 2);
    CHECK(res.rejected[0].column == "lat");
  }

  TEST_CASE("negative SOC and non-numeric covariates are rejected") {
    testutil::TempDir dir("data");
    testutil::write_text(dir / "c.csv", std::string(kHeader) +
                                            "a,45.1,7.2,2018,0-30,temperate,-1,0.1,0.2\n"
                                            "b,45.1,7.2,2018,0-30,temperate,1,abc,0.2\n"
                                            "c,45.1,7.2,2018,0-30,temperate,1,0.1,0.2\n");
    ColumnMapping m;
    m.targets = {"SOC"};
    const auto res = load_dataset(dir / "c.csv", m);
    CHECK(res.dataset.size() == 1);
    REQUIRE(res.rejected.size() == 2);
    CHECK(res.rejected[0].column == "SOC");
    CHECK(res.rejected[1].column == "c1");
  }

  TEST_CASE("duplicated id fails listing the duplicate") {
    testutil::TempDir dir("data");
    testutil::write_text(dir / "d.csv", std::string(kHeader) +
                                            "a,45.1,7.2,2018,0-30,temperate,10.5,0.1,0.2\n"
                                            "a,45.2,7.3,2018,0-30,temperate,11.5,0.3,0.4\n");
    ColumnMapping m;
    m.targets = {"SOC"};
    CHECK_THROWS_WITH_AS(load_dataset(dir / "d.csv", m), doctest::Contains("duplicate sample ids: a"), DataError);
  }

  TEST_CASE("missing required column is a data error naming it") {
    testutil::TempDir dir("data");
    testutil::write_text(dir / "e.csv", "id,lat,lon,year,stratum,SOC\na,1,2,2000,x,1\n");
    ColumnMapping m;
    m.targets = {"SOC"};
    CHECK_THROWS_WITH_AS(load_dataset(dir / "e.csv", m), doctest::Contains("depth_class"), DataError);
  }

  TEST_CASE("pH bounds follow the physical range") {
    CHECK(check_target_value("pH", 0.0).has_value());
    CHECK(check_target_value("pH", 14.0).has_value());
    CHECK_FALSE(check_target_value("pH", 6.5).has_value());
    CHECK(check_target_value("N", -0.1).has_value());
    CHECK_FALSE(check_target_value("SOC", 0.0).has_value());
    CHECK(is_nonnegative_target("K"));
    CHECK_FALSE(is_nonnegative_target("pH"));
  }

  TEST_CASE("summaries partition the records") {
    Dataset ds;
    ds.target_names = {"SOC"};
    const std::vector<std::string> strata = {"x", "x", "y", "y", "y"};
    for (int i = 0; i < 5; ++i) {
      SampleRecord r;
      r.id = std::to_string(i);
      r.stratum = strata[i];
      r.targets["SOC"] = i + 1.0;
      ds.records.push_back(r);
    }
    const auto s = summarize(ds);
    REQUIRE(s.size() == 1);
    CHECK(s[0].overall.count == 5);
    CHECK(s[0].by_stratum.at("x").count == 2);
    CHECK(s[0].by_stratum.at("y").count == 3);
    std::size_t total = 0;
    for (const auto& [_, v] : s[0].by_stratum) total += v.count;
    CHECK(total == s[0].overall.count);

    ds.records.resize(4);
    const auto four = summarize(ds);
    CHECK(four[0].overall.median == 2.5);
    CHECK(four[0].overall.iqr == 1.5);

    ds.records.resize(1);
    const auto one = summarize(ds);
    CHECK(one[0].overall.median == 1.0);
    CHECK(one[0].overall.iqr == 0.0);

    ds.records.clear();
    CHECK_THROWS_AS(summarize(ds), DataError);
  }

  TEST_CASE("dataset check catches width and id violations") {
    auto ds = small_dataset();
    CHECK_NOTHROW(ds.check());
    ds.records[1].covariates.push_back(1.0);
    CHECK_THROWS_AS(ds.check(), DataError);
    ds = small_dataset();
    ds.records[2].id = ds.records[0].id;
    CHECK_THROWS_AS(ds.check(), DataError);
  }
}
