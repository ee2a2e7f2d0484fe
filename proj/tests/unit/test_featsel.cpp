#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "geoval/featsel.hpp"
#include "geoval/synth.hpp"
#include "helpers.hpp"

using namespace geoval;

namespace {

std::vector<std::string> names_for(std::size_t p, const std::string& prefix = "F_") {
  std::vector<std::string> n;
  for (std::size_t j = 0; j < p; ++j) n.push_back(prefix + std::to_string(j));
  return n;
}

std::vector<std::size_t> iota_n(std::size_t p) {
  std::vector<std::size_t> v(p);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

StabilityOptions quick_options(int top_k, std::uint64_t seed) {
  StabilityOptions o;
  o.top_k = top_k;
  o.seed = seed;
  o.oracle.n_trees = 20;
  return o;
}

void check_report_invariants(const StabilityReport& r) {
  for (double p : r.pi) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  auto sorted = r.ranked;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == iota_n(r.columns.size()));
  for (std::size_t i = 1; i < r.ranked.size(); ++i) CHECK(r.pi[r.ranked[i - 1]] >= r.pi[r.ranked[i]]);
  CHECK(r.stage_counts.after_stage1 <= r.stage_counts.initial);
  CHECK(r.stage_counts.after_stage2 <= r.stage_counts.after_stage1);
}

}  // namespace

TEST_SUITE("featsel") {
  TEST_CASE("a duplicated column keeps exactly one of the pair") {
    Rng rng(1);
    Matrix x(50, 3);
    for (std::size_t i = 0; i < 50; ++i) {
      x(i, 0) = rng.normal();
      x(i, 1) = rng.normal();
      x(i, 2) = -3.0 * x(i, 0) + 1.0;
    }
    CHECK(correlation_filter(x, 0.95) == std::vector<std::size_t>{0, 1});
  }

  TEST_CASE("orthogonal columns are all kept") {
    Matrix x(4, 3);
    const double cols[3][4] = {{1, -1, 1, -1}, {1, 1, -1, -1}, {1, -1, -1, 1}};
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 3; ++j) x(i, j) = cols[j][i];
    CHECK(correlation_filter(x, 0.95).size() == 3);
  }

  TEST_CASE("three planted correlated groups keep one member each plus singletons") {
    // Columns: group A {0, 4, 7}, group B {1, 5}, group C {2, 8}, singletons {3, 6, 9}.
    Rng rng(2);
    const std::size_t n = 400;
    Matrix x(n, 10);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = rng.normal(), b = rng.normal(), c = rng.normal();
      x(i, 0) = a;
      x(i, 4) = a + 0.14 * rng.normal();
      x(i, 7) = a + 0.14 * rng.normal();
      x(i, 1) = b;
      x(i, 5) = b + 0.14 * rng.normal();
      x(i, 2) = c;
      x(i, 8) = c + 0.14 * rng.normal();
      x(i, 3) = rng.normal();
      x(i, 6) = rng.normal();
      x(i, 9) = rng.normal();
    }
    CHECK(correlation_filter(x, 0.95) == std::vector<std::size_t>{0, 1, 2, 3, 6, 9});
  }

  TEST_CASE("zero-variance columns are dropped with a diagnostic") {
    Rng rng(3);
    Matrix x(20, 2);
    for (std::size_t i = 0; i < 20; ++i) {
      x(i, 0) = 5.0;
      x(i, 1) = rng.normal();
    }
    Diagnostics diag;
    CHECK(correlation_filter(x, 0.95, &diag) == std::vector<std::size_t>{1});
    CHECK_FALSE(diag.empty());
    CHECK_THROWS_AS(correlation_filter(x, 0.0), std::invalid_argument);
  }

  TEST_CASE("a feature equal to y has pi = 1") {
    Rng rng(4);
    const std::size_t n = 200, p = 15;
    Matrix x(n, p);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < p; ++j) x(i, j) = rng.normal();
      y[i] = x(i, 6);
    }
    StabilityOptions o;
    o.top_k = 3;
    o.seed = 5;
    const auto rep = stability_select(x, y, iota_n(p), names_for(p), o);
    CHECK(rep.pi[6] == 1.0);
    CHECK(rep.ranked.front() == 6);
    CHECK(rep.selected.front() == 6);
    check_report_invariants(rep);
  }

  TEST_CASE("pure-noise targets keep the largest pi below 0.5") {
    // Null control needs top_k well below the candidate count: at top_k / p = 0.1
    // a spuriously correlated column survives most half-subsamples.
    int below = 0;
    const int seeds = 100;
    for (int s = 0; s < seeds; ++s) {
      Rng rng(1000 + s);
      const std::size_t n = 200, p = 50;
      Matrix x(n, p);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) x(i, j) = rng.normal();
      const auto y = testutil::normals(rng, n);
      StabilityOptions o;
      o.top_k = 1;
      o.seed = s;
      const auto rep = stability_select(x, y, iota_n(p), names_for(p), o);
      below += *std::max_element(rep.pi.begin(), rep.pi.end()) < 0.5 ? 1 : 0;
    }
    CHECK(below >= 95);
  }

  TEST_CASE("two iterations give pi in {0, 0.5, 1}") {
    Rng rng(6);
    Matrix x(60, 8);
    for (std::size_t i = 0; i < 60; ++i)
      for (std::size_t j = 0; j < 8; ++j) x(i, j) = rng.normal();
    const auto y = testutil::normals(rng, 60);
    StabilityOptions o = quick_options(3, 7);
    o.iterations = 2;
    const auto rep = stability_select(x, y, iota_n(8), names_for(8), o);
    for (double p : rep.pi) CHECK((p == 0.0 || p == 0.5 || p == 1.0));
    o.iterations = 1;
    CHECK_THROWS_AS(stability_select(x, y, iota_n(8), names_for(8), o), std::invalid_argument);
  }

  TEST_CASE("runs are deterministic and pi follows the feature under column permutation") {
    Rng rng(8);
    const std::size_t n = 150, p = 10;
    Matrix x(n, p);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < p; ++j) x(i, j) = rng.normal();
      y[i] = x(i, 2) + 0.5 * x(i, 7) + 0.3 * rng.normal();
    }
    const auto o = quick_options(3, 9);
    const auto a = stability_select(x, y, iota_n(p), names_for(p), o);
    const auto b = stability_select(x, y, iota_n(p), names_for(p), o);
    CHECK(a.pi == b.pi);
    CHECK(a.ranked == b.ranked);

    std::vector<std::size_t> perm = {9, 3, 0, 7, 1, 8, 2, 6, 4, 5};
    const Matrix xp = x.select_cols(perm);
    std::vector<std::string> names;
    for (auto j : perm) names.push_back(names_for(p)[j]);
    const auto c = stability_select(xp, y, perm, names, o);
    for (std::size_t j = 0; j < p; ++j) CHECK(c.pi[j] == a.pi[perm[j]]);
  }

  TEST_CASE("select_features runs both stages with monotone counts") {
    SynthConfig sc;
    sc.n_samples = 400;
    sc.seed = 11;
    const auto data = generate(sc);
    const Matrix x = data.dataset.covariate_matrix();
    std::vector<double> y;
    for (const auto& r : data.dataset.records) y.push_back(std::log1p(*r.target("SOC")));
    FeatselConfig cfg;
    cfg.stability = quick_options(8, 3);
    const auto rep = select_features(x, y, data.dataset.feature_names, cfg);
    CHECK(rep.stage_counts.initial == x.cols());
    CHECK(rep.stage_counts.after_stage1 < rep.stage_counts.initial);
    CHECK(rep.stage_counts.after_stage2 == rep.selected.size());
    check_report_invariants(rep);
    // Redundant mixes are filtered, never the informative originals.
    std::set<std::string> kept(rep.names.begin(), rep.names.end());
    for (const auto& f : data.truth.informative) CHECK(kept.count(f) == 1);
  }

  TEST_CASE("an empty stage 2 keeps the top-ranked feature") {
    Rng rng(12);
    Matrix x(80, 5);
    for (std::size_t i = 0; i < 80; ++i)
      for (std::size_t j = 0; j < 5; ++j) x(i, j) = rng.normal();
    const auto y = testutil::normals(rng, 80);
    FeatselConfig cfg;
    cfg.stability = quick_options(1, 1);
    cfg.stability.pi_threshold = 1.0;
    const auto rep = select_features(x, y, names_for(5), cfg);
    REQUIRE(rep.selected.size() == 1);
    CHECK(rep.selected[0] == rep.columns[rep.ranked.front()]);
    CHECK_FALSE(rep.diagnostics.empty());
  }

  TEST_CASE("category shares") {
    StabilityReport r;
    r.names = {"EO_a", "EO_b", "CLIM_c", "TOPO_d"};
    r.pi = {1.0, 1.0, 1.0, 1.0};
    const auto one = category_stability(r, [](const std::string&) { return std::string("all"); });
    REQUIRE(one.share.size() == 1);
    CHECK(one.share[0] == 1.0);

    const std::map<std::string, std::string> cats = {
        {"EO_a", "EO"}, {"EO_b", "EO"}, {"CLIM_c", "EO"}, {"TOPO_d", "TOPO"}};
    const auto two = category_stability(r, cats);
    CHECK(two.categories == std::vector<std::string>{"EO", "TOPO"});
    CHECK(two.total == std::vector<double>{3.0, 1.0});
    CHECK(two.share == std::vector<double>{0.75, 0.25});

    const std::map<std::string, std::string> partial = {{"EO_a", "EO"}};
    CHECK_THROWS_AS(category_stability(r, partial), std::invalid_argument);
    CHECK(default_category("EO_inf_03") == "EO");
  }

  TEST_CASE("category shares on synthetic data match direct summation") {
    SynthConfig sc;
    sc.n_samples = 300;
    sc.seed = 13;
    const auto data = generate(sc);
    const Matrix x = data.dataset.covariate_matrix();
    std::vector<double> y;
    for (const auto& r : data.dataset.records) y.push_back(std::log1p(*r.target("SOC")));
    FeatselConfig cfg;
    cfg.stability = quick_options(6, 4);
    const auto rep = select_features(x, y, data.dataset.feature_names, cfg);
    const auto cs = category_stability(rep, default_category);
    double grand = 0;
    for (double p : rep.pi) grand += p;
    double share_sum = 0;
    for (std::size_t c = 0; c < cs.categories.size(); ++c) {
      double direct = 0;
      for (std::size_t j = 0; j < rep.names.size(); ++j)
        if (default_category(rep.names[j]) == cs.categories[c]) direct += rep.pi[j];
      CHECK(std::abs(cs.total[c] - direct) < 1e-12);
      CHECK(std::abs(cs.share[c] - direct / grand) < 1e-12);
      share_sum += cs.share[c];
    }
    CHECK(std::abs(share_sum - 1.0) < 1e-12);
  }
}
