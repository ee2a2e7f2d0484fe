#include "geoval/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace geoval {

namespace {

constexpr std::size_t kAsymptoticFloor = 8;

std::vector<double> checked_sorted(std::span<const double> v, const char* side) {
  if (v.size() < 2) throw std::invalid_argument(std::string("two-sample test needs at least 2 points in ") + side);
  std::vector<double> s(v.begin(), v.end());
  for (double x : s)
    if (!std::isfinite(x)) throw std::invalid_argument(std::string("non-finite value in ") + side);
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  const double pi = std::numbers::pi;
  if (lambda < 1.18) {
    // P(K <= l) = sqrt(2 pi)/l * sum exp(-(2j-1)^2 pi^2 / (8 l^2))
    const double w = -pi * pi / (8.0 * lambda * lambda);
    double cdf = 0.0;
    for (int j = 1; j <= 20; ++j) {
      const double t = static_cast<double>(2 * j - 1);
      cdf += std::exp(w * t * t);
    }
    cdf *= std::sqrt(2.0 * pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  // Q(l) = 2 sum (-1)^(j-1) exp(-2 j^2 l^2)
  double q = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    q += (j % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * q, 0.0, 1.0);
}

TestResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  const auto sa = checked_sorted(a, "first sample");
  const auto sb = checked_sorted(b, "second sample");
  const double n1 = static_cast<double>(sa.size());
  const double n2 = static_cast<double>(sb.size());

  // Walk the pooled order statistics; at tied values both CDFs step together.
  double d = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n1 - static_cast<double>(j) / n2));
  }

  TestResult r;
  r.method = TestMethod::ks;
  r.statistic = d;
  r.n1 = sa.size();
  r.n2 = sb.size();
  const double ne = n1 * n2 / (n1 + n2);
  const double root = std::sqrt(ne);
  r.p_value = kolmogorov_survival(root * d);
  r.approximate = r.n1 < kAsymptoticFloor || r.n2 < kAsymptoticFloor;
  return r;
}

TestResult ad_two_sample(std::span<const double> a, std::span<const double> b) {
  const std::array<std::vector<double>, 2> samples = {checked_sorted(a, "first sample"),
                                                      checked_sorted(b, "second sample")};
  const std::size_t k = samples.size();
  std::vector<double> pooled;
  for (const auto& s : samples) pooled.insert(pooled.end(), s.begin(), s.end());
  std::sort(pooled.begin(), pooled.end());
  if (pooled.front() == pooled.back())
    throw std::invalid_argument("Anderson-Darling statistic undefined: all values are identical");

  const double big_n = static_cast<double>(pooled.size());

  // Distinct values and their multiplicities.
  std::vector<double> z;
  std::vector<double> l;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
    z.push_back(pooled[i]);
    l.push_back(static_cast<double>(j - i));
    i = j;
  }

  double a2 = 0.0;
  for (const auto& s : samples) {
    const double ni = static_cast<double>(s.size());
    double inner = 0.0;
    double b_cum = 0.0;
    std::size_t pos = 0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      std::size_t f = 0;
      while (pos < s.size() && s[pos] < z[j]) ++pos;  // values are drawn from z, so this never advances
      while (pos < s.size() && s[pos] == z[j]) {
        ++pos;
        ++f;
      }
      const double m_a = static_cast<double>(pos) - static_cast<double>(f) / 2.0;
      const double b_a = b_cum + l[j] / 2.0;
      b_cum += l[j];
      const double denom = b_a * (big_n - b_a) - big_n * l[j] / 4.0;
      if (denom <= 0.0) continue;
      const double dev = big_n * m_a - ni * b_a;
      inner += l[j] * dev * dev / denom;
    }
    a2 += inner / ni;
  }
  a2 *= (big_n - 1.0) / (big_n * big_n);

  // Variance of A^2 under H0 (Scholz & Stephens 1987).
  const double kk = static_cast<double>(k);
  double h_small = 0.0;
  for (std::size_t i = 1; i < pooled.size(); ++i) h_small += 1.0 / static_cast<double>(i);
  double cap_h = 0.0;
  for (const auto& s : samples) cap_h += 1.0 / static_cast<double>(s.size());
  double g = 0.0;
  {
    double partial = 0.0;  // sum_{i=1}^{j-1} 1/(N-i)
    for (std::size_t j = 2; j + 1 <= pooled.size(); ++j) {
      partial += 1.0 / (big_n - static_cast<double>(j - 1));
      g += partial / static_cast<double>(j);
    }
  }
  const double ca = (4 * g - 6) * (kk - 1) + (10 - 6 * g) * cap_h;
  const double cb = (2 * g - 4) * kk * kk + 8 * h_small * kk + (2 * g - 14 * h_small - 4) * cap_h - 8 * h_small +
                    4 * g - 6;
  const double cc = (6 * h_small + 2 * g - 2) * kk * kk + (4 * h_small - 4 * g + 6) * kk +
                    (2 * h_small - 6) * cap_h + 4 * h_small;
  const double cd = (2 * h_small + 6) * kk * kk - 4 * h_small * kk;
  const double sigma2 = (ca * big_n * big_n * big_n + cb * big_n * big_n + cc * big_n + cd) /
                        ((big_n - 1.0) * (big_n - 2.0) * (big_n - 3.0));
  const double m = kk - 1.0;
  const double t = (a2 - m) / std::sqrt(sigma2);

  // Critical values t_m(alpha) = b0 + b1/sqrt(m) + b2/m.
  static constexpr std::array<double, 7> b0 = {0.675, 1.281, 1.645, 1.96, 2.326, 2.573, 3.085};
  static constexpr std::array<double, 7> b1 = {-0.245, 0.25, 0.678, 1.149, 1.822, 2.364, 3.615};
  static constexpr std::array<double, 7> b2 = {-0.105, -0.305, -0.362, -0.391, -0.396, -0.345, -0.154};
  static constexpr std::array<double, 7> sig = {0.25, 0.1, 0.05, 0.025, 0.01, 0.005, 0.001};
  std::array<double, 7> crit{};
  for (std::size_t i = 0; i < crit.size(); ++i) crit[i] = b0[i] + b1[i] / std::sqrt(m) + b2[i] / m;

  TestResult r;
  r.method = TestMethod::ad;
  r.statistic = a2;
  r.standardized = t;
  r.n1 = samples[0].size();
  r.n2 = samples[1].size();
  r.approximate = r.n1 < kAsymptoticFloor || r.n2 < kAsymptoticFloor;
  if (t <= crit.front()) {
    r.p_value = sig.front();
    r.clamped = t < crit.front();
  } else if (t >= crit.back()) {
    r.p_value = sig.back();
    r.clamped = t > crit.back();
  } else {
    std::size_t i = 1;
    while (crit[i] < t) ++i;
    const double w = (t - crit[i - 1]) / (crit[i] - crit[i - 1]);
    r.p_value = std::exp((1.0 - w) * std::log(sig[i - 1]) + w * std::log(sig[i]));
  }
  return r;
}

std::vector<FoldDiagnostic> fold_diagnostics(const std::vector<SpatialBlock>& blocks, const FoldPlan& plan,
                                             std::span<const double> target) {
  if (plan.sample_to_fold.size() != target.size())
    throw std::invalid_argument("fold plan and target vector differ in length");
  if (plan.block_to_fold.size() != blocks.size())
    throw std::invalid_argument("fold plan and block list differ in length");
  std::vector<FoldDiagnostic> out;
  for (int f = 0; f < plan.k; ++f) {
    std::vector<double> inside;
    std::vector<double> rest;
    for (std::size_t i = 0; i < target.size(); ++i) {
      if (std::isnan(target[i])) continue;
      (plan.sample_to_fold[i] == f ? inside : rest).push_back(target[i]);
    }
    std::vector<const SpatialBlock*> test_blocks;
    std::vector<const SpatialBlock*> train_blocks;
    for (std::size_t b = 0; b < blocks.size(); ++b)
      (plan.block_to_fold[b] == f ? test_blocks : train_blocks).push_back(&blocks[b]);

    FoldDiagnostic d;
    d.fold = f;
    d.n_fold = inside.size();
    d.n_rest = rest.size();
    d.ks = ks_two_sample(inside, rest);
    d.ad = ad_two_sample(inside, rest);
    d.nn = nn_distance_report(test_blocks, train_blocks);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace geoval
