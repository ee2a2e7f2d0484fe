#pragma once

#include <span>
#include <string>
#include <vector>

#include "geoval/spatial.hpp"
#include "geoval/splitting.hpp"

namespace geoval {

enum class TestMethod { ks, ad };

struct TestResult {
  TestMethod method = TestMethod::ks;
  double statistic = kNaN;   // KS: D.  AD: midrank A^2_akN.
  double standardized = kNaN;  // AD only: (A^2 - (k-1)) / sigma_N
  double p_value = kNaN;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  bool approximate = false;  // fewer than 8 points on a side
  bool clamped = false;      // AD p-value pinned to the table edge
};

/// Asymptotic Kolmogorov survival function Q(lambda) = P(K > lambda).
double kolmogorov_survival(double lambda);

/// Two-sample Kolmogorov-Smirnov test. Needs at least 2 finite points per side.
TestResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Two-sample Anderson-Darling test in the k-sample (Scholz-Stephens)
/// formulation with midrank tie handling. The p-value is interpolated in
/// log-space between the published critical values and clamped to
/// [0.001, 0.25] outside the table.
TestResult ad_two_sample(std::span<const double> a, std::span<const double> b);

struct FoldDiagnostic {
  int fold = 0;
  std::size_t n_fold = 0;
  std::size_t n_rest = 0;
  TestResult ks;
  TestResult ad;
  NNDistanceReport nn;
};

/// Per fold: KS and AD between that fold's target values and the remaining
/// folds' values, plus centroid distances from the fold's blocks to the rest.
/// `target` holds one value per sample; NaN marks a missing value.
std::vector<FoldDiagnostic> fold_diagnostics(const std::vector<SpatialBlock>& blocks, const FoldPlan& plan,
                                             std::span<const double> target);

}  // namespace geoval
