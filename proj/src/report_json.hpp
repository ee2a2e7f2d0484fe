#pragma once

// JSON encodings shared by the run report and the model file.

#include "geoval/conformal.hpp"
#include "geoval/featsel.hpp"
#include "geoval/metrics.hpp"
#include "geoval/model.hpp"
#include "geoval/pipeline.hpp"
#include "geoval/spatial.hpp"
#include "geoval/splitting.hpp"
#include "geoval/stats.hpp"
#include "geoval/synth.hpp"

namespace geoval {

Json to_json(const MetricsRow& r);
MetricsRow metrics_row_from_json(const Json& j);
Json to_json(const std::vector<MetricsRow>& rows);
Json to_json(const TestResult& r);
Json to_json(const NNDistanceReport& r, bool with_distances);
Json to_json(const FoldDiagnostic& d);
Json to_json(const FoldPlan& plan, const std::vector<SpatialBlock>& blocks);
Json to_json(const StabilityReport& r);
Json to_json(const CategoryStability& c);
Json to_json(const IntervalReport& r);
Json to_json(const AffineCorrection& a);
Json to_json(const StratumCalibrator& c);
Json to_json(const ConformalModel& m);
Json to_json(const SynthTruth& t);
Json to_json(const TargetModel& m);

TargetModel target_model_from_json(const Json& j);
StratumCalibrator calibrator_from_json(const Json& j);
ConformalModel conformal_from_json(const Json& j);

std::string schema_version_string();

/// Throws DataError unless `j["schema_version"]` has the supported major.
void check_schema_version(const Json& j, const std::string& what);

}  // namespace geoval
