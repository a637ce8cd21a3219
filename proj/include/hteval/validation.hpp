#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "hteval/calibration.hpp"
#include "hteval/concordance.hpp"
#include "hteval/glm.hpp"
#include "hteval/matching.hpp"
#include "hteval/types.hpp"

namespace hteval {

struct ValidationPlan {
  std::size_t B = 100;
  std::vector<MetricName> metrics = {
      MetricName::cben_delta, MetricName::cben_y0, MetricName::mbcb,
      MetricName::cal_intercept, MetricName::cal_slope};
  std::uint64_t seed = 0;
  bool stratified = false;  // resample within arms, preserving arm sizes
  std::size_t subsample_repeats = 1000;            // top-level cben analyses
  std::size_t bootstrap_subsample_repeats = 100;   // inside bootstrap replicates
  MatchAlgorithm match_algorithm = MatchAlgorithm::optimal;
};

// No-information value for the 0.632+ blend; nullopt when a 0.632+ estimate
// is not defined for the metric (e.g. the calibration intercept).
std::optional<double> no_information_value(MetricName m);

// The 0.632+ blend: clips c_oos toward gamma, computes the overfitting ratio
// R in [0,1] and weight w in [0.632, 1], and returns
// c_app (1 - w) + w c_oos'. c_app == gamma returns c_app (nothing to overfit).
double plus632_combine(double c_app, double c_oos, double gamma);

struct Plus632Breakdown {
  double c_oos_clipped = 0.0;
  double overfit_ratio = 0.0;  // R
  double weight = 0.632;       // w
  double value = 0.0;
};
Plus632Breakdown plus632_breakdown(double c_app, double c_oos, double gamma);

// Test seam: provides the bootstrap resample for replicate b.
using ResampleProvider =
    std::function<std::vector<std::size_t>(std::size_t b, const TrialDataset&)>;

// Bootstrap internal validation: apparent, optimism-corrected and 0.632+
// estimates for the planned metrics. Replicates whose model fit fails, or
// whose out-of-sample set lacks an arm (for the 0.632+ branch), are dropped
// and counted in the estimates' meta.
std::vector<MetricEstimate> internal_validate(
    const TrialDataset& d, const DesignSpec& model_spec,
    const ValidationPlan& plan, const ResampleProvider& resampler = nullptr);

enum class ExternalMode { naive, local_refit };

struct ExternalOptions {
  std::uint64_t seed = 0;
  std::size_t subsample_repeats = 1000;
  MatchAlgorithm match_algorithm = MatchAlgorithm::optimal;
  std::vector<MetricName> metrics = {
      MetricName::cben_delta, MetricName::cben_y0, MetricName::mbcb,
      MetricName::cal_intercept, MetricName::cal_slope};
};

// External validation of a fitted model on independent data. naive mode
// takes matching anchors, pattern probabilities and calibration offsets from
// the evaluated model; local_refit re-estimates them on the external data
// (control-arm model for the cben-y0 anchor and the calibration offset, the
// full model structure for P_benefit). Falls back to naive with a warning
// when a local refit fails.
std::vector<MetricEstimate> external_validate(
    const LogisticFit& fit, const DesignSpec& model_spec,
    const TrialDataset& d_ext, ExternalMode mode,
    const ExternalOptions& opts = ExternalOptions{});

}  // namespace hteval
