#pragma once

#include <optional>
#include <vector>

#include "hteval/glm.hpp"
#include "hteval/types.hpp"

namespace hteval {

struct CalibrationResult {
  double intercept = 0.0;
  double slope = 0.0;
  bool slope_estimable = true;
  bool converged = true;
  bool small_arm_warning = false;
  std::size_t n_used = 0;
};

// Offset-logistic ITE calibration in one arm:
//   logit E[Y_j] = b0 + b1 * delta_lp(x_j) + offset_lp(x_j)
// Responses may be fractional (reference estimands use true probabilities).
// Zero-variance delta_lp: the slope is flagged non-estimable and an
// intercept-only model is fitted instead.
CalibrationResult ite_calibration(const std::vector<double>& y,
                                  const std::vector<double>& delta_lp,
                                  const std::vector<double>& offset_lp,
                                  std::size_t min_arm_warning = 20);

// Convenience wrapper over a dataset: fits in the treated arm with control
// risk as offset (mirror=false), or in the control arm with treated risk as
// offset and negated delta_lp (mirror=true).
CalibrationResult ite_calibration(const TrialDataset& d,
                                  const RiskPredictionSet& preds_for_delta,
                                  const std::vector<double>& offset_lp_all,
                                  bool mirror = false,
                                  std::size_t min_arm_warning = 20);

struct ContinuousCalibrationResult {
  double intercept = 0.0;
  double slope = 0.0;
  bool slope_estimable = true;
  // (delta_j, residual_j) scatter for external plotting
  std::vector<std::pair<double, double>> scatter;
};

// OLS of residuals Y_j - g0(x_j) on delta(x_j) for continuous outcomes.
ContinuousCalibrationResult ite_calibration_continuous(
    const std::vector<double>& y_treated, const std::vector<double>& g0_treated,
    const std::vector<double>& delta_treated);

// Observed minus model-expected average treatment effect.
double ate_error(const TrialDataset& d, const RiskPredictionSet& preds);

// Standard logistic recalibration of y on a linear predictor, optionally
// within one arm.
CalibrationResult classical_calibration(const std::vector<double>& y,
                                        const std::vector<double>& lp);
CalibrationResult classical_calibration(const TrialDataset& d,
                                        const std::vector<double>& lp,
                                        std::optional<int> arm_filter);

struct QuantileGroup {
  double mean_delta = 0.0;
  double observed_te = 0.0;
  std::size_t size = 0;
  std::size_t n_control = 0;
  std::size_t n_treated = 0;
  bool estimable = true;
};

// Quantile groups of delta with observed treatment effect per group. Group
// boundaries are right-closed quantiles; ties at a cut-off go to the lower
// group. Groups missing an arm are flagged, not dropped.
std::vector<QuantileGroup> quantile_group_calibration(
    const std::vector<double>& delta, const std::vector<double>& y,
    const std::vector<int>& a, std::size_t n_groups);

}  // namespace hteval
