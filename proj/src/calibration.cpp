#include "hteval/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hteval/concordance.hpp"

namespace hteval {

namespace {

bool has_variance(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] != v[0]) return true;
  }
  return false;
}

}  // namespace

CalibrationResult ite_calibration(const std::vector<double>& y,
                                  const std::vector<double>& delta_lp,
                                  const std::vector<double>& offset_lp,
                                  std::size_t min_arm_warning) {
  const std::size_t n = y.size();
  if (delta_lp.size() != n || offset_lp.size() != n)
    throw std::invalid_argument("calibration input lengths disagree");
  if (n < 2) throw std::invalid_argument("too few individuals for calibration");

  CalibrationResult out;
  out.n_used = n;
  out.small_arm_warning = n < min_arm_warning;

  if (!has_variance(delta_lp)) {
    // matches the applied case where ITEs have no variability on the logit
    // scale: fit intercept-only and flag the slope
    Matrix design(n, 1, 1.0);
    const auto fit = fit_logistic(design, y, &offset_lp);
    out.intercept = fit.coefficients[0];
    out.slope = std::nan("");
    out.slope_estimable = false;
    out.converged = fit.converged;
    return out;
  }

  Matrix design(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = delta_lp[i];
  }
  const auto fit = fit_logistic(design, y, &offset_lp);
  out.intercept = fit.coefficients[0];
  out.slope = fit.coefficients[1];
  out.converged = fit.converged;
  return out;
}

CalibrationResult ite_calibration(const TrialDataset& d,
                                  const RiskPredictionSet& preds_for_delta,
                                  const std::vector<double>& offset_lp_all,
                                  bool mirror, std::size_t min_arm_warning) {
  if (offset_lp_all.size() != d.size())
    throw std::invalid_argument("offset length mismatch");
  const auto idx = d.arm_indices(mirror ? 0 : 1);
  std::vector<double> y = take(d.y, idx);
  std::vector<double> dlp = take(preds_for_delta.delta_lp, idx);
  std::vector<double> off = take(offset_lp_all, idx);
  if (mirror) {
    for (auto& v : dlp) v = -v;  // control outcomes move against the ITE
  }
  return ite_calibration(y, dlp, off, min_arm_warning);
}

ContinuousCalibrationResult ite_calibration_continuous(
    const std::vector<double>& y_treated, const std::vector<double>& g0_treated,
    const std::vector<double>& delta_treated) {
  const std::size_t n = y_treated.size();
  if (g0_treated.size() != n || delta_treated.size() != n)
    throw std::invalid_argument("calibration input lengths disagree");
  if (n < 2) throw std::invalid_argument("too few individuals for calibration");

  ContinuousCalibrationResult out;
  out.scatter.reserve(n);
  double sum_d = 0.0, sum_r = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y_treated[i] - g0_treated[i];
    out.scatter.emplace_back(delta_treated[i], r);
    sum_d += delta_treated[i];
    sum_r += r;
  }
  const double mean_d = sum_d / n, mean_r = sum_r / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = delta_treated[i] - mean_d;
    sxx += dx * dx;
    sxy += dx * (out.scatter[i].second - mean_r);
  }
  if (sxx == 0.0) {
    out.slope = std::nan("");
    out.slope_estimable = false;
    out.intercept = mean_r;
    return out;
  }
  out.slope = sxy / sxx;
  out.intercept = mean_r - out.slope * mean_d;
  return out;
}

double ate_error(const TrialDataset& d, const RiskPredictionSet& preds) {
  if (preds.size() != d.size())
    throw std::invalid_argument("prediction length mismatch");
  const auto controls = d.arm_indices(0);
  const auto treated = d.arm_indices(1);
  if (controls.empty() || treated.empty())
    throw std::invalid_argument("both arms must be non-empty");
  KahanSum y_t, y_c, g1_t, g0_c;
  for (auto j : treated) {
    y_t.add(d.y[j]);
    g1_t.add(preds.g1[j]);
  }
  for (auto i : controls) {
    y_c.add(d.y[i]);
    g0_c.add(preds.g0[i]);
  }
  const double nt = static_cast<double>(treated.size());
  const double nc = static_cast<double>(controls.size());
  const double observed = y_t.value() / nt - y_c.value() / nc;
  const double expected = g1_t.value() / nt - g0_c.value() / nc;
  return observed - expected;
}

CalibrationResult classical_calibration(const std::vector<double>& y,
                                        const std::vector<double>& lp) {
  const std::size_t n = y.size();
  if (lp.size() != n) throw std::invalid_argument("lp length mismatch");
  if (n < 2) throw std::invalid_argument("too few individuals for calibration");
  CalibrationResult out;
  out.n_used = n;
  out.small_arm_warning = false;
  if (!has_variance(lp)) {
    Matrix design(n, 1, 1.0);
    const auto fit = fit_logistic(design, y);
    out.intercept = fit.coefficients[0];
    out.slope = std::nan("");
    out.slope_estimable = false;
    out.converged = fit.converged;
    return out;
  }
  Matrix design(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = lp[i];
  }
  const auto fit = fit_logistic(design, y);
  out.intercept = fit.coefficients[0];
  out.slope = fit.coefficients[1];
  out.converged = fit.converged;
  return out;
}

CalibrationResult classical_calibration(const TrialDataset& d,
                                        const std::vector<double>& lp,
                                        std::optional<int> arm_filter) {
  if (lp.size() != d.size()) throw std::invalid_argument("lp length mismatch");
  if (!arm_filter) return classical_calibration(d.y, lp);
  const auto idx = d.arm_indices(*arm_filter);
  return classical_calibration(take(d.y, idx), take(lp, idx));
}

std::vector<QuantileGroup> quantile_group_calibration(
    const std::vector<double>& delta, const std::vector<double>& y,
    const std::vector<int>& a, std::size_t n_groups) {
  const std::size_t n = delta.size();
  if (y.size() != n || a.size() != n)
    throw std::invalid_argument("input lengths disagree");
  if (n_groups < 2) throw std::invalid_argument("n_groups must be >= 2");
  if (n < n_groups) throw std::invalid_argument("fewer individuals than groups");

  // right-closed cut-offs at the i/G empirical quantiles
  std::vector<double> sorted = delta;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> cuts(n_groups - 1);
  for (std::size_t g = 0; g + 1 < n_groups; ++g) {
    const std::size_t pos =
        static_cast<std::size_t>(
            std::ceil(static_cast<double>(n * (g + 1)) / n_groups)) - 1;
    cuts[g] = sorted[std::min(pos, n - 1)];
  }

  std::vector<QuantileGroup> groups(n_groups);
  std::vector<double> sum_y1(n_groups, 0.0), sum_y0(n_groups, 0.0),
      sum_delta(n_groups, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t g = 0;
    while (g < cuts.size() && delta[i] > cuts[g]) ++g;
    auto& grp = groups[g];
    ++grp.size;
    sum_delta[g] += delta[i];
    if (a[i] == 1) {
      ++grp.n_treated;
      sum_y1[g] += y[i];
    } else {
      ++grp.n_control;
      sum_y0[g] += y[i];
    }
  }
  for (std::size_t g = 0; g < n_groups; ++g) {
    auto& grp = groups[g];
    if (grp.size > 0) grp.mean_delta = sum_delta[g] / grp.size;
    if (grp.n_treated == 0 || grp.n_control == 0) {
      grp.estimable = false;
      grp.observed_te = std::nan("");
    } else {
      grp.observed_te = sum_y1[g] / grp.n_treated - sum_y0[g] / grp.n_control;
    }
  }
  return groups;
}

}  // namespace hteval
