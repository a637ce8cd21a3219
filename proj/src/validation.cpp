#include "hteval/validation.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "hteval/rng.hpp"

namespace hteval {

namespace {

constexpr std::size_t kMetricCount = 8;
inline std::size_t metric_index(MetricName m) {
  return static_cast<std::size_t>(m);
}

bool wants(const std::vector<MetricName>& metrics, MetricName m) {
  return std::find(metrics.begin(), metrics.end(), m) != metrics.end();
}

using MetricValues = std::array<std::optional<double>, kMetricCount>;

// One full metric evaluation on a dataset. The delta predictions under
// evaluation and the anchors (matching g0, pattern probabilities,
// calibration offset) may come from different models.
struct EvalSources {
  const RiskPredictionSet* delta_preds = nullptr;
  const std::vector<double>* anchor_g0 = nullptr;   // cben_y0 matching
  const std::vector<double>* pattern_g0 = nullptr;  // mbcb patterns
  const std::vector<double>* pattern_g1 = nullptr;
  const std::vector<double>* offset_lp0 = nullptr;  // calibration offset
};

// `tolerant` swallows per-metric failures (degenerate bootstrap replicates
// simply drop the affected metric); top-level evaluations stay strict.
MetricValues evaluate_metrics(const TrialDataset& d, const EvalSources& src,
                              const std::vector<MetricName>& metrics,
                              MatchAlgorithm algorithm, std::uint64_t seed,
                              std::size_t subsample_repeats,
                              bool tolerant = false) {
  MetricValues out;
  const RiskPredictionSet& preds = *src.delta_preds;
  auto guarded = [&](const std::function<void()>& fn) {
    if (!tolerant) {
      fn();
      return;
    }
    try {
      fn();
    } catch (const std::exception&) {
    }
  };
  MatchSpec spec;
  spec.algorithm = algorithm;
  if (wants(metrics, MetricName::cben_delta)) {
    guarded([&] {
      MatchSpec s = spec;
      s.seed = derive_seed(seed, {1});
      const auto e = cben_delta(d, preds, s, subsample_repeats);
      if (e.estimable) out[metric_index(MetricName::cben_delta)] = e.value;
    });
  }
  if (wants(metrics, MetricName::cben_y0)) {
    guarded([&] {
      MatchSpec s = spec;
      s.seed = derive_seed(seed, {2});
      const auto e = cben_y0(d, preds, *src.anchor_g0, s, subsample_repeats);
      if (e.estimable) out[metric_index(MetricName::cben_y0)] = e.value;
    });
  }
  if (wants(metrics, MetricName::mbcb)) {
    guarded([&] {
      const auto e = mbcb(preds.delta, *src.pattern_g0, *src.pattern_g1);
      if (e.estimable) out[metric_index(MetricName::mbcb)] = e.value;
    });
  }
  const bool want_int = wants(metrics, MetricName::cal_intercept);
  const bool want_slope = wants(metrics, MetricName::cal_slope);
  if (want_int || want_slope) {
    guarded([&] {
      const auto cal = ite_calibration(d, preds, *src.offset_lp0);
      if (want_int) out[metric_index(MetricName::cal_intercept)] = cal.intercept;
      if (want_slope && cal.slope_estimable)
        out[metric_index(MetricName::cal_slope)] = cal.slope;
    });
  }
  if (wants(metrics, MetricName::ate_error)) {
    guarded([&] { out[metric_index(MetricName::ate_error)] = ate_error(d, preds); });
  }
  const bool want_c = wants(metrics, MetricName::c_outcome);
  const bool want_brier = wants(metrics, MetricName::brier);
  if (want_c || want_brier) {
    guarded([&] {
      std::vector<double> risk(d.size());
      for (std::size_t i = 0; i < d.size(); ++i)
        risk[i] = d.a[i] == 1 ? preds.g1[i] : preds.g0[i];
      if (want_c) {
        const auto e = c_outcome(d.y, risk);
        if (e.estimable) out[metric_index(MetricName::c_outcome)] = e.value;
      }
      if (want_brier) out[metric_index(MetricName::brier)] = brier(d.y, risk).value;
    });
  }
  return out;
}

EvalSources self_sources(const RiskPredictionSet& preds) {
  EvalSources s;
  s.delta_preds = &preds;
  s.anchor_g0 = &preds.g0;
  s.pattern_g0 = &preds.g0;
  s.pattern_g1 = &preds.g1;
  s.offset_lp0 = &preds.lp0;
  return s;
}

std::vector<std::size_t> plain_resample(const TrialDataset& d, Rng& rng) {
  return rng.resample_indices(d.size(), d.size());
}

std::vector<std::size_t> stratified_resample(const TrialDataset& d, Rng& rng) {
  std::vector<std::size_t> out;
  out.reserve(d.size());
  for (int arm : {0, 1}) {
    const auto idx = d.arm_indices(arm);
    for (std::size_t k = 0; k < idx.size(); ++k)
      out.push_back(idx[rng.uniform_index(idx.size())]);
  }
  return out;
}

struct RunningMean {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  std::optional<double> mean() const {
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

}  // namespace

std::optional<double> no_information_value(MetricName m) {
  switch (m) {
    case MetricName::cben_delta:
    case MetricName::cben_y0:
    case MetricName::mbcb:
    case MetricName::c_outcome:
      return 0.5;
    case MetricName::cal_slope:
      return 0.0;
    default:
      return std::nullopt;
  }
}

Plus632Breakdown plus632_breakdown(double c_app, double c_oos, double gamma) {
  Plus632Breakdown out;
  if (c_app == gamma) {  // no information to overfit
    out.c_oos_clipped = gamma;
    out.value = c_app;
    return out;
  }
  out.c_oos_clipped =
      c_app >= gamma ? std::max(gamma, c_oos) : std::min(gamma, c_oos);
  if (std::abs(out.c_oos_clipped - gamma) < std::abs(c_app - gamma))
    out.overfit_ratio = std::abs(c_app - out.c_oos_clipped) / std::abs(c_app - gamma);
  out.weight = 0.632 / (1.0 - 0.368 * out.overfit_ratio);
  out.value = c_app * (1.0 - out.weight) + out.weight * out.c_oos_clipped;
  return out;
}

double plus632_combine(double c_app, double c_oos, double gamma) {
  return plus632_breakdown(c_app, c_oos, gamma).value;
}

std::vector<MetricEstimate> internal_validate(const TrialDataset& d,
                                              const DesignSpec& model_spec,
                                              const ValidationPlan& plan,
                                              const ResampleProvider& resampler) {
  validate_dataset(d);
  if (plan.B < 1) throw std::invalid_argument("bootstrap B must be >= 1");

  const auto dev_fit = fit_logistic(model_spec.build(d.x, d.a), d.y);
  const auto dev_preds = predict_potential_risks(dev_fit, model_spec, d.x);

  const auto apparent =
      evaluate_metrics(d, self_sources(dev_preds), plan.metrics,
                       plan.match_algorithm, derive_seed(plan.seed, {0xA99}),
                       plan.subsample_repeats);

  std::array<RunningMean, kMetricCount> optimism, oos_mean;
  std::size_t fit_failures = 0, oos_arm_failures = 0;

  for (std::size_t b = 0; b < plan.B; ++b) {
    Rng rng = Rng::substream(plan.seed, {0xB007, b});
    std::vector<std::size_t> sample =
        resampler ? resampler(b, d)
                  : (plan.stratified ? stratified_resample(d, rng)
                                     : plain_resample(d, rng));

    const TrialDataset boot = d.subset(sample);
    LogisticFit boot_fit;
    try {
      boot_fit = fit_logistic(model_spec.build(boot.x, boot.a), boot.y);
    } catch (const std::exception&) {
      ++fit_failures;
      continue;
    }

    const std::uint64_t eval_seed = derive_seed(plan.seed, {0xE7A1, b});

    // optimism: apparent-in-resample minus evaluated-on-original, with
    // on-original anchors from the development model
    const auto boot_preds_in = predict_potential_risks(boot_fit, model_spec, boot.x);
    const auto app_b =
        evaluate_metrics(boot, self_sources(boot_preds_in), plan.metrics,
                         plan.match_algorithm, eval_seed,
                         plan.bootstrap_subsample_repeats, /*tolerant=*/true);

    const auto boot_preds_orig = predict_potential_risks(boot_fit, model_spec, d.x);
    EvalSources orig_src;
    orig_src.delta_preds = &boot_preds_orig;
    orig_src.anchor_g0 = &dev_preds.g0;
    orig_src.pattern_g0 = &dev_preds.g0;
    orig_src.pattern_g1 = &dev_preds.g1;
    orig_src.offset_lp0 = &dev_preds.lp0;
    const auto orig_b =
        evaluate_metrics(d, orig_src, plan.metrics, plan.match_algorithm,
                         eval_seed, plan.bootstrap_subsample_repeats,
                         /*tolerant=*/true);

    for (std::size_t m = 0; m < kMetricCount; ++m) {
      if (app_b[m] && orig_b[m]) optimism[m].add(*app_b[m] - *orig_b[m]);
    }

    // 0.632+: out-of-sample cases, with anchors re-estimated out of sample
    std::vector<char> in_sample(d.size(), 0);
    for (auto i : sample) in_sample[i] = 1;
    std::vector<std::size_t> oos;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!in_sample[i]) oos.push_back(i);
    }
    if (oos.empty()) continue;
    const TrialDataset d_oos = d.subset(oos);
    const auto oos_controls = d_oos.arm_indices(0);
    const auto oos_treated = d_oos.arm_indices(1);
    if (oos_controls.empty() || oos_treated.empty()) {
      ++oos_arm_failures;
      continue;
    }

    const auto boot_preds_oos = boot_preds_orig.subset(oos);
    MetricValues oos_b;

    std::vector<MetricName> plain;
    for (auto m : {MetricName::cben_delta, MetricName::ate_error,
                   MetricName::c_outcome, MetricName::brier}) {
      if (wants(plan.metrics, m)) plain.push_back(m);
    }
    if (!plain.empty()) {
      const auto vals = evaluate_metrics(d_oos, self_sources(boot_preds_oos),
                                         plain, plan.match_algorithm,
                                         derive_seed(eval_seed, {1}),
                                         plan.bootstrap_subsample_repeats,
                                         /*tolerant=*/true);
      for (auto m : plain) oos_b[metric_index(m)] = vals[metric_index(m)];
    }

    if (wants(plan.metrics, MetricName::cben_y0) ||
        wants(plan.metrics, MetricName::cal_intercept) ||
        wants(plan.metrics, MetricName::cal_slope)) {
      try {
        const auto ctrl_fit = fit_control_arm(d_oos, model_spec);
        const auto lp0_loc = predict_control_logits(
            ctrl_fit, model_spec.control_restriction(), d_oos.x);
        std::vector<double> g0_loc(lp0_loc.size());
        for (std::size_t i = 0; i < lp0_loc.size(); ++i)
          g0_loc[i] = expit(lp0_loc[i]);
        if (wants(plan.metrics, MetricName::cben_y0)) {
          MatchSpec s;
          s.algorithm = plan.match_algorithm;
          s.seed = derive_seed(eval_seed, {2});
          const auto e = cben_y0(d_oos, boot_preds_oos, g0_loc, s,
                                 plan.bootstrap_subsample_repeats);
          if (e.estimable) oos_b[metric_index(MetricName::cben_y0)] = e.value;
        }
        if (wants(plan.metrics, MetricName::cal_slope) ||
            wants(plan.metrics, MetricName::cal_intercept)) {
          const auto cal = ite_calibration(d_oos, boot_preds_oos, lp0_loc);
          if (cal.slope_estimable)
            oos_b[metric_index(MetricName::cal_slope)] = cal.slope;
          oos_b[metric_index(MetricName::cal_intercept)] = cal.intercept;
        }
      } catch (const std::exception&) {
        // control-arm refit failed; the affected metrics drop this replicate
      }
    }

    if (wants(plan.metrics, MetricName::mbcb)) {
      try {
        const auto oos_fit =
            fit_logistic(model_spec.build(d_oos.x, d_oos.a), d_oos.y);
        const auto oos_model_preds =
            predict_potential_risks(oos_fit, model_spec, d_oos.x);
        const auto e =
            mbcb(boot_preds_oos.delta, oos_model_preds.g0, oos_model_preds.g1);
        if (e.estimable) oos_b[metric_index(MetricName::mbcb)] = e.value;
      } catch (const std::exception&) {
      }
    }

    for (std::size_t m = 0; m < kMetricCount; ++m) {
      if (oos_b[m]) oos_mean[m].add(*oos_b[m]);
    }
  }

  const double b_total = static_cast<double>(plan.B);
  const bool heavy_drops =
      static_cast<double>(fit_failures + oos_arm_failures) > 0.2 * b_total;

  std::vector<MetricEstimate> out;
  for (auto m : plan.metrics) {
    const std::size_t mi = metric_index(m);
    auto common_meta = [&](MetricEstimate& e, std::size_t used) {
      e.meta["B"] = b_total;
      e.meta["replicates_used"] = static_cast<double>(used);
      e.meta["fit_failures"] = static_cast<double>(fit_failures);
      e.meta["bootstrap_subsample_repeats"] =
          static_cast<double>(plan.bootstrap_subsample_repeats);
      if (heavy_drops) e.meta["warning_dropped_over_20pct"] = 1.0;
    };

    MetricEstimate app;
    app.name = m;
    app.context = EvalContext::apparent;
    if (apparent[mi]) {
      app.value = *apparent[mi];
    } else {
      app.estimable = false;
    }
    out.push_back(app);

    MetricEstimate corr;
    corr.name = m;
    corr.context = EvalContext::optimism_corrected;
    if (apparent[mi] && optimism[mi].mean()) {
      corr.value = *apparent[mi] - *optimism[mi].mean();
      corr.meta["mean_optimism"] = *optimism[mi].mean();
    } else {
      corr.estimable = false;
    }
    common_meta(corr, optimism[mi].n);
    out.push_back(corr);

    MetricEstimate plus;
    plus.name = m;
    plus.context = EvalContext::boot632plus;
    const auto gamma = no_information_value(m);
    if (!gamma) {
      plus.estimable = false;
      plus.detail = "undefined_no_information_value";
    } else if (apparent[mi] && oos_mean[mi].mean()) {
      plus.value = plus632_combine(*apparent[mi], *oos_mean[mi].mean(), *gamma);
      plus.meta["c_oos"] = *oos_mean[mi].mean();
      plus.meta["gamma"] = *gamma;
    } else {
      plus.estimable = false;
    }
    common_meta(plus, oos_mean[mi].n);
    plus.meta["oos_arm_failures"] = static_cast<double>(oos_arm_failures);
    out.push_back(plus);
  }
  return out;
}

std::vector<MetricEstimate> external_validate(const LogisticFit& fit,
                                              const DesignSpec& model_spec,
                                              const TrialDataset& d_ext,
                                              ExternalMode mode,
                                              const ExternalOptions& opts) {
  validate_dataset(d_ext);
  const auto preds = predict_potential_risks(fit, model_spec, d_ext.x);

  EvalSources src = self_sources(preds);
  bool fallback = false;
  std::vector<double> lp0_loc, g0_loc;
  RiskPredictionSet local_preds;
  if (mode == ExternalMode::local_refit) {
    try {
      const auto ctrl_fit = fit_control_arm(d_ext, model_spec);
      lp0_loc = predict_control_logits(ctrl_fit,
                                       model_spec.control_restriction(), d_ext.x);
      g0_loc.resize(lp0_loc.size());
      for (std::size_t i = 0; i < lp0_loc.size(); ++i)
        g0_loc[i] = expit(lp0_loc[i]);
      const auto full_fit =
          fit_logistic(model_spec.build(d_ext.x, d_ext.a), d_ext.y);
      local_preds = predict_potential_risks(full_fit, model_spec, d_ext.x);
      src.anchor_g0 = &g0_loc;
      src.offset_lp0 = &lp0_loc;
      src.pattern_g0 = &local_preds.g0;
      src.pattern_g1 = &local_preds.g1;
    } catch (const std::exception&) {
      fallback = true;
      src = self_sources(preds);
    }
  }

  const auto vals = evaluate_metrics(d_ext, src, opts.metrics,
                                     opts.match_algorithm, opts.seed,
                                     opts.subsample_repeats);
  std::vector<MetricEstimate> out;
  for (auto m : opts.metrics) {
    MetricEstimate e;
    e.name = m;
    e.context = EvalContext::external;
    e.detail = mode == ExternalMode::naive
                   ? "naive"
                   : (fallback ? "local_refit_fallback_naive" : "local_refit");
    const auto v = vals[static_cast<std::size_t>(m)];
    if (v) {
      e.value = *v;
    } else {
      e.estimable = false;
    }
    e.meta["n"] = static_cast<double>(d_ext.size());
    out.push_back(e);
  }
  return out;
}

}  // namespace hteval
