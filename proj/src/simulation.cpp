#include "hteval/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "hteval/glm.hpp"
#include "hteval/rng.hpp"

namespace hteval {

namespace {

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("HTEVAL_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

void parallel_for(std::size_t count, std::size_t n_threads,
                  const std::function<void(std::size_t)>& fn) {
  if (n_threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const std::size_t spawn = std::min(n_threads, count);
  pool.reserve(spawn);
  for (std::size_t t = 0; t < spawn; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

std::size_t setting_index(Setting s) { return static_cast<std::size_t>(s); }
std::size_t metric_index(MetricName m) { return static_cast<std::size_t>(m); }

const MetricName kStudyMetrics[] = {MetricName::cben_delta, MetricName::cben_y0,
                                    MetricName::mbcb, MetricName::cal_intercept,
                                    MetricName::cal_slope};

Setting context_setting(EvalContext c) {
  switch (c) {
    case EvalContext::apparent: return Setting::apparent;
    case EvalContext::boot632plus: return Setting::boot632plus;
    case EvalContext::optimism_corrected: return Setting::optimism_corrected;
    default: throw std::logic_error("not an internal-validation context");
  }
}

}  // namespace

std::string to_string(Setting s) {
  switch (s) {
    case Setting::apparent: return "apparent";
    case Setting::boot632plus: return "boot632plus";
    case Setting::optimism_corrected: return "optimism_corrected";
    case Setting::external_v1: return "external_v1";
    case Setting::external_v2: return "external_v2";
    case Setting::external_v1_local: return "external_v1_local";
    case Setting::external_v2_local: return "external_v2_local";
  }
  return "unknown";
}

PopulationWithTruth generate_population(const DGMSpec& spec,
                                        std::uint64_t seed) {
  const std::size_t p = spec.n_covariates();
  const std::size_t n = spec.population_size;
  if (n < 2) throw std::invalid_argument("population size must be >= 2");
  Rng rng(seed);

  PopulationWithTruth pop;
  pop.x = Matrix(n, p);
  switch (spec.covariate_law) {
    case CovariateLaw::standard_normal:
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) pop.x(i, j) = rng.normal();
      }
      break;
  }
  // 1:1 assignment, independent of X
  pop.a.assign(n, 0);
  for (auto i : rng.sample_without_replacement(n, n / 2)) pop.a[i] = 1;

  const DesignSpec design{p, true};
  const auto lp0 = linear_predictor(design.build_fixed_arm(pop.x, 0), spec.beta);
  const auto lp1 = linear_predictor(design.build_fixed_arm(pop.x, 1), spec.beta);
  pop.p0.resize(n);
  pop.p1.resize(n);
  pop.y0.resize(n);
  pop.y1.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    pop.p0[i] = clamp_prob(expit(lp0[i]));
    pop.p1[i] = clamp_prob(expit(lp1[i]));
    pop.y0[i] = rng.bernoulli(pop.p0[i]) ? 1.0 : 0.0;
    pop.y1[i] = rng.bernoulli(pop.p1[i]) ? 1.0 : 0.0;
  }
  return pop;
}

ReferenceSet compute_references(const PopulationWithTruth& rows,
                                const RiskPredictionSet& preds) {
  if (preds.size() != rows.size())
    throw std::invalid_argument("predictions do not align with rows");
  ReferenceSet out;

  out.mbcb_true = mbcb(preds.delta, rows.p0, rows.p1);
  out.mbcb_true.context = EvalContext::sample_reference;

  out.c_delta_ben_realized = c_delta_ben(preds.delta, rows.y0, rows.y1);
  out.c_delta_ben_realized.context = EvalContext::population_reference;

  // calibration references: treated rows, fractional outcome = true treated
  // risk, slope coefficient on the evaluated delta_lp
  std::vector<std::size_t> treated;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows.a[i] == 1) treated.push_back(i);
  }
  const auto y_true = take(rows.p1, treated);
  const auto dlp = take(preds.delta_lp, treated);
  std::vector<double> off_true(treated.size());
  for (std::size_t k = 0; k < treated.size(); ++k)
    off_true[k] = logit(rows.p0[treated[k]]);

  auto fill = [](MetricEstimate& ie, MetricEstimate& se,
                 const CalibrationResult& cal, EvalContext ctx) {
    ie.name = MetricName::cal_intercept;
    ie.context = ctx;
    ie.value = cal.intercept;
    se.name = MetricName::cal_slope;
    se.context = ctx;
    if (cal.slope_estimable) {
      se.value = cal.slope;
    } else {
      se.estimable = false;
    }
  };

  const auto cal_true = ite_calibration(y_true, dlp, off_true);
  fill(out.cal_intercept_true, out.cal_slope_true, cal_true,
       EvalContext::sample_reference);

  const auto off_naive = take(preds.lp0, treated);
  const auto cal_naive = ite_calibration(y_true, dlp, off_naive);
  fill(out.cal_intercept_naive, out.cal_slope_naive, cal_naive,
       EvalContext::naive_reference);

  return out;
}

namespace {

void record_external(RunRecord& rec, const std::vector<MetricEstimate>& ests,
                     Setting setting) {
  for (const auto& e : ests) {
    if (!e.estimable) continue;
    if (e.name == MetricName::cben_delta &&
        (setting == Setting::external_v1_local ||
         setting == Setting::external_v2_local))
      continue;  // needs no local refit; the naive row already covers it
    rec.estimates[metric_index(e.name)][setting_index(setting)] = e.value;
  }
}

RunRecord run_one(const StudyConfig& cfg, const PopulationWithTruth& pop_dev,
                  const PopulationWithTruth& pop_ext, std::size_t size_index,
                  std::size_t run) {
  const std::size_t n = cfg.sample_sizes[size_index];
  RunRecord rec;
  rec.sample_size = n;
  rec.run_index = run;

  Rng draw = Rng::substream(cfg.seed, {3, size_index, run});
  const auto dev_idx = draw.sample_without_replacement(pop_dev.size(), 2 * n);
  std::vector<std::size_t> d_idx(dev_idx.begin(), dev_idx.begin() + n);
  std::vector<std::size_t> v1_idx(dev_idx.begin() + n, dev_idx.end());
  const auto v2_idx = draw.sample_without_replacement(pop_ext.size(), cfg.v2_size);

  const auto d_pop = pop_dev.subset(d_idx);
  const auto v1_pop = pop_dev.subset(v1_idx);
  const auto v2_pop = pop_ext.subset(v2_idx);
  const auto d_trial = d_pop.observed_trial();
  const auto v1_trial = v1_pop.observed_trial();
  const auto v2_trial = v2_pop.observed_trial();

  const DesignSpec spec{d_trial.n_covariates(), true};
  LogisticFit fit;
  try {
    fit = fit_logistic(spec.build(d_trial.x, d_trial.a), d_trial.y);

    // apparent + bootstrap settings
    ValidationPlan plan;
    plan.B = cfg.bootstrap_B;
    plan.seed = derive_seed(cfg.seed, {4, size_index, run});
    plan.subsample_repeats = cfg.subsample_repeats;
    plan.bootstrap_subsample_repeats = cfg.bootstrap_subsample_repeats;
    for (const auto& e : internal_validate(d_trial, spec, plan)) {
      if (!e.estimable) continue;
      rec.estimates[metric_index(e.name)][setting_index(
          context_setting(e.context))] = e.value;
    }

    // external settings; the starred (local-refit) variants drop cben_delta,
    // which needs no refit and is already covered by the naive row
    auto ext_opts = [&](std::uint64_t tag, bool starred) {
      ExternalOptions o;
      o.seed = derive_seed(cfg.seed, {tag, size_index, run});
      o.subsample_repeats = cfg.subsample_repeats;
      if (starred) {
        o.metrics = {MetricName::cben_y0, MetricName::mbcb,
                     MetricName::cal_intercept, MetricName::cal_slope};
      }
      return o;
    };
    record_external(rec,
                    external_validate(fit, spec, v1_trial, ExternalMode::naive,
                                      ext_opts(5, false)),
                    Setting::external_v1);
    record_external(rec,
                    external_validate(fit, spec, v1_trial,
                                      ExternalMode::local_refit,
                                      ext_opts(6, true)),
                    Setting::external_v1_local);
    record_external(rec,
                    external_validate(fit, spec, v2_trial, ExternalMode::naive,
                                      ext_opts(7, false)),
                    Setting::external_v2);
    record_external(rec,
                    external_validate(fit, spec, v2_trial,
                                      ExternalMode::local_refit,
                                      ext_opts(8, true)),
                    Setting::external_v2_local);

    // references
    auto store_refs = [&](const PopulationWithTruth& rows, int dgm,
                          bool population) {
      const auto preds = predict_potential_risks(fit, spec, rows.x);
      const auto refs = compute_references(rows, preds);
      if (population) {
        if (refs.c_delta_ben_realized.estimable)
          rec.discr_pop_ref[dgm] = refs.c_delta_ben_realized.value;
        rec.cal_int_pop_ref[dgm] = refs.cal_intercept_true.value;
        if (refs.cal_slope_true.estimable)
          rec.cal_slope_pop_ref[dgm] = refs.cal_slope_true.value;
        rec.cal_int_naive_ref[dgm] = refs.cal_intercept_naive.value;
        if (refs.cal_slope_naive.estimable)
          rec.cal_slope_naive_ref[dgm] = refs.cal_slope_naive.value;
      } else {
        if (refs.mbcb_true.estimable)
          rec.discr_sample_ref[dgm] = refs.mbcb_true.value;
        rec.cal_int_sample_ref[dgm] = refs.cal_intercept_true.value;
        if (refs.cal_slope_true.estimable)
          rec.cal_slope_sample_ref[dgm] = refs.cal_slope_true.value;
      }
    };
    store_refs(d_pop, 0, false);
    store_refs(pop_dev, 0, true);
    store_refs(v2_pop, 1, false);
    store_refs(pop_ext, 1, true);

    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.failure = e.what();
  }
  return rec;
}

}  // namespace

SimulationResult run_study(const StudyConfig& config, const ProgressFn& progress) {
  if (config.n_sim < 1) throw std::invalid_argument("n_sim must be >= 1");
  if (config.sample_sizes.empty())
    throw std::invalid_argument("no sample sizes configured");

  const auto pop_dev =
      generate_population(config.development_dgm, derive_seed(config.seed, {1}));
  const auto pop_ext =
      generate_population(config.external_dgm, derive_seed(config.seed, {2}));

  const std::size_t total = config.sample_sizes.size() * config.n_sim;
  SimulationResult result;
  result.config = config;
  result.runs.resize(total);

  std::atomic<std::size_t> done{0};
  parallel_for(total, resolve_threads(config.n_threads), [&](std::size_t t) {
    const std::size_t size_index = t / config.n_sim;
    const std::size_t run = t % config.n_sim;
    result.runs[t] = run_one(config, pop_dev, pop_ext, size_index, run);
    const std::size_t d = done.fetch_add(1) + 1;
    if (progress) progress(d, total);
  });

  for (const auto& r : result.runs) {
    if (!r.ok) ++result.failed_runs;
  }
  return result;
}

StudySummary performance_summary(const SimulationResult& result) {
  StudySummary summary;
  if (result.runs.empty()) throw std::invalid_argument("no completed runs");

  auto reference_of = [](const RunRecord& r, MetricName m,
                         Setting s) -> std::optional<double> {
    const int dgm =
        (s == Setting::external_v2 || s == Setting::external_v2_local) ? 1 : 0;
    switch (m) {
      case MetricName::cben_delta:
      case MetricName::cben_y0:
      case MetricName::mbcb:
        return r.discr_pop_ref[dgm];
      case MetricName::cal_intercept:
        return r.cal_int_pop_ref[dgm];
      case MetricName::cal_slope:
        return r.cal_slope_pop_ref[dgm];
      default:
        return std::nullopt;
    }
  };

  for (std::size_t n : result.config.sample_sizes) {
    for (MetricName m : kStudyMetrics) {
      for (std::size_t si = 0; si < kSettingCount; ++si) {
        const Setting s = static_cast<Setting>(si);
        double sum = 0.0, sum_sq = 0.0, ref_sum = 0.0, err_sum = 0.0,
               err_sq = 0.0;
        std::size_t count = 0, ref_count = 0;
        for (const auto& r : result.runs) {
          if (!r.ok || r.sample_size != n) continue;
          const auto est = r.estimates[metric_index(m)][si];
          if (!est) continue;
          sum += *est;
          sum_sq += *est * *est;
          ++count;
          const auto ref = reference_of(r, m, s);
          if (ref) {
            const double e = *ref - *est;
            ref_sum += *ref;
            err_sum += e;
            err_sq += e * e;
            ++ref_count;
          }
        }
        if (count == 0) continue;
        SummaryRow row;
        row.metric = m;
        row.setting = s;
        row.sample_size = n;
        row.runs = count;
        row.mean = sum / count;
        const double var = sum_sq / count - row.mean * row.mean;
        row.sd = std::sqrt(std::max(var, 0.0));
        if (ref_count > 0) {
          row.bias = err_sum / ref_count;
          row.rmse = std::sqrt(err_sq / ref_count);
          row.mean_reference = ref_sum / ref_count;
        } else {
          row.bias = std::nan("");
          row.rmse = std::nan("");
          row.mean_reference = std::nan("");
        }
        summary.rows.push_back(row);
      }
    }

    // reference summaries
    auto add_ref = [&](const char* metric, const char* kind, int dgm,
                       auto getter) {
      double sum = 0.0, sum_sq = 0.0;
      std::size_t count = 0;
      for (const auto& r : result.runs) {
        if (!r.ok || r.sample_size != n) continue;
        const std::optional<double> v = getter(r, dgm);
        if (!v) continue;
        sum += *v;
        sum_sq += *v * *v;
        ++count;
      }
      if (count == 0) return;
      ReferenceSummaryRow row;
      row.metric = metric;
      row.reference = kind;
      row.dgm = dgm == 0 ? "development" : "external";
      row.sample_size = n;
      row.runs = count;
      row.mean = sum / count;
      row.sd = std::sqrt(std::max(sum_sq / count - row.mean * row.mean, 0.0));
      summary.references.push_back(row);
    };
    for (int dgm : {0, 1}) {
      add_ref("mbcb", "sample", dgm, [](const RunRecord& r, int g) {
        return r.discr_sample_ref[g];
      });
      add_ref("mbcb", "population", dgm, [](const RunRecord& r, int g) {
        return r.discr_pop_ref[g];
      });
      add_ref("cal_intercept", "sample", dgm, [](const RunRecord& r, int g) {
        return r.cal_int_sample_ref[g];
      });
      add_ref("cal_intercept", "population", dgm, [](const RunRecord& r, int g) {
        return r.cal_int_pop_ref[g];
      });
      add_ref("cal_intercept", "population_naive", dgm,
              [](const RunRecord& r, int g) { return r.cal_int_naive_ref[g]; });
      add_ref("cal_slope", "sample", dgm, [](const RunRecord& r, int g) {
        return r.cal_slope_sample_ref[g];
      });
      add_ref("cal_slope", "population", dgm, [](const RunRecord& r, int g) {
        return r.cal_slope_pop_ref[g];
      });
      add_ref("cal_slope", "population_naive", dgm,
              [](const RunRecord& r, int g) { return r.cal_slope_naive_ref[g]; });
    }
  }
  return summary;
}

}  // namespace hteval
