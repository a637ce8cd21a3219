#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hteval/types.hpp"
#include "hteval/validation.hpp"

namespace hteval {

enum class CovariateLaw { standard_normal };

// Logistic data-generating mechanism over [1, a, x1..xp, a*x1..a*xp].
struct DGMSpec {
  std::vector<double> beta;
  std::size_t population_size = 100000;
  CovariateLaw covariate_law = CovariateLaw::standard_normal;

  std::size_t n_covariates() const {
    if (beta.size() < 2 || beta.size() % 2 != 0)
      throw std::invalid_argument("coefficient length must be 2p+2");
    return (beta.size() - 2) / 2;
  }
};

PopulationWithTruth generate_population(const DGMSpec& spec, std::uint64_t seed);

struct StudyConfig {
  std::size_t n_sim = 500;
  std::vector<std::size_t> sample_sizes = {500, 750, 1000};
  std::size_t v2_size = 1000;
  std::size_t bootstrap_B = 100;
  std::uint64_t seed = 20240601;
  DGMSpec development_dgm{{-1.0, -0.75, 1.0, 0.0, 0.0, 0.5}, 100000};
  DGMSpec external_dgm{{-0.5, -0.5, 0.75, 0.25, 0.25, 0.25}, 100000};
  std::size_t subsample_repeats = 1000;
  std::size_t bootstrap_subsample_repeats = 100;
  std::size_t n_threads = 0;  // 0 = hardware/env decides
};

enum class Setting {
  apparent,
  boot632plus,
  optimism_corrected,
  external_v1,
  external_v2,
  external_v1_local,
  external_v2_local,
};
constexpr std::size_t kSettingCount = 7;
std::string to_string(Setting s);

// Reference estimands for one set of predictions over rows with known truth:
// the mbcb with true pattern probabilities, the concordance against realized
// potential outcomes, and calibration fits against true event probabilities
// with true (reference) or model-based (naive) offsets.
struct ReferenceSet {
  MetricEstimate mbcb_true;
  MetricEstimate c_delta_ben_realized;
  MetricEstimate cal_intercept_true, cal_slope_true;
  MetricEstimate cal_intercept_naive, cal_slope_naive;
};

ReferenceSet compute_references(const PopulationWithTruth& rows,
                                const RiskPredictionSet& preds);

struct RunRecord {
  std::size_t sample_size = 0;
  std::size_t run_index = 0;
  bool ok = false;
  std::string failure;
  // estimates[metric][setting]
  std::optional<double> estimates[8][kSettingCount];
  // references, indexed by DGM: 0 = development, 1 = external
  std::optional<double> discr_sample_ref[2], discr_pop_ref[2];
  std::optional<double> cal_int_sample_ref[2], cal_slope_sample_ref[2];
  std::optional<double> cal_int_pop_ref[2], cal_slope_pop_ref[2];
  std::optional<double> cal_int_naive_ref[2], cal_slope_naive_ref[2];
};

struct SimulationResult {
  StudyConfig config;
  std::vector<RunRecord> runs;
  std::size_t failed_runs = 0;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

SimulationResult run_study(const StudyConfig& config,
                           const ProgressFn& progress = nullptr);

struct SummaryRow {
  MetricName metric;
  Setting setting;
  std::size_t sample_size = 0;
  std::size_t runs = 0;
  double mean = 0.0;
  double sd = 0.0;
  double mean_reference = 0.0;
  double bias = 0.0;  // mean(reference - estimate)
  double rmse = 0.0;  // sqrt(mean((reference - estimate)^2))
};

struct ReferenceSummaryRow {
  std::string metric;     // "mbcb" (discrimination) or "cal_intercept"/"cal_slope"
  std::string reference;  // "sample", "population", "population_naive"
  std::string dgm;        // "development" or "external"
  std::size_t sample_size = 0;
  std::size_t runs = 0;
  double mean = 0.0;
  double sd = 0.0;
};

struct StudySummary {
  std::vector<SummaryRow> rows;
  std::vector<ReferenceSummaryRow> references;
};

StudySummary performance_summary(const SimulationResult& result);

}  // namespace hteval
