#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hteval/glm.hpp"
#include "hteval/simulation.hpp"
#include "hteval/types.hpp"

namespace hteval {

struct CsvSchema {
  std::string outcome = "y";
  std::string treatment = "a";
  std::vector<std::string> covariates;  // empty: all remaining columns
  OutcomeKind outcome_kind = OutcomeKind::binary;
};

struct LoadedTrial {
  TrialDataset data;
  std::vector<std::string> covariate_names;
};

// CSV with a header row, comma separators, '.' decimal. Errors carry the
// offending row and column.
LoadedTrial load_trial_csv(const std::string& path, const CsvSchema& schema);
void write_trial_csv(const std::string& path, const TrialDataset& d,
                     const std::vector<std::string>& covariate_names);

void write_predictions_csv(const std::string& path,
                           const RiskPredictionSet& preds);

struct ModelFile {
  DesignSpec spec;
  LogisticFit fit;
  std::vector<std::string> covariate_names;
};

void save_model(const std::string& path, const ModelFile& model);
ModelFile load_model(const std::string& path);

// x rounded to 6 significant digits, fixed "%.6g" formatting
std::string format_sig(double x);

struct ReportMeta {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string command;
};

// Key-value report of every estimate; stable field order, floats at six
// significant digits, byte-identical for identical inputs.
std::string report_json(const std::vector<MetricEstimate>& estimates,
                        const ReportMeta& meta);
std::string report_tsv(const std::vector<MetricEstimate>& estimates);
void write_report(const std::string& path,
                  const std::vector<MetricEstimate>& estimates,
                  const ReportMeta& meta, const std::string& format);

// FNV-1a of a canonical string, hex-encoded; used to fingerprint configs.
std::string config_hash(const std::string& canonical);

struct ParsedReport {
  ReportMeta meta;
  std::vector<MetricEstimate> estimates;
};
ParsedReport parse_report_json(const std::string& text);

// bit-exact JSON round-trips for the domain types
std::string to_json_string(const TrialDataset& d);
TrialDataset trial_from_json(const std::string& text);
std::string to_json_string(const RiskPredictionSet& p);
RiskPredictionSet predictions_from_json(const std::string& text);
std::string to_json_string(const MatchedPairSet& m);
MatchedPairSet pairs_from_json(const std::string& text);
std::string to_json_string(const MetricEstimate& e);
MetricEstimate estimate_from_json(const std::string& text);
std::string to_json_string(const PopulationWithTruth& p);
PopulationWithTruth population_from_json(const std::string& text);

// simulation outputs: summary TSVs and per-panel plot data
void write_bias_rmse_tsv(const std::string& path, const StudySummary& summary);
void write_reference_tsv(const std::string& path, const StudySummary& summary);
void write_plot_data_tsv(const std::string& path, const StudySummary& summary,
                         bool calibration_panel);
void write_runs_tsv(const std::string& path, const SimulationResult& result);
std::vector<MetricEstimate> summary_estimates(const StudySummary& summary);

}  // namespace hteval
