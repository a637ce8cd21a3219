#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hteval/io.hpp"
#include "hteval/rng.hpp"
#include "hteval/validation.hpp"
#include "hteval/version.hpp"

namespace {

using hteval::MetricEstimate;
using ordered_json = nlohmann::ordered_json;

// outputs created in this invocation; removed if the command fails
std::vector<std::string> g_written;

void track(const std::string& path) { g_written.push_back(path); }

void remove_partial_outputs() {
  for (const auto& p : g_written) {
    std::error_code ec;
    std::filesystem::remove(p, ec);
  }
}

struct DataArgs {
  std::string path;
  std::string outcome = "y";
  std::string treatment = "a";
  std::string covariates;  // comma separated; empty = all remaining
  std::string outcome_kind = "binary";
};

hteval::CsvSchema schema_of(const DataArgs& args) {
  hteval::CsvSchema s;
  s.outcome = args.outcome;
  s.treatment = args.treatment;
  if (!args.covariates.empty()) {
    std::stringstream ss(args.covariates);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) s.covariates.push_back(item);
    }
  }
  s.outcome_kind = args.outcome_kind == "continuous"
                       ? hteval::OutcomeKind::continuous
                       : hteval::OutcomeKind::binary;
  return s;
}

void add_data_options(CLI::App* cmd, DataArgs& args) {
  cmd->add_option("--data", args.path, "input CSV")->required();
  cmd->add_option("--outcome", args.outcome, "outcome column name");
  cmd->add_option("--treatment", args.treatment, "treatment column name");
  cmd->add_option("--covariates", args.covariates,
                  "comma-separated covariate columns (default: all remaining)");
  cmd->add_option("--outcome-kind", args.outcome_kind, "binary or continuous")
      ->check(CLI::IsMember({"binary", "continuous"}));
}

// flat-section config document; command-line flags override it
struct ConfigDoc {
  ordered_json j;
  bool loaded = false;

  void load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    in >> j;
    loaded = true;
  }
  template <typename T>
  T get(const std::string& section, const std::string& key, T fallback) const {
    if (!loaded || !j.contains(section)) return fallback;
    return j.at(section).value(key, fallback);
  }
};

void apply_data_config(const ConfigDoc& cfg, DataArgs& args) {
  args.outcome = cfg.get("data", "outcome", args.outcome);
  args.treatment = cfg.get("data", "treatment", args.treatment);
  args.outcome_kind = cfg.get("data", "outcome_kind", args.outcome_kind);
  if (args.covariates.empty() && cfg.loaded && cfg.j.contains("data") &&
      cfg.j.at("data").contains("covariates")) {
    std::string joined;
    for (const auto& c : cfg.j.at("data").at("covariates")) {
      if (!joined.empty()) joined += ",";
      joined += c.get<std::string>();
    }
    args.covariates = joined;
  }
}

std::vector<MetricEstimate> apparent_metrics(const hteval::TrialDataset& d,
                                             const hteval::LogisticFit& fit,
                                             const hteval::DesignSpec& spec,
                                             std::uint64_t seed,
                                             std::size_t repeats) {
  const auto preds = hteval::predict_potential_risks(fit, spec, d.x);
  std::vector<MetricEstimate> out;
  hteval::MatchSpec ms;
  ms.seed = hteval::derive_seed(seed, {1});
  out.push_back(hteval::cben_delta(d, preds, ms, repeats));
  ms.seed = hteval::derive_seed(seed, {2});
  out.push_back(hteval::cben_y0(d, preds, preds.g0, ms, repeats));
  out.push_back(hteval::mbcb(preds.delta, preds.g0, preds.g1));

  const auto cal = hteval::ite_calibration(d, preds, preds.lp0);
  MetricEstimate ci;
  ci.name = hteval::MetricName::cal_intercept;
  ci.value = cal.intercept;
  out.push_back(ci);
  MetricEstimate cs;
  cs.name = hteval::MetricName::cal_slope;
  if (cal.slope_estimable) {
    cs.value = cal.slope;
  } else {
    cs.estimable = false;
  }
  out.push_back(cs);

  MetricEstimate ate;
  ate.name = hteval::MetricName::ate_error;
  ate.value = hteval::ate_error(d, preds);
  out.push_back(ate);

  std::vector<double> risk(d.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    risk[i] = d.a[i] == 1 ? preds.g1[i] : preds.g0[i];
  out.push_back(hteval::c_outcome(d.y, risk));
  out.push_back(hteval::brier(d.y, risk));
  for (auto& e : out) e.context = hteval::EvalContext::apparent;
  return out;
}

hteval::StudyConfig study_config_from(const ConfigDoc& cfg,
                                      const std::string& preset,
                                      std::uint64_t seed_override,
                                      bool seed_given) {
  hteval::StudyConfig sc;
  std::string effective_preset = preset;
  if (effective_preset.empty())
    effective_preset = cfg.get<std::string>("simulation", "preset", "paper");
  if (effective_preset == "paper") {
    sc.n_sim = 500;
  } else if (effective_preset == "paper-desk") {
    sc.n_sim = 200;
  } else {
    throw std::runtime_error("unknown preset: " + effective_preset);
  }
  sc.n_sim = cfg.get("simulation", "n_sim", sc.n_sim);
  if (cfg.loaded && cfg.j.contains("simulation")) {
    const auto& sim = cfg.j.at("simulation");
    if (sim.contains("sample_sizes"))
      sc.sample_sizes = sim.at("sample_sizes").get<std::vector<std::size_t>>();
    if (sim.contains("dgm_development"))
      sc.development_dgm.beta =
          sim.at("dgm_development").get<std::vector<double>>();
    if (sim.contains("dgm_external"))
      sc.external_dgm.beta = sim.at("dgm_external").get<std::vector<double>>();
  }
  sc.v2_size = cfg.get("simulation", "v2_size", sc.v2_size);
  sc.bootstrap_B = cfg.get("simulation", "B", sc.bootstrap_B);
  sc.seed = cfg.get("simulation", "seed", sc.seed);
  sc.development_dgm.population_size = cfg.get(
      "simulation", "population_size", sc.development_dgm.population_size);
  sc.external_dgm.population_size = sc.development_dgm.population_size;
  sc.subsample_repeats =
      cfg.get("simulation", "subsample_repeats", sc.subsample_repeats);
  sc.bootstrap_subsample_repeats = cfg.get(
      "simulation", "bootstrap_subsample_repeats", sc.bootstrap_subsample_repeats);
  sc.n_threads = cfg.get("simulation", "threads", sc.n_threads);
  if (seed_given) sc.seed = seed_override;
  return sc;
}

std::string canonical_study_config(const hteval::StudyConfig& sc) {
  ordered_json j;
  j["n_sim"] = sc.n_sim;
  j["sample_sizes"] = sc.sample_sizes;
  j["v2_size"] = sc.v2_size;
  j["B"] = sc.bootstrap_B;
  j["seed"] = sc.seed;
  j["dgm_development"] = sc.development_dgm.beta;
  j["dgm_external"] = sc.external_dgm.beta;
  j["population_size"] = sc.development_dgm.population_size;
  j["subsample_repeats"] = sc.subsample_repeats;
  j["bootstrap_subsample_repeats"] = sc.bootstrap_subsample_repeats;
  return j.dump();
}

int run(int argc, char** argv) {
  CLI::App app{"validation of individualized treatment effect models"};
  app.set_version_flag("--version", HTEVAL_VERSION);
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "fit the treatment-effect model");
  DataArgs fit_data;
  add_data_options(fit_cmd, fit_data);
  std::string model_out = "model.json", pred_out;
  fit_cmd->add_option("--model", model_out, "output model file");
  fit_cmd->add_option("--predictions", pred_out, "output predictions CSV");

  // validate
  auto* val_cmd = app.add_subcommand("validate", "validate a model");
  DataArgs val_data;
  add_data_options(val_cmd, val_data);
  std::string mode = "apparent", model_in, report_out = "report.json";
  std::string report_format = "json";
  std::uint64_t seed = 0;
  std::size_t B = 100, repeats = 1000;
  bool local_refit = false, stratified = false;
  val_cmd->add_option("--mode", mode, "apparent, internal, or external")
      ->check(CLI::IsMember({"apparent", "internal", "external"}));
  val_cmd->add_option("--model", model_in, "fitted model (external mode)");
  val_cmd->add_flag("--local-refit", local_refit,
                    "refit anchors locally in external data");
  val_cmd->add_option("--B", B, "bootstrap replicates (internal mode)");
  val_cmd->add_option("--seed", seed, "RNG seed");
  val_cmd->add_option("--subsample-repeats", repeats,
                      "arm-balancing repeats for matched statistics");
  val_cmd->add_flag("--stratified", stratified, "arm-stratified bootstrap");
  val_cmd->add_option("--out", report_out, "report path");
  val_cmd->add_option("--format", report_format, "json or tsv")
      ->check(CLI::IsMember({"json", "tsv"}));

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "run the simulation study");
  std::string preset, out_dir = "sim_out";
  std::uint64_t sim_seed = 0;
  bool sim_seed_given = false;
  std::size_t n_sim_override = 0;
  sim_cmd->add_option("--preset", preset, "paper or paper-desk")
      ->check(CLI::IsMember({"paper", "paper-desk"}));
  sim_cmd->add_option("--out-dir", out_dir, "output directory");
  sim_cmd
      ->add_option_function<std::uint64_t>(
          "--seed",
          [&](const std::uint64_t& v) {
            sim_seed = v;
            sim_seed_given = true;
          },
          "RNG seed")
      ->expected(1);
  sim_cmd->add_option("--n-sim", n_sim_override, "simulation runs per size");
  bool quiet = false;
  sim_cmd->add_flag("--quiet", quiet, "suppress progress output");

  // report
  auto* rep_cmd = app.add_subcommand("report", "aggregate reports to a table");
  std::vector<std::string> report_inputs;
  std::string table_out = "report.tsv";
  rep_cmd->add_option("--in", report_inputs, "input report.json files")
      ->required();
  rep_cmd->add_option("--out", table_out, "output TSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  ConfigDoc cfg;
  if (!config_path.empty()) cfg.load(config_path);

  if (fit_cmd->parsed()) {
    apply_data_config(cfg, fit_data);
    const auto loaded = hteval::load_trial_csv(fit_data.path, schema_of(fit_data));
    const hteval::DesignSpec spec{
        loaded.data.n_covariates(),
        cfg.get("model", "treatment_terms", true)};
    const auto fit = hteval::fit_logistic(spec.build(loaded.data.x, loaded.data.a),
                                          loaded.data.y);
    hteval::ModelFile model{spec, fit, loaded.covariate_names};
    track(model_out);
    hteval::save_model(model_out, model);
    if (!pred_out.empty()) {
      track(pred_out);
      hteval::write_predictions_csv(
          pred_out, hteval::predict_potential_risks(fit, spec, loaded.data.x));
    }
    std::cerr << "fit: n=" << loaded.data.size()
              << " converged=" << (fit.converged ? "yes" : "no")
              << " deviance=" << hteval::format_sig(fit.deviance) << "\n";
    return 0;
  }

  if (val_cmd->parsed()) {
    apply_data_config(cfg, val_data);
    B = cfg.get("validation", "B", B);
    const auto loaded = hteval::load_trial_csv(val_data.path, schema_of(val_data));
    const auto& d = loaded.data;
    std::vector<MetricEstimate> estimates;
    hteval::ReportMeta meta;
    meta.seed = seed;
    meta.command = "validate --mode " + mode;

    if (mode == "external") {
      if (model_in.empty())
        throw std::runtime_error("external mode needs --model");
      const auto model = hteval::load_model(model_in);
      hteval::ExternalOptions opts;
      opts.seed = seed;
      opts.subsample_repeats = repeats;
      opts.metrics = {hteval::MetricName::cben_delta, hteval::MetricName::cben_y0,
                      hteval::MetricName::mbcb, hteval::MetricName::cal_intercept,
                      hteval::MetricName::cal_slope, hteval::MetricName::ate_error,
                      hteval::MetricName::c_outcome, hteval::MetricName::brier};
      estimates = hteval::external_validate(
          model.fit, model.spec, d,
          local_refit ? hteval::ExternalMode::local_refit
                      : hteval::ExternalMode::naive,
          opts);
      meta.config_hash = hteval::config_hash(meta.command + model_in);
    } else {
      const hteval::DesignSpec spec{d.n_covariates(),
                                    cfg.get("model", "treatment_terms", true)};
      if (mode == "apparent") {
        const auto fit = hteval::fit_logistic(spec.build(d.x, d.a), d.y);
        estimates = apparent_metrics(d, fit, spec, seed, repeats);
      } else {
        hteval::ValidationPlan plan;
        plan.B = B;
        plan.seed = seed;
        plan.stratified = stratified;
        plan.subsample_repeats = repeats;
        estimates = hteval::internal_validate(d, spec, plan);
      }
      meta.config_hash = hteval::config_hash(meta.command);
    }
    track(report_out);
    hteval::write_report(report_out, estimates, meta, report_format);
    std::cerr << "wrote " << report_out << " (" << estimates.size()
              << " estimates)\n";
    return 0;
  }

  if (sim_cmd->parsed()) {
    auto sc = study_config_from(cfg, preset, sim_seed, sim_seed_given);
    if (n_sim_override > 0) sc.n_sim = n_sim_override;
    std::filesystem::create_directories(out_dir);
    hteval::ProgressFn progress = nullptr;
    if (!quiet) {
      progress = [](std::size_t done, std::size_t total) {
        if (done % 50 == 0 || done == total)
          std::cerr << "simulate: " << done << "/" << total << " runs\n";
      };
    }
    const auto result = hteval::run_study(sc, progress);
    const auto summary = hteval::performance_summary(result);

    hteval::ReportMeta meta;
    meta.seed = sc.seed;
    meta.config_hash = hteval::config_hash(canonical_study_config(sc));
    meta.command = "simulate";
    const auto dir = std::filesystem::path(out_dir);
    auto out_path = [&](const char* name) {
      const auto p = (dir / name).string();
      track(p);
      return p;
    };
    hteval::write_report(out_path("report.json"),
                         hteval::summary_estimates(summary), meta, "json");
    hteval::write_bias_rmse_tsv(out_path("bias_rmse.tsv"), summary);
    hteval::write_reference_tsv(out_path("references.tsv"), summary);
    hteval::write_plot_data_tsv(out_path("plot_discrimination.tsv"), summary,
                                false);
    hteval::write_plot_data_tsv(out_path("plot_calibration.tsv"), summary, true);
    hteval::write_runs_tsv(out_path("runs.tsv"), result);
    if (result.failed_runs > 0)
      std::cerr << "simulate: " << result.failed_runs << " runs failed\n";
    return 0;
  }

  if (rep_cmd->parsed()) {
    std::vector<MetricEstimate> all;
    for (const auto& path : report_inputs) {
      std::ifstream in(path);
      if (!in) throw std::runtime_error("cannot open report: " + path);
      std::ostringstream ss;
      ss << in.rdbuf();
      const auto parsed = hteval::parse_report_json(ss.str());
      all.insert(all.end(), parsed.estimates.begin(), parsed.estimates.end());
    }
    track(table_out);
    std::ofstream out(table_out);
    if (!out) throw std::runtime_error("cannot write: " + table_out);
    out << hteval::report_tsv(all);
    std::cerr << "wrote " << table_out << " (" << all.size() << " rows)\n";
    return 0;
  }

  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    remove_partial_outputs();
    return 1;
  }
}
