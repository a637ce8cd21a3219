#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hteval/calibration.hpp"
#include "hteval/concordance.hpp"
#include "hteval/glm.hpp"
#include "hteval/io.hpp"
#include "hteval/matching.hpp"
#include "hteval/simulation.hpp"
#include "hteval/types.hpp"
#include "hteval/validation.hpp"
#include "hteval/version.hpp"

namespace py = pybind11;
using namespace hteval;

namespace {

Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Matrix();
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols())
      throw std::invalid_argument("ragged covariate rows");
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

TrialDataset make_trial(const std::vector<double>& y, const std::vector<int>& a,
                        const std::vector<std::vector<double>>& x,
                        const std::string& outcome_kind) {
  TrialDataset d;
  d.y = y;
  d.a = a;
  d.x = matrix_from_rows(x);
  d.outcome_kind = outcome_kind == "continuous" ? OutcomeKind::continuous
                                                : OutcomeKind::binary;
  return validate_dataset(d);
}

py::dict estimate_dict(const MetricEstimate& e) {
  py::dict d;
  d["name"] = to_string(e.name);
  d["context"] = to_string(e.context);
  d["detail"] = e.detail;
  if (e.estimable) {
    d["value"] = e.value;
  } else {
    d["value"] = py::none();
  }
  d["estimable"] = e.estimable;
  py::dict meta;
  for (const auto& [k, v] : e.meta) meta[py::str(k)] = v;
  d["meta"] = meta;
  return d;
}

py::list estimate_list(const std::vector<MetricEstimate>& es) {
  py::list out;
  for (const auto& e : es) out.append(estimate_dict(e));
  return out;
}

MatchSpec make_match_spec(const std::string& mode, const std::string& algorithm,
                          std::uint64_t seed) {
  MatchSpec s;
  s.mode = mode == "mahalanobis" ? MatchMode::mahalanobis : MatchMode::scalar;
  s.algorithm =
      algorithm == "greedy" ? MatchAlgorithm::greedy : MatchAlgorithm::optimal;
  s.seed = seed;
  return s;
}

}  // namespace

PYBIND11_MODULE(_hteval, m) {
  m.doc() = "discrimination and calibration metrics for individualized "
            "treatment effect models";
  m.attr("__version__") = HTEVAL_VERSION;

  py::class_<TrialDataset>(m, "TrialDataset")
      .def(py::init(&make_trial), py::arg("y"), py::arg("a"), py::arg("x"),
           py::arg("outcome_kind") = "binary")
      .def_readonly("y", &TrialDataset::y)
      .def_readonly("a", &TrialDataset::a)
      .def_property_readonly("x",
                             [](const TrialDataset& d) {
                               std::vector<std::vector<double>> rows(d.x.rows());
                               for (std::size_t i = 0; i < d.x.rows(); ++i)
                                 rows[i].assign(d.x.row(i),
                                                d.x.row(i) + d.x.cols());
                               return rows;
                             })
      .def_property_readonly("n", &TrialDataset::size)
      .def_property_readonly("n_covariates", &TrialDataset::n_covariates);

  py::class_<RiskPredictionSet>(m, "RiskPredictionSet")
      .def_static(
          "from_probabilities",
          [](const std::vector<double>& g0, const std::vector<double>& g1) {
            return RiskPredictionSet::from_probabilities(g0, g1);
          },
          py::arg("g0"), py::arg("g1"))
      .def_static("from_logits", &RiskPredictionSet::from_logits,
                  py::arg("lp0"), py::arg("lp1"))
      .def_readonly("g0", &RiskPredictionSet::g0)
      .def_readonly("g1", &RiskPredictionSet::g1)
      .def_readonly("delta", &RiskPredictionSet::delta)
      .def_readonly("lp0", &RiskPredictionSet::lp0)
      .def_readonly("lp1", &RiskPredictionSet::lp1)
      .def_readonly("delta_lp", &RiskPredictionSet::delta_lp);

  py::class_<MatchedPairSet>(m, "MatchedPairSet")
      .def_readonly("pairs", &MatchedPairSet::pairs)
      .def_readonly("match_scalar", &MatchedPairSet::match_scalar)
      .def_readonly("total_distance", &MatchedPairSet::total_distance);

  py::class_<DesignSpec>(m, "DesignSpec")
      .def(py::init<std::size_t, bool>(), py::arg("n_covariates"),
           py::arg("treatment_terms") = true)
      .def_readonly("n_covariates", &DesignSpec::n_covariates)
      .def_readonly("treatment_terms", &DesignSpec::treatment_terms)
      .def("column_names", &DesignSpec::column_names);

  py::class_<LogisticFit>(m, "LogisticFit")
      .def_readonly("coefficients", &LogisticFit::coefficients)
      .def_readonly("converged", &LogisticFit::converged)
      .def_readonly("deviance", &LogisticFit::deviance)
      .def_readonly("iterations", &LogisticFit::iterations)
      .def_readonly("separation", &LogisticFit::separation);

  m.def(
      "fit_logistic",
      [](const std::vector<std::vector<double>>& design,
         const std::vector<double>& y,
         const std::optional<std::vector<double>>& offset,
         const std::optional<std::vector<double>>& weights) {
        return fit_logistic(matrix_from_rows(design), y,
                            offset ? &*offset : nullptr,
                            weights ? &*weights : nullptr);
      },
      py::arg("design"), py::arg("y"), py::arg("offset") = py::none(),
      py::arg("weights") = py::none());

  m.def(
      "build_ite_design",
      [](const std::vector<std::vector<double>>& x, const std::vector<int>& a) {
        const Matrix d = build_ite_design(matrix_from_rows(x), a);
        std::vector<std::vector<double>> rows(d.rows());
        for (std::size_t i = 0; i < d.rows(); ++i)
          rows[i].assign(d.row(i), d.row(i) + d.cols());
        return rows;
      },
      py::arg("x"), py::arg("a"));

  m.def(
      "fit_ite_model",
      [](const TrialDataset& d) {
        const DesignSpec spec{d.n_covariates(), true};
        return fit_logistic(spec.build(d.x, d.a), d.y);
      },
      py::arg("data"));

  m.def(
      "predict_potential_risks",
      [](const LogisticFit& fit, const DesignSpec& spec,
         const std::vector<std::vector<double>>& x) {
        return predict_potential_risks(fit, spec, matrix_from_rows(x));
      },
      py::arg("fit"), py::arg("spec"), py::arg("x"));

  m.def(
      "match_pairs_scalar",
      [](const std::vector<double>& control_scores,
         const std::vector<double>& treated_scores,
         const std::string& algorithm) {
        return match_pairs(make_match_spec("scalar", algorithm, 0),
                           control_scores, treated_scores);
      },
      py::arg("control_scores"), py::arg("treated_scores"),
      py::arg("algorithm") = "optimal");

  m.def(
      "match_pairs_mahalanobis",
      [](const std::vector<std::vector<double>>& control_x,
         const std::vector<std::vector<double>>& treated_x,
         const std::string& algorithm) {
        return match_pairs(make_match_spec("mahalanobis", algorithm, 0),
                           matrix_from_rows(control_x),
                           matrix_from_rows(treated_x));
      },
      py::arg("control_x"), py::arg("treated_x"),
      py::arg("algorithm") = "optimal");

  m.def(
      "balance_subsample",
      [](const TrialDataset& d, std::uint64_t seed, std::size_t repeats) {
        return balance_subsample(d, seed, repeats);
      },
      py::arg("data"), py::arg("seed") = 0, py::arg("repeats") = 1);

  m.def("pair_benefit_prob", &pair_benefit_prob, py::arg("g0_k"),
        py::arg("g1_k"), py::arg("g0_l"), py::arg("g1_l"));

  m.def(
      "mbcb",
      [](const std::vector<double>& delta, const std::vector<double>& g0,
         const std::vector<double>& g1) { return estimate_dict(mbcb(delta, g0, g1)); },
      py::arg("delta"), py::arg("g0"), py::arg("g1"));

  m.def(
      "mbcb_strict",
      [](const std::vector<double>& delta, const std::vector<double>& g0,
         const std::vector<double>& g1) {
        return estimate_dict(mbcb_strict(delta, g0, g1));
      },
      py::arg("delta"), py::arg("g0"), py::arg("g1"),
      "diagnostic variant with the benefit-plus-harm denominator and strict "
      "inequalities");

  m.def(
      "cben_delta",
      [](const TrialDataset& d, const RiskPredictionSet& preds,
         std::uint64_t seed, std::size_t repeats, const std::string& algorithm) {
        return estimate_dict(
            cben_delta(d, preds, make_match_spec("scalar", algorithm, seed),
                       repeats));
      },
      py::arg("data"), py::arg("preds"), py::arg("seed") = 0,
      py::arg("subsample_repeats") = 1000, py::arg("algorithm") = "optimal");

  m.def(
      "cben_y0",
      [](const TrialDataset& d, const RiskPredictionSet& preds,
         const std::optional<std::vector<double>>& matching_g0,
         std::uint64_t seed, std::size_t repeats, const std::string& algorithm) {
        return estimate_dict(
            cben_y0(d, preds, matching_g0 ? *matching_g0 : preds.g0,
                    make_match_spec("scalar", algorithm, seed), repeats));
      },
      py::arg("data"), py::arg("preds"), py::arg("matching_g0") = py::none(),
      py::arg("seed") = 0, py::arg("subsample_repeats") = 1000,
      py::arg("algorithm") = "optimal");

  m.def(
      "c_delta_ben",
      [](const std::vector<double>& delta, const std::vector<double>& y0,
         const std::vector<double>& y1) {
        return estimate_dict(c_delta_ben(delta, y0, y1));
      },
      py::arg("delta"), py::arg("y0"), py::arg("y1"));

  m.def(
      "c_outcome",
      [](const std::vector<double>& y, const std::vector<double>& risk) {
        return estimate_dict(c_outcome(y, risk));
      },
      py::arg("y"), py::arg("risk"));

  m.def(
      "brier",
      [](const std::vector<double>& y, const std::vector<double>& risk) {
        return estimate_dict(brier(y, risk));
      },
      py::arg("y"), py::arg("risk"));

  m.def(
      "ite_calibration",
      [](const std::vector<double>& y, const std::vector<double>& delta_lp,
         const std::vector<double>& offset_lp) {
        const auto cal = ite_calibration(y, delta_lp, offset_lp);
        py::dict out;
        out["intercept"] = cal.intercept;
        out["slope"] = cal.slope_estimable ? py::cast(cal.slope) : py::none();
        out["slope_estimable"] = cal.slope_estimable;
        out["converged"] = cal.converged;
        out["small_arm_warning"] = cal.small_arm_warning;
        return out;
      },
      py::arg("y"), py::arg("delta_lp"), py::arg("offset_lp"));

  m.def(
      "ite_calibration_continuous",
      [](const std::vector<double>& y, const std::vector<double>& g0,
         const std::vector<double>& delta) {
        const auto cal = ite_calibration_continuous(y, g0, delta);
        py::dict out;
        out["intercept"] = cal.intercept;
        out["slope"] = cal.slope_estimable ? py::cast(cal.slope) : py::none();
        out["scatter"] = cal.scatter;
        return out;
      },
      py::arg("y_treated"), py::arg("g0_treated"), py::arg("delta_treated"));

  m.def(
      "ate_error",
      [](const TrialDataset& d, const RiskPredictionSet& preds) {
        return ate_error(d, preds);
      },
      py::arg("data"), py::arg("preds"));

  m.def(
      "classical_calibration",
      [](const std::vector<double>& y, const std::vector<double>& lp) {
        const auto cal = classical_calibration(y, lp);
        py::dict out;
        out["intercept"] = cal.intercept;
        out["slope"] = cal.slope_estimable ? py::cast(cal.slope) : py::none();
        return out;
      },
      py::arg("y"), py::arg("lp"));

  m.def(
      "quantile_group_calibration",
      [](const std::vector<double>& delta, const std::vector<double>& y,
         const std::vector<int>& a, std::size_t n_groups) {
        py::list out;
        for (const auto& g : quantile_group_calibration(delta, y, a, n_groups)) {
          py::dict item;
          item["mean_delta"] = g.mean_delta;
          item["observed_te"] = g.estimable ? py::cast(g.observed_te) : py::none();
          item["size"] = g.size;
          item["n_control"] = g.n_control;
          item["n_treated"] = g.n_treated;
          item["estimable"] = g.estimable;
          out.append(item);
        }
        return out;
      },
      py::arg("delta"), py::arg("y"), py::arg("a"), py::arg("n_groups") = 4);

  m.def("plus632_combine", &plus632_combine, py::arg("c_app"), py::arg("c_oos"),
        py::arg("gamma"));

  m.def(
      "internal_validate",
      [](const TrialDataset& d, std::size_t B, std::uint64_t seed,
         bool stratified, std::size_t subsample_repeats,
         std::size_t bootstrap_subsample_repeats) {
        ValidationPlan plan;
        plan.B = B;
        plan.seed = seed;
        plan.stratified = stratified;
        plan.subsample_repeats = subsample_repeats;
        plan.bootstrap_subsample_repeats = bootstrap_subsample_repeats;
        const DesignSpec spec{d.n_covariates(), true};
        return estimate_list(internal_validate(d, spec, plan));
      },
      py::arg("data"), py::arg("B") = 100, py::arg("seed") = 0,
      py::arg("stratified") = false, py::arg("subsample_repeats") = 1000,
      py::arg("bootstrap_subsample_repeats") = 100);

  m.def(
      "external_validate",
      [](const LogisticFit& fit, const DesignSpec& spec, const TrialDataset& d,
         const std::string& mode, std::uint64_t seed,
         std::size_t subsample_repeats) {
        ExternalOptions opts;
        opts.seed = seed;
        opts.subsample_repeats = subsample_repeats;
        return estimate_list(external_validate(
            fit, spec, d,
            mode == "local_refit" ? ExternalMode::local_refit
                                  : ExternalMode::naive,
            opts));
      },
      py::arg("fit"), py::arg("spec"), py::arg("data"),
      py::arg("mode") = "naive", py::arg("seed") = 0,
      py::arg("subsample_repeats") = 1000);

  py::class_<PopulationWithTruth>(m, "PopulationWithTruth")
      .def_readonly("p0", &PopulationWithTruth::p0)
      .def_readonly("p1", &PopulationWithTruth::p1)
      .def_readonly("y0", &PopulationWithTruth::y0)
      .def_readonly("y1", &PopulationWithTruth::y1)
      .def_readonly("a", &PopulationWithTruth::a)
      .def_property_readonly("n", &PopulationWithTruth::size)
      .def("observed_trial", &PopulationWithTruth::observed_trial);

  m.def(
      "generate_population",
      [](const std::vector<double>& beta, std::size_t size, std::uint64_t seed) {
        return generate_population(DGMSpec{beta, size}, seed);
      },
      py::arg("beta"), py::arg("size"), py::arg("seed") = 0);

  py::class_<StudyConfig>(m, "StudyConfig")
      .def(py::init<>())
      .def_readwrite("n_sim", &StudyConfig::n_sim)
      .def_readwrite("sample_sizes", &StudyConfig::sample_sizes)
      .def_readwrite("v2_size", &StudyConfig::v2_size)
      .def_readwrite("bootstrap_B", &StudyConfig::bootstrap_B)
      .def_readwrite("seed", &StudyConfig::seed)
      .def_readwrite("subsample_repeats", &StudyConfig::subsample_repeats)
      .def_readwrite("bootstrap_subsample_repeats",
                     &StudyConfig::bootstrap_subsample_repeats)
      .def_readwrite("n_threads", &StudyConfig::n_threads)
      .def_property(
          "population_size",
          [](const StudyConfig& c) { return c.development_dgm.population_size; },
          [](StudyConfig& c, std::size_t n) {
            c.development_dgm.population_size = n;
            c.external_dgm.population_size = n;
          });

  m.def(
      "run_study_summary",
      [](const StudyConfig& config) {
        const auto result = run_study(config);
        const auto summary = performance_summary(result);
        py::list rows;
        for (const auto& r : summary.rows) {
          py::dict d;
          d["metric"] = to_string(r.metric);
          d["setting"] = to_string(r.setting);
          d["n"] = r.sample_size;
          d["runs"] = r.runs;
          d["mean"] = r.mean;
          d["sd"] = r.sd;
          d["mean_reference"] = r.mean_reference;
          d["bias"] = r.bias;
          d["rmse"] = r.rmse;
          rows.append(d);
        }
        py::list refs;
        for (const auto& r : summary.references) {
          py::dict d;
          d["metric"] = r.metric;
          d["reference"] = r.reference;
          d["dgm"] = r.dgm;
          d["n"] = r.sample_size;
          d["runs"] = r.runs;
          d["mean"] = r.mean;
          d["sd"] = r.sd;
          refs.append(d);
        }
        py::dict out;
        out["rows"] = rows;
        out["references"] = refs;
        out["failed_runs"] = result.failed_runs;
        return out;
      },
      py::arg("config"));
}
