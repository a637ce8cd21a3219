#include "hteval/types.hpp"

#include <cmath>

namespace hteval {

const TrialDataset& validate_dataset(const TrialDataset& d) {
  const std::size_t n = d.y.size();
  if (n < 2) throw std::invalid_argument("dataset has fewer than 2 individuals");
  if (d.a.size() != n)
    throw std::invalid_argument("treatment vector length does not match outcome length");
  if (d.x.rows() != 0 && d.x.rows() != n)
    throw std::invalid_argument("covariate row count does not match outcome length");

  std::size_t n_control = 0, n_treated = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d.a[i] == 0) {
      ++n_control;
    } else if (d.a[i] == 1) {
      ++n_treated;
    } else {
      throw std::invalid_argument("treatment indicator not in {0,1} at row " +
                                  std::to_string(i));
    }
  }
  if (n_control == 0) throw std::invalid_argument("empty control arm");
  if (n_treated == 0) throw std::invalid_argument("empty treated arm");

  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(d.y[i]))
      throw std::invalid_argument("missing or non-finite outcome at row " +
                                  std::to_string(i));
    if (d.outcome_kind == OutcomeKind::binary && d.y[i] != 0.0 && d.y[i] != 1.0)
      throw std::invalid_argument("non-binary outcome " + std::to_string(d.y[i]) +
                                  " at row " + std::to_string(i) +
                                  " in binary mode");
  }
  for (std::size_t i = 0; i < d.x.rows(); ++i) {
    for (std::size_t j = 0; j < d.x.cols(); ++j) {
      if (!std::isfinite(d.x(i, j)))
        throw std::invalid_argument("missing or non-finite covariate at row " +
                                    std::to_string(i) + ", column " +
                                    std::to_string(j));
    }
  }
  return d;
}

RiskPredictionSet RiskPredictionSet::from_probabilities(std::vector<double> p0,
                                                        std::vector<double> p1) {
  if (p0.size() != p1.size())
    throw std::invalid_argument("g0 and g1 length mismatch");
  RiskPredictionSet s;
  const std::size_t n = p0.size();
  s.g0.resize(n);
  s.g1.resize(n);
  s.delta.resize(n);
  s.lp0.resize(n);
  s.lp1.resize(n);
  s.delta_lp.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.g0[i] = clamp_prob(p0[i]);
    s.g1[i] = clamp_prob(p1[i]);
    s.delta[i] = s.g1[i] - s.g0[i];
    s.lp0[i] = logit(s.g0[i]);
    s.lp1[i] = logit(s.g1[i]);
    s.delta_lp[i] = s.lp1[i] - s.lp0[i];
  }
  return s;
}

RiskPredictionSet RiskPredictionSet::from_logits(const std::vector<double>& l0,
                                                 const std::vector<double>& l1) {
  if (l0.size() != l1.size())
    throw std::invalid_argument("lp0 and lp1 length mismatch");
  std::vector<double> p0(l0.size()), p1(l1.size());
  for (std::size_t i = 0; i < l0.size(); ++i) {
    p0[i] = expit(l0[i]);
    p1[i] = expit(l1[i]);
  }
  return from_probabilities(std::move(p0), std::move(p1));
}

std::string to_string(MetricName m) {
  switch (m) {
    case MetricName::cben_delta: return "cben_delta";
    case MetricName::cben_y0: return "cben_y0";
    case MetricName::mbcb: return "mbcb";
    case MetricName::cal_intercept: return "cal_intercept";
    case MetricName::cal_slope: return "cal_slope";
    case MetricName::ate_error: return "ate_error";
    case MetricName::c_outcome: return "c_outcome";
    case MetricName::brier: return "brier";
  }
  return "unknown";
}

std::string to_string(EvalContext c) {
  switch (c) {
    case EvalContext::apparent: return "apparent";
    case EvalContext::boot632plus: return "boot632plus";
    case EvalContext::optimism_corrected: return "optimism_corrected";
    case EvalContext::external: return "external";
    case EvalContext::sample_reference: return "sample_reference";
    case EvalContext::population_reference: return "population_reference";
    case EvalContext::naive_reference: return "naive_reference";
  }
  return "unknown";
}

MetricName metric_from_string(const std::string& s) {
  if (s == "cben_delta") return MetricName::cben_delta;
  if (s == "cben_y0") return MetricName::cben_y0;
  if (s == "mbcb") return MetricName::mbcb;
  if (s == "cal_intercept") return MetricName::cal_intercept;
  if (s == "cal_slope") return MetricName::cal_slope;
  if (s == "ate_error") return MetricName::ate_error;
  if (s == "c_outcome") return MetricName::c_outcome;
  if (s == "brier") return MetricName::brier;
  throw std::invalid_argument("unknown metric name: " + s);
}

EvalContext context_from_string(const std::string& s) {
  if (s == "apparent") return EvalContext::apparent;
  if (s == "boot632plus") return EvalContext::boot632plus;
  if (s == "optimism_corrected") return EvalContext::optimism_corrected;
  if (s == "external") return EvalContext::external;
  if (s == "sample_reference") return EvalContext::sample_reference;
  if (s == "population_reference") return EvalContext::population_reference;
  if (s == "naive_reference") return EvalContext::naive_reference;
  throw std::invalid_argument("unknown evaluation context: " + s);
}

}  // namespace hteval
