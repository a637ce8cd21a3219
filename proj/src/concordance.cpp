#include "hteval/concordance.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

namespace hteval {

namespace {

// pairs (a in high, b in low) with a > b, plus prediction ties, for two
// ascending-sorted vectors
void count_group_pair(const std::vector<double>& high,
                      const std::vector<double>& low, ConcordanceCounts& out) {
  std::size_t j_lt = 0, j_le = 0;
  double concordant = 0.0, tied = 0.0;
  for (const double a : high) {
    while (j_lt < low.size() && low[j_lt] < a) ++j_lt;
    while (j_le < low.size() && low[j_le] <= a) ++j_le;
    concordant += static_cast<double>(j_lt);
    tied += static_cast<double>(j_le - j_lt);
  }
  out.concordant += concordant;
  out.tied_prediction += tied;
  out.informative +=
      static_cast<double>(high.size()) * static_cast<double>(low.size());
}

struct BenefitMass {
  std::vector<double> pb, ph, pz;  // P(benefit), P(harm), P(no effect)
};

BenefitMass benefit_mass(const std::vector<double>& g0,
                         const std::vector<double>& g1) {
  if (g0.size() != g1.size())
    throw std::invalid_argument("g0 and g1 length mismatch");
  BenefitMass m;
  const std::size_t n = g0.size();
  m.pb.resize(n);
  m.ph.resize(n);
  m.pz.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.pb[i] = (1.0 - g1[i]) * g0[i];
    m.ph[i] = g1[i] * (1.0 - g0[i]);
    m.pz[i] = 1.0 - m.pb[i] - m.ph[i];
  }
  return m;
}

std::vector<std::size_t> ascending_order(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  return order;
}

struct PairScores {
  std::vector<double> pred;
  std::vector<int> harm_level;  // y_treated - y_control
};

PairScores score_pairs(const TrialDataset& d,
                       const std::vector<std::size_t>& controls,
                       const std::vector<std::size_t>& treated,
                       const MatchedPairSet& pairs, bool pair_mean,
                       const std::vector<double>& delta) {
  PairScores s;
  s.pred.reserve(pairs.pairs.size());
  s.harm_level.reserve(pairs.pairs.size());
  for (const auto& [ci, tj] : pairs.pairs) {
    const std::size_t i = controls[ci];
    const std::size_t j = treated[tj];
    s.pred.push_back(pair_mean ? 0.5 * (delta[i] + delta[j]) : delta[j]);
    s.harm_level.push_back(static_cast<int>(d.y[j] - d.y[i]));
  }
  return s;
}

MetricEstimate cben_matched(const TrialDataset& d,
                            const std::vector<double>& delta,
                            const std::vector<double>& match_score,
                            bool pair_mean, MetricName name,
                            const MatchSpec& spec,
                            std::size_t subsample_repeats) {
  if (d.outcome_kind != OutcomeKind::binary)
    throw std::invalid_argument("c-for-benefit requires binary outcomes");
  validate_dataset(d);
  const auto sets = balance_subsample(d, spec.seed, subsample_repeats);

  KahanSum c_sum;
  double pair_count = 0.0, informative = 0.0;
  std::size_t used = 0, dropped = 0;
  for (const auto& set : sets) {
    std::vector<std::size_t> controls, treated;
    for (auto i : set) (d.a[i] == 0 ? controls : treated).push_back(i);
    std::vector<double> cs = take(match_score, controls);
    std::vector<double> ts = take(match_score, treated);
    MatchSpec scalar_spec = spec;
    scalar_spec.mode = MatchMode::scalar;
    const auto pairs = match_pairs(scalar_spec, cs, ts);
    const auto scored = score_pairs(d, controls, treated, pairs, pair_mean, delta);
    const auto counts = concordance_vs_levels(scored.pred, scored.harm_level);
    if (!counts.estimable()) {
      ++dropped;
      continue;
    }
    c_sum.add(counts.c_statistic());
    pair_count += static_cast<double>(pairs.pairs.size());
    informative += counts.informative;
    ++used;
  }

  MetricEstimate est;
  est.name = name;
  if (used == 0) {
    est.estimable = false;
    est.meta["repeats_dropped"] = static_cast<double>(dropped);
    return est;
  }
  est.value = c_sum.value() / static_cast<double>(used);
  est.meta["pairs"] = pair_count / static_cast<double>(used);
  est.meta["informative_pair_pairs"] = informative / static_cast<double>(used);
  est.meta["repeats_used"] = static_cast<double>(used);
  est.meta["repeats_dropped"] = static_cast<double>(dropped);
  return est;
}

}  // namespace

ConcordanceCounts concordance_vs_levels(const std::vector<double>& pred,
                                        const std::vector<int>& level) {
  if (pred.size() != level.size())
    throw std::invalid_argument("prediction and level length mismatch");
  std::map<int, std::vector<double>> groups;
  for (std::size_t i = 0; i < pred.size(); ++i)
    groups[level[i]].push_back(pred[i]);
  for (auto& [lv, v] : groups) std::sort(v.begin(), v.end());

  ConcordanceCounts out;
  for (auto hi = groups.begin(); hi != groups.end(); ++hi) {
    for (auto lo = groups.begin(); lo != hi; ++lo) {
      count_group_pair(hi->second, lo->second, out);
    }
  }
  return out;
}

double pair_benefit_prob(double g0_k, double g1_k, double g0_l, double g1_l) {
  // the five concordant potential-outcome patterns for "more benefit for k"
  const double p1 = (1.0 - g1_k) * g0_k * (1.0 - g1_l) * (1.0 - g0_l);
  const double p2 = (1.0 - g1_k) * g0_k * g1_l * g0_l;
  const double p3 = (1.0 - g1_k) * g0_k * g1_l * (1.0 - g0_l);
  const double p4 = (1.0 - g1_k) * (1.0 - g0_k) * g1_l * (1.0 - g0_l);
  const double p5 = g1_k * g0_k * g1_l * (1.0 - g0_l);
  return p1 + p2 + p3 + p4 + p5;
}

MetricEstimate mbcb(const std::vector<double>& delta,
                    const std::vector<double>& g0,
                    const std::vector<double>& g1) {
  const std::size_t n = delta.size();
  if (g0.size() != n || g1.size() != n)
    throw std::invalid_argument("delta and prediction lengths disagree");
  if (n < 2) throw std::invalid_argument("mbcb needs at least two individuals");
  const BenefitMass m = benefit_mass(g0, g1);

  // Totals for the denominator: sum over ordered pairs (k != l) of
  // P_benefit(k,l) = pb_k (pz_l + ph_l) + pz_k ph_l.
  KahanSum tot_pzph, tot_ph;
  for (std::size_t i = 0; i < n; ++i) {
    tot_pzph.add(m.pz[i] + m.ph[i]);
    tot_ph.add(m.ph[i]);
  }
  KahanSum den;
  for (std::size_t k = 0; k < n; ++k) {
    den.add(m.pb[k] * (tot_pzph.value() - m.pz[k] - m.ph[k]) +
            m.pz[k] * (tot_ph.value() - m.ph[k]));
  }

  // Numerator via delta-ordered suffix sums; ties within a delta group get
  // half credit.
  const auto order = ascending_order(delta);
  KahanSum num;
  double suffix_pzph = 0.0, suffix_ph = 0.0;
  std::size_t hi = n;
  while (hi > 0) {
    std::size_t lo = hi;
    while (lo > 0 && delta[order[lo - 1]] == delta[order[hi - 1]]) --lo;
    double grp_pzph = 0.0, grp_ph = 0.0;
    for (std::size_t r = lo; r < hi; ++r) {
      const std::size_t k = order[r];
      grp_pzph += m.pz[k] + m.ph[k];
      grp_ph += m.ph[k];
    }
    for (std::size_t r = lo; r < hi; ++r) {
      const std::size_t k = order[r];
      num.add(m.pb[k] * suffix_pzph + m.pz[k] * suffix_ph);
      num.add(0.5 * (m.pb[k] * (grp_pzph - m.pz[k] - m.ph[k]) +
                     m.pz[k] * (grp_ph - m.ph[k])));
    }
    suffix_pzph += grp_pzph;
    suffix_ph += grp_ph;
    hi = lo;
  }

  MetricEstimate est;
  est.name = MetricName::mbcb;
  est.meta["n"] = static_cast<double>(n);
  est.meta["denominator_mass"] = den.value();
  if (den.value() <= 0.0) {
    est.estimable = false;
    return est;
  }
  est.value = num.value() / den.value();
  return est;
}

MetricEstimate mbcb_strict(const std::vector<double>& delta,
                           const std::vector<double>& g0,
                           const std::vector<double>& g1) {
  const std::size_t n = delta.size();
  if (g0.size() != n || g1.size() != n)
    throw std::invalid_argument("delta and prediction lengths disagree");
  if (n < 2) throw std::invalid_argument("needs at least two individuals");
  const BenefitMass m = benefit_mass(g0, g1);
  KahanSum num, den;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = 0; l < n; ++l) {
      if (l == k) continue;
      const double p_ben = m.pb[k] * (m.pz[l] + m.ph[l]) + m.pz[k] * m.ph[l];
      const double p_harm = m.ph[k] * (m.pz[l] + m.pb[l]) + m.pz[k] * m.pb[l];
      if (delta[k] < delta[l]) num.add(p_ben);
      if (delta[k] > delta[l]) num.add(p_harm);
      den.add(p_ben + p_harm);
    }
  }
  MetricEstimate est;
  est.name = MetricName::mbcb;
  est.detail = "strict";
  est.meta["n"] = static_cast<double>(n);
  est.meta["denominator_mass"] = den.value();
  if (den.value() <= 0.0) {
    est.estimable = false;
    return est;
  }
  est.value = num.value() / den.value();
  return est;
}

MetricEstimate cben_delta(const TrialDataset& d, const RiskPredictionSet& preds,
                          const MatchSpec& spec,
                          std::size_t subsample_repeats) {
  return cben_matched(d, preds.delta, preds.delta, /*pair_mean=*/true,
                      MetricName::cben_delta, spec, subsample_repeats);
}

MetricEstimate cben_y0(const TrialDataset& d,
                       const RiskPredictionSet& preds_for_delta,
                       const std::vector<double>& matching_g0,
                       const MatchSpec& spec,
                       std::size_t subsample_repeats) {
  if (matching_g0.size() != d.size())
    throw std::invalid_argument("matching anchor length mismatch");
  return cben_matched(d, preds_for_delta.delta, matching_g0,
                      /*pair_mean=*/false, MetricName::cben_y0, spec,
                      subsample_repeats);
}

MetricEstimate cben_y0(const TrialDataset& d,
                       const RiskPredictionSet& preds_for_delta,
                       const RiskPredictionSet& preds_for_matching,
                       const MatchSpec& spec,
                       std::size_t subsample_repeats) {
  return cben_y0(d, preds_for_delta, preds_for_matching.g0, spec,
                 subsample_repeats);
}

MetricEstimate c_delta_ben(const std::vector<double>& delta,
                           const std::vector<double>& y0,
                           const std::vector<double>& y1) {
  const std::size_t n = delta.size();
  if (y0.size() != n || y1.size() != n)
    throw std::invalid_argument("potential-outcome lengths disagree");
  std::vector<int> d_level(n);
  for (std::size_t i = 0; i < n; ++i)
    d_level[i] = static_cast<int>(y1[i] - y0[i]);
  const auto counts = concordance_vs_levels(delta, d_level);
  MetricEstimate est;
  est.name = MetricName::mbcb;
  est.detail = "c_delta_ben";
  est.meta["benefit_ordered_pairs"] = counts.informative;
  if (!counts.estimable()) {
    est.estimable = false;
    return est;
  }
  est.value = counts.c_statistic();
  return est;
}

MetricEstimate c_outcome(const std::vector<double>& y,
                         const std::vector<double>& risk) {
  if (y.size() != risk.size())
    throw std::invalid_argument("outcome and risk length mismatch");
  std::vector<int> level(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0)
      throw std::invalid_argument("c_outcome requires binary outcomes");
    level[i] = static_cast<int>(y[i]);
  }
  const auto counts = concordance_vs_levels(risk, level);
  MetricEstimate est;
  est.name = MetricName::c_outcome;
  est.meta["informative_pairs"] = counts.informative;
  if (!counts.estimable()) {
    est.estimable = false;
    return est;
  }
  est.value = counts.c_statistic();
  return est;
}

MetricEstimate brier(const std::vector<double>& y,
                     const std::vector<double>& risk) {
  if (y.size() != risk.size() || y.empty())
    throw std::invalid_argument("outcome and risk length mismatch");
  KahanSum s;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = risk[i] - y[i];
    s.add(e * e);
  }
  MetricEstimate est;
  est.name = MetricName::brier;
  est.value = s.value() / static_cast<double>(y.size());
  return est;
}

}  // namespace hteval
