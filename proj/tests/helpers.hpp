#pragma once

// Test-only oracles, kept independent of the library's computation paths.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "hteval/rng.hpp"
#include "hteval/types.hpp"

namespace testutil {

// Plain Newton-Raphson logistic solver (analytic gradient and Hessian,
// Gauss-Jordan inverse), independent of the library's IRLS path.
inline std::vector<double> newton_logistic(
    const hteval::Matrix& x, const std::vector<double>& y,
    const std::vector<double>* offset = nullptr, int iterations = 60) {
  const std::size_t n = x.rows(), p = x.cols();
  std::vector<double> beta(p, 0.0);
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> grad(p, 0.0);
    std::vector<double> hess(p * p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double eta = offset ? (*offset)[i] : 0.0;
      for (std::size_t j = 0; j < p; ++j) eta += x(i, j) * beta[j];
      const double mu = 1.0 / (1.0 + std::exp(-eta));
      const double w = mu * (1.0 - mu);
      for (std::size_t j = 0; j < p; ++j) {
        grad[j] += (y[i] - mu) * x(i, j);
        for (std::size_t k = 0; k < p; ++k) hess[j * p + k] += w * x(i, j) * x(i, k);
      }
    }
    // invert the Hessian by Gauss-Jordan
    std::vector<double> inv(p * p, 0.0);
    for (std::size_t j = 0; j < p; ++j) inv[j * p + j] = 1.0;
    for (std::size_t col = 0; col < p; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < p; ++r) {
        if (std::abs(hess[r * p + col]) > std::abs(hess[piv * p + col])) piv = r;
      }
      for (std::size_t j = 0; j < p; ++j) {
        std::swap(hess[piv * p + j], hess[col * p + j]);
        std::swap(inv[piv * p + j], inv[col * p + j]);
      }
      const double d = hess[col * p + col];
      for (std::size_t j = 0; j < p; ++j) {
        hess[col * p + j] /= d;
        inv[col * p + j] /= d;
      }
      for (std::size_t r = 0; r < p; ++r) {
        if (r == col) continue;
        const double f = hess[r * p + col];
        for (std::size_t j = 0; j < p; ++j) {
          hess[r * p + j] -= f * hess[col * p + j];
          inv[r * p + j] -= f * inv[col * p + j];
        }
      }
    }
    double shift = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < p; ++k) s += inv[j * p + k] * grad[k];
      beta[j] += s;
      shift = std::max(shift, std::abs(s));
    }
    if (shift < 1e-13) break;
  }
  return beta;
}

// All 16 joint potential-outcome patterns for two independent individuals;
// returns P(d_k < d_l) with d = Y^1 - Y^0.
inline double benefit_prob_enumeration(double g0k, double g1k, double g0l,
                                       double g1l) {
  double total = 0.0;
  for (int y0k = 0; y0k <= 1; ++y0k) {
    for (int y1k = 0; y1k <= 1; ++y1k) {
      for (int y0l = 0; y0l <= 1; ++y0l) {
        for (int y1l = 0; y1l <= 1; ++y1l) {
          if (y1k - y0k >= y1l - y0l) continue;
          const double pk = (y0k ? g0k : 1 - g0k) * (y1k ? g1k : 1 - g1k);
          const double pl = (y0l ? g0l : 1 - g0l) * (y1l ? g1l : 1 - g1l);
          total += pk * pl;
        }
      }
    }
  }
  return total;
}

// Brute-force mbcb: ordered double loop straight from the definition.
inline double mbcb_brute(const std::vector<double>& delta,
                         const std::vector<double>& g0,
                         const std::vector<double>& g1) {
  const std::size_t n = delta.size();
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = 0; l < n; ++l) {
      if (l == k) continue;
      const double p_ben = benefit_prob_enumeration(g0[k], g1[k], g0[l], g1[l]);
      if (delta[k] < delta[l]) num += p_ben;
      if (delta[k] == delta[l]) num += 0.5 * p_ben;
      den += p_ben;
    }
  }
  return num / den;
}

// Brute-force Harrell-style concordance between predictions and levels.
inline double concordance_brute(const std::vector<double>& pred,
                                const std::vector<int>& level) {
  double num = 0.0, den = 0.0;
  for (std::size_t p = 0; p < pred.size(); ++p) {
    for (std::size_t q = p + 1; q < pred.size(); ++q) {
      if (level[p] == level[q]) continue;
      den += 1.0;
      const double hi = level[p] > level[q] ? pred[p] : pred[q];
      const double lo = level[p] > level[q] ? pred[q] : pred[p];
      if (hi > lo) {
        num += 1.0;
      } else if (hi == lo) {
        num += 0.5;
      }
    }
  }
  return num / den;
}

// Minimum total |control - treated| over all permutations (n <= 8).
inline double min_matching_brute(std::vector<double> c, std::vector<double> t) {
  std::sort(t.begin(), t.end());
  std::vector<std::size_t> perm(t.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  std::sort(perm.begin(), perm.end());
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) total += std::abs(c[i] - t[perm[i]]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Minimum assignment cost by permutation enumeration (n <= 8).
inline double min_assignment_brute(const hteval::Matrix& cost) {
  std::vector<std::size_t> perm(cost.rows());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < cost.rows(); ++i) total += cost(i, perm[i]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Simpson quadrature of expit(a + b z) phi(z), the marginal event
// probability under a probit-free logistic DGM with normal linear predictor.
inline double logistic_normal_mean(double a, double b) {
  const int steps = 4000;
  const double lo = -10.0, hi = 10.0;
  const double h = (hi - lo) / steps;
  auto f = [&](double z) {
    const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    return phi / (1.0 + std::exp(-(a + b * z)));
  };
  double s = f(lo) + f(hi);
  for (int i = 1; i < steps; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace testutil
