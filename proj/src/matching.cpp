#include "hteval/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "hteval/rng.hpp"

namespace hteval {

namespace {

std::vector<std::size_t> sorted_order(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (v[a] != v[b]) return v[a] < v[b];
    return a < b;  // tie-break: lower original index first
  });
  return order;
}

// Covariance of pooled rows; rows from both arms enter equally.
std::vector<double> pooled_covariance(const Matrix& a, const Matrix& b) {
  const std::size_t p = a.cols();
  const std::size_t n = a.rows() + b.rows();
  if (n < 2) throw std::invalid_argument("too few rows for a covariance matrix");
  std::vector<double> mean(p, 0.0);
  auto accumulate_mean = [&](const Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < p; ++j) mean[j] += m(i, j);
    }
  };
  accumulate_mean(a);
  accumulate_mean(b);
  for (auto& v : mean) v /= static_cast<double>(n);
  std::vector<double> cov(p * p, 0.0);
  auto accumulate_cov = [&](const Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t r = 0; r < p; ++r) {
        const double dr = m(i, r) - mean[r];
        for (std::size_t c = 0; c <= r; ++c)
          cov[r * p + c] += dr * (m(i, c) - mean[c]);
      }
    }
  };
  accumulate_cov(a);
  accumulate_cov(b);
  for (std::size_t r = 0; r < p; ++r) {
    for (std::size_t c = 0; c <= r; ++c) {
      cov[r * p + c] /= static_cast<double>(n - 1);
      cov[c * p + r] = cov[r * p + c];
    }
  }
  return cov;
}

// Inverse via Gauss-Jordan with partial pivoting; throws when singular.
std::vector<double> invert(std::vector<double> m, std::size_t p) {
  std::vector<double> inv(p * p, 0.0);
  for (std::size_t i = 0; i < p; ++i) inv[i * p + i] = 1.0;
  for (std::size_t col = 0; col < p; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < p; ++r) {
      if (std::abs(m[r * p + col]) > std::abs(m[pivot * p + col])) pivot = r;
    }
    if (std::abs(m[pivot * p + col]) < 1e-12)
      throw std::invalid_argument(
          "covariate covariance matrix is not invertible");
    if (pivot != col) {
      for (std::size_t j = 0; j < p; ++j) {
        std::swap(m[pivot * p + j], m[col * p + j]);
        std::swap(inv[pivot * p + j], inv[col * p + j]);
      }
    }
    const double d = m[col * p + col];
    for (std::size_t j = 0; j < p; ++j) {
      m[col * p + j] /= d;
      inv[col * p + j] /= d;
    }
    for (std::size_t r = 0; r < p; ++r) {
      if (r == col) continue;
      const double f = m[r * p + col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < p; ++j) {
        m[r * p + j] -= f * m[col * p + j];
        inv[r * p + j] -= f * inv[col * p + j];
      }
    }
  }
  return inv;
}

double mahalanobis(const double* xi, const double* xj,
                   const std::vector<double>& s_inv, std::size_t p,
                   std::vector<double>& diff) {
  for (std::size_t k = 0; k < p; ++k) diff[k] = xi[k] - xj[k];
  double q = 0.0;
  for (std::size_t r = 0; r < p; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < p; ++c) s += s_inv[r * p + c] * diff[c];
    q += diff[r] * s;
  }
  return std::sqrt(std::max(q, 0.0));
}

}  // namespace

std::vector<std::size_t> solve_assignment(const Matrix& cost) {
  // Jonker-Volgenant shortest augmenting path with dual updates.
  const std::size_t n = cost.rows();
  if (cost.cols() != n) throw std::invalid_argument("cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> col_of_row(n + 1, n), row_of_col(n + 1, n);
  std::vector<double> min_to(n + 1);
  std::vector<std::size_t> prev_col(n + 1);
  std::vector<char> in_tree(n + 1);

  for (std::size_t i = 0; i < n; ++i) {
    std::fill(min_to.begin(), min_to.end(), inf);
    std::fill(prev_col.begin(), prev_col.end(), n);
    std::fill(in_tree.begin(), in_tree.end(), 0);
    std::size_t j_cur = n;  // virtual column holding the unassigned row
    row_of_col[n] = i;
    do {
      in_tree[j_cur] = 1;
      const std::size_t r = row_of_col[j_cur];
      double delta = inf;
      std::size_t j_next = n;
      for (std::size_t j = 0; j < n; ++j) {
        if (in_tree[j]) continue;
        const double reduced = cost(r, j) - u[r] - v[j];
        if (reduced < min_to[j]) {
          min_to[j] = reduced;
          prev_col[j] = j_cur;
        }
        if (min_to[j] < delta) {
          delta = min_to[j];
          j_next = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (in_tree[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          min_to[j] -= delta;
        }
      }
      j_cur = j_next;
    } while (row_of_col[j_cur] != n);
    // augment along the alternating path
    while (j_cur != n) {
      const std::size_t j_prev = prev_col[j_cur];
      row_of_col[j_cur] = row_of_col[j_prev];
      col_of_row[row_of_col[j_cur]] = j_cur;
      j_cur = j_prev;
    }
  }
  col_of_row.resize(n);
  return col_of_row;
}

MatchedPairSet match_pairs(const MatchSpec& spec,
                           const std::vector<double>& control_scores,
                           const std::vector<double>& treated_scores) {
  if (spec.mode != MatchMode::scalar)
    throw std::invalid_argument("scalar overload called with non-scalar mode");
  if (control_scores.empty() || treated_scores.empty())
    throw std::invalid_argument("both arms must be non-empty");
  if (control_scores.size() != treated_scores.size())
    throw std::invalid_argument(
        "scalar matching needs equal arm sizes; balance first");
  // For absolute distance in one dimension the sorted pairing is a minimum
  // of the assignment problem, so optimal and greedy share this path.
  const auto oc = sorted_order(control_scores);
  const auto ot = sorted_order(treated_scores);
  MatchedPairSet out;
  out.match_scalar = "scalar";
  out.pairs.reserve(oc.size());
  double total = 0.0;
  for (std::size_t k = 0; k < oc.size(); ++k) {
    out.pairs.emplace_back(oc[k], ot[k]);
    total += std::abs(control_scores[oc[k]] - treated_scores[ot[k]]);
  }
  out.total_distance = total;
  return out;
}

MatchedPairSet match_pairs(const MatchSpec& spec, const Matrix& control_x,
                           const Matrix& treated_x) {
  if (spec.mode != MatchMode::mahalanobis)
    throw std::invalid_argument("matrix overload called with non-mahalanobis mode");
  if (control_x.rows() == 0 || treated_x.rows() == 0)
    throw std::invalid_argument("both arms must be non-empty");
  if (control_x.rows() != treated_x.rows())
    throw std::invalid_argument(
        "mahalanobis matching needs equal arm sizes; balance first");
  if (control_x.cols() != treated_x.cols() || control_x.cols() == 0)
    throw std::invalid_argument("covariate dimensions disagree");

  const std::size_t n = control_x.rows(), p = control_x.cols();
  const auto s_inv = invert(pooled_covariance(control_x, treated_x), p);
  std::vector<double> diff(p);
  Matrix dist(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      dist(i, j) = mahalanobis(control_x.row(i), treated_x.row(j), s_inv, p, diff);
    }
  }

  MatchedPairSet out;
  out.match_scalar = "mahalanobis";
  out.pairs.reserve(n);
  double total = 0.0;
  if (spec.algorithm == MatchAlgorithm::optimal) {
    const auto assignment = solve_assignment(dist);
    for (std::size_t i = 0; i < n; ++i) {
      out.pairs.emplace_back(i, assignment[i]);
      total += dist(i, assignment[i]);
    }
  } else {
    std::vector<char> used(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = n;
      for (std::size_t j = 0; j < n; ++j) {
        if (used[j]) continue;
        if (best == n || dist(i, j) < dist(i, best)) best = j;
      }
      used[best] = 1;
      out.pairs.emplace_back(i, best);
      total += dist(i, best);
    }
  }
  out.total_distance = total;
  return out;
}

std::vector<std::vector<std::size_t>> balance_subsample(const TrialDataset& d,
                                                        std::uint64_t seed,
                                                        std::size_t repeats) {
  if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  const auto controls = d.arm_indices(0);
  const auto treated = d.arm_indices(1);
  if (controls.empty() || treated.empty())
    throw std::invalid_argument("both arms must be non-empty");

  std::vector<std::vector<std::size_t>> sets;
  if (controls.size() == treated.size()) {
    std::vector<std::size_t> all(d.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    sets.push_back(std::move(all));
    return sets;
  }
  const auto& small = controls.size() < treated.size() ? controls : treated;
  const auto& large = controls.size() < treated.size() ? treated : controls;
  sets.reserve(repeats);
  for (std::size_t r = 0; r < repeats; ++r) {
    Rng rng = Rng::substream(seed, {0x5ab5u, r});
    auto pick = rng.sample_without_replacement(large.size(), small.size());
    std::vector<std::size_t> set;
    set.reserve(2 * small.size());
    set.insert(set.end(), small.begin(), small.end());
    for (auto k : pick) set.push_back(large[k]);
    std::sort(set.begin(), set.end());
    sets.push_back(std::move(set));
  }
  return sets;
}

}  // namespace hteval
