#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace hteval {

// Deterministic stream derivation: substreams are hashed from (seed, tags...)
// so adding a new consumer never shifts the draws of an existing one.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = splitmix64(seed ^ 0x6a09e667f3bcc908ULL);
  for (auto t : tags) s = splitmix64(s ^ splitmix64(t));
  return s;
}

// mt19937_64 with hand-rolled distributions; std:: distributions are not
// bit-stable across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  static Rng substream(std::uint64_t seed,
                       std::initializer_list<std::uint64_t> tags) {
    return Rng(derive_seed(seed, tags));
  }

  // uniform on (0,1), never exactly 0 or 1
  double uniform() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // uniform integer in [0, n)
  std::size_t uniform_index(std::size_t n) {
    // rejection sampling to avoid modulo bias
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u = uniform();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double theta = 2.0 * M_PI * v;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // k distinct indices from [0, n), order randomized (partial Fisher-Yates)
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
      std::swap(idx[i], idx[i + uniform_index(n - i)]);
    }
    idx.resize(k);
    return idx;
  }

  // n draws with replacement from [0, n_source)
  std::vector<std::size_t> resample_indices(std::size_t n_source,
                                            std::size_t n_draws) {
    std::vector<std::size_t> idx(n_draws);
    for (auto& i : idx) i = uniform_index(n_source);
    return idx;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hteval
