#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace mvtd {

// splitmix64 finalizer, used both for seed mixing and for deriving
// per-replication streams from a base seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(splitmix64(base) ^ splitmix64(index + 1));
}

// Deterministic random stream. Sampling routines are written out explicitly
// (instead of std::*_distribution) so that a given seed produces the same
// sequence on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Index sampled from an (unnormalized is not allowed) probability vector.
  int categorical(const Eigen::VectorXd& probs) {
    const double u = uniform();
    double acc = 0.0;
    const int n = static_cast<int>(probs.size());
    for (int i = 0; i < n; ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return n - 1;  // guard against accumulated rounding
  }

  // Row `row` of a row-stochastic matrix treated as a distribution.
  int categorical_row(const Eigen::MatrixXd& table, int row) {
    const double u = uniform();
    double acc = 0.0;
    const int n = static_cast<int>(table.cols());
    for (int j = 0; j < n; ++j) {
      acc += table(row, j);
      if (u < acc) return j;
    }
    return n - 1;
  }

  // +1 or -1 with equal probability.
  double rademacher() { return (gen_() & 1ULL) ? 1.0 : -1.0; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace mvtd
