#pragma once

#include <cstdint>
#include <random>

namespace finelab {

/// Seeded generator with a portable uniform mapping (the standard
/// distributions are implementation-defined, which would break
/// cross-platform reproducibility of sampled reports).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : gen_() % n; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace finelab
