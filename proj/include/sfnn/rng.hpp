#pragma once

#include <cstdint>

#include "sfnn/matrix.hpp"

namespace sfnn {

// Splittable SplitMix64 stream. A stream is identified by (seed, stream id);
// child streams derived with split() depend only on the parent's identity, not
// on how many values the parent has produced, so per-row or per-layer
// sampling gives the same bits whatever order the work is scheduled in.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  RngStream split(std::uint64_t child) const;

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t state_;
};

std::uint64_t mix64(std::uint64_t z);

// Independent 0/1 draws with P(out(i,j) = 1) = p(i,j). Entries of `p` may
// overshoot [0, 1] by at most 1e-12; anything further is a ValidationError.
Matrix sample_bernoulli(const Matrix& p, RngStream& rng);

}  // namespace sfnn
