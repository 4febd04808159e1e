#include "sfnn/rng.hpp"

#include <cmath>
#include <string>

#include "sfnn/error.hpp"

namespace sfnn {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), state_(mix64(seed + kGolden) ^ mix64(mix64(stream) + 0x632BE59BD9B4E019ULL)) {}

RngStream RngStream::split(std::uint64_t child) const {
  return RngStream(seed_, mix64(stream_ * kGolden + child + 1));
}

std::uint64_t RngStream::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw ValidationError("RngStream::below: empty range");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

Matrix sample_bernoulli(const Matrix& p, RngStream& rng) {
  constexpr double kTol = 1e-12;
  Matrix out(p.rows(), p.cols());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p.values()[i];
    if (!(pi >= -kTol && pi <= 1.0 + kTol)) {
      throw ValidationError("sample_bernoulli: probability " + std::to_string(pi) +
                            " outside [0, 1]");
    }
    out.values()[i] = rng.uniform() < pi ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace sfnn
