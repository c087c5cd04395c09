#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace vrer {

// Counter-based generator: each output is a hash of (key, counter), so a
// stream is fully determined by its key and streams never share state.
// Substreams are derived by hashing the parent key with a tag, which lets a
// run hand independent streams to the environment, the policy sampler and
// the replay subsampler without any of them perturbing the others.
class RngStream {
 public:
  RngStream() : key_(0x9E3779B97F4A7C15ULL), counter_(0) {}
  explicit RngStream(uint64_t seed);

  // Independent child stream; same (key, tag) always yields the same child.
  RngStream split(uint64_t tag) const;
  RngStream split(std::string_view name) const;

  uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; consumes two uniforms per call, no
  // cached spare, so the draw count is a pure function of the call count.
  double normal();

  // Index draw by inverse CDF; probs need not be exactly normalized.
  int categorical(std::span<const double> probs);

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n);

  uint64_t key() const { return key_; }

 private:
  uint64_t key_;
  uint64_t counter_;
};

}  // namespace vrer
