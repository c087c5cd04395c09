#include "vrer/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vrer {

namespace {

constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer (Stafford mix13).
uint64_t mix(uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

RngStream::RngStream(uint64_t seed) : key_(mix(seed + kGamma)), counter_(0) {}

RngStream RngStream::split(uint64_t tag) const {
  RngStream child;
  child.key_ = mix(key_ ^ mix(tag * kGamma + 0x632BE59BD9B4E019ULL));
  child.counter_ = 0;
  return child;
}

RngStream RngStream::split(std::string_view name) const {
  return split(fnv1a(name));
}

uint64_t RngStream::next_u64() {
  return mix(key_ + (++counter_) * kGamma);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RngStream::normal() {
  // u1 in (0, 1] keeps the log finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

int RngStream::categorical(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("categorical: empty probs");
  double total = 0.0;
  for (double p : probs) total += p;
  double u = uniform() * total;
  double acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

uint64_t RngStream::below(uint64_t n) {
  if (n == 0) throw std::invalid_argument("below: n must be positive");
  // Rejection-free modulo is fine here: n is tiny next to 2^64.
  return next_u64() % n;
}

}  // namespace vrer
