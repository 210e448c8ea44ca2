#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace hibehrt {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_str(const std::string& s) {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Explicit splittable RNG stream. Splitting derives an independent child
// stream from (state, key) without advancing the parent, so per-patient /
// per-purpose streams are reproducible regardless of evaluation order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(splitmix64(seed)), engine_(splitmix64(seed) ^ 0x5bf0'3635'dea8'f1e3ULL) {}

  Rng split(std::uint64_t k) const { return Rng(splitmix64(key_ ^ splitmix64(k + 0x9e37ULL))); }
  Rng split(const std::string& label) const { return split(hash_str(label)); }

  std::mt19937_64& engine() { return engine_; }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }
  double normal(double mean = 0.0, double std = 1.0) {
    return std::normal_distribution<double>(mean, std)(engine_);
  }
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {  // inclusive bounds
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
};

}  // namespace hibehrt
