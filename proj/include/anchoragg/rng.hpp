#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace anchoragg {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char ch : tag) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// A deterministic random stream. All randomness in the library flows from
/// one root seed through named, keyed sub-streams, e.g.
/// `Rng::stream(seed, "perturb", doc, pos)`.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  static Rng stream(std::uint64_t root, std::string_view tag,
                    std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t s = mix64(root ^ hash_tag(tag));
    s = mix64(s ^ mix64(a + 0x51ed2701ULL));
    s = mix64(s ^ mix64(b + 0x2545f491ULL));
    return Rng(s);
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution; platform independent.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace anchoragg
