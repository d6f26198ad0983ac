#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace scg {

/// Seeded random stream with fully specified transforms.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. The standard distributions are implementation-defined, so
/// every transform used for data generation and sampling is written out here:
///
///   uniform01()  = (u >> 11) * 2^-53                    in [0, 1)
///   index(n)     = floor(u * n / 2^64)                  in [0, n)
///   normal()     = sqrt(-2 ln(1 - U1)) * cos(2 pi U2)   (one value per call)
///
/// Any other language with an mt19937_64 can reproduce the same draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  std::size_t index(std::size_t n) {
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(engine_()) * n;
    return static_cast<std::size_t>(wide >> 64);
  }

  double normal() {
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Fisher-Yates using index().
  template <class Vec>
  void shuffle(Vec& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace scg
