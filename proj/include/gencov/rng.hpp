#ifndef GENCOV_RNG_HPP
#define GENCOV_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace gencov {

// Stateless mixing step of SplitMix64. Used to derive independent stream
// seeds from a root seed so that replicate k's stream never depends on how
// many draws replicate k-1 consumed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  std::uint64_t s = root;
  std::uint64_t a = splitmix64(s);
  s = root ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  std::uint64_t b = splitmix64(s);
  return a ^ (b + 0x632be59bd9b4e019ULL);
}

// Seeded generator with explicitly coded transforms. mt19937_64 output is
// pinned by the standard; the uniform/normal/shuffle transforms are written
// out here instead of using std::*_distribution, whose sequences are
// implementation defined. Reports produced from the same seed are therefore
// bit-identical across platforms and runs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on [0,1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; second value cached.
  double normal() {
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    cache_ = r * std::sin(t);
    has_cache_ = true;
    return r * std::cos(t);
  }

  // Pair with unit marginal variances and correlation corr.
  std::pair<double, double> normal_pair(double corr) {
    const double a = normal();
    const double b = normal();
    return {a, corr * a + std::sqrt(1.0 - corr * corr) * b};
  }

  bool bernoulli(double prob) { return uniform() < prob; }

  // Unbiased integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t threshold = (-bound) % bound;
    for (;;) {
      const std::uint64_t r = eng_();
      if (r >= threshold) return r % bound;
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double cache_ = 0.0;
  bool has_cache_ = false;
};

}  // namespace gencov

#endif
