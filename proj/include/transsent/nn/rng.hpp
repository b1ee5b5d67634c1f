#ifndef TRANSSENT_NN_RNG_HPP
#define TRANSSENT_NN_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace transsent::nn {

// Deterministic RNG. All draws go through explicit bit-level constructions
// instead of std:: distributions, so the stream is identical across
// platforms and standard library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1) with 53 bits of precision
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n) via rejection sampling
  std::uint64_t uniform_int(std::uint64_t n);

  // standard normal via Box-Muller (no caching, two draws per sample)
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Derives a child seed from a parent seed and a stream tag, so every
// component draws from its own independent stream.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag, std::uint64_t index);

}  // namespace transsent::nn

#endif  // TRANSSENT_NN_RNG_HPP
