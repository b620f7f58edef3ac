#pragma once

#include <cstdint>

namespace fedbayes {

// SplitMix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// xoshiro256++ with fixed-consumption variate transforms so that every draw
// sequence is reproducible bit-for-bit across runs.
struct Rng {
  std::uint64_t s[4];

  explicit Rng(std::uint64_t seed);

  std::uint64_t next();

  // uniform on [0,1), 53-bit mantissa
  double uniform();

  // standard normal via Box-Muller; always consumes exactly two words
  double gaussian();
  double gaussian(double mean, double sd) { return mean + sd * gaussian(); }

  bool bernoulli(double p) { return uniform() < p; }

  // unbiased integer in [0, bound) by rejection
  std::uint64_t below(std::uint64_t bound);
};

// Purpose tag for independent substreams. Distinct tags guarantee that adding
// draws for one purpose (e.g. privacy noise) never shifts another purpose's
// stream, which keeps degenerate-noise runs bitwise comparable.
enum class StreamTag : std::uint64_t {
  population = 1,     // drawing true per-client parameters
  observation = 2,    // drawing local samples given parameters
  mechanism = 3,      // quantizer / randomized-response coins
  cluster_seed = 4,   // clustering initialization
  minibatch = 5,      // batch index selection
  noise_model = 6,    // additive noise on model updates
  noise_psi = 7,      // additive noise on scalar-weight updates
  client_sample = 8,  // server-side participant selection
  init = 9,           // parameter initialization
  generic = 10,
};

// Keyed derivation: identical (seed, client, round, tag) yields an identical
// stream; any differing component yields an independent one.
Rng substream(std::uint64_t master_seed, std::uint64_t client_id, std::uint64_t round, StreamTag tag);

}  // namespace fedbayes
