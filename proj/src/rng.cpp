#include "fedbayes/rng.hpp"

#include <cmath>

namespace fedbayes {

namespace {

std::uint64_t splitmix_next(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& w : s) w = splitmix_next(x);
  // all-zero state is the one forbidden xoshiro state
  if ((s[0] | s[1] | s[2] | s[3]) == 0) s[0] = 0x9e3779b97f4a7c15ull;
}

std::uint64_t Rng::next() {
  const std::uint64_t result = rotl(s[0] + s[3], 23) + s[0];
  const std::uint64_t t = s[1] << 17;
  s[2] ^= s[0];
  s[3] ^= s[1];
  s[1] ^= s[2];
  s[0] ^= s[3];
  s[2] ^= t;
  s[3] = rotl(s[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::gaussian() {
  // u1 in (0,1] so the log is finite
  const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(next() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

std::uint64_t Rng::below(std::uint64_t bound) {
  const std::uint64_t threshold = (0u - bound) % bound;
  for (;;) {
    const std::uint64_t r = next();
    if (r >= threshold) return r % bound;
  }
}

Rng substream(std::uint64_t master_seed, std::uint64_t client_id, std::uint64_t round, StreamTag tag) {
  std::uint64_t k = master_seed;
  k = mix64(k ^ (0x9e3779b97f4a7c15ull * (client_id + 1)));
  k = mix64(k ^ (0xbf58476d1ce4e5b9ull * (round + 1)));
  k = mix64(k ^ (0x94d049bb133111ebull * (static_cast<std::uint64_t>(tag) + 1)));
  return Rng(k);
}

}  // namespace fedbayes
