#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

namespace schedforge {

// Deterministic splitmix64 generator. std:: distributions are not
// bit-portable across standard libraries, so every stochastic piece of the
// lab draws from this one instead; seeded runs then reproduce exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform in [0, n); modulo bias is negligible for the n used here
  std::uint64_t uniform_int(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  std::size_t pick_index(std::size_t n) {
    return static_cast<std::size_t>(uniform_int(static_cast<std::uint64_t>(n)));
  }

  // Independent child stream; advancing the child never touches the parent.
  Rng split(std::uint64_t stream) const {
    Rng mixer(state_ ^ (0x632be59bd9b4e019ULL + stream * 0x9e3779b97f4a7c15ULL));
    return Rng(mixer.next_u64());
  }

 private:
  std::uint64_t state_;
};

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng.pick_index(i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace schedforge
