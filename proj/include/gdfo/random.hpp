#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <string_view>
#include <vector>

namespace gdfo {

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    return fnv1a64(s.data(), s.size());
}

inline std::uint64_t fnv1a64(const std::vector<double>& v,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    return v.empty() ? h : fnv1a64(v.data(), v.size() * sizeof(double), h);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Independent per-component stream seeds: every stochastic stage derives its
// own engine from (master seed, tag) so stages can be re-run or skipped
// without perturbing each other.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
    return splitmix64(master ^ fnv1a64(tag));
}

// Seedable RNG with restorable state. Draw counting makes snapshots cheap:
// (seed, draws) fully determines the stream position. normal() always
// consumes exactly two raw draws so restore never depends on cached state.
class RandomEngine {
  public:
    explicit RandomEngine(std::uint64_t seed = 0) : seed_(seed), gen_(seed) {}

    std::uint64_t next_u64() {
        ++draws_;
        return gen_();
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive range. Modulo bias is irrelevant at the scales used here.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo + 1);
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    // Box-Muller, cosine branch only.
    double normal() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t draws() const { return draws_; }

    static RandomEngine restore(std::uint64_t seed, std::uint64_t draws) {
        RandomEngine e(seed);
        if (draws > 0) e.gen_.discard(draws);
        e.draws_ = draws;
        return e;
    }

  private:
    std::uint64_t seed_;
    std::uint64_t draws_ = 0;
    std::mt19937_64 gen_;
};

}  // namespace gdfo
