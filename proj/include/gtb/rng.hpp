#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace gtb {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives the seed for stream `stream` of a root seed. Pure, so grid cells
/// and parallel episodes can compute their seeds without sharing state.
inline uint64_t derive_seed(uint64_t root, uint64_t stream) {
    uint64_t sm = root ^ (0xd1342543de82ef95ULL * (stream + 1));
    return splitmix64(sm);
}

/// Deterministic random stream (xoshiro256++). All simulator randomness goes
/// through this class so trajectories do not depend on the standard library's
/// unspecified distribution algorithms.
class Rng {
  public:
    explicit Rng(uint64_t seed) : seed_(seed) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    /// Independent stream derived from (this stream's seed, stream index).
    Rng child(uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

    uint64_t seed() const { return seed_; }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [lo, hi], inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        // modulo-rejection keeps the draw exactly uniform
        uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return lo + static_cast<int64_t>(x % span);
    }

    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return uniform01() < p;
    }

    /// Pareto draw with minimum xm and shape alpha, clipped to [xm, hi].
    double pareto_clipped(double xm, double alpha, double hi) {
        double u = uniform01();
        double x = xm / std::pow(1.0 - u, 1.0 / alpha);
        return x > hi ? hi : x;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        // Fisher-Yates; hand-rolled so results do not depend on std::shuffle
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t seed_;
    uint64_t s_[4]{};
};

}  // namespace gtb
