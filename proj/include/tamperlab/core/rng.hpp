#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace tamperlab {

// splitmix64 finalizer (Vigna). Used both as a stream generator and as a
// mixer for deriving child seeds.
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic child-seed derivation: mix_seed(s, 0), mix_seed(s, 1), ...
// give independent streams for parallel work items.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64_mix(seed ^ splitmix64_mix(index + 0x632be59bd9b4e019ull));
}

// Counter-based PRNG on top of splitmix64. Not a stdlib engine on purpose:
// identical output on every platform, and the whole state is two integers,
// which keeps checkpoint serialization trivial.
class Prng {
public:
    explicit Prng(std::uint64_t seed) : seed_(seed) {}
    Prng(std::uint64_t seed, std::uint64_t counter) : seed_(seed), counter_(counter) {}

    std::uint64_t next_u64() { return splitmix64_mix(seed_ + 0x9e3779b97f4a7c15ull * ++counter_); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Lemire multiply-shift; bias is < 2^-64 and
    // irrelevant for the n used here.
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller. No cached spare so that state stays a pure counter.
    double normal() {
        double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // First k elements of a uniform random subset of {0..n-1}, in increasing
    // order (partial Fisher-Yates + sort).
    std::vector<int> sample_indices(int n, int k);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }
    void set_state(std::uint64_t seed, std::uint64_t counter) { seed_ = seed; counter_ = counter; }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t counter_ = 0;
};

inline std::vector<int> Prng::sample_indices(int n, int k) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
        int j = i + static_cast<int>(uniform_int(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace tamperlab
