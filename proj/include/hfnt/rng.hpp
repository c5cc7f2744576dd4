#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hfnt {

// splitmix64 finalizer, used for seed mixing only
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_label(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Seeded 64-bit Mersenne Twister. All stochastic components draw from
// streams derived from a master seed by a fixed label plus indices, so
// independent folds/batches own non-overlapping deterministic streams.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    static Rng stream(std::uint64_t master, std::string_view label,
                      std::uint64_t i = 0, std::uint64_t j = 0) {
        return Rng(mix64(master ^ mix64(hash_label(label) ^ mix64(i ^ mix64(j)))));
    }

    std::uint64_t next_u64() { return gen_(); }

    // [0,1)
    double uniform01() { return (next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // [0,n); n must be > 0
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    std::mt19937_64& raw() { return gen_; }

private:
    std::mt19937_64 gen_;
};

} // namespace hfnt
