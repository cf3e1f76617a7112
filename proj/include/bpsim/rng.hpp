#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bpsim {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent randomness streams of one simulation. A fixed (seed, stream)
/// pair always yields the same draw sequence, so arrival streams can be
/// shared across policies for common-random-number comparisons.
enum class RngStream : std::uint64_t {
    arrivals = 0x61727276ULL,
    service = 0x73657276ULL,
    routing = 0x726f7574ULL,
    policy = 0x706f6c69ULL,
};

/// mt19937_64 wrapper with portable inverse-transform sampling (the standard
/// library distributions are implementation-defined, which would break
/// byte-identical reproducibility across toolchains).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

    static Rng for_stream(std::uint64_t master_seed, RngStream stream) {
        return Rng(splitmix64(master_seed) ^ static_cast<std::uint64_t>(stream));
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_pos() { return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Exponential with the given mean (mean = 1/rate).
    double exponential_mean(double mean) { return -mean * std::log(uniform_pos()); }

    double exponential_rate(double rate) { return exponential_mean(1.0 / rate); }

    /// Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform_pos();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    /// Uniform integer in [0, n).
    std::uint64_t integer(std::uint64_t n) {
        // rejection sampling keeps the result unbiased
        std::uint64_t limit = ~0ULL - (~0ULL % n);
        std::uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return v % n;
    }

    std::mt19937_64& engine() { return gen_; }

  private:
    std::mt19937_64 gen_;
};

} // namespace bpsim
