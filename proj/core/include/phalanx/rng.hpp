#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace phalanx {

// Deterministic 64-bit generator (splitmix64 finalizer over a Weyl sequence).
// All draws are pure functions of the seed and the call sequence, with no
// dependence on platform word order, so a dataset regenerates byte-identically
// from (config, seed) alone.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // k-th raw output for a given seed without mutating any state. Used to
    // derive independent child streams: stream i of parent seed s is
    // Rng(stream_seed(s, i)).
    static std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t k) {
        std::uint64_t z = seed + (k + 1) * 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Inclusive range, mapped by 128-bit multiply (bias < 2^-64, deterministic).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(next_u64());  // full 64-bit range
        unsigned __int128 prod = static_cast<unsigned __int128>(next_u64()) * span;
        return lo + static_cast<std::int64_t>(prod >> 64);
    }

    // Uniform in (0, 1]; never zero so it can feed a logarithm.
    double uniform_unit() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform_unit() <= p; }

    // Box-Muller; one draw consumed per call, the paired value is discarded to
    // keep the consumption pattern independent of call history.
    double gaussian(double mean, double sigma) {
        double u1 = uniform_unit();
        double u2 = uniform_unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Knuth multiplication method, split into chunks of rate <= 10 so the
    // running product never underflows for large rates.
    std::int64_t poisson(double lambda) {
        if (!(lambda > 0.0)) return 0;
        int chunks = static_cast<int>(std::ceil(lambda / 10.0));
        double per = lambda / chunks;
        double limit = std::exp(-per);
        std::int64_t total = 0;
        for (int c = 0; c < chunks; ++c) {
            std::int64_t k = 0;
            double prod = 1.0;
            do {
                ++k;
                prod *= uniform_unit();
            } while (prod > limit);
            total += k - 1;
        }
        return total;
    }

    // Index drawn from unnormalised weights (cumulative scan of one uniform).
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform_unit() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u <= acc) return i;
        }
        return weights.empty() ? 0 : weights.size() - 1;
    }

private:
    std::uint64_t state_;
};

}  // namespace phalanx
