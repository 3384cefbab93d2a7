#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace sagin {

/// Deterministic random stream.
///
/// Wraps std::mt19937_64 (whose output sequence is fixed by the standard) and
/// derives uniform/normal variates by hand, so results are bit-identical across
/// standard library implementations. The distributions in <random> are not.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(splitmix(seed)), engine_(seed_) {}

    /// Independent child stream; parent state is not consumed.
    Rng stream(std::uint64_t index) const {
        return Rng(seed_ ^ splitmix(index + 0x632be59bd9b4e019ULL));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi); returns lo exactly when lo == hi.
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::size_t index(std::size_t n) {
        // Lemire's multiply-shift; bias is below 2^-64 * n.
        const auto x = engine_();
        return static_cast<std::size_t>((static_cast<unsigned __int128>(x) * n) >> 64);
    }

    /// Standard normal via Box-Muller (one variate per call, the pair is cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace sagin
