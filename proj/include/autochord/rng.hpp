#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace autochord {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Named substream of an experiment seed. Every random decision in a run is
/// drawn from one of these, so runs are reproducible bit-for-bit. The
/// distributions are implemented by hand because the std:: ones are not
/// specified across library implementations.
class Substream {
public:
    Substream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0)
        : engine_(splitmix64(seed ^ fnv1a64(tag)) ^ splitmix64(index * 0x9e3779b97f4a7c15ULL + 1)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    /// Uniform integer in [0, n). Modulo bias is irrelevant at the n used here
    /// and the result is deterministic, which is what matters.
    std::uint64_t uniform_u64(std::uint64_t n) {
        return n == 0 ? 0 : engine_() % n;
    }

    bool coin() { return (engine_() & 1) != 0; }

    /// Box-Muller; the pair's second value is cached so draws stay cheap and
    /// the stream layout stays fixed.
    double normal(double mu, double sigma) {
        if (have_spare_) {
            have_spare_ = false;
            return mu + sigma * spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        // Avoid log(0).
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return mu + sigma * r * std::cos(theta);
    }

    double exponential(double mean) {
        double u = next_double();
        if (u >= 1.0) u = 1.0 - 0x1.0p-53;
        return -mean * std::log1p(-u);
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace autochord
