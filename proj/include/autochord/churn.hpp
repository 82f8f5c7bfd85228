#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "autochord/rng.hpp"

namespace autochord {

enum class ChurnKind : std::uint8_t { low, high, local, temporal };

constexpr std::string_view churn_name(ChurnKind k) {
    switch (k) {
        case ChurnKind::low: return "low";
        case ChurnKind::high: return "high";
        case ChurnKind::local: return "local";
        case ChurnKind::temporal: return "temporal";
    }
    return "?";
}

/// Membership behavior of a set of nodes: alternating on-line/off-line phase
/// durations drawn from normal distributions. low keeps nodes up longer than
/// any experiment; high cycles them every few minutes; local mixes both
/// behaviors across the node set; temporal switches the whole network
/// between them on a fixed period.
struct ChurnPattern {
    ChurnKind kind = ChurnKind::low;
    double low_on_mu = 10000.0, low_on_sigma = 0.0;
    double low_off_mu = 160.0, low_off_sigma = 20.0;
    double high_on_mu = 200.0, high_on_sigma = 40.0;
    double high_off_mu = 100.0, high_off_sigma = 20.0;
    double local_low_fraction = 0.25;  // share of nodes with low behavior
    double temporal_phase = 1000.0;    // seconds per network-wide regime
    double min_duration = 1.0;         // sampled durations truncated below
};

struct LifePhase {
    bool online = false;
    double start = 0.0;
    double end = 0.0;
};

/// Deterministic phase list for one node covering [0, horizon]. Durations are
/// drawn from the node's churn substream; whether the node starts on-line
/// comes from a separate start-phase substream. For the temporal pattern a
/// phase in progress at a regime boundary is cut there and its remainder
/// re-drawn under the new regime's parameters, so the whole network really
/// does alternate.
inline std::vector<LifePhase> generate_lifecycle(const ChurnPattern& pattern,
                                                 std::uint32_t node_index,
                                                 std::uint32_t node_count,
                                                 std::uint64_t seed,
                                                 double horizon) {
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be > 0");

    Substream durations(seed, "churn", node_index);
    Substream start_phase(seed, "start-phase", node_index);

    const bool low_behavior =
        pattern.kind == ChurnKind::low ||
        (pattern.kind == ChurnKind::local &&
         node_index < static_cast<std::uint32_t>(std::ceil(
                          pattern.local_low_fraction * node_count)));

    // Which regime applies at time t (temporal starts in the low regime).
    auto low_regime_at = [&](double t) {
        if (pattern.kind == ChurnKind::temporal) {
            const auto window =
                static_cast<std::uint64_t>(t / pattern.temporal_phase);
            return window % 2 == 0;
        }
        return low_behavior;
    };

    auto draw = [&](bool online, double t) {
        const bool low = low_regime_at(t);
        double mu, sigma;
        if (online) {
            mu = low ? pattern.low_on_mu : pattern.high_on_mu;
            sigma = low ? pattern.low_on_sigma : pattern.high_on_sigma;
        } else {
            mu = low ? pattern.low_off_mu : pattern.high_off_mu;
            sigma = low ? pattern.low_off_sigma : pattern.high_off_sigma;
        }
        return std::max(pattern.min_duration, durations.normal(mu, sigma));
    };

    auto next_boundary = [&](double t) {
        if (pattern.kind != ChurnKind::temporal) return horizon * 2 + 1;
        const auto window =
            static_cast<std::uint64_t>(t / pattern.temporal_phase);
        return (static_cast<double>(window) + 1.0) * pattern.temporal_phase;
    };

    std::vector<LifePhase> phases;
    bool online = start_phase.coin();
    double t = 0.0;
    while (t < horizon) {
        double end = t + draw(online, t);
        if (pattern.kind == ChurnKind::temporal) {
            // A phase in progress at a regime boundary keeps its state but
            // re-draws its remaining duration under the new parameters.
            double boundary = next_boundary(t);
            while (end > boundary && boundary < horizon) {
                end = boundary + draw(online, boundary);
                if (end <= boundary) end = boundary + pattern.min_duration;
                boundary = next_boundary(boundary);
            }
        }
        end = std::min(end, horizon);
        phases.push_back(LifePhase{online, t, end});
        t = end;
        online = !online;
    }
    return phases;
}

}  // namespace autochord
