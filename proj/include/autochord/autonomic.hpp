#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "autochord/events.hpp"
#include "autochord/ring.hpp"

namespace autochord {

enum class PolicyMode : std::uint8_t { null_policy, autonomic };

/// Configuration of one node's autonomic manager. The null policy runs the
/// same cycle machinery but never changes anything, so the management
/// overhead of a managed and an unmanaged run is identical.
struct PolicyConfig {
    PolicyMode mode = PolicyMode::null_policy;
    double k_wmc = 1.0;
    double k_ec = 1.0;
    double cycle_duration = 2.0;
    double initial_interval = 2.0;
    // The floor keeps a node in full error-response mode below CPU
    // saturation; sub-second floors let maintenance bursts overrun the
    // per-node processing budget and time out against live peers.
    double interval_min = 1.0;
    double interval_max = 600.0;

    void validate() const {
        if (!(k_wmc > 0.0) || !(k_ec > 0.0))
            throw std::invalid_argument("dampening factors must be positive");
        if (!(cycle_duration > 0.0))
            throw std::invalid_argument("cycle duration must be positive");
        if (!(0.0 < interval_min && interval_min <= initial_interval &&
              initial_interval <= interval_max))
            throw std::invalid_argument(
                "need 0 < interval_min <= initial_interval <= interval_max");
    }
};

/// Per-cycle aggregates of the two monitoring event kinds.
struct CycleMetrics {
    std::uint32_t wmc = 0;  // wasted maintenance operations this cycle
    std::uint32_t ec = 0;   // failed peer-set accesses this cycle
};

struct CycleDecision {
    double new_interval = 0.0;
    bool immediate_maintenance = false;
};

/// Proportion of change P = 1 - 1/((metric - ideal)/k + 1) with ideal = 0.
/// P(0) = 0 and P -> 1 as the metric grows; larger k gives a slower response.
inline double change_proportion(double metric_value, double k) {
    if (!(k > 0.0)) throw std::invalid_argument("dampening factor must be > 0");
    if (metric_value < 0.0)
        throw std::invalid_argument("metric value must be non-negative");
    return 1.0 - 1.0 / (metric_value / k + 1.0);
}

/// Effort sub-policy: a non-zero wasted-maintenance count recommends a longer
/// interval (a lower maintenance rate).
inline double recommend_interval_wmc(double current, double wmc, double k_wmc) {
    if (!(current > 0.0))
        throw std::invalid_argument("current interval must be positive");
    return current * (1.0 + change_proportion(wmc, k_wmc));
}

/// Performance sub-policy: a non-zero error count recommends a shorter
/// interval. P < 1, so the result stays positive.
inline double recommend_interval_ec(double current, double ec, double k_ec) {
    if (!(current > 0.0))
        throw std::invalid_argument("current interval must be positive");
    return current * (1.0 - change_proportion(ec, k_ec));
}

/// One planning step: both sub-policies recommend an interval, the mean is
/// taken and clamped, and any error in the cycle requests an immediate
/// maintenance operation.
inline CycleDecision evaluate_cycle(double current, const CycleMetrics& metrics,
                                    const PolicyConfig& cfg) {
    if (cfg.mode == PolicyMode::null_policy) return {current, false};
    const double by_wmc = recommend_interval_wmc(current, metrics.wmc, cfg.k_wmc);
    const double by_ec = recommend_interval_ec(current, metrics.ec, cfg.k_ec);
    const double mean = (by_wmc + by_ec) / 2.0;
    return {std::clamp(mean, cfg.interval_min, cfg.interval_max),
            metrics.ec > 0};
}

/// Per-cycle log record; one row of manager.csv.
struct ManagerCycleRecord {
    double time = 0.0;
    NodeId node;
    std::uint32_t wmc = 0;
    std::uint32_t ec = 0;
    double interval_before = 0.0;
    double interval_after = 0.0;
    bool immediate = false;
};

inline CycleMetrics count_events(const std::vector<ManagerEvent>& events) {
    CycleMetrics m;
    for (const auto& ev : events) {
        if (ev.kind == EventKind::wasted_maintenance)
            m.wmc++;
        else
            m.ec++;
    }
    return m;
}

}  // namespace autochord
