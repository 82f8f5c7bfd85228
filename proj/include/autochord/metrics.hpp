#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "autochord/simnet.hpp"

namespace autochord {

/// One observed lookup: duration and outcome.
struct LookupObservation {
    double start = 0.0;
    double end = 0.0;
    bool success = false;
};

/// Metrics over one aggregation window. elt is absent when the window saw no
/// successful lookup; nu (mean per-node outgoing byte rate) is always defined.
struct WindowMetrics {
    int window_index = 0;
    std::optional<double> elt;
    double nu = 0.0;
};

/// Expected lookup time under retry-until-success:
///   t_lookup + sum_{i>=1} i * t_error * p^i  =  t_lookup + t_error * p/(1-p)^2.
/// Returns +infinity when every lookup fails.
inline double expected_lookup_time(double t_lookup, double t_error,
                                   double p_error) {
    if (!(p_error >= 0.0 && p_error <= 1.0))
        throw std::invalid_argument("p_error must lie in [0, 1]");
    if (t_lookup < 0.0 || t_error < 0.0)
        throw std::invalid_argument("times must be non-negative");
    if (p_error == 1.0) return std::numeric_limits<double>::infinity();
    const double q = 1.0 - p_error;
    return t_lookup + t_error * p_error / (q * q);
}

namespace detail {

struct WindowAccumulator {
    std::uint64_t successes = 0;
    std::uint64_t failures = 0;
    double success_time = 0.0;
    double failure_time = 0.0;
    double bytes = 0.0;

    std::optional<double> elt() const {
        if (successes == 0) return std::nullopt;
        const double t_lookup = success_time / static_cast<double>(successes);
        const double t_error =
            failures ? failure_time / static_cast<double>(failures) : 0.0;
        const double p = static_cast<double>(failures) /
                         static_cast<double>(failures + successes);
        return expected_lookup_time(t_lookup, t_error, p);
    }
};

}  // namespace detail

/// Per-window ELT and NU. Lookups are binned by start time; traffic by send
/// time. nu divides by the full window length and the node count.
inline std::vector<WindowMetrics> window_metrics(
    std::span<const LookupObservation> lookups,
    std::span<const TrafficSample> traffic, double duration,
    std::uint32_t node_count, double window = 300.0) {
    if (!(window > 0.0)) throw std::invalid_argument("window must be > 0");
    if (node_count == 0) throw std::invalid_argument("node_count must be > 0");
    const int nwin =
        duration > 0.0 ? static_cast<int>(std::ceil(duration / window)) : 0;
    std::vector<detail::WindowAccumulator> acc(nwin);
    auto bin = [&](double t) {
        int w = static_cast<int>(t / window);
        if (w < 0) w = 0;
        if (w >= nwin) w = nwin - 1;
        return w;
    };
    for (const auto& l : lookups) {
        if (nwin == 0) break;
        auto& a = acc[bin(l.start)];
        if (l.success) {
            a.successes++;
            a.success_time += l.end - l.start;
        } else {
            a.failures++;
            a.failure_time += l.end - l.start;
        }
    }
    for (const auto& s : traffic) {
        if (nwin == 0) break;
        acc[bin(s.time)].bytes += s.bytes;
    }
    std::vector<WindowMetrics> out;
    out.reserve(acc.size());
    for (int w = 0; w < nwin; ++w) {
        out.push_back(WindowMetrics{
            w, acc[w].elt(),
            acc[w].bytes / (window * static_cast<double>(node_count))});
    }
    return out;
}

struct SingleValueMetrics {
    std::optional<double> elt;
    double nu = 0.0;
};

/// Whole-run ELT and NU; elt is missing when no lookup succeeded at all.
inline SingleValueMetrics single_value_metrics(
    std::span<const LookupObservation> lookups,
    std::span<const TrafficSample> traffic, double duration,
    std::uint32_t node_count) {
    if (node_count == 0) throw std::invalid_argument("node_count must be > 0");
    detail::WindowAccumulator a;
    for (const auto& l : lookups) {
        if (l.success) {
            a.successes++;
            a.success_time += l.end - l.start;
        } else {
            a.failures++;
            a.failure_time += l.end - l.start;
        }
    }
    for (const auto& s : traffic) a.bytes += s.bytes;
    SingleValueMetrics out;
    out.elt = a.elt();
    out.nu = duration > 0.0
                 ? a.bytes / (duration * static_cast<double>(node_count))
                 : 0.0;
    return out;
}

/// managed / unmanaged; values below one are improvements. Missing when the
/// baseline is missing or zero.
inline std::optional<double> normalize(std::optional<double> managed,
                                       std::optional<double> unmanaged) {
    if (!managed || !unmanaged || !(*unmanaged > 0.0)) return std::nullopt;
    return *managed / *unmanaged;
}

/// Time-window form of normalize: mean of per-window ratios over the windows
/// where both runs have a value.
inline std::optional<double> normalize_windows(
    std::span<const WindowMetrics> managed,
    std::span<const WindowMetrics> unmanaged, bool use_elt) {
    double sum = 0.0;
    std::size_t n = 0;
    const std::size_t len = std::min(managed.size(), unmanaged.size());
    for (std::size_t w = 0; w < len; ++w) {
        std::optional<double> m =
            use_elt ? managed[w].elt : std::optional<double>(managed[w].nu);
        std::optional<double> u =
            use_elt ? unmanaged[w].elt : std::optional<double>(unmanaged[w].nu);
        if (auto r = normalize(m, u)) {
            sum += *r;
            n++;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

/// Normalized standard deviation across repeat runs: population standard
/// deviation divided by the mean. Zero means perfect repeatability. Undefined
/// when the mean is zero.
inline std::optional<double> nsd(std::span<const double> values) {
    if (values.size() != 3)
        throw std::invalid_argument("nsd expects exactly one value per repeat");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    if (mean == 0.0) return std::nullopt;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    return std::sqrt(var) / mean;
}

}  // namespace autochord
