#pragma once

#include <cstdint>
#include <string_view>

namespace autochord {

enum class WorkloadKind : std::uint8_t { light, heavy, variable, file_system };

constexpr std::string_view workload_name(WorkloadKind k) {
    switch (k) {
        case WorkloadKind::light: return "light";
        case WorkloadKind::heavy: return "heavy";
        case WorkloadKind::variable: return "variable";
        case WorkloadKind::file_system: return "file_system";
    }
    return "?";
}

/// Temporal pattern of lookup requests. The synthetic workloads are
/// sequential: each lookup starts when the previous one has completed plus
/// the configured gap. The file-system workload interleaves short sequential
/// runs with parallel bursts and exponential think times, standing in for a
/// real trace.
struct WorkloadSpec {
    WorkloadKind kind = WorkloadKind::light;
    std::uint32_t total_lookups = 10;
    double gap = 300.0;             // idle time between lookups (or batches)
    std::uint32_t batch_size = 0;   // variable: lookups per batch
    std::uint32_t parallelism = 1;  // file_system: max in-flight lookups

    // file_system synthesis parameters
    std::uint32_t seq_run_min = 1, seq_run_max = 10;
    std::uint32_t fanout_min = 2, fanout_max = 4;
    double think_mean = 0.05;        // seconds between lookups of a run
    double parallel_fraction = 0.5;  // share of parallel bursts

    static WorkloadSpec make(WorkloadKind kind) {
        WorkloadSpec w;
        w.kind = kind;
        switch (kind) {
            case WorkloadKind::light:
                w.total_lookups = 10;
                w.gap = 300.0;
                break;
            case WorkloadKind::heavy:
                w.total_lookups = 6000;
                w.gap = 0.0;
                break;
            case WorkloadKind::variable:
                w.total_lookups = 1000;
                w.batch_size = 100;
                w.gap = 300.0;
                break;
            case WorkloadKind::file_system:
                w.total_lookups = 15000;
                w.gap = 0.0;
                w.parallelism = 4;
                break;
        }
        return w;
    }
};

}  // namespace autochord
