#pragma once

#include <cstdint>

#include "autochord/ring.hpp"

namespace autochord {

enum class EventKind : std::uint8_t { wasted_maintenance, access_error };
enum class EventContext : std::uint8_t { routing, maintenance };

/// Monitoring event consumed by the autonomic manager. Events are purely
/// local; they never cross the network.
struct ManagerEvent {
    EventKind kind = EventKind::access_error;
    NodeId node;
    double time = 0.0;
    EventContext context = EventContext::routing;
};

/// Outcome of one maintenance operation.
struct MaintenanceReport {
    bool changed = false;      // any peer-set mutation
    std::uint32_t errors = 0;  // failed peer accesses during the operation
    std::uint32_t rpcs_sent = 0;
    std::uint64_t bytes_sent = 0;
};

}  // namespace autochord
