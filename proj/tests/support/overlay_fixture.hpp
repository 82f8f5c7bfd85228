#pragma once

// Test harness pieces: a sorted-membership successor oracle and a driver for
// building converged static overlays node by node.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "autochord/node.hpp"
#include "autochord/simnet.hpp"

namespace testsupport {

using namespace autochord;

/// Independent answer for "which live node owns key k": sort all live ids,
/// binary-search the first at or after k, wrapping to the smallest.
class MembershipOracle {
public:
    explicit MembershipOracle(std::vector<NodeId> ids) : ids_(std::move(ids)) {
        std::sort(ids_.begin(), ids_.end());
    }

    NodeId successor(NodeId key) const {
        auto it = std::lower_bound(ids_.begin(), ids_.end(), key);
        if (it == ids_.end()) return ids_.front();
        return *it;
    }

private:
    std::vector<NodeId> ids_;
};

struct LookupOutcome {
    std::optional<PeerRef> result;
    LookupError error = LookupError::none;
    bool completed = false;
    double completed_at = 0.0;
};

/// Runs one lookup to completion on an otherwise idle network. Note that
/// net.now() afterwards sits at the last drained event (often a no-op RPC
/// timeout); completed_at has the real finish time.
inline LookupOutcome lookup_sync(Network& net, std::size_t entry, NodeId key) {
    LookupOutcome out;
    net.node(entry).start_lookup(key, [&](std::optional<PeerRef> r,
                                          LookupError e) {
        out.result = r;
        out.error = e;
        out.completed = true;
        out.completed_at = net.now();
    });
    net.run_until_idle();
    return out;
}

/// Runs one maintenance operation to completion.
inline MaintenanceReport maintain_sync(Network& net, std::size_t i) {
    MaintenanceReport report;
    net.node(i).start_maintain([&](MaintenanceReport r) { report = r; });
    net.run_until_idle();
    return report;
}

/// One serialized maintenance round: every online node maintains once, in
/// index order, each operation completing before the next starts.
inline void maintain_round(Network& net) {
    for (std::size_t i = 0; i < net.size(); ++i) {
        if (!net.ready(i)) continue;
        maintain_sync(net, i);
    }
}

/// Brings up nodes in the given join order: the first forms the ring, the
/// rest join through it one at a time with a maintenance round between
/// joins, as in a live deployment where the periodic process runs while
/// membership grows.
inline void join_in_order(Network& net, const std::vector<std::size_t>& order) {
    if (order.empty()) return;
    net.set_online(order[0], true);
    net.node(order[0]).become_singleton();
    for (std::size_t k = 1; k < order.size(); ++k) {
        const std::size_t i = order[k];
        net.set_online(i, true);
        bool ok = false;
        net.node(i).start_join(net.node(order[0]).self(),
                               [&](bool v) { ok = v; });
        net.run_until_idle();
        if (!ok) throw std::runtime_error("test join failed");
        maintain_sync(net, i);
        maintain_round(net);
    }
}

/// join_in_order for nodes 0..n-1.
inline void join_all(Network& net, std::size_t n) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    join_in_order(net, order);
}

inline std::vector<NodeId> live_ids(Network& net) {
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < net.size(); ++i)
        if (net.ready(i)) ids.push_back(net.node(i).id());
    return ids;
}

}  // namespace testsupport
