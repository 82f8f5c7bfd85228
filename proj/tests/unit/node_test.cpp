#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "../support/overlay_fixture.hpp"
#include "autochord/node.hpp"
#include "autochord/simnet.hpp"

using namespace autochord;
using namespace testsupport;

namespace {

SimParams small_net(std::uint32_t n, std::uint64_t seed = 1) {
    SimParams p;
    p.node_count = n;
    p.seed = seed;
    // Correctness tests don't need the processing-cost model.
    p.cpu.per_message = 0.0;
    p.cpu.per_maintenance = 0.0;
    return p;
}

}  // namespace

TEST_CASE("closest preceding peer from a hand-laid table", "[node]") {
    // Ring m = 6, self = 0, peers at 10, 20, 40, key = 35 -> 20.
    SimParams p = small_net(1);
    p.ring_bits = 6;
    Network net(p);
    ChordNode& n = net.node(0);
    net.set_online(0, true);
    n.become_singleton();

    const NodeId self = n.id();
    auto at = [&](std::uint64_t d) {
        return PeerRef{NodeId{(self.value + d) & net.ring().mask()}, 0};
    };
    // All fingers empty -> self.
    CHECK(n.closest_preceding_peer(NodeId{(self.value + 35) &
                                          net.ring().mask()}) .id == self);

    // Inject peers via the handler path: notify cannot set fingers, so build
    // a tiny overlay below instead; here we just check the singleton rule.
    CHECK(n.closest_preceding_peer(net.ring().add(self, 1)).id == self);
    (void)at;
}

TEST_CASE("closest preceding peer picks the largest id in (self, key)",
          "[node]") {
    // Real 4-node overlay, converged; then validate the rule directly
    // against the peer-set.
    Network net(small_net(4));
    join_all(net, 4);
    for (int r = 0; r < 6; ++r) maintain_round(net);

    for (std::size_t i = 0; i < 4; ++i) {
        ChordNode& n = net.node(i);
        std::mt19937_64 gen(99 + i);
        for (int t = 0; t < 200; ++t) {
            const NodeId key{gen()};
            const PeerRef c = n.closest_preceding_peer(key);
            if (c.id == n.id()) continue;
            CHECK(in_open(c.id, n.id(), key));
            // No known peer lies strictly between c and key.
            for (const auto& f : n.peers().fingers) {
                if (!f) continue;
                if (in_open(f->id, n.id(), key))
                    CHECK(net.ring().distance(n.id(), f->id) <=
                          net.ring().distance(n.id(), c.id));
            }
        }
    }
}

TEST_CASE("singleton overlay answers every lookup with itself", "[node]") {
    Network net(small_net(1));
    net.set_online(0, true);
    net.node(0).become_singleton();
    std::mt19937_64 gen(3);
    for (int i = 0; i < 50; ++i) {
        const auto out = lookup_sync(net, 0, NodeId{gen()});
        REQUIRE(out.completed);
        REQUIRE(out.result);
        CHECK(out.result->id == net.node(0).id());
    }
}

TEST_CASE("two nodes converge within two maintenance rounds each", "[node]") {
    Network net(small_net(2));
    join_all(net, 2);
    const NodeId a = net.node(0).id(), b = net.node(1).id();

    // Hand-enumerated sequence: B stabilizes and notifies A, A adopts B as
    // predecessor; A stabilizes, learns B and notifies it; one more round
    // settles both peer-sets.
    maintain_sync(net, 1);
    maintain_sync(net, 0);
    maintain_sync(net, 1);
    maintain_sync(net, 0);

    CHECK(net.node(0).peers().successor.id == b);
    CHECK(net.node(1).peers().successor.id == a);
    REQUIRE(net.node(0).peers().predecessor);
    REQUIRE(net.node(1).peers().predecessor);
    CHECK(net.node(0).peers().predecessor->id == b);
    CHECK(net.node(1).peers().predecessor->id == a);
}

TEST_CASE("converged overlay: maintenance is wasted, exactly one event",
          "[node]") {
    Network net(small_net(8));
    join_all(net, 8);
    // Successor lists need about r rounds beyond routing convergence.
    for (int r = 0; r < 12; ++r) maintain_round(net);

    for (std::size_t i = 0; i < 8; ++i) {
        (void)net.node(i).drain_events();
        const auto report = maintain_sync(net, i);
        CHECK_FALSE(report.changed);
        CHECK(report.errors == 0);
        const auto events = net.node(i).drain_events();
        REQUIRE(events.size() == 1);
        CHECK(events[0].kind == EventKind::wasted_maintenance);
        CHECK(events[0].context == EventContext::maintenance);
    }
}

TEST_CASE("maintenance that changes the peer-set emits no wasted event",
          "[node]") {
    Network net(small_net(8));
    join_all(net, 7);
    // Node 7 joins but has not maintained: its first maintenance fills the
    // successor list and fingers, a guaranteed mutation.
    net.set_online(7, true);
    bool ok = false;
    net.node(7).start_join(net.node(0).self(), [&](bool v) { ok = v; });
    net.run_until_idle();
    REQUIRE(ok);
    (void)net.node(7).drain_events();
    const auto report = maintain_sync(net, 7);
    CHECK(report.changed);
    for (const auto& ev : net.node(7).drain_events())
        CHECK(ev.kind != EventKind::wasted_maintenance);
}

TEST_CASE("dead successor is replaced from the successor list", "[node]") {
    Network net(small_net(8));
    join_all(net, 8);
    for (int r = 0; r < 12; ++r) maintain_round(net);

    // Pick any node, kill its successor.
    ChordNode& n = net.node(0);
    const NodeId dead = n.peers().successor.id;
    REQUIRE(n.peers().successor_list.size() >= 2);
    const NodeId second = n.peers().successor_list[1].id;
    for (std::size_t i = 0; i < net.size(); ++i)
        if (net.node(i).id() == dead) net.set_online(i, false);

    (void)n.drain_events();
    const auto report = maintain_sync(net, 0);
    CHECK(report.changed);
    CHECK(report.errors >= 1);
    CHECK(n.peers().successor.id == second);
    bool saw_access_error = false;
    for (const auto& ev : n.drain_events())
        if (ev.kind == EventKind::access_error &&
            ev.context == EventContext::maintenance)
            saw_access_error = true;
    CHECK(saw_access_error);
}

TEST_CASE("lookup toward a dead successor fails with one access error",
          "[node]") {
    Network net(small_net(4));
    join_all(net, 4);
    for (int r = 0; r < 6; ++r) maintain_round(net);

    ChordNode& n = net.node(0);
    const NodeId dead = n.peers().successor.id;
    for (std::size_t i = 0; i < net.size(); ++i)
        if (net.node(i).id() == dead) net.set_online(i, false);

    // A key owned by the dead successor: one past our own id.
    const NodeId key = net.ring().add(n.id(), 1);
    (void)n.drain_events();
    const std::uint64_t failed_before = net.stats().failed_calls;
    const auto out = lookup_sync(net, 0, key);
    REQUIRE(out.completed);
    CHECK_FALSE(out.result);
    CHECK(out.error == LookupError::timeout);
    const auto events = n.drain_events();
    REQUIRE(events.size() == 1);
    CHECK(events[0].kind == EventKind::access_error);
    CHECK(events[0].context == EventContext::routing);
    CHECK(net.stats().failed_calls == failed_before + 1);
}

TEST_CASE("routing errors land on the node holding the stale link", "[node]") {
    Network net(small_net(8));
    join_all(net, 8);
    for (int r = 0; r < 12; ++r) maintain_round(net);

    // Find an entry whose lookup must cross a relay: pick a key owned by
    // some node X, kill X, and look it up from a node far from X so the
    // final hop happens at X's predecessor, not at the entry.
    const MembershipOracle oracle(live_ids(net));
    ChordNode& entry = net.node(0);
    std::size_t victim = 0;
    NodeId key{};
    for (std::uint64_t probe = 1;; ++probe) {
        key = NodeId{net.ring().id_from_key("probe-" + std::to_string(probe)).value};
        const NodeId owner = oracle.successor(key);
        if (owner == entry.id()) continue;
        if (in_half_open(key, entry.id(), entry.peers().successor.id)) continue;
        bool found = false;
        for (std::size_t i = 0; i < net.size(); ++i)
            if (net.node(i).id() == owner) {
                victim = i;
                found = true;
            }
        if (found && victim != 0) break;
    }
    // X's predecessor is the node that must discover the death.
    std::size_t pred_of_victim = 0;
    for (std::size_t i = 0; i < net.size(); ++i)
        if (net.node(i).peers().successor.id == net.node(victim).id())
            pred_of_victim = i;
    REQUIRE(pred_of_victim != victim);

    for (std::size_t i = 0; i < net.size(); ++i) (void)net.node(i).drain_events();
    net.set_online(victim, false);
    const auto out = lookup_sync(net, 0, key);
    REQUIRE(out.completed);
    CHECK_FALSE(out.result);

    bool relay_saw_routing_error = false;
    for (const auto& ev : net.node(pred_of_victim).drain_events())
        if (ev.kind == EventKind::access_error &&
            ev.context == EventContext::routing)
            relay_saw_routing_error = true;
    CHECK(relay_saw_routing_error);
}

TEST_CASE("a repair primed by a failed access skips the probe timeout",
          "[node]") {
    Network net(small_net(8));
    join_all(net, 8);
    for (int r = 0; r < 12; ++r) maintain_round(net);

    ChordNode& n = net.node(0);
    const NodeId dead = n.peers().successor.id;
    REQUIRE(n.peers().successor_list.size() >= 2);
    for (std::size_t i = 0; i < net.size(); ++i)
        if (net.node(i).id() == dead) net.set_online(i, false);

    // A lookup into the dead successor's range fails and caches the death.
    const auto out = lookup_sync(net, 0, net.ring().add(n.id(), 1));
    REQUIRE_FALSE(out.result);

    // The next maintenance repairs without probing the known-dead peer:
    // it still counts as a change, but no new access failure occurs.
    (void)n.drain_events();
    const auto report = maintain_sync(net, 0);
    CHECK(report.changed);
    CHECK(n.peers().successor.id != dead);
    for (const auto& ev : n.drain_events())
        CHECK(ev.kind != EventKind::access_error);
}

TEST_CASE("notify adopts only candidates in (predecessor, self)", "[node]") {
    Network net(small_net(4));
    join_all(net, 4);
    for (int r = 0; r < 6; ++r) maintain_round(net);

    ChordNode& n = net.node(0);
    REQUIRE(n.peers().predecessor);
    const PeerRef pred = *n.peers().predecessor;

    // Re-notifying the current predecessor changes nothing.
    RpcRequest req;
    req.kind = RpcKind::notify;
    req.sender = pred;
    n.handle(req);
    CHECK(n.peers().predecessor->id == pred.id);

    // A notify from outside (pred, self) is ignored.
    req.sender = n.peers().successor;  // the successor is not in (pred, self)
    if (!in_open(req.sender.id, pred.id, n.id())) {
        n.handle(req);
        CHECK(n.peers().predecessor->id == pred.id);
    }
}

TEST_CASE("find_successor base case answers without further hops", "[node]") {
    Network net(small_net(4));
    join_all(net, 4);
    for (int r = 0; r < 6; ++r) maintain_round(net);

    ChordNode& n = net.node(0);
    RpcRequest req;
    req.kind = RpcKind::find_successor;
    req.key = net.ring().add(n.id(), 1);  // in (self, successor]
    const auto resp = n.handle(req);
    CHECK(resp.found);
    REQUIRE(resp.peer);
    CHECK(resp.peer->id == n.peers().successor.id);
}

TEST_CASE("join into a singleton and with an offline bootstrap", "[node]") {
    Network net(small_net(3));
    net.set_online(0, true);
    net.node(0).become_singleton();

    net.set_online(1, true);
    bool ok = false;
    net.node(1).start_join(net.node(0).self(), [&](bool v) { ok = v; });
    net.run_until_idle();
    CHECK(ok);
    CHECK(net.node(1).peers().successor.id == net.node(0).id());

    // Joining through an offline bootstrap fails.
    net.set_online(0, false);
    net.set_online(2, true);
    bool ok2 = true;
    net.node(2).start_join(PeerRef{net.node(0).id(), 0},
                           [&](bool v) { ok2 = v; });
    net.run_until_idle();
    CHECK_FALSE(ok2);
    CHECK_FALSE(net.node(2).ready());
}

TEST_CASE("oracle convergence on static overlays", "[node]") {
    for (std::uint32_t n : {1u, 2u, 8u, 16u}) {
        Network net(small_net(n, 100 + n));
        join_all(net, n);
        const int rounds =
            static_cast<int>(std::ceil(std::log2(std::max(2u, n)))) + 4;
        for (int r = 0; r < rounds; ++r) maintain_round(net);

        const MembershipOracle oracle(live_ids(net));
        std::mt19937_64 gen(1234 + n);
        for (int t = 0; t < 300; ++t) {
            const NodeId key{gen()};
            const auto out = lookup_sync(net, t % n, key);
            REQUIRE(out.completed);
            REQUIRE(out.result);
            CHECK(out.result->id == oracle.successor(key));
        }
    }
}

TEST_CASE("oracle convergence is independent of join order", "[node]") {
    std::mt19937_64 gen(77);
    for (int trial = 0; trial < 3; ++trial) {
        const std::uint32_t n = 8 + static_cast<std::uint32_t>(gen() % 9);
        Network net(small_net(n, 500 + trial));
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), gen);

        join_in_order(net, order);
        const int rounds =
            static_cast<int>(std::ceil(std::log2(std::max(2u, n)))) + 4;
        for (int r = 0; r < rounds; ++r) maintain_round(net);

        const MembershipOracle oracle(live_ids(net));
        for (int t = 0; t < 200; ++t) {
            const NodeId key{gen()};
            const auto out = lookup_sync(net, t % n, key);
            REQUIRE(out.completed);
            REQUIRE(out.result);
            CHECK(out.result->id == oracle.successor(key));
        }
    }
}

TEST_CASE("successor list equals the clockwise walk after convergence",
          "[node]") {
    Network net(small_net(8));
    join_all(net, 8);
    for (int r = 0; r < 12; ++r) maintain_round(net);

    const MembershipOracle oracle(live_ids(net));
    for (std::size_t i = 0; i < 8; ++i) {
        const auto& peers = net.node(i).peers();
        REQUIRE(!peers.successor_list.empty());
        CHECK(peers.successor_list[0].id == peers.successor.id);
        // Entries are distinct and clockwise-ordered.
        for (std::size_t a = 0; a + 1 < peers.successor_list.size(); ++a) {
            CHECK(net.ring().distance(net.node(i).id(),
                                      peers.successor_list[a].id) <
                  net.ring().distance(net.node(i).id(),
                                      peers.successor_list[a + 1].id));
        }
        // First entry is the oracle successor.
        CHECK(peers.successor.id ==
              oracle.successor(net.ring().add(net.node(i).id(), 1)));
    }
}

TEST_CASE("set_maintenance_interval validates input", "[node]") {
    Network net(small_net(1));
    CHECK_THROWS_AS(net.node(0).set_maintenance_interval(0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(net.node(0).set_maintenance_interval(-1.0),
                    std::invalid_argument);
    net.node(0).set_maintenance_interval(600.0);
    CHECK(net.node(0).maintenance_interval() == 600.0);
}

TEST_CASE("restart resets the maintenance interval to the default", "[node]") {
    Network net(small_net(2));
    join_all(net, 2);
    net.node(1).set_maintenance_interval(77.0);
    net.set_online(1, false);
    net.set_online(1, true);
    CHECK(net.node(1).maintenance_interval() ==
          net.params().initial_interval);
    CHECK_FALSE(net.node(1).ready());
}
