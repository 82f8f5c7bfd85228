#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "autochord/events.hpp"
#include "autochord/messages.hpp"
#include "autochord/peer.hpp"
#include "autochord/ring.hpp"

namespace autochord {

enum class LookupError : std::uint8_t {
    none,
    timeout,
    hop_limit,
    no_route,
    entry_offline,  // issuing node left mid-lookup (set by the harness)
};

constexpr const char* lookup_error_name(LookupError e) {
    switch (e) {
        case LookupError::none: return "";
        case LookupError::timeout: return "timeout";
        case LookupError::hop_limit: return "hop_limit";
        case LookupError::no_route: return "no_route";
        case LookupError::entry_offline: return "entry_offline";
    }
    return "";
}

/// A Chord node. The node is a single-threaded state machine: all methods are
/// invoked from delivered messages or timer callbacks, never concurrently.
/// Multi-step operations (join, lookup, maintenance) are continuation chains;
/// the hosting network drops stale continuations when the node restarts.
class ChordNode {
public:
    using RpcCallback = std::function<void(std::optional<RpcResponse>)>;
    using LookupCallback =
        std::function<void(std::optional<PeerRef>, LookupError)>;

    /// Services supplied by the hosting (simulated) network.
    struct Services {
        std::function<double()> now;
        /// Issue an RPC to a peer. The callback receives nullopt on timeout.
        std::function<void(const PeerRef&, RpcRequest, RpcCallback)> rpc;
        /// Instrumentation tap invoked for every emitted ManagerEvent.
        std::function<void(const ManagerEvent&)> on_event;
    };

    ChordNode(PeerRef self, Ring ring, std::uint32_t successor_list_len,
              double initial_interval, Services services)
        : self_(self),
          ring_(ring),
          list_len_(successor_list_len),
          hop_limit_(std::max(16u, ring.bits())),
          initial_interval_(initial_interval),
          interval_(initial_interval),
          services_(std::move(services)) {
        peers_.fingers.assign(ring_.bits(), std::nullopt);
    }

    const PeerRef& self() const { return self_; }
    NodeId id() const { return self_.id; }
    const Ring& ring() const { return ring_; }
    const PeerSet& peers() const { return peers_; }
    bool ready() const { return ready_; }
    bool maintaining() const { return maintaining_; }
    double maintenance_interval() const { return interval_; }

    /// Fresh incarnation: peer-set, pending metrics and the maintenance
    /// interval all reset to their defaults.
    void reset_incarnation() {
        peers_ = PeerSet{};
        peers_.fingers.assign(ring_.bits(), std::nullopt);
        event_buffer_.clear();
        dead_cache_.clear();
        next_refresh_finger_ = 1;
        ready_ = false;
        maintaining_ = false;
        interval_ = initial_interval_;
    }

    /// First node of an overlay: it is its own successor.
    void become_singleton() {
        peers_ = PeerSet{};
        peers_.successor = self_;
        peers_.successor_list = {self_};
        peers_.fingers.assign(ring_.bits(), std::nullopt);
        ready_ = true;
    }

    void set_maintenance_interval(double interval) {
        if (!(interval > 0.0))
            throw std::invalid_argument("maintenance interval must be positive");
        interval_ = interval;
    }

    std::vector<ManagerEvent> drain_events() {
        return std::exchange(event_buffer_, {});
    }

    /// Local routing step: the finger or successor-list entry with the
    /// largest id in (self, key), or self if none.
    PeerRef closest_preceding_peer(NodeId key) const {
        return closest_preceding_excluding(key, {});
    }

    PeerRef closest_preceding_excluding(
        NodeId key, const std::vector<NodeId>& excluded,
        bool skip_cached_dead = false) const {
        PeerRef best = self_;
        std::uint64_t best_dist = 0;
        auto consider = [&](const PeerRef& c) {
            if (c.id == self_.id) return;
            if (!in_open(c.id, self_.id, key)) return;
            for (const auto& x : excluded)
                if (x == c.id) return;
            if (skip_cached_dead && cached_dead(c.id)) return;
            const std::uint64_t d = ring_.distance(self_.id, c.id);
            if (d > best_dist) {
                best_dist = d;
                best = c;
            }
        };
        for (const auto& f : peers_.fingers)
            if (f) consider(*f);
        for (const auto& p : peers_.successor_list) consider(p);
        return best;
    }

    /// True for requests that may complete asynchronously (recursive
    /// lookups); everything else is answered by handle().
    static bool is_routed(const RpcRequest& req) {
        return req.kind == RpcKind::find_successor && req.recursive;
    }

    /// Relay step of a recursive lookup. The base case checks the successor
    /// for liveness before answering, so stale links are discovered (and the
    /// resulting event lands) at the node that owns them. No failover: an
    /// unreachable hop fails the whole lookup.
    void handle_routed(const RpcRequest& req,
                       std::function<void(RpcResponse)> respond) {
        RpcResponse resp;
        resp.kind = RpcKind::find_successor;
        if (in_half_open(req.key, self_.id, peers_.successor.id)) {
            if (peers_.successor.id == self_.id) {
                resp.found = true;
                resp.peer = self_;
                respond(std::move(resp));
                return;
            }
            // A successor that just failed an access is already known dead;
            // fail fast instead of burning another timeout on it. The first
            // failure paid full price and raised the event.
            if (cached_dead(peers_.successor.id)) {
                resp.failed = true;
                respond(std::move(resp));
                return;
            }
            verify_candidate(
                peers_.successor, EventContext::routing, nullptr,
                [respond = std::move(respond)](std::optional<PeerRef> peer,
                                               LookupError,
                                               std::optional<NodeId>) {
                    RpcResponse out;
                    out.kind = RpcKind::find_successor;
                    if (peer) {
                        out.found = true;
                        out.peer = *peer;
                    } else {
                        out.failed = true;
                    }
                    respond(std::move(out));
                });
            return;
        }
        const PeerRef next = closest_preceding_peer(req.key);
        if (req.ttl == 0 || next.id == self_.id || cached_dead(next.id)) {
            resp.failed = true;
            respond(std::move(resp));
            return;
        }
        RpcRequest forward = req;
        forward.ttl--;
        call(next, forward, EventContext::routing, nullptr,
             [respond = std::move(respond)](std::optional<RpcResponse> down) {
                 RpcResponse out;
                 out.kind = RpcKind::find_successor;
                 if (!down) {
                     // The event for the dead hop was emitted here; the
                     // caller above us has most likely timed out already.
                     out.failed = true;
                 } else {
                     out = std::move(*down);
                 }
                 respond(std::move(out));
             });
    }

    /// Request handler: a pure function of the peer-set except for the notify
    /// mutation. Only ready nodes are given requests by the network.
    RpcResponse handle(const RpcRequest& req) {
        RpcResponse resp;
        resp.kind = req.kind;
        switch (req.kind) {
            case RpcKind::find_successor:
                if (in_half_open(req.key, self_.id, peers_.successor.id)) {
                    resp.found = true;
                    resp.peer = peers_.successor;
                } else {
                    resp.found = false;
                    resp.peer = closest_preceding_peer(req.key);
                }
                break;
            case RpcKind::get_predecessor:
                resp.peer = peers_.predecessor;
                break;
            case RpcKind::get_successor_list:
                resp.peers = peers_.successor_list;
                break;
            case RpcKind::notify: {
                const PeerRef& cand = req.sender;
                if (cand.id != self_.id &&
                    (!peers_.predecessor ||
                     in_open(cand.id, peers_.predecessor->id, self_.id))) {
                    peers_.predecessor = cand;
                }
                break;
            }
            case RpcKind::ping:
                break;
        }
        return resp;
    }

    /// Key lookup: the key's owner per local state, or a recursive query
    /// through the closest preceding peer. The candidate is checked for
    /// liveness (here for local answers, at the final relay otherwise).
    /// Failures surface to the caller; there is no failover to alternate
    /// fingers.
    void start_lookup(NodeId key, LookupCallback done) {
        assert(ready_);
        auto wrapped = [done = std::move(done)](std::optional<PeerRef> r,
                                                LookupError e,
                                                std::optional<NodeId>) {
            done(r, e);
        };
        if (key == self_.id ||
            (peers_.predecessor &&
             in_half_open(key, peers_.predecessor->id, self_.id))) {
            wrapped(self_, LookupError::none, std::nullopt);
            return;
        }
        if (in_half_open(key, self_.id, peers_.successor.id)) {
            verify_candidate(peers_.successor, EventContext::routing, nullptr,
                             std::move(wrapped));
            return;
        }
        PeerRef first = closest_preceding_peer(key);
        if (first.id == self_.id) {
            // Degenerate table; the successor is the only lead we have.
            verify_candidate(peers_.successor, EventContext::routing, nullptr,
                             std::move(wrapped));
            return;
        }
        route_query(key, first, std::move(wrapped));
    }

    /// Join via a bootstrap peer: resolve the successor of self.id and adopt
    /// it. Everything else is populated lazily by maintenance. The key is one
    /// past self.id so that stale references to a previous incarnation of
    /// this node never come back as the answer.
    void start_join(const PeerRef& bootstrap,
                    std::function<void(bool)> done) {
        assert(!ready_);
        const NodeId key = ring_.add(self_.id, 1);
        route_query(key, bootstrap,
                    [this, done = std::move(done)](std::optional<PeerRef> result,
                                                   LookupError,
                                                   std::optional<NodeId>) {
                        if (!result || result->id == self_.id) {
                            done(false);
                            return;
                        }
                        peers_ = PeerSet{};
                        peers_.fingers.assign(ring_.bits(), std::nullopt);
                        peers_.successor = *result;
                        peers_.successor_list = {*result};
                        ready_ = true;
                        done(true);
                    });
    }

    /// One maintenance operation: stabilize, refresh the successor list, fix
    /// all fingers (local state first), check the predecessor. Failures are
    /// absorbed, counted and emitted as events; if nothing changed, exactly
    /// one wasted_maintenance event is emitted.
    void start_maintain(std::function<void(MaintenanceReport)> done) {
        assert(ready_ && !maintaining_);
        maintaining_ = true;
        auto st = std::make_shared<MaintainState>();
        st->before = peers_;
        st->done = std::move(done);
        stabilize(st);
    }

private:
    struct MaintainState {
        PeerSet before;
        MaintenanceReport report;
        std::function<void(MaintenanceReport)> done;
        std::vector<PeerRef> repair_candidates;
        std::size_t repair_next = 0;
        bool repair_prepared = false;
        std::vector<NodeId> failed;  // peers found dead during this operation
        unsigned finger_index = 1;
        NodeId prev_target;
        std::optional<PeerRef> prev_finger;
        std::vector<unsigned> deferred;  // healthy entries eligible for refresh

        bool known_dead(NodeId id) const {
            for (const auto& f : failed)
                if (f == id) return true;
            return false;
        }
    };

    void emit(EventKind kind, EventContext context) {
        ManagerEvent ev{kind, self_.id, services_.now(), context};
        event_buffer_.push_back(ev);
        if (services_.on_event) services_.on_event(ev);
    }

    /// All remote accesses funnel through here so that every failure emits
    /// exactly one access_error event.
    void call(const PeerRef& to, RpcRequest req, EventContext context,
              const std::shared_ptr<MaintainState>& st, RpcCallback cb) {
        if (st) {
            st->report.rpcs_sent++;
            st->report.bytes_sent += message_size(req);
        }
        const NodeId target = to.id;
        services_.rpc(to, std::move(req),
                      [this, context, st, target, cb = std::move(cb)](
                          std::optional<RpcResponse> resp) {
                          if (!resp) {
                              emit(EventKind::access_error, context);
                              if (st) st->report.errors++;
                              mark_dead(target);
                          } else {
                              forget_dead(target);
                          }
                          cb(std::move(resp));
                      });
    }

    // Recently unreachable peers. Finger resolution consults this to avoid
    // re-probing a peer every operation while its region's tables still
    // point at it; direct peer-set checks (stabilize, predecessor ping) do
    // not, so liveness discovery stays untouched.
    static constexpr double kDeadCacheTtl = 30.0;

    void mark_dead(NodeId id) {
        const double until = services_.now() + kDeadCacheTtl;
        for (auto& e : dead_cache_) {
            if (e.first == id) {
                e.second = until;
                return;
            }
        }
        dead_cache_.emplace_back(id, until);
    }

    void forget_dead(NodeId id) {
        std::erase_if(dead_cache_,
                      [&](const auto& e) { return e.first == id; });
    }

    bool cached_dead(NodeId id) const {
        const double now = services_.now();
        for (const auto& e : dead_cache_)
            if (e.first == id && e.second > now) return true;
        return false;
    }

    // ---- routing ------------------------------------------------------------

    /// Like LookupCallback, with the peer that timed out (when one did).
    using ResolveCallback = std::function<void(
        std::optional<PeerRef>, LookupError, std::optional<NodeId>)>;

    /// Issues a recursive find_successor through `first`. The answer comes
    /// back pre-verified by the key's predecessor.
    void route_query(NodeId key, const PeerRef& first, ResolveCallback done) {
        RpcRequest req;
        req.kind = RpcKind::find_successor;
        req.key = key;
        req.recursive = true;
        req.ttl = hop_limit_;
        call(first, req, EventContext::routing, nullptr,
             [done = std::move(done)](std::optional<RpcResponse> resp) {
                 if (!resp) {
                     done(std::nullopt, LookupError::timeout, std::nullopt);
                 } else if (resp->failed || !resp->found || !resp->peer) {
                     done(std::nullopt, LookupError::no_route, std::nullopt);
                 } else {
                     done(*resp->peer, LookupError::none, std::nullopt);
                 }
             });
    }

    struct ResolveState {
        NodeId key;
        PeerRef current;
        unsigned hops = 0;
        EventContext context;
        std::shared_ptr<MaintainState> tally;
        ResolveCallback done;
    };

    /// One-shot iterative find_successor walk over local-style queries;
    /// used by maintenance to (re)resolve finger targets.
    void resolve(NodeId key, PeerRef start, EventContext context,
                 std::shared_ptr<MaintainState> tally, ResolveCallback done) {
        auto rs = std::make_shared<ResolveState>();
        rs->key = key;
        rs->current = start;
        rs->context = context;
        rs->tally = std::move(tally);
        rs->done = std::move(done);
        resolve_step(rs);
    }

    void resolve_step(const std::shared_ptr<ResolveState>& rs) {
        // Maintenance resolves do not re-probe peers this operation (or the
        // recent past) already found unreachable; the path is just a dead
        // end for now.
        if (rs->tally && (rs->tally->known_dead(rs->current.id) ||
                          cached_dead(rs->current.id))) {
            rs->done(std::nullopt, LookupError::no_route, std::nullopt);
            return;
        }
        RpcRequest req;
        req.kind = RpcKind::find_successor;
        req.key = rs->key;
        call(rs->current, req, rs->context, rs->tally,
             [this, rs](std::optional<RpcResponse> resp) {
                 if (!resp) {
                     rs->done(std::nullopt, LookupError::timeout,
                              rs->current.id);
                     return;
                 }
                 if (!resp->peer) {
                     rs->done(std::nullopt, LookupError::no_route,
                              std::nullopt);
                     return;
                 }
                 if (resp->found) {
                     rs->done(*resp->peer, LookupError::none, std::nullopt);
                     return;
                 }
                 const PeerRef next = *resp->peer;
                 if (next.id == rs->current.id) {
                     rs->done(std::nullopt, LookupError::no_route,
                              std::nullopt);
                     return;
                 }
                 if (++rs->hops > hop_limit_) {
                     rs->done(std::nullopt, LookupError::hop_limit,
                              std::nullopt);
                     return;
                 }
                 rs->current = next;
                 resolve_step(rs);
             });
    }

    void verify_candidate(PeerRef candidate, EventContext context,
                          std::shared_ptr<MaintainState> tally,
                          ResolveCallback done) {
        if (candidate.id == self_.id) {
            done(self_, LookupError::none, std::nullopt);
            return;
        }
        if (cached_dead(candidate.id)) {
            done(std::nullopt, LookupError::no_route, std::nullopt);
            return;
        }
        RpcRequest req;
        req.kind = RpcKind::ping;
        call(candidate, req, context, tally,
             [candidate, done = std::move(done)](
                 std::optional<RpcResponse> resp) {
                 if (resp)
                     done(candidate, LookupError::none, std::nullopt);
                 else
                     done(std::nullopt, LookupError::timeout, candidate.id);
             });
    }

    // ---- maintenance -------------------------------------------------------

    void stabilize(const std::shared_ptr<MaintainState>& st) {
        if (peers_.successor.id == self_.id) {
            on_successor_predecessor(st, peers_.predecessor);
            return;
        }
        // A failed access already proved this successor dead moments ago
        // (and paid for the event); repair straight away instead of burning
        // another probe timeout on it. This is what makes error-triggered
        // maintenance repair faster than a scheduled pass.
        if (cached_dead(peers_.successor.id)) {
            st->failed.push_back(peers_.successor.id);
            repair_successor(st);
            return;
        }
        RpcRequest req;
        req.kind = RpcKind::get_predecessor;
        const NodeId target = peers_.successor.id;
        call(peers_.successor, req, EventContext::maintenance, st,
             [this, st, target](std::optional<RpcResponse> resp) {
                 if (!resp) {
                     st->failed.push_back(target);
                     repair_successor(st);
                     return;
                 }
                 on_successor_predecessor(st, resp->peer);
             });
    }

    /// The successor is unreachable: advance through the successor list, then
    /// fall back to fingers. Candidates are probed via stabilize itself, so
    /// each dead candidate costs one more access error.
    void repair_successor(const std::shared_ptr<MaintainState>& st) {
        if (!st->repair_prepared) {
            st->repair_prepared = true;
            auto push_unique = [&](const PeerRef& p) {
                if (p.id == self_.id) return;
                for (const auto& c : st->repair_candidates)
                    if (c.id == p.id) return;
                st->repair_candidates.push_back(p);
            };
            for (std::size_t i = 1; i < peers_.successor_list.size(); ++i)
                push_unique(peers_.successor_list[i]);
            std::vector<PeerRef> fingers;
            for (const auto& f : peers_.fingers)
                if (f && f->id != peers_.successor.id) fingers.push_back(*f);
            std::sort(fingers.begin(), fingers.end(),
                      [&](const PeerRef& a, const PeerRef& b) {
                          return ring_.distance(self_.id, a.id) <
                                 ring_.distance(self_.id, b.id);
                      });
            for (const auto& f : fingers) push_unique(f);
            // The dead head must not be retried.
            std::erase_if(st->repair_candidates, [&](const PeerRef& p) {
                return p.id == peers_.successor.id;
            });
        }
        if (st->repair_next >= st->repair_candidates.size()) {
            // Nobody reachable: become a singleton ring until someone
            // notifies us or we are restarted.
            peers_.successor = self_;
            peers_.successor_list = {self_};
            on_successor_predecessor(st, peers_.predecessor);
            return;
        }
        const PeerRef next = st->repair_candidates[st->repair_next++];
        peers_.successor = next;
        peers_.successor_list = {next};
        stabilize(st);
    }

    void on_successor_predecessor(const std::shared_ptr<MaintainState>& st,
                                  std::optional<PeerRef> cand) {
        // Stale predecessor data can point right back at a peer this
        // operation already found dead; never adopt those.
        if (cand && cand->id != self_.id && !st->known_dead(cand->id) &&
            in_open(cand->id, self_.id, peers_.successor.id)) {
            adopt_successor(*cand);
        }
        send_notify(st);
    }

    void adopt_successor(const PeerRef& p) {
        auto& list = peers_.successor_list;
        std::erase_if(list, [&](const PeerRef& e) { return e.id == p.id; });
        list.insert(list.begin(), p);
        if (list.size() > list_len_) list.resize(list_len_);
        peers_.successor = p;
    }

    void send_notify(const std::shared_ptr<MaintainState>& st) {
        if (peers_.successor.id == self_.id) {
            refresh_successor_list_local();
            fingers_begin(st);
            return;
        }
        RpcRequest req;
        req.kind = RpcKind::notify;
        req.sender = self_;
        call(peers_.successor, req, EventContext::maintenance, st,
             [this, st](std::optional<RpcResponse>) {
                 // A timeout was already counted; continue either way.
                 refresh_successor_list(st);
             });
    }

    void refresh_successor_list_local() {
        peers_.successor_list = {self_};
    }

    void refresh_successor_list(const std::shared_ptr<MaintainState>& st) {
        RpcRequest req;
        req.kind = RpcKind::get_successor_list;
        call(peers_.successor, req, EventContext::maintenance, st,
             [this, st](std::optional<RpcResponse> resp) {
                 if (resp) {
                     std::vector<PeerRef> list{peers_.successor};
                     for (const PeerRef& p : resp->peers) {
                         if (list.size() >= list_len_) break;
                         if (p.id == self_.id) break;  // wrapped full circle
                         bool dup = false;
                         for (const auto& e : list)
                             if (e.id == p.id) dup = true;
                         if (!dup) list.push_back(p);
                     }
                     peers_.successor_list = std::move(list);
                 }
                 fingers_begin(st);
             });
    }

    void fingers_begin(const std::shared_ptr<MaintainState>& st) {
        st->finger_index = 1;
        st->prev_finger.reset();
        next_finger(st);
    }

    /// First successor-list entry at or after the target, if the target lies
    /// within the list's span.
    const PeerRef* list_entry_covering(NodeId target) const {
        const auto& list = peers_.successor_list;
        if (list.empty()) return nullptr;
        if (!in_half_open(target, self_.id, list.back().id)) return nullptr;
        for (const auto& e : list)
            if (in_half_open(target, self_.id, e.id)) return &e;
        return nullptr;
    }

    /// Fix fingers in target order. Consecutive targets usually share an
    /// owner, so most entries resolve from local state. Entries that are
    /// empty or known dead are re-resolved remotely right away; healthy
    /// entries take turns, one remote refresh per operation, as in the
    /// classic rotating fix_fingers.
    void next_finger(const std::shared_ptr<MaintainState>& st) {
        while (st->finger_index <= ring_.bits()) {
            const unsigned i = st->finger_index;
            const NodeId target = ring_.finger_target(self_.id, i);
            if (peers_.successor.id == self_.id) {
                peers_.fingers[i - 1] = self_;
                st->finger_index++;
                continue;
            }
            if (in_half_open(target, self_.id, peers_.successor.id)) {
                peers_.fingers[i - 1] = peers_.successor;
                st->prev_target = target;
                st->prev_finger = peers_.successor;
                st->finger_index++;
                continue;
            }
            // The successor list walks the ring clockwise and is refreshed
            // every operation, so targets inside its span resolve locally.
            if (const PeerRef* owner = list_entry_covering(target)) {
                peers_.fingers[i - 1] = *owner;
                st->prev_target = target;
                st->prev_finger = *owner;
                st->finger_index++;
                continue;
            }
            if (st->prev_finger &&
                in_half_open(target, st->prev_target, st->prev_finger->id)) {
                peers_.fingers[i - 1] = *st->prev_finger;
                st->prev_target = target;
                st->finger_index++;
                continue;
            }
            const auto& current = peers_.fingers[i - 1];
            const bool doubted = !current || st->known_dead(current->id) ||
                                 cached_dead(current->id);
            if (!doubted) {
                st->deferred.push_back(i);
                // Trust the kept entry for chaining, as if it had resolved.
                st->prev_target = target;
                st->prev_finger = *current;
                st->finger_index++;
                continue;
            }
            resolve_finger(st, i, target, /*attempts_left=*/2);
            return;
        }
        refresh_one_deferred(st);
    }

    /// One rotating remote refresh per operation among the healthy entries.
    void refresh_one_deferred(const std::shared_ptr<MaintainState>& st) {
        if (st->deferred.empty()) {
            check_predecessor(st);
            return;
        }
        unsigned pick = st->deferred.front();
        for (unsigned idx : st->deferred) {
            if (idx >= next_refresh_finger_) {
                pick = idx;
                break;
            }
        }
        next_refresh_finger_ = pick + 1 > ring_.bits() ? 1 : pick + 1;
        st->deferred.clear();
        const NodeId target = ring_.finger_target(self_.id, pick);
        PeerRef start = closest_preceding_excluding(target, st->failed,
                                                    /*skip_cached_dead=*/true);
        if (start.id == self_.id) start = peers_.successor;
        if (st->known_dead(start.id) || cached_dead(start.id)) {
            check_predecessor(st);
            return;
        }
        resolve(target, start, EventContext::maintenance, st,
                [this, st, pick, target](std::optional<PeerRef> result,
                                         LookupError, std::optional<NodeId>) {
                    if (result) peers_.fingers[pick - 1] = *result;
                    check_predecessor(st);
                });
    }

    /// Remote finger resolution. A timeout marks the dead hop and retries
    /// around it, so a stale finger is actually repaired by this operation
    /// instead of shedding one error per round forever.
    void resolve_finger(const std::shared_ptr<MaintainState>& st, unsigned i,
                        NodeId target, unsigned attempts_left) {
        PeerRef start = closest_preceding_excluding(target, st->failed,
                                                    /*skip_cached_dead=*/true);
        if (start.id == self_.id) start = peers_.successor;
        if (st->known_dead(start.id) || cached_dead(start.id)) {
            // Nothing reachable precedes the target; leave the entry alone.
            st->finger_index = i + 1;
            next_finger(st);
            return;
        }
        resolve(target, start, EventContext::maintenance, st,
                [this, st, i, target, attempts_left](
                    std::optional<PeerRef> result, LookupError,
                    std::optional<NodeId> dead) {
                    if (result) {
                        peers_.fingers[i - 1] = *result;
                        st->prev_target = target;
                        st->prev_finger = *result;
                        st->finger_index = i + 1;
                        next_finger(st);
                        return;
                    }
                    if (dead && attempts_left > 1) {
                        st->failed.push_back(*dead);
                        resolve_finger(st, i, target, attempts_left - 1);
                        return;
                    }
                    // Give up; the old entry stays for the next round.
                    st->finger_index = i + 1;
                    next_finger(st);
                });
    }

    void check_predecessor(const std::shared_ptr<MaintainState>& st) {
        if (!peers_.predecessor || peers_.predecessor->id == self_.id) {
            finish_maintain(st);
            return;
        }
        if (st->known_dead(peers_.predecessor->id) ||
            cached_dead(peers_.predecessor->id)) {
            peers_.predecessor.reset();
            finish_maintain(st);
            return;
        }
        RpcRequest req;
        req.kind = RpcKind::ping;
        call(*peers_.predecessor, req, EventContext::maintenance, st,
             [this, st](std::optional<RpcResponse> resp) {
                 if (!resp) peers_.predecessor.reset();
                 finish_maintain(st);
             });
    }

    void finish_maintain(const std::shared_ptr<MaintainState>& st) {
        st->report.changed = !(peers_ == st->before);
        if (!st->report.changed)
            emit(EventKind::wasted_maintenance, EventContext::maintenance);
        maintaining_ = false;
        st->done(st->report);
    }

    PeerRef self_;
    Ring ring_;
    std::uint32_t list_len_;
    unsigned hop_limit_;
    double initial_interval_;
    double interval_;
    Services services_;

    PeerSet peers_;
    std::vector<ManagerEvent> event_buffer_;
    std::vector<std::pair<NodeId, double>> dead_cache_;  // id -> valid until
    unsigned next_refresh_finger_ = 1;  // rotating remote-refresh position
    bool ready_ = false;
    bool maintaining_ = false;
};

}  // namespace autochord
