#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "autochord/messages.hpp"
#include "autochord/node.hpp"
#include "autochord/peer.hpp"
#include "autochord/ring.hpp"
#include "autochord/rng.hpp"

namespace autochord {

/// Time-ordered callback queue with deterministic FIFO tie-breaking.
class EventQueue {
public:
    double now() const { return now_; }

    void at(double t, std::function<void()> fn) {
        if (t < now_) t = now_;
        heap_.push_back(Entry{t, next_seq_++, std::move(fn)});
        std::push_heap(heap_.begin(), heap_.end(), Later{});
    }

    void after(double delay, std::function<void()> fn) {
        at(now_ + delay, std::move(fn));
    }

    bool empty() const { return heap_.empty(); }
    double next_time() const { return heap_.front().time; }

    bool step() {
        if (heap_.empty()) return false;
        std::pop_heap(heap_.begin(), heap_.end(), Later{});
        Entry e = std::move(heap_.back());
        heap_.pop_back();
        now_ = e.time;
        e.fn();
        return true;
    }

    /// Run every event with time <= t_end, then advance the clock to t_end.
    void run_until(double t_end) {
        while (!heap_.empty() && heap_.front().time <= t_end) step();
        now_ = std::max(now_, t_end);
    }

    void run_all() {
        while (step()) {
        }
    }

private:
    struct Entry {
        double time;
        std::uint64_t seq;
        std::function<void()> fn;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const {
            return a.time > b.time || (a.time == b.time && a.seq > b.seq);
        }
    };

    std::vector<Entry> heap_;
    std::uint64_t next_seq_ = 0;
    double now_ = 0.0;
};

/// One outgoing message by an online node.
struct TrafficSample {
    NodeId sender;
    double time = 0.0;
    std::uint32_t bytes = 0;
};

struct LatencyModel {
    double base = 0.0005;        // seconds
    double per_byte = 1e-9;      // 1 us per KB
    double jitter_frac = 0.10;   // uniform +-10% of the nominal latency
    double rpc_timeout = 2.0;    // seconds until a call is abandoned
};

/// Per-node processing costs. Each node handles one message at a time;
/// while it is busy, arriving work queues up. This is what couples
/// maintenance effort to lookup latency, as on a real deployment.
struct CpuModel {
    double per_message = 0.02;      // handling one delivered message
    double per_maintenance = 0.40;  // local bookkeeping of one maintenance op
};

struct SimParams {
    unsigned ring_bits = 64;
    std::uint32_t node_count = 16;
    std::uint32_t successor_list_len = 4;
    double initial_interval = 2.0;
    LatencyModel latency;
    CpuModel cpu;
    std::uint64_t seed = 1;
};

/// Counters used by event-soundness checks and reporting.
struct SimStats {
    std::uint64_t failed_calls = 0;         // timeouts delivered to live callers
    std::uint64_t access_error_events = 0;
    std::uint64_t wasted_maintenance_events = 0;
    std::uint64_t rpcs_sent = 0;
    std::uint64_t maintains_completed = 0;
    std::uint64_t maintains_unchanged = 0;
};

/// The simulated overlay network: virtual clock, message transport with
/// latency, byte accounting and timeouts, and the hosted Chord nodes.
/// Lifecycle, workload and manager drivers sit on top (see experiment.hpp).
class Network {
public:
    explicit Network(SimParams params)
        : params_(params),
          ring_(params.ring_bits),
          jitter_(params.seed, "latency-jitter") {
        hosts_.reserve(params_.node_count);
        for (std::uint32_t i = 0; i < params_.node_count; ++i)
            hosts_.push_back(std::make_unique<Host>(make_node(i)));
        for (std::uint32_t i = 0; i < params_.node_count; ++i) {
            for (std::uint32_t j = 0; j < i; ++j) {
                if (hosts_[i]->node.id() == hosts_[j]->node.id())
                    throw std::invalid_argument(
                        "node id collision; change seed or ring bits");
            }
        }
    }

    const SimParams& params() const { return params_; }
    const Ring& ring() const { return ring_; }
    EventQueue& queue() { return queue_; }
    double now() const { return queue_.now(); }
    std::size_t size() const { return hosts_.size(); }

    ChordNode& node(std::size_t i) { return hosts_[i]->node; }
    const ChordNode& node(std::size_t i) const { return hosts_[i]->node; }
    bool online(std::size_t i) const { return hosts_[i]->online; }
    bool ready(std::size_t i) const {
        return hosts_[i]->online && hosts_[i]->node.ready();
    }
    std::uint64_t incarnation(std::size_t i) const {
        return hosts_[i]->incarnation;
    }

    const std::vector<TrafficSample>& traffic() const { return traffic_; }
    std::vector<TrafficSample> take_traffic() { return std::move(traffic_); }
    const SimStats& stats() const { return stats_; }
    SimStats& mutable_stats() { return stats_; }

    /// Extra tap on every ManagerEvent, for tests.
    void set_event_tap(std::function<void(const ManagerEvent&)> tap) {
        event_tap_ = std::move(tap);
    }

    void set_online(std::size_t i, bool up) {
        Host& h = *hosts_[i];
        if (h.online == up) return;
        h.incarnation++;
        h.online = up;
        h.busy_until = now();
        h.node.reset_incarnation();
    }

    /// Serialize work onto node i's single thread of control: the function
    /// runs after `service` seconds of (queued) processing time, unless the
    /// node restarts first.
    void post_work(std::size_t i, double service, std::function<void()> fn) {
        Host& h = *hosts_[i];
        assert(h.online);
        const std::uint64_t inc = h.incarnation;
        const double start = std::max(now(), h.busy_until);
        h.busy_until = start + service;
        queue_.at(start + service, [this, i, inc, fn = std::move(fn)] {
            Host& h2 = *hosts_[i];
            if (!h2.online || h2.incarnation != inc) return;
            fn();
        });
    }

    /// Run every queued event; the clock advances as far as the events go.
    void run_until_idle() { queue_.run_all(); }
    void run_until(double t) { queue_.run_until(t); }

private:
    struct Host {
        explicit Host(ChordNode n) : node(std::move(n)) {}
        ChordNode node;
        bool online = false;
        std::uint64_t incarnation = 0;
        double busy_until = 0.0;
    };

    struct CallState {
        bool completed = false;
    };

    ChordNode make_node(std::uint32_t index) {
        const std::string key = "node-" + std::to_string(index);
        PeerRef self{ring_.id_from_key(key), index};
        ChordNode::Services services;
        services.now = [this] { return now(); };
        services.rpc = [this, index](const PeerRef& to, RpcRequest req,
                                     ChordNode::RpcCallback cb) {
            send_rpc(index, to, std::move(req), std::move(cb));
        };
        services.on_event = [this](const ManagerEvent& ev) {
            if (ev.kind == EventKind::access_error)
                stats_.access_error_events++;
            else
                stats_.wasted_maintenance_events++;
            if (event_tap_) event_tap_(ev);
        };
        return ChordNode(self, ring_, params_.successor_list_len,
                         params_.initial_interval, std::move(services));
    }

    double travel_time(std::uint32_t bytes) {
        const double nominal =
            params_.latency.base + bytes * params_.latency.per_byte;
        const double j = params_.latency.jitter_frac;
        return nominal * (1.0 + jitter_.uniform(-j, j));
    }

    void send_rpc(std::size_t from, const PeerRef& to, RpcRequest req,
                  ChordNode::RpcCallback cb) {
        Host& hf = *hosts_[from];
        assert(hf.online);
        if (to.address == from) {
            // Local access: no transport, no failure.
            cb(hf.node.handle(req));
            return;
        }
        stats_.rpcs_sent++;
        const std::uint32_t bytes = message_size(req);
        traffic_.push_back(TrafficSample{hf.node.id(), now(), bytes});

        auto call = std::make_shared<CallState>();
        const std::uint64_t caller_inc = hf.incarnation;

        queue_.after(params_.latency.rpc_timeout,
                     [this, from, caller_inc, call, cb] {
                         if (call->completed) return;
                         Host& h = *hosts_[from];
                         if (!h.online || h.incarnation != caller_inc) return;
                         call->completed = true;
                         stats_.failed_calls++;
                         cb(std::nullopt);
                     });

        queue_.after(
            travel_time(bytes),
            [this, from, caller_inc, to, call, cb, req = std::move(req)] {
                Host& ht = *hosts_[to.address];
                // Offline or still-joining nodes never respond; the caller
                // times out.
                if (!ht.online || !ht.node.ready()) return;
                post_work(to.address, params_.cpu.per_message,
                          [this, from, caller_inc, to, call, cb, req] {
                              deliver_response(from, caller_inc, to.address,
                                               call, cb, req);
                          });
            });
    }

    void deliver_response(std::size_t from, std::uint64_t caller_inc,
                          std::size_t target, std::shared_ptr<CallState> call,
                          ChordNode::RpcCallback cb, const RpcRequest& req) {
        Host& ht = *hosts_[target];
        // Ships one response back to the caller; for relayed lookups this
        // runs when the downstream chain completes.
        auto ship = [this, from, caller_inc, target, call,
                     cb = std::move(cb)](RpcResponse resp) {
            Host& h = *hosts_[target];
            const std::uint32_t bytes = message_size(resp);
            traffic_.push_back(TrafficSample{h.node.id(), now(), bytes});
            queue_.after(
                travel_time(bytes),
                [this, from, caller_inc, call, cb, resp = std::move(resp)] {
                    Host& hf = *hosts_[from];
                    if (!hf.online || hf.incarnation != caller_inc) return;
                    if (call->completed) return;
                    post_work(from, params_.cpu.per_message,
                              [call, cb, resp = std::move(resp)]() mutable {
                                  if (call->completed) return;
                                  call->completed = true;
                                  cb(std::move(resp));
                              });
                });
        };
        if (ChordNode::is_routed(req)) {
            ht.node.handle_routed(req, std::move(ship));
        } else {
            ship(ht.node.handle(req));
        }
    }

    SimParams params_;
    Ring ring_;
    EventQueue queue_;
    Substream jitter_;
    std::vector<std::unique_ptr<Host>> hosts_;
    std::vector<TrafficSample> traffic_;
    SimStats stats_;
    std::function<void(const ManagerEvent&)> event_tap_;
};

}  // namespace autochord
