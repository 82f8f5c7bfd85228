#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "autochord/autonomic.hpp"
#include "autochord/churn.hpp"
#include "autochord/node.hpp"
#include "autochord/simnet.hpp"
#include "autochord/workload.hpp"

namespace autochord {

/// Scheduling policy of an experiment cell. policy0 is the unmanaged
/// baseline; policy1 reacts slowly (k_WMC=8, k_EC=32); policy2 aggressively
/// (k=1 for both). Custom dampening factors are allowed.
struct PolicySpec {
    std::string name = "policy0";
    PolicyMode mode = PolicyMode::null_policy;
    double k_wmc = 1.0;
    double k_ec = 1.0;

    static PolicySpec policy0() { return {"policy0", PolicyMode::null_policy, 1, 1}; }
    static PolicySpec policy1() { return {"policy1", PolicyMode::autonomic, 8, 32}; }
    static PolicySpec policy2() { return {"policy2", PolicyMode::autonomic, 1, 1}; }
    static PolicySpec custom(double k_wmc, double k_ec) {
        PolicySpec p;
        p.name = "custom:" + format_k(k_wmc) + ":" + format_k(k_ec);
        p.mode = PolicyMode::autonomic;
        p.k_wmc = k_wmc;
        p.k_ec = k_ec;
        return p;
    }

private:
    static std::string format_k(double k) {
        std::string s = std::to_string(k);
        while (!s.empty() && s.back() == '0') s.pop_back();
        if (!s.empty() && s.back() == '.') s.pop_back();
        return s;
    }
};

/// One cell of the experiment matrix, fully determining a run together with
/// its seed.
struct RunConfig {
    WorkloadKind workload = WorkloadKind::light;
    ChurnKind churn = ChurnKind::low;
    PolicySpec policy = PolicySpec::policy0();
    std::uint32_t node_count = 16;
    std::uint64_t seed = 1;
    double horizon = 7200.0;
    bool retry_on_error = false;
    double window = 300.0;
    double join_retry_delay = 1.0;

    SimParams sim;                  // node_count and seed are copied in
    ChurnPattern churn_pattern;     // kind is copied in
    PolicyConfig manager;           // mode and dampening copied from policy

    PolicyConfig manager_config() const {
        PolicyConfig cfg = manager;
        cfg.mode = policy.mode;
        cfg.k_wmc = policy.k_wmc;
        cfg.k_ec = policy.k_ec;
        cfg.initial_interval = sim.initial_interval;
        cfg.validate();
        return cfg;
    }
};

/// One workload lookup as logged. In retry mode a row covers the whole
/// retry-until-success span.
struct LookupRow {
    double start = 0.0;
    double end = 0.0;
    NodeId key;
    bool success = false;
    LookupError error = LookupError::none;
};

struct RunResult {
    std::vector<LookupRow> lookups;
    std::vector<TrafficSample> traffic;
    std::vector<ManagerCycleRecord> manager;
    SimStats stats;
    double duration = 0.0;
    std::uint32_t node_count = 0;
    double workload_completed_at = -1.0;  // negative: cut off by the horizon
};

/// Drives one experiment: N nodes under a churn pattern, a workload executor
/// issuing lookups through rotating entry nodes, and one autonomic manager
/// per node. Fully deterministic for a given RunConfig.
class Experiment {
public:
    explicit Experiment(RunConfig cfg)
        : cfg_(std::move(cfg)),
          net_(prepared_params(cfg_)),
          manager_cfg_(cfg_.manager_config()),
          workload_(WorkloadSpec::make(cfg_.workload)),
          keys_(cfg_.seed, "workload-keys"),
          shape_(cfg_.seed, "workload-shape"),
          think_(cfg_.seed, "workload-think") {
        sched_.resize(net_.size());
        cfg_.churn_pattern.kind = cfg_.churn;
    }

    RunResult run() {
        setup_lifecycles();
        net_.queue().at(0.0, [this] { workload_begin(); });

        auto& queue = net_.queue();
        while (!queue.empty()) {
            const double end = current_end();
            if (queue.next_time() > end) break;
            queue.step();
        }
        const double end = current_end();
        queue.run_until(end);

        RunResult result;
        result.lookups = std::move(lookups_);
        std::stable_sort(result.lookups.begin(), result.lookups.end(),
                         [](const LookupRow& a, const LookupRow& b) {
                             if (a.start != b.start) return a.start < b.start;
                             return a.end < b.end;
                         });
        result.traffic = net_.take_traffic();
        result.manager = std::move(manager_rows_);
        result.stats = net_.stats();
        result.duration = end;
        result.node_count = static_cast<std::uint32_t>(net_.size());
        result.workload_completed_at = workload_done_at_;
        return result;
    }

    Network& network() { return net_; }

private:
    struct MaintSched {
        double last_done = 0.0;
        bool running = false;
        bool pending_immediate = false;
        std::uint64_t gen = 0;
    };

    struct LogicalLookup {
        NodeId key;
        double start = 0.0;
        std::uint32_t attempts = 0;
        std::function<void(bool)> done;
    };

    struct PendingAttempt {
        std::shared_ptr<LogicalLookup> lookup;
        std::size_t entry = 0;
    };

    static SimParams prepared_params(RunConfig& cfg) {
        cfg.sim.node_count = cfg.node_count;
        cfg.sim.seed = cfg.seed;
        return cfg.sim;
    }

    double current_end() const {
        if (workload_done_at_ >= 0.0)
            return std::min(cfg_.horizon, workload_done_at_ + cfg_.window);
        return cfg_.horizon;
    }

    std::function<void()> guarded(std::size_t i, std::function<void()> fn) {
        const std::uint64_t inc = net_.incarnation(i);
        return [this, i, inc, fn = std::move(fn)] {
            if (net_.online(i) && net_.incarnation(i) == inc) fn();
        };
    }

    // ---- lifecycle ---------------------------------------------------------

    void setup_lifecycles() {
        const auto n = static_cast<std::uint32_t>(net_.size());
        for (std::uint32_t i = 0; i < n; ++i) {
            const auto phases = generate_lifecycle(cfg_.churn_pattern, i, n,
                                                   cfg_.seed, cfg_.horizon);
            for (const auto& phase : phases) {
                if (!phase.online) continue;
                net_.queue().at(phase.start, [this, i] { node_online(i); });
                if (phase.end < cfg_.horizon)
                    net_.queue().at(phase.end, [this, i] { node_offline(i); });
            }
        }
    }

    void node_online(std::size_t i) {
        net_.set_online(i, true);
        sched_[i] = MaintSched{};
        schedule_cycle(i, net_.now(), 1);
        attempt_join(i);
    }

    void node_offline(std::size_t i) {
        net_.set_online(i, false);
        abort_attempts_on(i);
    }

    // ---- joining -----------------------------------------------------------

    void attempt_join(std::size_t i) {
        if (!net_.online(i) || net_.node(i).ready()) return;
        std::optional<std::size_t> bootstrap;
        for (std::size_t j = 0; j < net_.size(); ++j) {
            if (j == i) continue;
            if (net_.ready(j)) {
                bootstrap = j;
                break;
            }
        }
        if (!bootstrap) {
            net_.node(i).become_singleton();
            node_ready(i);
            return;
        }
        net_.node(i).start_join(
            net_.node(*bootstrap).self(),
            guarded_bool(i, [this, i](bool ok) {
                if (ok) {
                    node_ready(i);
                } else {
                    net_.queue().after(cfg_.join_retry_delay,
                                       guarded(i, [this, i] { attempt_join(i); }));
                }
            }));
    }

    std::function<void(bool)> guarded_bool(std::size_t i,
                                           std::function<void(bool)> fn) {
        const std::uint64_t inc = net_.incarnation(i);
        return [this, i, inc, fn = std::move(fn)](bool v) {
            if (net_.online(i) && net_.incarnation(i) == inc) fn(v);
        };
    }

    void node_ready(std::size_t i) {
        sched_[i].last_done = net_.now();
        schedule_maintain(i);
    }

    // ---- maintenance scheduling ---------------------------------------------

    void schedule_maintain(std::size_t i) {
        MaintSched& s = sched_[i];
        const std::uint64_t gen = ++s.gen;
        const double at =
            std::max(net_.now(),
                     s.last_done + net_.node(i).maintenance_interval());
        net_.queue().at(at, guarded(i, [this, i, gen] {
                            if (sched_[i].gen != gen) return;
                            start_maintain(i);
                        }));
    }

    void start_maintain(std::size_t i) {
        MaintSched& s = sched_[i];
        if (s.running || !net_.ready(i)) return;
        s.running = true;
        net_.post_work(i, net_.params().cpu.per_maintenance, [this, i] {
            net_.node(i).start_maintain(
                [this, i](MaintenanceReport rep) { maintain_done(i, rep); });
        });
    }

    void maintain_done(std::size_t i, const MaintenanceReport& rep) {
        auto& stats = net_.mutable_stats();
        stats.maintains_completed++;
        if (!rep.changed) stats.maintains_unchanged++;
        MaintSched& s = sched_[i];
        s.running = false;
        s.last_done = net_.now();
        if (s.pending_immediate) {
            s.pending_immediate = false;
            start_maintain(i);
        } else {
            schedule_maintain(i);
        }
    }

    /// At most one immediate operation is queued per cycle; its completion
    /// re-anchors the periodic timer.
    void trigger_immediate(std::size_t i) {
        if (!net_.ready(i)) return;
        MaintSched& s = sched_[i];
        if (s.running) {
            s.pending_immediate = true;
            return;
        }
        ++s.gen;  // cancel the pending periodic firing
        start_maintain(i);
    }

    // ---- autonomic manager cycles -------------------------------------------

    void schedule_cycle(std::size_t i, double anchor, std::uint64_t k) {
        net_.queue().at(anchor + static_cast<double>(k) *
                                     manager_cfg_.cycle_duration,
                        guarded(i, [this, i, anchor, k] {
                            run_cycle(i);
                            schedule_cycle(i, anchor, k + 1);
                        }));
    }

    void run_cycle(std::size_t i) {
        ChordNode& node = net_.node(i);
        const CycleMetrics metrics = count_events(node.drain_events());
        const double before = node.maintenance_interval();
        const CycleDecision decision =
            evaluate_cycle(before, metrics, manager_cfg_);
        node.set_maintenance_interval(decision.new_interval);
        if (decision.new_interval != before && !sched_[i].running &&
            node.ready()) {
            schedule_maintain(i);
        }
        manager_rows_.push_back(ManagerCycleRecord{
            net_.now(), node.id(), metrics.wmc, metrics.ec, before,
            decision.new_interval, decision.immediate_maintenance});
        if (decision.immediate_maintenance) trigger_immediate(i);
    }

    // ---- workload -----------------------------------------------------------

    void workload_begin() {
        switch (workload_.kind) {
            case WorkloadKind::light:
            case WorkloadKind::heavy:
                issue_sequential();
                break;
            case WorkloadKind::variable:
                batch_left_ = workload_.batch_size;
                issue_sequential();
                break;
            case WorkloadKind::file_system:
                next_group();
                break;
        }
    }

    NodeId draw_key() {
        return NodeId{keys_.next_u64() & net_.ring().mask()};
    }

    void issue_sequential() {
        if (issued_ >= workload_.total_lookups) return;
        issued_++;
        start_logical_lookup(draw_key(), [this](bool) {
            if (completed_all()) return;
            double gap = 0.0;
            if (workload_.kind == WorkloadKind::light) {
                gap = workload_.gap;
            } else if (workload_.kind == WorkloadKind::variable) {
                if (--batch_left_ == 0) {
                    batch_left_ = workload_.batch_size;
                    gap = workload_.gap;
                }
            }
            if (gap > 0.0)
                net_.queue().after(gap, [this] { issue_sequential(); });
            else
                issue_sequential();
        });
    }

    void next_group() {
        if (issued_ >= workload_.total_lookups) return;
        const std::uint32_t left = workload_.total_lookups - issued_;
        const bool parallel =
            shape_.next_double() < workload_.parallel_fraction;
        if (parallel && left >= 2) {
            std::uint32_t fan =
                workload_.fanout_min +
                static_cast<std::uint32_t>(shape_.uniform_u64(
                    workload_.fanout_max - workload_.fanout_min + 1));
            fan = std::min({fan, left, workload_.parallelism});
            auto remaining = std::make_shared<std::uint32_t>(fan);
            for (std::uint32_t f = 0; f < fan; ++f) {
                issued_++;
                start_logical_lookup(draw_key(), [this, remaining](bool) {
                    if (--*remaining == 0 && !completed_all()) think_then(
                        [this] { next_group(); });
                });
            }
        } else {
            const std::uint32_t len =
                std::min(left, workload_.seq_run_min +
                                   static_cast<std::uint32_t>(shape_.uniform_u64(
                                       workload_.seq_run_max -
                                       workload_.seq_run_min + 1)));
            run_sequence(len);
        }
    }

    void run_sequence(std::uint32_t remaining) {
        issued_++;
        start_logical_lookup(draw_key(), [this, remaining](bool) {
            if (completed_all()) return;
            if (remaining > 1)
                think_then([this, remaining] { run_sequence(remaining - 1); });
            else
                think_then([this] { next_group(); });
        });
    }

    void think_then(std::function<void()> fn) {
        net_.queue().after(think_.exponential(workload_.think_mean),
                           std::move(fn));
    }

    bool completed_all() const {
        return completed_ >= workload_.total_lookups;
    }

    void start_logical_lookup(NodeId key, std::function<void(bool)> done) {
        auto lookup = std::make_shared<LogicalLookup>();
        lookup->key = key;
        lookup->start = net_.now();
        lookup->done = std::move(done);
        try_attempt(lookup);
    }

    void try_attempt(const std::shared_ptr<LogicalLookup>& lookup) {
        const auto entry = pick_entry();
        if (!entry) {
            // No node has a formed overlay yet; wait and retry.
            net_.queue().after(1.0, [this, lookup] { try_attempt(lookup); });
            return;
        }
        const std::size_t i = *entry;
        pending_.push_back(PendingAttempt{lookup, i});
        net_.post_work(i, net_.params().cpu.per_message, [this, lookup, i] {
            net_.node(i).start_lookup(
                lookup->key,
                [this, lookup](std::optional<PeerRef> result, LookupError e) {
                    attempt_finished(lookup, result.has_value(), e);
                });
        });
    }

    std::optional<std::size_t> pick_entry() {
        const std::size_t n = net_.size();
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = (rotation_ + k) % n;
            if (net_.ready(i)) {
                rotation_ = (i + 1) % n;
                return i;
            }
        }
        return std::nullopt;
    }

    void abort_attempts_on(std::size_t i) {
        std::vector<std::shared_ptr<LogicalLookup>> aborted;
        std::erase_if(pending_, [&](const PendingAttempt& p) {
            if (p.entry != i) return false;
            aborted.push_back(p.lookup);
            return true;
        });
        for (auto& lookup : aborted)
            attempt_finished(lookup, false, LookupError::entry_offline,
                             /*in_pending=*/false);
    }

    void attempt_finished(const std::shared_ptr<LogicalLookup>& lookup,
                          bool success, LookupError error,
                          bool in_pending = true) {
        if (in_pending) {
            std::erase_if(pending_, [&](const PendingAttempt& p) {
                return p.lookup == lookup;
            });
        }
        if (!success && cfg_.retry_on_error) {
            lookup->attempts++;
            try_attempt(lookup);
            return;
        }
        lookups_.push_back(LookupRow{lookup->start, net_.now(), lookup->key,
                                     success,
                                     success ? LookupError::none : error});
        completed_++;
        if (completed_ >= workload_.total_lookups && workload_done_at_ < 0.0)
            workload_done_at_ = net_.now();
        lookup->done(success);
    }

    RunConfig cfg_;
    Network net_;
    PolicyConfig manager_cfg_;
    WorkloadSpec workload_;
    Substream keys_;
    Substream shape_;
    Substream think_;

    std::vector<MaintSched> sched_;
    std::vector<ManagerCycleRecord> manager_rows_;
    std::vector<LookupRow> lookups_;
    std::vector<PendingAttempt> pending_;
    std::uint32_t issued_ = 0;
    std::uint32_t completed_ = 0;
    std::uint32_t batch_left_ = 0;
    std::size_t rotation_ = 0;
    double workload_done_at_ = -1.0;
};

inline RunResult run_experiment(const RunConfig& cfg) {
    Experiment exp(cfg);
    return exp.run();
}

}  // namespace autochord
