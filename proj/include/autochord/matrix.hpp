#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "autochord/config.hpp"
#include "autochord/csv.hpp"
#include "autochord/experiment.hpp"
#include "autochord/metrics.hpp"

namespace autochord {

struct CellSpec {
    WorkloadKind workload = WorkloadKind::light;
    ChurnKind churn = ChurnKind::low;
    PolicySpec policy;
};

inline std::string cell_token(const CellSpec& c) {
    return std::string(workload_name(c.workload)) + "-" +
           std::string(churn_name(c.churn)) + "-" + c.policy.name;
}

/// Matrix-level base seed -> per-cell seed; repeat r runs with cell seed + r,
/// so cells are independent and repeats distinct.
inline std::uint64_t cell_seed(std::uint64_t base, const CellSpec& c) {
    return splitmix64(base ^ fnv1a64(cell_token(c)));
}

/// Per-window mean maintenance interval, optionally split into low-churn and
/// high-churn node groups (locally varying churn only).
struct IntervalPoint {
    int window_index = 0;
    std::string group;  // all | lcn | hcn
    double mean_interval = 0.0;
};

struct RunSummary {
    int repeat = 0;
    std::uint64_t seed = 0;
    double duration = 0.0;
    std::optional<double> elt_window_mean;  // mean over windows with a value
    std::optional<double> elt_single;
    double nu_window_mean = 0.0;
    double nu_single = 0.0;
    std::vector<WindowMetrics> windows;
    std::vector<IntervalPoint> intervals;
};

struct CellResult {
    CellSpec spec;
    std::vector<RunSummary> runs;
    // Means over repeats.
    std::optional<double> elt_window_mean;
    std::optional<double> elt_single;
    double nu_window_mean = 0.0;
    double nu_single = 0.0;
    // Normalalized against the policy0 cell of the same workload x churn.
    std::optional<double> elt_window_norm;
    std::optional<double> elt_single_norm;
    std::optional<double> nu_window_norm;
    std::optional<double> nu_single_norm;
};

struct MatrixOptions {
    std::string only;        // cell token filter; empty = all
    unsigned jobs = 1;       // parallel runs
    bool write_raw = true;   // write lookups/traffic/manager.csv per run
    bool write_files = true; // write anything at all
};

struct MatrixResult {
    std::vector<CellResult> cells;
    std::filesystem::path out_dir;
};

inline void write_matrix_artifacts(const MatrixConfig& cfg,
                                   const MatrixResult& result);

namespace detail {

inline std::optional<double> mean_opt(const std::vector<std::optional<double>>& v) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& x : v)
        if (x) {
            sum += *x;
            n++;
        }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

inline double mean(const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return v.empty() ? 0.0 : sum / static_cast<double>(v.size());
}

inline std::optional<double> median_of(std::vector<double> v) {
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

inline std::vector<IntervalPoint> interval_progression(
    const RunResult& result, const MatrixConfig& cfg, ChurnKind churn) {
    // Map node ids back to indices to split the local-churn groups.
    Ring ring(cfg.sim.ring_bits);
    std::map<std::uint64_t, std::uint32_t> index_of;
    for (std::uint32_t i = 0; i < cfg.nodes; ++i)
        index_of[ring.id_from_key("node-" + std::to_string(i)).value] = i;
    const auto low_cutoff = static_cast<std::uint32_t>(
        std::ceil(ChurnPattern{}.local_low_fraction * cfg.nodes));

    const int nwin = result.duration > 0.0
                         ? static_cast<int>(
                               std::ceil(result.duration / cfg.window))
                         : 0;
    struct Acc {
        double sum = 0.0;
        std::uint64_t n = 0;
    };
    std::vector<Acc> all(nwin), lcn(nwin), hcn(nwin);
    for (const auto& row : result.manager) {
        int w = static_cast<int>(row.time / cfg.window);
        if (w < 0 || nwin == 0) continue;
        if (w >= nwin) w = nwin - 1;
        all[w].sum += row.interval_after;
        all[w].n++;
        if (churn == ChurnKind::local) {
            const auto it = index_of.find(row.node.value);
            if (it != index_of.end()) {
                auto& acc = it->second < low_cutoff ? lcn[w] : hcn[w];
                acc.sum += row.interval_after;
                acc.n++;
            }
        }
    }
    std::vector<IntervalPoint> out;
    for (int w = 0; w < nwin; ++w) {
        if (all[w].n)
            out.push_back(
                {w, "all", all[w].sum / static_cast<double>(all[w].n)});
        if (churn == ChurnKind::local) {
            if (lcn[w].n)
                out.push_back(
                    {w, "lcn", lcn[w].sum / static_cast<double>(lcn[w].n)});
            if (hcn[w].n)
                out.push_back(
                    {w, "hcn", hcn[w].sum / static_cast<double>(hcn[w].n)});
        }
    }
    return out;
}

inline std::string format_intervals(const std::vector<IntervalPoint>& points) {
    csv::Writer w;
    w.field_str("window_index,group,mean_interval");
    w.end_row();
    for (const auto& p : points) {
        w.field_u64(static_cast<std::uint64_t>(p.window_index));
        w.sep();
        w.field_str(p.group);
        w.sep();
        w.field_time(p.mean_interval);
        w.end_row();
    }
    return w.str();
}

inline std::vector<LookupObservation> observations(const RunResult& r) {
    std::vector<LookupObservation> out;
    out.reserve(r.lookups.size());
    for (const auto& l : r.lookups)
        out.push_back(LookupObservation{l.start, l.end, l.success});
    return out;
}

}  // namespace detail

inline RunConfig make_run_config(const MatrixConfig& cfg, const CellSpec& cell,
                                 int repeat) {
    RunConfig rc;
    rc.workload = cell.workload;
    rc.churn = cell.churn;
    rc.policy = cell.policy;
    rc.node_count = cfg.nodes;
    rc.seed = cell_seed(cfg.seed, cell) + static_cast<std::uint64_t>(repeat);
    rc.horizon = cfg.horizon;
    rc.retry_on_error = cfg.retry_on_error;
    rc.window = cfg.window;
    rc.join_retry_delay = cfg.join_retry_delay;
    rc.sim = cfg.sim;
    rc.manager = cfg.manager;
    return rc;
}

/// Runs one cell repeat, computes its metrics and (optionally) writes the
/// per-run artifacts.
inline RunSummary execute_run(const MatrixConfig& cfg, const CellSpec& cell,
                              int repeat, const MatrixOptions& opt) {
    const RunConfig rc = make_run_config(cfg, cell, repeat);
    const RunResult result = run_experiment(rc);

    RunSummary s;
    s.repeat = repeat;
    s.seed = rc.seed;
    s.duration = result.duration;
    const auto obs = detail::observations(result);
    s.windows = window_metrics(obs, result.traffic, result.duration, cfg.nodes,
                               cfg.window);
    const auto single =
        single_value_metrics(obs, result.traffic, result.duration, cfg.nodes);
    s.elt_single = single.elt;
    s.nu_single = single.nu;
    {
        double sum = 0.0;
        std::size_t n = 0;
        double nu_sum = 0.0;
        for (const auto& w : s.windows) {
            if (w.elt) {
                sum += *w.elt;
                n++;
            }
            nu_sum += w.nu;
        }
        if (n) s.elt_window_mean = sum / static_cast<double>(n);
        s.nu_window_mean = s.windows.empty()
                               ? 0.0
                               : nu_sum / static_cast<double>(s.windows.size());
    }
    s.intervals = detail::interval_progression(result, cfg, cell.churn);

    if (opt.write_files) {
        const std::filesystem::path dir = std::filesystem::path(cfg.output_dir) /
                                          cell_token(cell) /
                                          ("r" + std::to_string(repeat));
        if (opt.write_raw) {
            csv::save(csv::format_lookups(result.lookups), dir / "lookups.csv");
            csv::save(csv::format_traffic(result.traffic), dir / "traffic.csv");
            csv::save(csv::format_manager(result.manager), dir / "manager.csv");
        }
        csv::save(csv::format_windows(s.windows), dir / "windows.csv");
        csv::save(detail::format_intervals(s.intervals), dir / "intervals.csv");
    }
    return s;
}

inline std::vector<CellSpec> matrix_cells(const MatrixConfig& cfg) {
    std::vector<CellSpec> cells;
    for (const auto w : cfg.workloads)
        for (const auto c : cfg.churns)
            for (const auto& p : cfg.policies)
                cells.push_back(CellSpec{w, c, p});
    return cells;
}

inline MatrixResult run_matrix(const MatrixConfig& cfg,
                               const MatrixOptions& opt = {}) {
    std::vector<CellSpec> cells = matrix_cells(cfg);
    if (!opt.only.empty()) {
        std::erase_if(cells, [&](const CellSpec& c) {
            return cell_token(c) != opt.only;
        });
        if (cells.empty())
            throw std::invalid_argument("--only matches no cell: " + opt.only);
    }

    struct Task {
        std::size_t cell_index;
        int repeat;
    };
    std::vector<Task> tasks;
    for (std::size_t ci = 0; ci < cells.size(); ++ci)
        for (int r = 0; r < cfg.repeats; ++r) tasks.push_back({ci, r});

    std::vector<std::vector<RunSummary>> runs(cells.size());
    for (auto& v : runs)
        v.resize(static_cast<std::size_t>(cfg.repeats));

    const unsigned jobs = std::max(1u, opt.jobs);
    if (jobs == 1) {
        for (const auto& t : tasks)
            runs[t.cell_index][static_cast<std::size_t>(t.repeat)] =
                execute_run(cfg, cells[t.cell_index], t.repeat, opt);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        std::atomic<bool> failed{false};
        std::string error;
        std::mutex error_mutex;
        for (unsigned j = 0; j < jobs; ++j) {
            workers.emplace_back([&] {
                while (true) {
                    const std::size_t k = next.fetch_add(1);
                    if (k >= tasks.size() || failed.load()) return;
                    const Task& t = tasks[k];
                    try {
                        runs[t.cell_index][static_cast<std::size_t>(t.repeat)] =
                            execute_run(cfg, cells[t.cell_index], t.repeat, opt);
                    } catch (const std::exception& e) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        error = e.what();
                        failed.store(true);
                        return;
                    }
                }
            });
        }
        for (auto& w : workers) w.join();
        if (failed.load()) throw std::runtime_error(error);
    }

    MatrixResult result;
    result.out_dir = cfg.output_dir;
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        CellResult cr;
        cr.spec = cells[ci];
        cr.runs = std::move(runs[ci]);
        std::vector<std::optional<double>> ew, es;
        std::vector<double> nw, ns;
        for (const auto& r : cr.runs) {
            ew.push_back(r.elt_window_mean);
            es.push_back(r.elt_single);
            nw.push_back(r.nu_window_mean);
            ns.push_back(r.nu_single);
        }
        cr.elt_window_mean = detail::mean_opt(ew);
        cr.elt_single = detail::mean_opt(es);
        cr.nu_window_mean = detail::mean(nw);
        cr.nu_single = detail::mean(ns);
        result.cells.push_back(std::move(cr));
    }

    // Normalize each managed cell against its policy0 counterpart, repeat by
    // repeat.
    auto find_baseline = [&](const CellSpec& spec) -> const CellResult* {
        for (const auto& c : result.cells) {
            if (c.spec.workload == spec.workload &&
                c.spec.churn == spec.churn &&
                c.spec.policy.mode == PolicyMode::null_policy)
                return &c;
        }
        return nullptr;
    };
    for (auto& c : result.cells) {
        if (c.spec.policy.mode == PolicyMode::null_policy) {
            c.elt_window_norm = c.elt_window_mean ? std::optional(1.0)
                                                   : std::nullopt;
            c.elt_single_norm = c.elt_single ? std::optional(1.0) : std::nullopt;
            c.nu_window_norm = 1.0;
            c.nu_single_norm = 1.0;
            continue;
        }
        const CellResult* base = find_baseline(c.spec);
        if (!base) continue;
        std::vector<std::optional<double>> ewn, esn, nwn, nsn;
        const std::size_t reps = std::min(c.runs.size(), base->runs.size());
        for (std::size_t r = 0; r < reps; ++r) {
            ewn.push_back(normalize_windows(c.runs[r].windows,
                                            base->runs[r].windows, true));
            nwn.push_back(normalize_windows(c.runs[r].windows,
                                            base->runs[r].windows, false));
            esn.push_back(
                normalize(c.runs[r].elt_single, base->runs[r].elt_single));
            nsn.push_back(normalize(c.runs[r].nu_single,
                                    std::optional(base->runs[r].nu_single)));
        }
        c.elt_window_norm = detail::mean_opt(ewn);
        c.nu_window_norm = detail::mean_opt(nwn);
        c.elt_single_norm = detail::mean_opt(esn);
        c.nu_single_norm = detail::mean_opt(nsn);
    }

    if (opt.write_files) write_matrix_artifacts(cfg, result);
    return result;
}

// ---- matrix artifacts -------------------------------------------------------

struct WinnerRow {
    std::string metric_version;  // window | single
    std::string policy;
    int elt_wins = 0;
    int nu_wins = 0;
    int both_wins = 0;
};

/// Per (workload, churn) and metric version, the policy with the lowest ELT,
/// the lowest NU, and both at once. A missing ELT never wins.
inline std::vector<WinnerRow> compute_winners(
    const std::vector<CellResult>& cells) {
    struct Key {
        WorkloadKind w;
        ChurnKind c;
        bool operator<(const Key& o) const {
            return std::tie(w, c) < std::tie(o.w, o.c);
        }
    };
    std::map<Key, std::vector<const CellResult*>> groups;
    std::vector<std::string> policies;
    for (const auto& cell : cells) {
        groups[{cell.spec.workload, cell.spec.churn}].push_back(&cell);
        if (std::find(policies.begin(), policies.end(),
                      cell.spec.policy.name) == policies.end())
            policies.push_back(cell.spec.policy.name);
    }
    std::vector<WinnerRow> rows;
    for (const char* version : {"window", "single"}) {
        const bool window = std::string(version) == "window";
        std::map<std::string, WinnerRow> tally;
        for (const auto& name : policies)
            tally[name] = WinnerRow{version, name, 0, 0, 0};
        for (const auto& [key, group] : groups) {
            const CellResult* best_elt = nullptr;
            const CellResult* best_nu = nullptr;
            for (const auto* cell : group) {
                const auto elt =
                    window ? cell->elt_window_mean : cell->elt_single;
                const double nu =
                    window ? cell->nu_window_mean : cell->nu_single;
                if (elt && (!best_elt ||
                            *elt < *(window ? best_elt->elt_window_mean
                                            : best_elt->elt_single)))
                    best_elt = cell;
                const double best_nu_val =
                    best_nu ? (window ? best_nu->nu_window_mean
                                      : best_nu->nu_single)
                            : 0.0;
                if (!best_nu || nu < best_nu_val) best_nu = cell;
            }
            if (best_elt) tally[best_elt->spec.policy.name].elt_wins++;
            if (best_nu) tally[best_nu->spec.policy.name].nu_wins++;
            if (best_elt && best_nu && best_elt == best_nu)
                tally[best_elt->spec.policy.name].both_wins++;
        }
        for (const auto& name : policies) rows.push_back(tally[name]);
    }
    return rows;
}

inline void write_matrix_artifacts(const MatrixConfig& cfg,
                                   const MatrixResult& result) {
    namespace fs = std::filesystem;
    const fs::path out = cfg.output_dir;

    {
        csv::Writer w;
        w.field_str(
            "workload,churn,policy,repeat,seed,duration,elt_window_mean,"
            "elt_single,nu_window_mean,nu_single");
        w.end_row();
        for (const auto& cell : result.cells) {
            for (const auto& run : cell.runs) {
                w.field_str(workload_name(cell.spec.workload));
                w.sep();
                w.field_str(churn_name(cell.spec.churn));
                w.sep();
                w.field_str(cell.spec.policy.name);
                w.sep();
                w.field_u64(static_cast<std::uint64_t>(run.repeat));
                w.sep();
                w.field_u64(run.seed);
                w.sep();
                w.field_time(run.duration);
                w.sep();
                if (run.elt_window_mean) w.field_time(*run.elt_window_mean);
                w.sep();
                if (run.elt_single) w.field_time(*run.elt_single);
                w.sep();
                w.field_time(run.nu_window_mean);
                w.sep();
                w.field_time(run.nu_single);
                w.end_row();
            }
        }
        w.save(out / "runs.csv");
    }
    {
        csv::Writer w;
        w.field_str(
            "workload,churn,policy,repeats,elt_window_mean,elt_single,"
            "nu_window_mean,nu_single,elt_window_norm,elt_single_norm,"
            "nu_window_norm,nu_single_norm");
        w.end_row();
        for (const auto& cell : result.cells) {
            w.field_str(workload_name(cell.spec.workload));
            w.sep();
            w.field_str(churn_name(cell.spec.churn));
            w.sep();
            w.field_str(cell.spec.policy.name);
            w.sep();
            w.field_u64(cell.runs.size());
            w.sep();
            if (cell.elt_window_mean) w.field_time(*cell.elt_window_mean);
            w.sep();
            if (cell.elt_single) w.field_time(*cell.elt_single);
            w.sep();
            w.field_time(cell.nu_window_mean);
            w.sep();
            w.field_time(cell.nu_single);
            w.sep();
            if (cell.elt_window_norm) w.field_time(*cell.elt_window_norm);
            w.sep();
            if (cell.elt_single_norm) w.field_time(*cell.elt_single_norm);
            w.sep();
            if (cell.nu_window_norm) w.field_time(*cell.nu_window_norm);
            w.sep();
            if (cell.nu_single_norm) w.field_time(*cell.nu_single_norm);
            w.end_row();
        }
        w.save(out / "summary.csv");
    }
    {
        csv::Writer w;
        w.field_str("metric_version,policy,elt_wins,nu_wins,both_wins");
        w.end_row();
        for (const auto& row : compute_winners(result.cells)) {
            w.field_str(row.metric_version);
            w.sep();
            w.field_str(row.policy);
            w.sep();
            w.field_u64(static_cast<std::uint64_t>(row.elt_wins));
            w.sep();
            w.field_u64(static_cast<std::uint64_t>(row.nu_wins));
            w.sep();
            w.field_u64(static_cast<std::uint64_t>(row.both_wins));
            w.end_row();
        }
        w.save(out / "winners.csv");
    }
}

}  // namespace autochord
