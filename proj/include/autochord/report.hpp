#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "autochord/csv.hpp"
#include "autochord/matrix.hpp"
#include "autochord/metrics.hpp"

namespace autochord {

/// Raised by the report stage for problems in the input artifacts, e.g. a
/// missing policy0 baseline.
class ReportError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ReportCell {
    std::string workload;
    std::string churn;
    std::string policy;
    int repeats = 0;
    std::vector<std::optional<double>> elt_single;  // per repeat
    std::vector<double> nu_single;
    std::vector<std::vector<WindowMetrics>> windows;  // per repeat
};

struct NormalizedRow {
    std::string workload, churn, policy;
    std::optional<double> elt_window_norm, elt_single_norm;
    std::optional<double> nu_window_norm, nu_single_norm;
};

struct NsdRow {
    std::string workload, churn, policy;
    int window_index = 0;
    double nsd_value = 0.0;
};

struct ReportResult {
    std::vector<NormalizedRow> normalized;
    std::vector<NsdRow> nsd_rows;
    std::optional<double> median_nsd;
    // Per policy and metric version: mean and median normalized ELT/NU.
    struct SummaryRow {
        std::string policy, metric_version;
        std::optional<double> elt_mean, elt_median, nu_mean, nu_median;
    };
    std::vector<SummaryRow> summary;
};

namespace detail {

inline std::vector<ReportCell> load_cells(const std::filesystem::path& dir) {
    const auto rows = csv::read_rows(dir / "runs.csv");
    std::map<std::string, ReportCell> cells;
    std::vector<std::string> order;
    for (const auto& r : rows) {
        if (r.size() < 10)
            throw ReportError("runs.csv: malformed row");
        const std::string key = r[0] + "-" + r[1] + "-" + r[2];
        auto it = cells.find(key);
        if (it == cells.end()) {
            ReportCell c;
            c.workload = r[0];
            c.churn = r[1];
            c.policy = r[2];
            it = cells.emplace(key, std::move(c)).first;
            order.push_back(key);
        }
        ReportCell& cell = it->second;
        cell.repeats++;
        cell.elt_single.push_back(csv::parse_opt_double(r[7]));
        cell.nu_single.push_back(r[9].empty() ? 0.0 : std::stod(r[9]));
        const int repeat = std::stoi(r[3]);
        const auto wpath = dir / key / ("r" + std::to_string(repeat)) /
                           "windows.csv";
        std::vector<WindowMetrics> windows;
        for (const auto& wr : csv::read_rows(wpath)) {
            if (wr.size() < 3) throw ReportError("windows.csv: malformed row");
            WindowMetrics wm;
            wm.window_index = std::stoi(wr[0]);
            wm.elt = csv::parse_opt_double(wr[1]);
            wm.nu = std::stod(wr[2]);
            windows.push_back(wm);
        }
        cell.windows.push_back(std::move(windows));
    }
    std::vector<ReportCell> out;
    out.reserve(order.size());
    for (const auto& key : order) out.push_back(std::move(cells[key]));
    return out;
}

inline std::optional<double> mean_defined(
    const std::vector<std::optional<double>>& v) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& x : v)
        if (x) {
            sum += *x;
            n++;
        }
    if (!n) return std::nullopt;
    return sum / static_cast<double>(n);
}

}  // namespace detail

/// Builds the normalized tables and the NSD distribution from a matrix
/// output directory, writing normalized.csv, normalized_summary.csv, nsd.csv
/// and nsd_cdf.csv next to the inputs.
inline ReportResult report(const std::filesystem::path& dir,
                           bool write_files = true) {
    const auto cells = detail::load_cells(dir);

    auto baseline_of = [&](const ReportCell& c) -> const ReportCell* {
        for (const auto& b : cells)
            if (b.workload == c.workload && b.churn == c.churn &&
                b.policy == "policy0")
                return &b;
        return nullptr;
    };

    ReportResult result;

    for (const auto& c : cells) {
        if (c.policy == "policy0") continue;
        const ReportCell* base = baseline_of(c);
        if (!base)
            throw ReportError("missing policy0 baseline for cell " +
                              c.workload + "-" + c.churn);
        NormalizedRow row;
        row.workload = c.workload;
        row.churn = c.churn;
        row.policy = c.policy;
        std::vector<std::optional<double>> ewn, esn, nwn, nsn;
        const std::size_t reps = std::min(c.windows.size(), base->windows.size());
        for (std::size_t r = 0; r < reps; ++r) {
            ewn.push_back(normalize_windows(c.windows[r], base->windows[r], true));
            nwn.push_back(
                normalize_windows(c.windows[r], base->windows[r], false));
            esn.push_back(normalize(c.elt_single[r], base->elt_single[r]));
            nsn.push_back(normalize(std::optional(c.nu_single[r]),
                                    std::optional(base->nu_single[r])));
        }
        row.elt_window_norm = detail::mean_defined(ewn);
        row.nu_window_norm = detail::mean_defined(nwn);
        row.elt_single_norm = detail::mean_defined(esn);
        row.nu_single_norm = detail::mean_defined(nsn);
        result.normalized.push_back(std::move(row));
    }

    // Mean and median rows per policy and metric version.
    {
        std::vector<std::string> policies;
        for (const auto& row : result.normalized)
            if (std::find(policies.begin(), policies.end(), row.policy) ==
                policies.end())
                policies.push_back(row.policy);
        for (const auto& policy : policies) {
            for (const char* version : {"window", "single"}) {
                const bool window = std::string(version) == "window";
                std::vector<double> elts, nus;
                for (const auto& row : result.normalized) {
                    if (row.policy != policy) continue;
                    const auto& e =
                        window ? row.elt_window_norm : row.elt_single_norm;
                    const auto& n =
                        window ? row.nu_window_norm : row.nu_single_norm;
                    if (e) elts.push_back(*e);
                    if (n) nus.push_back(*n);
                }
                ReportResult::SummaryRow s;
                s.policy = policy;
                s.metric_version = version;
                if (!elts.empty()) {
                    s.elt_mean = detail::mean(elts);
                    s.elt_median = detail::median_of(elts);
                }
                if (!nus.empty()) {
                    s.nu_mean = detail::mean(nus);
                    s.nu_median = detail::median_of(nus);
                }
                result.summary.push_back(std::move(s));
            }
        }
    }

    // NSD of the per-window ELT values across the three repeats.
    for (const auto& c : cells) {
        if (c.windows.size() != 3) continue;
        std::size_t nwin = 0;
        for (const auto& w : c.windows) nwin = std::max(nwin, w.size());
        for (std::size_t w = 0; w < nwin; ++w) {
            double values[3] = {0.0, 0.0, 0.0};
            bool all = true;
            for (int r = 0; r < 3; ++r) {
                if (w < c.windows[r].size() && c.windows[r][w].elt)
                    values[r] = *c.windows[r][w].elt;
                else
                    all = false;
            }
            if (!all) continue;
            const auto v = nsd(std::span<const double>(values, 3));
            if (!v) continue;
            result.nsd_rows.push_back(NsdRow{c.workload, c.churn, c.policy,
                                             static_cast<int>(w), *v});
        }
    }
    {
        std::vector<double> values;
        for (const auto& r : result.nsd_rows) values.push_back(r.nsd_value);
        result.median_nsd = detail::median_of(values);
    }

    if (write_files) {
        {
            csv::Writer w;
            w.field_str(
                "workload,churn,policy,elt_window_norm,elt_single_norm,"
                "nu_window_norm,nu_single_norm");
            w.end_row();
            for (const auto& row : result.normalized) {
                w.field_str(row.workload);
                w.sep();
                w.field_str(row.churn);
                w.sep();
                w.field_str(row.policy);
                w.sep();
                if (row.elt_window_norm) w.field_time(*row.elt_window_norm);
                w.sep();
                if (row.elt_single_norm) w.field_time(*row.elt_single_norm);
                w.sep();
                if (row.nu_window_norm) w.field_time(*row.nu_window_norm);
                w.sep();
                if (row.nu_single_norm) w.field_time(*row.nu_single_norm);
                w.end_row();
            }
            w.save(dir / "normalized.csv");
        }
        {
            csv::Writer w;
            w.field_str(
                "policy,metric_version,elt_mean,elt_median,nu_mean,nu_median");
            w.end_row();
            for (const auto& s : result.summary) {
                w.field_str(s.policy);
                w.sep();
                w.field_str(s.metric_version);
                w.sep();
                if (s.elt_mean) w.field_time(*s.elt_mean);
                w.sep();
                if (s.elt_median) w.field_time(*s.elt_median);
                w.sep();
                if (s.nu_mean) w.field_time(*s.nu_mean);
                w.sep();
                if (s.nu_median) w.field_time(*s.nu_median);
                w.end_row();
            }
            w.save(dir / "normalized_summary.csv");
        }
        {
            csv::Writer w;
            w.field_str("workload,churn,policy,window_index,nsd");
            w.end_row();
            for (const auto& r : result.nsd_rows) {
                w.field_str(r.workload);
                w.sep();
                w.field_str(r.churn);
                w.sep();
                w.field_str(r.policy);
                w.sep();
                w.field_u64(static_cast<std::uint64_t>(r.window_index));
                w.sep();
                w.field_time(r.nsd_value);
                w.end_row();
            }
            w.save(dir / "nsd.csv");
        }
        {
            std::vector<double> values;
            for (const auto& r : result.nsd_rows) values.push_back(r.nsd_value);
            std::sort(values.begin(), values.end());
            csv::Writer w;
            w.field_str("nsd,cumulative_fraction");
            w.end_row();
            for (std::size_t i = 0; i < values.size(); ++i) {
                w.field_time(values[i]);
                w.sep();
                w.field_time(static_cast<double>(i + 1) /
                             static_cast<double>(values.size()));
                w.end_row();
            }
            w.save(dir / "nsd_cdf.csv");
        }
    }
    return result;
}

}  // namespace autochord
