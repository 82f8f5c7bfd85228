#pragma once

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "autochord/autonomic.hpp"
#include "autochord/experiment.hpp"
#include "autochord/metrics.hpp"

namespace autochord::csv {

/// Append-only text buffer with the fixed formats used by every artifact:
/// times and intervals as %.6f, ids and counts as unsigned decimal.
class Writer {
public:
    void field_time(double v) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        out_ += buf;
    }
    void field_u64(std::uint64_t v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%" PRIu64, v);
        out_ += buf;
    }
    void field_str(std::string_view s) { out_ += s; }
    void sep() { out_ += ','; }
    void end_row() { out_ += '\n'; }

    const std::string& str() const { return out_; }

    void save(const std::filesystem::path& path) const {
        std::filesystem::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + path.string());
        f.write(out_.data(), static_cast<std::streamsize>(out_.size()));
    }

private:
    std::string out_;
};

inline std::string format_lookups(std::span<const LookupRow> rows) {
    Writer w;
    w.field_str("time_start,time_end,key,success,error_kind");
    w.end_row();
    for (const auto& r : rows) {
        w.field_time(r.start);
        w.sep();
        w.field_time(r.end);
        w.sep();
        w.field_u64(r.key.value);
        w.sep();
        w.field_u64(r.success ? 1 : 0);
        w.sep();
        w.field_str(lookup_error_name(r.error));
        w.end_row();
    }
    return w.str();
}

inline std::string format_traffic(std::span<const TrafficSample> rows) {
    Writer w;
    w.field_str("time,node,bytes");
    w.end_row();
    for (const auto& r : rows) {
        w.field_time(r.time);
        w.sep();
        w.field_u64(r.sender.value);
        w.sep();
        w.field_u64(r.bytes);
        w.end_row();
    }
    return w.str();
}

inline std::string format_manager(std::span<const ManagerCycleRecord> rows) {
    Writer w;
    w.field_str(
        "time,node,wmc,ec,interval_before,interval_after,immediate_flag");
    w.end_row();
    for (const auto& r : rows) {
        w.field_time(r.time);
        w.sep();
        w.field_u64(r.node.value);
        w.sep();
        w.field_u64(r.wmc);
        w.sep();
        w.field_u64(r.ec);
        w.sep();
        w.field_time(r.interval_before);
        w.sep();
        w.field_time(r.interval_after);
        w.sep();
        w.field_u64(r.immediate ? 1 : 0);
        w.end_row();
    }
    return w.str();
}

inline std::string format_windows(std::span<const WindowMetrics> rows) {
    Writer w;
    w.field_str("window_index,elt,nu");
    w.end_row();
    for (const auto& r : rows) {
        w.field_u64(static_cast<std::uint64_t>(r.window_index));
        w.sep();
        if (r.elt) w.field_time(*r.elt);
        w.sep();
        w.field_time(r.nu);
        w.end_row();
    }
    return w.str();
}

inline void save(const std::string& text, const std::filesystem::path& path) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
}

// ---- reading --------------------------------------------------------------

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = line.find(sep, pos);
        if (next == std::string::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, next - pos));
        pos = next + 1;
    }
    return out;
}

/// Rows of a CSV file, header skipped.
inline std::vector<std::vector<std::string>> read_rows(
    const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first) {
            first = false;
            continue;
        }
        if (line.empty()) continue;
        rows.push_back(split(line));
    }
    return rows;
}

inline std::optional<double> parse_opt_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
}

}  // namespace autochord::csv
