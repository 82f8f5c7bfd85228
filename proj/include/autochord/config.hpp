#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "autochord/churn.hpp"
#include "autochord/experiment.hpp"
#include "autochord/workload.hpp"

namespace autochord {

/// Configuration problem with the line it came from.
class ConfigError : public std::runtime_error {
public:
    ConfigError(int line, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ": " + message),
          line_(line) {}
    int line() const { return line_; }

private:
    int line_ = 0;
};

/// A whole experiment matrix: the cross product of workloads, churn patterns
/// and policies, each cell run `repeats` times.
struct MatrixConfig {
    std::vector<WorkloadKind> workloads{
        WorkloadKind::light, WorkloadKind::heavy, WorkloadKind::variable,
        WorkloadKind::file_system};
    std::vector<ChurnKind> churns{ChurnKind::low, ChurnKind::high,
                                  ChurnKind::local, ChurnKind::temporal};
    std::vector<PolicySpec> policies{PolicySpec::policy0(),
                                     PolicySpec::policy1(),
                                     PolicySpec::policy2()};
    std::uint64_t seed = 1;
    int repeats = 3;
    std::uint32_t nodes = 16;
    double horizon = 7200.0;
    bool retry_on_error = false;
    std::string output_dir;

    SimParams sim;
    PolicyConfig manager;
    double window = 300.0;
    double join_retry_delay = 1.0;
};

inline std::optional<WorkloadKind> parse_workload(std::string_view s) {
    if (s == "light") return WorkloadKind::light;
    if (s == "heavy") return WorkloadKind::heavy;
    if (s == "variable") return WorkloadKind::variable;
    if (s == "file_system") return WorkloadKind::file_system;
    return std::nullopt;
}

inline std::optional<ChurnKind> parse_churn(std::string_view s) {
    if (s == "low") return ChurnKind::low;
    if (s == "high") return ChurnKind::high;
    if (s == "local") return ChurnKind::local;
    if (s == "temporal") return ChurnKind::temporal;
    return std::nullopt;
}

inline std::optional<PolicySpec> parse_policy(std::string_view s) {
    if (s == "policy0") return PolicySpec::policy0();
    if (s == "policy1") return PolicySpec::policy1();
    if (s == "policy2") return PolicySpec::policy2();
    if (s.rfind("custom:", 0) == 0) {
        const auto rest = s.substr(7);
        const auto colon = rest.find(':');
        if (colon == std::string_view::npos) return std::nullopt;
        try {
            const double kw = std::stod(std::string(rest.substr(0, colon)));
            const double ke = std::stod(std::string(rest.substr(colon + 1)));
            if (kw <= 0.0 || ke <= 0.0) return std::nullopt;
            return PolicySpec::custom(kw, ke);
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }
    return std::nullopt;
}

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) b++;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
        e--;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= v.size()) {
        const std::size_t next = v.find(',', pos);
        const std::string item =
            trim(next == std::string::npos ? v.substr(pos)
                                           : v.substr(pos, next - pos));
        if (!item.empty()) out.push_back(item);
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return out;
}

inline double parse_double(const std::string& v, int line,
                           const std::string& key) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing junk");
        return d;
    } catch (const std::exception&) {
        throw ConfigError(line, "invalid number for '" + key + "': " + v);
    }
}

inline std::uint64_t parse_u64(const std::string& v, int line,
                               const std::string& key) {
    try {
        std::size_t used = 0;
        const std::uint64_t n = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing junk");
        return n;
    } catch (const std::exception&) {
        throw ConfigError(line, "invalid integer for '" + key + "': " + v);
    }
}

inline bool parse_bool(const std::string& v, int line, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(line, "invalid boolean for '" + key + "': " + v);
}

}  // namespace detail

/// Parses the flat key=value format with [section] headers. Unknown sections,
/// unknown keys and malformed values are reported with their line number.
inline MatrixConfig parse_matrix_config(std::istream& in,
                                        std::string default_output_dir = "out") {
    MatrixConfig cfg;
    bool saw_workloads = false, saw_churns = false, saw_policies = false;
    std::string section;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError(lineno, "unterminated section header");
            section = t.substr(1, t.size() - 2);
            if (section != "matrix" && section != "simulation")
                throw ConfigError(lineno, "unknown section '" + section + "'");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(lineno, "expected key = value");
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string value = detail::trim(t.substr(eq + 1));
        if (section.empty())
            throw ConfigError(lineno, "key outside any [section]");

        if (section == "matrix") {
            if (key == "workloads") {
                cfg.workloads.clear();
                for (const auto& item : detail::split_list(value)) {
                    const auto w = parse_workload(item);
                    if (!w)
                        throw ConfigError(lineno,
                                          "unknown workload '" + item + "'");
                    cfg.workloads.push_back(*w);
                }
                saw_workloads = true;
            } else if (key == "churns") {
                cfg.churns.clear();
                for (const auto& item : detail::split_list(value)) {
                    const auto c = parse_churn(item);
                    if (!c)
                        throw ConfigError(lineno,
                                          "unknown churn pattern '" + item + "'");
                    cfg.churns.push_back(*c);
                }
                saw_churns = true;
            } else if (key == "policies") {
                cfg.policies.clear();
                for (const auto& item : detail::split_list(value)) {
                    const auto p = parse_policy(item);
                    if (!p)
                        throw ConfigError(lineno,
                                          "unknown policy '" + item + "'");
                    cfg.policies.push_back(*p);
                }
                saw_policies = true;
            } else if (key == "seed") {
                cfg.seed = detail::parse_u64(value, lineno, key);
            } else if (key == "repeats") {
                cfg.repeats =
                    static_cast<int>(detail::parse_u64(value, lineno, key));
            } else if (key == "nodes") {
                cfg.nodes = static_cast<std::uint32_t>(
                    detail::parse_u64(value, lineno, key));
            } else if (key == "horizon") {
                cfg.horizon = detail::parse_double(value, lineno, key);
            } else if (key == "retry_on_error") {
                cfg.retry_on_error = detail::parse_bool(value, lineno, key);
            } else if (key == "output_dir") {
                cfg.output_dir = value;
            } else {
                throw ConfigError(lineno, "unknown key '" + key +
                                              "' in [matrix]");
            }
        } else {  // simulation
            if (key == "rpc_timeout") {
                cfg.sim.latency.rpc_timeout =
                    detail::parse_double(value, lineno, key);
            } else if (key == "base_latency") {
                cfg.sim.latency.base = detail::parse_double(value, lineno, key);
            } else if (key == "per_byte") {
                cfg.sim.latency.per_byte =
                    detail::parse_double(value, lineno, key);
            } else if (key == "jitter_frac") {
                cfg.sim.latency.jitter_frac =
                    detail::parse_double(value, lineno, key);
            } else if (key == "cpu_per_message") {
                cfg.sim.cpu.per_message =
                    detail::parse_double(value, lineno, key);
            } else if (key == "cpu_per_maintenance") {
                cfg.sim.cpu.per_maintenance =
                    detail::parse_double(value, lineno, key);
            } else if (key == "ring_bits") {
                cfg.sim.ring_bits = static_cast<unsigned>(
                    detail::parse_u64(value, lineno, key));
            } else if (key == "successor_list_len") {
                cfg.sim.successor_list_len = static_cast<std::uint32_t>(
                    detail::parse_u64(value, lineno, key));
            } else if (key == "initial_interval") {
                cfg.sim.initial_interval =
                    detail::parse_double(value, lineno, key);
            } else if (key == "cycle_duration") {
                cfg.manager.cycle_duration =
                    detail::parse_double(value, lineno, key);
            } else if (key == "interval_min") {
                cfg.manager.interval_min =
                    detail::parse_double(value, lineno, key);
            } else if (key == "interval_max") {
                cfg.manager.interval_max =
                    detail::parse_double(value, lineno, key);
            } else if (key == "window") {
                cfg.window = detail::parse_double(value, lineno, key);
            } else if (key == "join_retry_delay") {
                cfg.join_retry_delay =
                    detail::parse_double(value, lineno, key);
            } else {
                throw ConfigError(lineno, "unknown key '" + key +
                                              "' in [simulation]");
            }
        }
    }
    (void)saw_workloads;
    (void)saw_churns;
    (void)saw_policies;

    if (cfg.workloads.empty()) throw ConfigError(0, "no workloads configured");
    if (cfg.churns.empty()) throw ConfigError(0, "no churn patterns configured");
    if (cfg.policies.empty()) throw ConfigError(0, "no policies configured");
    if (cfg.repeats < 1) throw ConfigError(0, "repeats must be >= 1");
    if (cfg.nodes < 1) throw ConfigError(0, "nodes must be >= 1");
    if (!(cfg.horizon > 0.0)) throw ConfigError(0, "horizon must be > 0");
    if (cfg.output_dir.empty()) {
        if (const char* env = std::getenv("AUTOCHORD_OUTPUT_DIR"))
            cfg.output_dir = env;
        else
            cfg.output_dir = std::move(default_output_dir);
    }
    cfg.manager.initial_interval = cfg.sim.initial_interval;
    cfg.manager.validate();
    return cfg;
}

inline MatrixConfig load_matrix_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f)
        throw ConfigError(0, "cannot open config file " + path.string());
    return parse_matrix_config(f);
}

}  // namespace autochord
