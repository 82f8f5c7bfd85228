#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "autochord/config.hpp"
#include "autochord/matrix.hpp"
#include "autochord/report.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& only,
            unsigned jobs, bool no_raw) {
    autochord::MatrixConfig cfg;
    try {
        cfg = autochord::load_matrix_config(config_path);
    } catch (const autochord::ConfigError& e) {
        std::fprintf(stderr, "%s: %s\n", config_path.c_str(), e.what());
        return 2;
    }
    autochord::MatrixOptions opt;
    opt.only = only;
    opt.jobs = jobs;
    opt.write_raw = !no_raw;
    try {
        const auto result = autochord::run_matrix(cfg, opt);
        std::size_t runs = 0;
        for (const auto& c : result.cells) runs += c.runs.size();
        std::printf("ran %zu cells (%zu runs); artifacts in %s\n",
                    result.cells.size(), runs,
                    result.out_dir.string().c_str());
        return 0;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "run failed: %s\n", e.what());
        return 3;
    }
}

int cmd_report(const std::string& in_dir) {
    try {
        const auto result = autochord::report(in_dir);
        for (const auto& s : result.summary) {
            std::printf(
                "%s [%s] normalized ELT mean %.3f median %.3f | "
                "NU mean %.3f median %.3f\n",
                s.policy.c_str(), s.metric_version.c_str(),
                s.elt_mean.value_or(0.0), s.elt_median.value_or(0.0),
                s.nu_mean.value_or(0.0), s.nu_median.value_or(0.0));
        }
        if (result.median_nsd)
            std::printf("median NSD over %zu window sets: %.4f\n",
                        result.nsd_rows.size(), *result.median_nsd);
        else
            std::printf("no NSD values (need exactly 3 repeats per cell)\n");
        return 0;
    } catch (const autochord::ReportError& e) {
        std::fprintf(stderr, "report: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "report failed: %s\n", e.what());
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Chord overlay with autonomically managed maintenance scheduling: "
        "experiment matrix runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::string only;
    unsigned jobs = 1;
    bool no_raw = false;
    auto* run = app.add_subcommand("run", "run an experiment matrix");
    run->add_option("--config", config_path, "matrix config file")
        ->required();
    run->add_option("--only", only,
                    "run a single cell, e.g. heavy-low-policy2");
    run->add_option("--jobs", jobs, "parallel runs");
    run->add_flag("--no-raw", no_raw,
                  "skip per-run lookups/traffic/manager.csv");

    std::string in_dir;
    std::string format = "csv";
    auto* rep = app.add_subcommand("report", "summarize a matrix output dir");
    rep->add_option("--in", in_dir, "matrix output directory")->required();
    rep->add_option("--format", format, "output format (csv)")
        ->check(CLI::IsMember({"csv"}));

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(config_path, only, jobs, no_raw);
    return cmd_report(in_dir);
}
