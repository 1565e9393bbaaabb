// Experiment-grid CLI: runs DAL grids, validates grid files and renders
// report artifacts from a results directory.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "vitlab/errors.hpp"
#include "vitlab/report.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

int cmd_run(const std::string& grid_path, const std::string& out_override) {
    const vitlab::GridSpec spec = vitlab::parse_grid_file(grid_path);
    const std::string dir = vitlab::run_grid(spec, out_override);
    std::printf("results written to %s\n", dir.c_str());
    return kExitOk;
}

int cmd_report(const std::string& results_dir, const std::string& out_override) {
    const std::string dir = vitlab::emit_report(results_dir, out_override);
    std::printf("report written to %s\n", dir.c_str());
    return kExitOk;
}

int cmd_validate(const std::string& grid_path) {
    const vitlab::GridSpec spec = vitlab::parse_grid_file(grid_path);
    vitlab::validate_grid(spec);
    const size_t cells =
        spec.model_ids.size() * spec.strategies.size() * spec.noise_rates.size() * spec.seeds.size();
    std::printf("ok: %zu cells\n", cells);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale vision-transformer active-learning lab"};
    app.require_subcommand(1);

    std::string grid_path, results_dir, out_override;

    CLI::App* run = app.add_subcommand("run", "execute every cell of a grid file");
    run->add_option("grid", grid_path, "grid file")->required();
    run->add_option("-o,--output", out_override, "output directory (overrides the grid file)");

    CLI::App* report = app.add_subcommand("report", "emit tables and charts from a results directory");
    report->add_option("results", results_dir, "results directory")->required();
    report->add_option("-o,--output", out_override, "report directory (default <results>/report)");

    CLI::App* validate = app.add_subcommand("validate", "parse and check a grid file");
    validate->add_option("grid", grid_path, "grid file")->required();

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(grid_path, out_override);
        if (report->parsed()) return cmd_report(results_dir, out_override);
        if (validate->parsed()) return cmd_validate(grid_path);
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
    } catch (const vitlab::FormatError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
}
