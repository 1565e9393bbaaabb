#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vitlab/dal.hpp"
#include "vitlab/dataset.hpp"
#include "vitlab/metrics.hpp"

namespace vitlab {

// Experiment grid: Cartesian product of models, strategies, noise rates and
// seeds over one dataset and one shared DAL template. Parsed from a
// line-oriented key=value file with bracketed sections.
struct GridSpec {
    std::string name = "grid";
    std::string output_dir;
    int workers = 1;

    std::string dataset_kind = "synth";  // synth | cifar10 | cifar100
    SynthConfig synth;
    int64_t synth_train_per_class = 1000;
    int64_t synth_test_per_class = 200;
    std::vector<std::string> cifar_train_files;
    std::vector<std::string> cifar_test_files;

    DalConfig dal;  // template; model/strategy/noise/seed filled per cell
    std::vector<std::string> model_ids;
    std::vector<std::string> strategies;
    std::vector<double> noise_rates;
    std::vector<uint64_t> seeds;
};

GridSpec parse_grid_file(const std::string& path);

// Structural checks plus dataset existence; throws on failure.
void validate_grid(const GridSpec& spec);

// Unique deterministic id, e.g. "p4e64l4h4-entropy-n040-s1".
std::string cell_run_id(const std::string& model_id, const std::string& strategy, double noise_rate,
                        uint64_t seed);

// Executes every grid cell (resumable: cells listed in the manifest are
// skipped), writes per-cell CSVs, then assembles results.csv and
// runlog.jsonl. Returns the output directory.
std::string run_grid(const GridSpec& spec, const std::string& output_dir_override = "");

// CSV schema shared by the runner and the report reader.
extern const char* kResultsCsvHeader;

std::string round_record_csv_row(const RoundRecord& r);
std::vector<RoundRecord> read_results_csv(const std::string& path);

// Emits the report artifacts into out_dir (default: <results_dir>/report):
// model x noise accuracy and Brier matrices, strategy-delta matrices at the
// final labeled proportion, per-strategy SVG curves and the training-time
// vs labeled-proportion chart. Pure function of results.csv.
std::string emit_report(const std::string& results_dir, const std::string& out_dir = "");

}  // namespace vitlab
