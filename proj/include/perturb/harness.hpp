#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "perturb/pipeline.hpp"

namespace perturb {

struct ExperimentConfig {
    std::string host_spec = "gnp:0.5";  // gnp:<p> | bipartite:<a>:<b> | file:<path>
    std::vector<int> n_list{300};
    double alpha = 0.35;
    int delta_max = 3;
    std::string tree_spec = "uniform-attachment";  // shape name or file:<path>
    int k = 9;
    std::vector<double> c_grid{40.0};
    int trials = 50;
    std::uint64_t seed = 1;
    std::string out_dir;
    std::string mode = "embed";  // embed | calibrate | certify
    double lambda = 0.05;
    std::array<double, 4> phase_split{0.25, 0.25, 0.25, 0.25};
    double calibrate_target = 0.9;
    int threads = 0;            // 0 = OpenMP default, 1 = serial reference
    bool timing_in_csv = true;  // false keeps the CSV byte-identical across replays
    double epsilon = 0.25;
    double delta = 0.15;
    int witness_budget = 1000;
    int target_cluster_size = 0;
    double xi = 0.1;

    void validate() const;
    PipelineConfig pipeline_config() const;
};

struct CellResult {
    int n = 0;
    double c = 0.0;
    int trials = 0;
    int successes = 0;
    double rate = 0.0;
    double wilson_lo = 0.0, wilson_hi = 0.0;
    double mean_ms = 0.0;
    std::vector<TrialReport> reports;
};

struct ExperimentResult {
    std::vector<CellResult> cells;
    std::string csv;        // deterministic given config+seed (when timing_in_csv off)
    std::string summary_json;  // timings and timestamp live here
};

/// Runs trials x cells; per-trial seeds derive from (seed, cell, trial), so
/// scheduling cannot change results. Every reported success has been re-checked
/// by the validator at harness level.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Writes results.csv, summary.json and trials.jsonl under cfg.out_dir.
void write_outputs(const ExperimentResult& result, const ExperimentConfig& cfg);

struct CalibrationResult {
    bool reached = false;
    double c_star = 0.0;
    std::vector<std::pair<double, double>> probes;  // (c, rate) in probe order
    std::string record_json;
};

/// Smallest grid value whose success rate reaches the target, by binary search
/// over the (assumed monotone) grid. Grid exhaustion is reported, not fatal.
CalibrationResult calibrate(const ExperimentConfig& cfg);

/// The search core, independent of the pipeline; `rate_at` is probed at grid
/// values and memoized by index.
CalibrationResult calibrate_over_grid(const std::vector<double>& grid, double target,
                                      const std::function<double(double)>& rate_at);

std::pair<double, double> wilson_interval(int successes, int trials, double z = 1.96);

/// Host generation per host_spec; gnp hosts are resampled until the minimum
/// degree reaches alpha*n.
Graph make_host(const std::string& host_spec, int n, double alpha, std::uint64_t seed);

Tree make_tree(const std::string& tree_spec, int n, int delta_max, std::uint64_t seed);

/// One full trial: host, tree, plan, pipeline, harness-level re-validation.
TrialReport run_trial(const ExperimentConfig& cfg, int n, double c, std::uint64_t trial_seed);

}  // namespace perturb
