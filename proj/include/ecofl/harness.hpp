#pragma once

// Batch experiment driver behind the command-line tool: runs one of the
// named experiments for a (config, seed) pair, writes CSV artifacts into
// an output directory, and supports a small process-local worker pool
// for seed sweeps. Deterministic: worker scheduling never influences
// results, only file write order.

#include <cstdint>
#include <string>
#include <vector>

#include "ecofl/eco.hpp"
#include "ecofl/scenario.hpp"

namespace ecofl {
namespace harness {

struct Options {
    std::string config_path;  // empty = built-in default scenario
    std::string experiment = "eco";
    std::vector<std::uint64_t> seeds = {1};
    std::string out_dir = "out";
    int jobs = 1;
    // used by the q-sweep experiment (model sizes, bits)
    std::vector<double> sweep_model_bits;
    int sca_max_iters = 30;
    double solver_tol = 1e-8;
    int verbose = 0;
};

// Experiment names understood by run_experiment:
//   eco                 two-phase optimizer
//   baseline:random     random participation baseline
//   baseline:fixed      deterministic participation baseline
//   trajectory:CUR|STR|MID|ASY   frozen heuristic trajectories
//   bound-validation    synthetic FL simulation against the bound
//   q-sweep             eco + baselines across sweep_model_bits
std::vector<std::string> known_experiments();

// Returns a process exit code: 0 = all runs completed and feasible,
// 3 = completed but at least one run carries an infeasible verdict (its
// certificate is in the written reports). Errors throw.
int run_experiment(const Options& opts);

// --- CSV artifacts -----------------------------------------------------
// Every writer emits a header row with unit-suffixed column names.

void write_run_report_csv(const std::string& path,
                          const std::vector<eco::RunReport>& reports);
void write_energy_breakdown_csv(const std::string& path,
                                const eco::RunReport& report);
void write_trajectory_csv(const std::string& path,
                          const eco::RunReport& report);
void write_participation_csv(const std::string& path,
                             const eco::RunReport& report);
void write_iteration_trace_csv(const std::string& path,
                               const eco::RunReport& report);
void write_gap_vs_bound_csv(const std::string& path,
                            const Eigen::VectorXd& mean_gap,
                            const Eigen::VectorXd& bound, int local_iters);

// Minimal CSV helpers shared with the tests.
std::string csv_escape(const std::string& field);
std::vector<std::vector<std::string>> read_csv(const std::string& path);

}  // namespace harness
}  // namespace ecofl
