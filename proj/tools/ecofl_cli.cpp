// Batch command-line front end: loads a scenario, runs one experiment,
// writes CSV artifacts. Exit codes: 0 all runs feasible, 3 at least one
// infeasible verdict, 2 usage or runtime error.

#include <exception>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ecofl/harness.hpp"

int main(int argc, char** argv) {
    ecofl::harness::Options opts;

    CLI::App app{
        "ecofl: energy-optimal UAV-assisted federated learning missions"};
    app.add_option("-c,--config", opts.config_path,
                   "Scenario JSON (omit for the built-in default)");
    std::ostringstream exps;
    for (const auto& e : ecofl::harness::known_experiments())
        exps << " " << e;
    app.add_option("-e,--experiment", opts.experiment,
                   "One of:" + exps.str())
        ->default_val("eco");
    app.add_option("-s,--seed", opts.seeds,
                   "Root seed(s); repeat for sweeps")
        ->default_val(std::vector<std::uint64_t>{1});
    app.add_option("-o,--out", opts.out_dir, "Output directory")
        ->default_val("out");
    app.add_option("-j,--jobs", opts.jobs,
                   "Parallel workers for sweeps (never affects results)")
        ->default_val(1);
    app.add_option("--sweep-q", opts.sweep_model_bits,
                   "Model sizes in bits for the q-sweep experiment");
    app.add_option("--sca-max-iters", opts.sca_max_iters,
                   "Iteration cap per SCA phase")
        ->default_val(30);
    app.add_option("--solver-tol", opts.solver_tol,
                   "Interior-point tolerance")
        ->default_val(1e-8);
    app.add_flag("-v,--verbose", opts.verbose, "Progress to stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        const int rc = ecofl::harness::run_experiment(opts);
        if (rc == 3)
            std::cerr << "at least one run is infeasible; see "
                      << opts.out_dir << "\n";
        return rc;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
