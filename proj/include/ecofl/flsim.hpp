#pragma once

// Synthetic federated-learning reference simulator. Runs weighted
// federated SGD with noisy gradients on strongly convex quadratic local
// objectives, where every constant entering the convergence bound is
// known exactly or can be estimated with a margin. Used to validate the
// bound empirically.

#include <cstdint>
#include <vector>

#include "ecofl/flbound.hpp"
#include "ecofl/scenario.hpp"

namespace ecofl {
namespace flsim {

// Local objective of UE k: f_k(w) = 0.5 * (w - c_k)' M_k (w - c_k).
// Global objective: f_G(w) = sum_k Dbar_k f_k(w) with plan-dependent
// weights; for constant totals the relevant optimum uses data weights.
struct SyntheticTask {
    int dim = 0;
    std::vector<Eigen::MatrixXd> hessians;  // K symmetric PSD matrices
    Eigen::MatrixXd centers;                // dim x K
    double grad_noise_std = 0.0;            // i.i.d. Gaussian per coordinate
    Eigen::VectorXd w0;                     // common initial model

    int ues() const { return static_cast<int>(hessians.size()); }

    // Loss under weights lambda (sum lambda = 1).
    double loss(const Eigen::VectorXd& w, const Eigen::VectorXd& lambda) const;
    // argmin of the lambda-weighted loss.
    Eigen::VectorXd optimum(const Eigen::VectorXd& lambda) const;
};

// Deterministically seeded task with K UEs and the given dimension.
// Hessian spectra are drawn in [mu_target, l_target]; centers are spread
// so that the heterogeneity constants are nontrivial.
SyntheticTask make_synthetic_task(int num_ues, int dim, std::uint64_t seed,
                                  double mu_target, double l_target,
                                  double center_spread, double grad_noise_std);

// One simulated repetition. w_virtual tracks the Dbar-weighted average of
// the per-UE models after every local update (dim x (updates+1), column 0
// is w0); w_round holds the post-aggregation global model of each round
// (dim x (rounds+1)).
struct RepTrace {
    Eigen::MatrixXd w_virtual;
    Eigen::MatrixXd w_round;
};

RepTrace run_single_rep(const SyntheticTask& task,
                        const flbound::ParticipationPlan& plan, double eta,
                        int local_iters, std::uint64_t seed);

struct SimResult {
    // mean over reps of f_G(w_virtual^i) - f_G(w*), i = 0..updates
    Eigen::VectorXd mean_gap;
    // per-rep gaps, reps x (updates+1)
    Eigen::MatrixXd rep_gap;
    // theorem bound at i = 1..updates (index 0 unused, holds (L/2)w0 term)
    Eigen::VectorXd bound;
};

// Runs `reps` independent repetitions of federated SGD under `plan` and
// evaluates the loss gap against the bound computed from `fl`. The
// weights lambda used for the loss are the mission-average shares.
SimResult run_federated_sgd(const SyntheticTask& task,
                            const flbound::ParticipationPlan& plan,
                            const FLHyperparams& fl, int local_iters,
                            int reps, std::uint64_t seed);

// Measures the constants of a task: exact smoothness / strong convexity
// from the Hessians, exact gradient-noise variance, and sampled bounds
// (inflated by `margin`, e.g. 1.1) for the heterogeneity terms along
// simulated trajectories. Chooses eta = 0.4 / L, safely inside the
// admissible range. w0_gap is exact for the data-weighted optimum.
FLHyperparams estimate_constants(const SyntheticTask& task,
                                 const flbound::ParticipationPlan& plan,
                                 int local_iters, int sample_reps,
                                 std::uint64_t seed, double margin);

}  // namespace flsim
}  // namespace ecofl
