#pragma once

// Convergence-bound evaluation for partial-participation federated SGD.
// Provides the aggregation-weight shares, the one-step recursion on
// E||w_bar - w*||^2, its closed form, the loss-gap bound derived from it,
// and the per-round accuracy expression used as an optimization constraint.

#include "ecofl/scenario.hpp"

namespace ecofl {
namespace flbound {

// Participation plan over R rounds: who participates and with how much data.
struct ParticipationPlan {
    Eigen::MatrixXi a;          // K x R indicators
    Eigen::MatrixXd data_bits;  // K x R per-round data volumes

    int ues() const { return static_cast<int>(a.rows()); }
    int rounds() const { return static_cast<int>(a.cols()); }
};

struct BoundConstants {
    double omega;  // 1 - eta*mu, per-update contraction factor
    double zeta;   // 2*eta*(1 - 2*eta*L)
    double a1;     // per-update additive constant of the recursion
};

// Requires 0 < eta <= 1/(2L) and mu, L > 0. local_iters enters a1.
BoundConstants bound_constants(const FLHyperparams& fl, int local_iters);

// Aggregation weights Dbar_k[r] = a*data / sum_j a*data. Throws
// std::invalid_argument if any round has zero participating data.
Eigen::MatrixXd shares(const ParticipationPlan& plan);

// Per-round sum_k Dbar_k[r]^2 (in [1/K, 1]).
Eigen::VectorXd sum_shares_sq(const ParticipationPlan& plan);

// Bound on E||w_bar^i - w*||^2 after `updates` virtual updates (closed
// form). Update l belongs to round l / local_iters.
double w_gap_bound(const ParticipationPlan& plan, const FLHyperparams& fl,
                   int local_iters, int updates);

// Same quantity evaluated by unrolling the one-step recursion
//   E_{i+1} <= omega*E_i + a1 + eta^2 * eps_v2 * sum_k Dbar_k[i]^2.
// Must agree with w_gap_bound to floating-point roundoff.
double w_gap_bound_recursive(const ParticipationPlan& plan,
                             const FLHyperparams& fl, int local_iters,
                             int updates);

// Loss-gap bound E[f_G(w_bar^i) - f_G(w*)] <= (L/2) * w_gap_bound(i).
double theorem1_bound(const ParticipationPlan& plan, const FLHyperparams& fl,
                      int local_iters, int updates);

// Left-hand side of the mission accuracy constraint: theorem1_bound after
// all (N-1)*I updates, written in the per-round collapsed form
//   (L/2) * [ omega^{RI} w0 + a1*(1-omega^{RI})/(eta*mu)
//             + eta^2 eps_v2 (1-omega^I)/(eta*mu)
//               * sum_r omega^{(R-1-r)I} sum_k Dbar_k[r]^2 ].
double accuracy_lhs(const ParticipationPlan& plan, const FLHyperparams& fl,
                    int num_slots, int local_iters);

// Weight of round r in the accuracy sum (the factor multiplying
// sum_k Dbar_k[r]^2 including the (L/2) eta^2 eps_v2 prefactors).
double accuracy_round_weight(const FLHyperparams& fl, int num_slots,
                             int local_iters, int round);

// Participation-independent part of accuracy_lhs.
double accuracy_fixed_terms(const FLHyperparams& fl, int num_slots,
                            int local_iters);

}  // namespace flbound
}  // namespace ecofl
