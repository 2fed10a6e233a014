#pragma once

// Two-phase alternating optimization of mission energy, plus the
// baseline participation schemes and heuristic trajectories used for
// comparison. All entry points are deterministic given (config, seed).

#include <cstdint>
#include <string>
#include <vector>

#include "ecofl/energy.hpp"
#include "ecofl/scenario.hpp"
#include "ecofl/subproblem.hpp"
#include "ecofl/surrogates.hpp"

namespace ecofl {
namespace eco {

struct IterRecord {
    int iter = 0;
    double objective_j = 0.0;
    double solver_gap = 0.0;
    double step_norm = 0.0;  // max movement of the reference, meters/Mb
    std::string status;
};

struct PhaseResult {
    bool feasible = false;
    std::string detail;
    std::vector<IterRecord> trace;
    surrogates::ReferencePoint ref;  // converged reference
    DecisionState state;
    Eigen::MatrixXd data_bits;  // relaxed volumes (coupled phase)
    double objective_j = 0.0;
    double soft_slack = 0.0;  // largest requirement slack (soft mode)
};

struct SCAOptions {
    int max_iters = 30;
    double rel_obj_tol = 1e-3;   // stop when the objective stalls
    double solver_tol = 1e-8;
    int restore_max = 8;         // entry-point slack-restoration solves
    bool freeze_q = false;
    // Penalized-slack mode for diagnosing infeasible baselines; a run is
    // declared infeasible when any slack exceeds soft_slack_tol.
    bool soft = false;
    double soft_slack_tol = 1e-6;
    int verbose = 0;
};

// Deterministic initializer: straight-line trajectory at the mission
// speed, uniform relaxed data meeting the data floor, all UE powers at
// half cap, broadcast power at half cap, hover times filling most of the
// remaining mission time.
surrogates::ReferencePoint initialize(const ScenarioConfig& cfg);

// Replaces the trajectory of a reference and refreshes its caches (used
// by the heuristic trajectory schemes before freezing it).
surrogates::ReferencePoint with_trajectory(const ScenarioConfig& cfg,
                                           const surrogates::ReferencePoint& ref,
                                           const MatX2& q);

// Coupled-phase SCA loop with entry-point restoration: while no iterate
// has been accepted yet, an infeasible subproblem triggers a solve of
// the slack-penalized variant at the same reference, and the reference
// is re-anchored at its optimum (surrogates are exact at the anchor, so
// the true constraint violation there is no larger than the slack).
// Retried up to restore_max times while the slack keeps shrinking.
PhaseResult phase1(const ScenarioConfig& cfg,
                   const surrogates::ReferencePoint& init,
                   const SCAOptions& opts);

// Rounds relaxed per-round data volumes to a participation matrix:
// a_kr = 1 where the smoothed indicator exceeds 1/2, then a
// deterministic repair promotes UEs (largest relaxed volume first)
// until every round reaches the participation floor.
Eigen::MatrixXi round_participation(const ScenarioConfig& cfg,
                                    const Eigen::MatrixXd& data_bits);

// Committed-phase SCA loop under a fixed participation matrix.
PhaseResult phase2(const ScenarioConfig& cfg, const Eigen::MatrixXi& a,
                   const surrogates::ReferencePoint& init,
                   const SCAOptions& opts);

struct AuditResult {
    ViolationReport report;
    double accuracy_lhs = 0.0;
    double accuracy_budget = 0.0;
    energy::EnergyBreakdown energy;
    bool ok = false;
};

// Re-checks every mission constraint of a final state against the exact
// (non-surrogate) models. tol is absolute per constraint in its natural
// unit (seconds, bits, levels).
AuditResult audit_state(const ScenarioConfig& cfg, const DecisionState& state,
                        double tol);

struct RunReport {
    std::string method;
    std::uint64_t seed = 0;
    bool feasible = false;
    std::string detail;
    DecisionState state;
    energy::EnergyBreakdown energy;
    AuditResult audit;
    std::vector<IterRecord> phase1_trace;
    std::vector<IterRecord> phase2_trace;
    double wall_s = 0.0;
};

// Full pipeline: initialize, coupled phase, rounding, committed phase,
// audit.
RunReport run_eco(const ScenarioConfig& cfg, std::uint64_t seed,
                  const SCAOptions& opts);

enum class ParticipationScheme { random_scheme, fixed_scheme };
// Baselines: participation fixed ahead of time (either every UE in every
// round, or exactly participation_min seeded-random UEs per round), then
// the committed-phase optimizer for everything else.
RunReport baseline_participation(const ScenarioConfig& cfg,
                                 ParticipationScheme scheme,
                                 std::uint64_t seed, const SCAOptions& opts);

enum class TrajectoryShape { cur, str, mid, asy };
const char* to_string(TrajectoryShape s);
TrajectoryShape trajectory_shape_from_string(const std::string& name);

// Deterministic heuristic trajectories between the mission endpoints,
// sampled at equal arc spacing per segment.
MatX2 heuristic_trajectory_points(const ScenarioConfig& cfg,
                                  TrajectoryShape shape);

// Pipeline with the trajectory frozen to a heuristic shape (coupled
// phase and committed phase both keep q fixed).
RunReport run_heuristic_trajectory(const ScenarioConfig& cfg,
                                   TrajectoryShape shape, std::uint64_t seed,
                                   const SCAOptions& opts);

}  // namespace eco
}  // namespace ecofl
