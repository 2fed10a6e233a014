#pragma once

// Assembly of the per-iteration convex subproblems from the surrogate
// builders, plus extraction of solver iterates back into mission states.
//
// Two subproblem families share one assembler:
//  * coupled phase: trajectory, powers, hover times and relaxed per-round
//    data volumes are all free; participation is represented smoothly.
//  * committed phase: the participation matrix is fixed; each UE keeps a
//    single per-round data volume, rows belonging to non-participating
//    pairs are dropped, and the broadcast requirement uses its exact
//    left side.
//
// Internally the solver works on scaled units (positions in hectometers,
// data in megabits, squared distances in 1e4 m^2, energies in 1e2 J);
// every public API speaks SI.

#include <optional>
#include <string>

#include "ecofl/conic.hpp"
#include "ecofl/scenario.hpp"
#include "ecofl/surrogates.hpp"

namespace ecofl {
namespace subproblem {

struct BuildOptions {
    // When set, trajectory-dependent quantities are frozen at ref.q and
    // no trajectory variables are created.
    bool freeze_q = false;
    // Soft-feasible mode: the mission requirement rows (accuracy, rate,
    // broadcast) receive penalized slack variables instead of being hard.
    bool soft = false;
    double soft_penalty_j = 1e6;  // objective cost per unit slack
    double power_floor_w = 1e-12;
    double data_cap_bits = 0.0;  // 0 = none (slot windows already bound D)
};

// Handle of a built program together with its variable layout and the
// scaling needed to map iterates back to SI.
struct BuiltProgram {
    conic::ConicProgram prog;
    Eigen::VectorXd x0;
    bool phase2 = false;
    bool frozen_q = false;
    Eigen::MatrixXi a;  // committed plan (phase 2), otherwise empty

    // column of a VarKey, or -1 when the quantity is fixed/absent
    int column(const surrogates::VarKey& key) const;
    // value of a VarKey at iterate x, in the key's natural SI unit
    double value(const surrogates::VarKey& key,
                 const Eigen::VectorXd& x) const;

    // Decodes an iterate into a mission state (SI units). In the coupled
    // phase `a` is filled with 1 wherever the relaxed smooth indicator
    // exceeds 0.5 (informational; committing is the caller's job).
    DecisionState extract_state(const Eigen::VectorXd& x) const;
    // Relaxed per-round data volumes (coupled phase), K x R, bits.
    Eigen::MatrixXd extract_data_bits(const Eigen::VectorXd& x) const;
    // Largest soft-mode slack (0 when soft mode is off).
    double max_soft_slack(const Eigen::VectorXd& x) const;

    // Objective in joules for an iterate (solver objective is scaled and
    // may include frozen-trajectory constants).
    double objective_j(const Eigen::VectorXd& x) const;

    // --- layout (filled by the builders) ---
    // Column maps, -1 where a quantity is fixed or absent. Pair maps are
    // indexed k + K*r; slot maps by their natural index.
    ScenarioConfig cfg;
    surrogates::ReferencePoint ref;
    Eigen::VectorXi qx_col, qy_col;        // waypoint slots 0..N
    Eigen::VectorXi sq_col, b_col, atil_col, ucm_col, uacc_col;  // pairs
    Eigen::VectorXi d_col;   // pairs (coupled) or one per UE (committed)
    Eigen::VectorXi dhat_col, dlb_col, thov_col;  // rounds
    Eigen::VectorXi c_col, ubc_col;               // broadcast slots
    Eigen::VectorXi len_col;                      // segments 1..N at n-1
    Eigen::VectorXi slack_col;                    // soft-mode slacks
    double obj_scale = 0.0;   // joules per solver objective unit
    double obj_fixed_j = 0.0; // frozen-trajectory energy folded in
};

// Builds the coupled-phase program around `ref` (which must carry q,
// b_log, data_bits and hover_s).
BuiltProgram build_phase1(const ScenarioConfig& cfg,
                          const surrogates::ReferencePoint& ref,
                          const BuildOptions& opts);

// Builds the committed-phase program for participation matrix `a`
// (K x R); ref must carry q, b_log, data_ue_bits and hover_s.
BuiltProgram build_phase2(const ScenarioConfig& cfg, const Eigen::MatrixXi& a,
                          const surrogates::ReferencePoint& ref,
                          const BuildOptions& opts);

struct SubproblemResult {
    conic::SolveResult solver;
    bool feasible = false;
    DecisionState state;
    Eigen::MatrixXd data_bits;  // relaxed volumes (coupled phase)
    double objective_j = 0.0;
    double soft_slack = 0.0;
};

// Solves a built program from its constructed starting point.
SubproblemResult solve(const BuiltProgram& built,
                       const conic::SolveOptions& opts);

// Writes the scaled program in the dump format of ConicProgram::dump.
void dump_program(const BuiltProgram& built, const std::string& path);

}  // namespace subproblem
}  // namespace ecofl
