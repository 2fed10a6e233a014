#include <doctest.h>

#include <cmath>

#include "ecofl/energy.hpp"
#include "ecofl/subproblem.hpp"
#include "test_support.hpp"

using namespace ecofl;
using surrogates::VarKey;
using Kind = VarKey::Kind;

namespace {

conic::SolveOptions solver_opts() {
    conic::SolveOptions o;
    o.tol = 1e-8;
    return o;
}

}  // namespace

TEST_CASE("coupled-phase program solves the small mission") {
    const ScenarioConfig cfg = testsupport::small_config();
    const surrogates::ReferencePoint ref = testsupport::line_reference(
        cfg, cfg.data_floor_bits / cfg.num_rounds());

    const subproblem::BuiltProgram built =
        subproblem::build_phase1(cfg, ref, {});
    const subproblem::SubproblemResult res =
        subproblem::solve(built, solver_opts());

    REQUIRE(res.feasible);
    REQUIRE(res.solver.status == conic::SolveStatus::optimal);
    CHECK(built.prog.violations(res.solver.x, 1e-6).empty());

    // endpoints are pinned, interior waypoints stay inside the area
    CHECK(res.state.q(0, 0) == cfg.q_initial_m(0));
    CHECK(res.state.q(0, 1) == cfg.q_initial_m(1));
    CHECK(res.state.q(cfg.num_slots, 0) == cfg.q_final_m(0));
    CHECK(res.state.q(cfg.num_slots, 1) == cfg.q_final_m(1));
    for (int n = 1; n < cfg.num_slots; ++n) {
        CHECK(res.state.q(n, 0) >= -1e-9);
        CHECK(res.state.q(n, 0) <= cfg.area_x_m + 1e-9);
        CHECK(res.state.q(n, 1) >= -1e-9);
        CHECK(res.state.q(n, 1) <= cfg.area_y_m + 1e-9);
    }

    // relaxed volumes are positive and the data floor holds per UE
    const Eigen::MatrixXd d = res.data_bits;
    REQUIRE(d.rows() == cfg.num_ues());
    REQUIRE(d.cols() == cfg.num_rounds());
    for (int k = 0; k < cfg.num_ues(); ++k)
        CHECK(d.row(k).sum() >= cfg.data_floor_bits - 1.0);

    // powers respect the cap, hover at least the uplink window
    CHECK(res.state.ue_power_w.maxCoeff() <= cfg.ue_power_max_w + 1e-9);
    CHECK(res.state.hover_s.minCoeff() >= cfg.t_cm_s - 1e-9);
    CHECK(res.state.uav_power_w.maxCoeff() <= cfg.uav_power_max_w + 1e-9);
    CHECK(res.state.uav_power_w.minCoeff() > 0.0);

    // improving on the spec initializer, never inventing negative energy
    CHECK(res.objective_j > 0.0);
    CHECK(res.soft_slack == 0.0);
}

TEST_CASE("starting point strictly satisfies every rigid row") {
    const ScenarioConfig cfg = testsupport::small_config();
    const surrogates::ReferencePoint ref = testsupport::line_reference(
        cfg, cfg.data_floor_bits / cfg.num_rounds());
    const subproblem::BuiltProgram built =
        subproblem::build_phase1(cfg, ref, {});
    // the builder guarantees its own x0: solve() must not reject it, and
    // shiftable repair must not be triggered by rigid rows
    CHECK_NOTHROW(subproblem::solve(built, solver_opts()));
    CHECK(built.x0.size() == built.prog.num_vars());
}

TEST_CASE("variable lookup round-trips through column and value") {
    const ScenarioConfig cfg = testsupport::small_config();
    const surrogates::ReferencePoint ref = testsupport::line_reference(
        cfg, cfg.data_floor_bits / cfg.num_rounds());
    const subproblem::BuiltProgram built =
        subproblem::build_phase1(cfg, ref, {});

    // endpoints are folded into constants
    CHECK(built.column({Kind::QX, -1, 0}) == -1);
    CHECK(built.value({Kind::QX, -1, 0}, built.x0) == cfg.q_initial_m(0));
    CHECK(built.column({Kind::QX, -1, cfg.num_slots}) == -1);
    CHECK(built.value({Kind::QY, -1, cfg.num_slots}, built.x0) ==
          cfg.q_final_m(1));

    // interior waypoints and pair quantities are live columns
    CHECK(built.column({Kind::QX, -1, 1}) >= 0);
    CHECK(built.column({Kind::D, 1, 2}) >= 0);
    CHECK(built.column({Kind::B, 0, 0}) >= 0);
    CHECK(built.value({Kind::QX, -1, 1}, built.x0) ==
          doctest::Approx(ref.q(1, 0)).epsilon(1e-9));
    CHECK(built.value({Kind::B, 0, 0}, built.x0) ==
          doctest::Approx(ref.b_log(0, 0)).epsilon(1e-9));
}

TEST_CASE("committed-phase program honors the participation mask") {
    const ScenarioConfig cfg = testsupport::small_config();
    surrogates::ReferencePoint ref = testsupport::line_reference(cfg, 5e5);

    Eigen::MatrixXi a = Eigen::MatrixXi::Ones(cfg.num_ues(),
                                              cfg.num_rounds());
    a(0, 1) = 0;  // UE 0 sits out round 1; floors still satisfied
    a(2, 4) = 0;
    const subproblem::BuiltProgram built =
        subproblem::build_phase2(cfg, a, ref, {});
    const subproblem::SubproblemResult res =
        subproblem::solve(built, solver_opts());

    REQUIRE(res.feasible);
    REQUIRE(res.solver.status == conic::SolveStatus::optimal);
    CHECK(built.prog.violations(res.solver.x, 1e-6).empty());

    CHECK(res.state.ue_power_w(0, 1) == 0.0);
    CHECK(res.state.data_bits(0, 1) == 0.0);
    CHECK(res.state.a(0, 1) == 0);
    CHECK(res.state.ue_power_w(2, 4) == 0.0);
    CHECK(res.state.a(1, 1) == 1);
    CHECK(res.state.ue_power_w(1, 1) > 0.0);

    // one volume per UE across its active rounds
    const double d0 = built.value({Kind::D, 0, -1}, res.solver.x);
    for (int r = 0; r < cfg.num_rounds(); ++r) {
        if (a(0, r) != 0)
            CHECK(res.state.data_bits(0, r) ==
                  doctest::Approx(d0).epsilon(1e-12));
    }
    // data floor: cnt * d >= floor
    CHECK(6.0 * d0 >= cfg.data_floor_bits - 1.0);

    // solver objective agrees with the physical energy of the state
    const energy::EnergyBreakdown e = energy::total_energy(res.state, cfg);
    CHECK(res.objective_j ==
          doctest::Approx(e.total_j).epsilon(1e-2));
}

TEST_CASE("frozen-trajectory build keeps the reference path") {
    const ScenarioConfig cfg = testsupport::small_config();
    const surrogates::ReferencePoint ref = testsupport::line_reference(cfg, 5e5);
    const Eigen::MatrixXi a =
        Eigen::MatrixXi::Ones(cfg.num_ues(), cfg.num_rounds());

    subproblem::BuildOptions opts;
    opts.freeze_q = true;
    const subproblem::BuiltProgram built =
        subproblem::build_phase2(cfg, a, ref, opts);
    CHECK(built.frozen_q);
    CHECK(built.column({Kind::QX, -1, 3}) == -1);

    const subproblem::SubproblemResult res =
        subproblem::solve(built, solver_opts());
    REQUIRE(res.feasible);
    CHECK((res.state.q - ref.q).norm() == 0.0);

    // frozen propulsion cost is still charged
    const energy::EnergyBreakdown e = energy::total_energy(res.state, cfg);
    CHECK(res.objective_j == doctest::Approx(e.total_j).epsilon(1e-2));
    CHECK(e.fly_j > 0.0);
}

TEST_CASE("soft mode absorbs an impossible uplink load") {
    ScenarioConfig cfg = testsupport::small_config();
    cfg.model_bits = 1.0e9;  // far beyond any achievable rate
    cfg.validate_or_throw();
    const surrogates::ReferencePoint ref = testsupport::line_reference(cfg, 5e5);
    const Eigen::MatrixXi a =
        Eigen::MatrixXi::Ones(cfg.num_ues(), cfg.num_rounds());

    subproblem::BuildOptions hard;
    const subproblem::SubproblemResult r_hard = subproblem::solve(
        subproblem::build_phase2(cfg, a, ref, hard), solver_opts());
    CHECK(!r_hard.feasible);
    CHECK(r_hard.solver.status == conic::SolveStatus::infeasible);

    subproblem::BuildOptions soft;
    soft.soft = true;
    const subproblem::BuiltProgram built =
        subproblem::build_phase2(cfg, a, ref, soft);
    const subproblem::SubproblemResult r_soft =
        subproblem::solve(built, solver_opts());
    REQUIRE(r_soft.feasible);
    CHECK(r_soft.soft_slack > 1.0);
    CHECK(r_soft.soft_slack ==
          doctest::Approx(built.max_soft_slack(r_soft.solver.x))
              .epsilon(1e-12));
}

TEST_CASE("subproblem solves are bitwise deterministic") {
    const ScenarioConfig cfg = testsupport::small_config();
    const surrogates::ReferencePoint ref = testsupport::line_reference(
        cfg, cfg.data_floor_bits / cfg.num_rounds());
    const subproblem::BuiltProgram b1 =
        subproblem::build_phase1(cfg, ref, {});
    const subproblem::BuiltProgram b2 =
        subproblem::build_phase1(cfg, ref, {});
    CHECK((b1.x0 - b2.x0).norm() == 0.0);
    const subproblem::SubproblemResult r1 = subproblem::solve(b1, solver_opts());
    const subproblem::SubproblemResult r2 = subproblem::solve(b2, solver_opts());
    CHECK((r1.solver.x - r2.solver.x).norm() == 0.0);
    CHECK(r1.objective_j == r2.objective_j);
}

TEST_CASE("build rejects malformed inputs") {
    const ScenarioConfig cfg = testsupport::small_config();
    surrogates::ReferencePoint ref = testsupport::line_reference(cfg, 5e5);

    SUBCASE("trajectory endpoints must match the mission") {
        surrogates::ReferencePoint bad = ref;
        bad.q(0, 0) += 5.0;
        CHECK_THROWS(subproblem::build_phase1(cfg, bad, {}));
    }
    SUBCASE("participation matrix must have the mission shape") {
        Eigen::MatrixXi a =
            Eigen::MatrixXi::Ones(cfg.num_ues(), cfg.num_rounds() - 1);
        CHECK_THROWS(subproblem::build_phase2(cfg, a, ref, {}));
    }
    SUBCASE("every round must reach the participation floor") {
        Eigen::MatrixXi a =
            Eigen::MatrixXi::Ones(cfg.num_ues(), cfg.num_rounds());
        a.col(3).setZero();
        a(0, 3) = 1;  // one participant < participation_min
        CHECK_THROWS(subproblem::build_phase2(cfg, a, ref, {}));
    }
}
