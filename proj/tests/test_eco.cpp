#include <doctest.h>

#include <cmath>

#include "ecofl/eco.hpp"
#include "test_support.hpp"

using namespace ecofl;

TEST_CASE("initializer pins the documented starting point") {
    const ScenarioConfig cfg = default_config();
    const surrogates::ReferencePoint ref = eco::initialize(cfg);

    REQUIRE(ref.q.rows() == cfg.num_slots + 1);
    CHECK(ref.q(0, 0) == 0.0);
    CHECK(ref.q(0, 1) == 300.0);
    CHECK(ref.q(cfg.num_slots, 0) == 600.0);
    CHECK(ref.q(25, 0) == doctest::Approx(300.0).epsilon(1e-12));
    CHECK(ref.q(25, 1) == doctest::Approx(300.0).epsilon(1e-12));

    // uniform relaxed data exactly covering the per-UE floor
    CHECK(ref.data_bits(0, 0) ==
          doctest::Approx(1.0204081632653061e6).epsilon(1e-15));
    CHECK(ref.data_bits.minCoeff() == ref.data_bits.maxCoeff());
    // UE powers at half cap, in log form
    CHECK(ref.b_log(3, 7) ==
          doctest::Approx(-0.27868186382101678).epsilon(1e-14));
    // hover seeded at the uplink window
    CHECK(ref.hover_s.minCoeff() == cfg.t_cm_s);
    CHECK(ref.hover_s.maxCoeff() == cfg.t_cm_s);
    CHECK(ref.data_ue_bits.size() == cfg.num_ues());
    CHECK(ref.data_ue_bits(0) == cfg.data_floor_bits);

    // caches agree with a direct evaluation
    const double h2 = cfg.altitude_m * cfg.altitude_m;
    const double s_direct =
        (ref.q.row(5) - cfg.ue_pos_m.row(2)).squaredNorm() + h2;
    CHECK(ref.sq_dist(2, 4) == doctest::Approx(s_direct).epsilon(1e-14));
}

TEST_CASE("with_trajectory swaps the path and refreshes the caches") {
    const ScenarioConfig cfg = testsupport::small_config();
    const surrogates::ReferencePoint ref = eco::initialize(cfg);
    MatX2 q2 = ref.q;
    for (int n = 1; n < cfg.num_slots; ++n) q2(n, 1) += 40.0;
    const surrogates::ReferencePoint moved =
        eco::with_trajectory(cfg, ref, q2);
    CHECK((moved.q - q2).norm() == 0.0);
    CHECK((moved.b_log - ref.b_log).norm() == 0.0);
    CHECK((moved.data_bits - ref.data_bits).norm() == 0.0);
    CHECK((moved.data_ue_bits - ref.data_ue_bits).norm() == 0.0);
    bool any_changed = false;
    for (int r = 0; r < cfg.num_rounds(); ++r)
        for (int k = 0; k < cfg.num_ues(); ++k)
            if (moved.sq_dist(k, r) != ref.sq_dist(k, r)) any_changed = true;
    CHECK(any_changed);
    const double h2 = cfg.altitude_m * cfg.altitude_m;
    CHECK(moved.sq_dist(1, 2) ==
          doctest::Approx((q2.row(3) - cfg.ue_pos_m.row(1)).squaredNorm() +
                          h2)
              .epsilon(1e-14));
}

TEST_CASE("relaxed volumes round to participation with repair") {
    const ScenarioConfig cfg = testsupport::small_config();
    const double half_level = 0.10986122886681098e6;  // tanh(beta d) = 1/2
    Eigen::MatrixXd d =
        Eigen::MatrixXd::Constant(cfg.num_ues(), cfg.num_rounds(), 2e5);

    d(0, 0) = 1e5;                 // below the half level
    d(1, 0) = half_level * 1.001;  // just above: rounds up
    d(2, 0) = half_level * 0.999;  // just under

    d.col(3).setZero();          // round 3 needs full repair
    d(0, 3) = 5e4;
    d(1, 3) = 8e4;
    d(2, 3) = 2e4;

    const Eigen::MatrixXi a = eco::round_participation(cfg, d);
    CHECK(a(0, 0) == 0);
    CHECK(a(1, 0) == 1);
    // repair promotes the larger sub-threshold volume to reach the floor
    CHECK(a(2, 0) == 1);

    CHECK(a.col(3).sum() == cfg.participation_min);
    CHECK(a(1, 3) == 1);  // largest first
    CHECK(a(0, 3) == 1);
    CHECK(a(2, 3) == 0);

    for (int r = 0; r < cfg.num_rounds(); ++r)
        CHECK(a.col(r).sum() >= cfg.participation_min);

    SUBCASE("floor above the UE count is rejected") {
        ScenarioConfig bad = cfg;
        bad.participation_min = cfg.num_ues() + 1;
        CHECK_THROWS(eco::round_participation(bad, d));
    }
}

TEST_CASE("full pipeline solves the small mission") {
    const ScenarioConfig cfg = testsupport::small_config();
    eco::SCAOptions opts;
    const eco::RunReport rep = eco::run_eco(cfg, 1, opts);

    REQUIRE(rep.feasible);
    CHECK(rep.method == "eco");
    REQUIRE(!rep.phase1_trace.empty());
    REQUIRE(!rep.phase2_trace.empty());
    CHECK(static_cast<int>(rep.phase1_trace.size()) <= opts.max_iters);

    // coupled phase is monotone up to solver noise
    for (std::size_t i = 1; i < rep.phase1_trace.size(); ++i)
        CHECK(rep.phase1_trace[i].objective_j <=
              rep.phase1_trace[i - 1].objective_j +
                  1e-6 * std::max(1.0,
                                  std::abs(rep.phase1_trace[i - 1]
                                               .objective_j)));

    // the audit replays every mission constraint on the exact models
    CHECK(rep.audit.ok);
    CHECK(rep.audit.report.max_violation <= 1e-6);
    CHECK(rep.audit.accuracy_lhs < cfg.accuracy_eps);
    CHECK(rep.energy.total_j > 0.0);
    CHECK(rep.energy.fly_j > 0.0);
    CHECK(rep.energy.hover_j > 0.0);
    CHECK(rep.energy.total_j ==
          doctest::Approx(rep.energy.fly_j + rep.energy.hover_j +
                          rep.energy.broadcast_j + rep.energy.compute_j +
                          rep.energy.uplink_j)
              .epsilon(1e-12));

    // every round keeps the participation floor after rounding
    for (int r = 0; r < cfg.num_rounds(); ++r)
        CHECK(rep.state.a.col(r).sum() >= cfg.participation_min);

    SUBCASE("the pipeline is deterministic") {
        const eco::RunReport again = eco::run_eco(cfg, 1, opts);
        REQUIRE(again.feasible);
        CHECK((again.state.q - rep.state.q).norm() == 0.0);
        CHECK((again.state.data_bits - rep.state.data_bits).norm() == 0.0);
        CHECK(again.energy.total_j == rep.energy.total_j);
        CHECK(again.phase1_trace.size() == rep.phase1_trace.size());
    }
}

TEST_CASE("baseline participation schemes") {
    const ScenarioConfig cfg = testsupport::small_config();
    eco::SCAOptions opts;

    SUBCASE("fixed scheme keeps every UE in every round") {
        const eco::RunReport rep = eco::baseline_participation(
            cfg, eco::ParticipationScheme::fixed_scheme, 7, opts);
        REQUIRE(rep.feasible);
        CHECK(rep.method == "baseline:fixed");
        CHECK(rep.state.a.minCoeff() == 1);
        CHECK(rep.audit.ok);
    }

    SUBCASE("random scheme draws exactly the floor per round") {
        const eco::RunReport rep = eco::baseline_participation(
            cfg, eco::ParticipationScheme::random_scheme, 7, opts);
        REQUIRE(rep.feasible);
        CHECK(rep.method == "baseline:random");
        for (int r = 0; r < cfg.num_rounds(); ++r)
            CHECK(rep.state.a.col(r).sum() == cfg.participation_min);
        CHECK(rep.audit.ok);

        const eco::RunReport same = eco::baseline_participation(
            cfg, eco::ParticipationScheme::random_scheme, 7, opts);
        CHECK((same.state.a - rep.state.a).norm() == 0);
        CHECK(same.energy.total_j == rep.energy.total_j);
    }
}

TEST_CASE("heuristic trajectory geometry") {
    const ScenarioConfig cfg = default_config();  // six UEs, fifty slots

    const MatX2 str =
        eco::heuristic_trajectory_points(cfg, eco::TrajectoryShape::str);
    const MatX2 mid =
        eco::heuristic_trajectory_points(cfg, eco::TrajectoryShape::mid);
    const MatX2 asy =
        eco::heuristic_trajectory_points(cfg, eco::TrajectoryShape::asy);
    const MatX2 cur =
        eco::heuristic_trajectory_points(cfg, eco::TrajectoryShape::cur);

    for (const MatX2* q : {&str, &mid, &asy, &cur}) {
        REQUIRE(q->rows() == cfg.num_slots + 1);
        CHECK((q->row(0).transpose() - cfg.q_initial_m).norm() == 0.0);
        CHECK((q->row(cfg.num_slots).transpose() - cfg.q_final_m).norm() ==
              0.0);
        CHECK(q->col(0).minCoeff() >= -1e-9);
        CHECK(q->col(0).maxCoeff() <= cfg.area_x_m + 1e-9);
        CHECK(q->col(1).minCoeff() >= -1e-9);
        CHECK(q->col(1).maxCoeff() <= cfg.area_y_m + 1e-9);
    }

    // with the default endpoints the area-center detour lies on the
    // straight line, so the two shapes coincide
    CHECK((mid - str).cwiseAbs().maxCoeff() < 1e-9);

    // the straight line is uniform
    CHECK(str(25, 0) == doctest::Approx(300.0).epsilon(1e-12));
    CHECK(str(25, 1) == doctest::Approx(300.0).epsilon(1e-12));

    // the asymmetric detour passes close to the UE centroid
    const Eigen::RowVector2d centroid = cfg.ue_pos_m.colwise().mean();
    double best = 1e300;
    for (int n = 0; n <= cfg.num_slots; ++n)
        best = std::min(best, (asy.row(n) - centroid).norm());
    CHECK(best < 12.0);

    // the curved shape is a half ellipse: apex at mid arc, bulging toward
    // the UE side, flat ends on the chord
    CHECK(cur(25, 0) == doctest::Approx(300.0).epsilon(5e-3));
    const double apex_side = centroid(1) > 300.0 ? 450.0 : 150.0;
    CHECK(cur(25, 1) == doctest::Approx(apex_side).epsilon(5e-3));
    // symmetric about the chord midpoint
    CHECK(cur(10, 1) == doctest::Approx(cur(40, 1)).epsilon(4e-3));

    CHECK(eco::trajectory_shape_from_string("cur") ==
          eco::TrajectoryShape::cur);
    CHECK(eco::trajectory_shape_from_string("Mid") ==
          eco::TrajectoryShape::mid);
    CHECK_THROWS(eco::trajectory_shape_from_string("zig"));
    CHECK(std::string(eco::to_string(eco::TrajectoryShape::asy)) == "ASY");
}

TEST_CASE("frozen heuristic pipeline keeps its shape") {
    const ScenarioConfig cfg = testsupport::small_config();
    eco::SCAOptions opts;
    const eco::RunReport rep = eco::run_heuristic_trajectory(
        cfg, eco::TrajectoryShape::str, 3, opts);
    REQUIRE(rep.feasible);
    CHECK(rep.method == "trajectory:STR");
    const MatX2 want =
        eco::heuristic_trajectory_points(cfg, eco::TrajectoryShape::str);
    CHECK((rep.state.q - want).norm() == 0.0);
    CHECK(rep.audit.ok);
}

TEST_CASE("audit flags hand-made violations") {
    const ScenarioConfig cfg = testsupport::small_config();
    DecisionState st = DecisionState::zeros(cfg);
    // straight path so geometry rows are clean
    for (int n = 0; n <= cfg.num_slots; ++n) {
        st.q(n, 0) = 600.0 * n / cfg.num_slots;
        st.q(n, 1) = 300.0;
    }
    st.hover_s.setConstant(5.0);
    st.a.setOnes();
    st.data_bits.setConstant(cfg.data_floor_bits / cfg.num_rounds());
    st.ue_power_w.setConstant(0.5);
    st.uav_power_w.setConstant(0.5);

    st.a(1, 2) = 0;                      // UE 1 still has data in round 2
    st.ue_power_w(0, 0) = 99.0;          // above the cap
    const eco::AuditResult audit = eco::audit_state(cfg, st, 1e-6);
    CHECK(!audit.ok);
    double silent = 0.0, box = 0.0;
    for (const auto& item : audit.report.items) {
        if (item.name == "silent_data[1,2]") silent = item.amount;
        if (item.name == "ue_power_box[0,0]") box = item.amount;
    }
    CHECK(silent > 0.0);
    CHECK(box == doctest::Approx(99.0 - cfg.ue_power_max_w).epsilon(1e-12));

    SUBCASE("an empty round disables the accuracy bound") {
        DecisionState bad = st;
        bad.a.col(4).setZero();
        const eco::AuditResult res = eco::audit_state(cfg, bad, 1e-6);
        CHECK(std::isinf(res.accuracy_lhs));
        bool flagged = false;
        for (const auto& item : res.report.items)
            if (item.name == "accuracy_defined" && item.amount == 1.0)
                flagged = true;
        CHECK(flagged);
    }
}
