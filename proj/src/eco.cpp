#include "ecofl/eco.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ecofl/channel.hpp"
#include "ecofl/flbound.hpp"

namespace ecofl {
namespace eco {

namespace {

using surrogates::ReferencePoint;
using surrogates::VarKey;

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void merge(ViolationReport& into, const ViolationReport& other) {
    for (const auto& item : other.items) into.add(item.name, item.amount);
}

std::string describe_failure(const subproblem::SubproblemResult& res,
                             int iter) {
    std::ostringstream os;
    os << "subproblem " << conic::to_string(res.solver.status)
       << " at iteration " << iter;
    if (!res.solver.violated_rows.empty()) {
        os << "; worst rows:";
        const std::size_t shown =
            std::min<std::size_t>(3, res.solver.violated_rows.size());
        for (std::size_t i = 0; i < shown; ++i)
            os << " " << res.solver.violated_rows[i].first << "="
               << res.solver.violated_rows[i].second;
    }
    if (res.solver.status == conic::SolveStatus::infeasible)
        os << "; infeasibility measure " << res.solver.infeas_measure;
    return os.str();
}

// Per-UE committed volumes used to seed the committed phase: keep the
// relaxed average where it is informative but never start below the
// per-UE floor share.
Eigen::VectorXd committed_seed_bits(const ScenarioConfig& cfg,
                                    const Eigen::MatrixXi& a,
                                    const Eigen::MatrixXd& relaxed_bits) {
    const int ues = cfg.num_ues();
    Eigen::VectorXd d = Eigen::VectorXd::Zero(ues);
    for (int k = 0; k < ues; ++k) {
        double cnt = 0.0, sum = 0.0;
        for (int r = 0; r < cfg.num_rounds(); ++r)
            if (a(k, r) != 0) {
                cnt += 1.0;
                if (relaxed_bits.size()) sum += relaxed_bits(k, r);
            }
        double seed = 1.0;  // degenerate never-participant: keep positive
        if (cnt > 0.0)
            seed = std::max(
                {sum / cnt, cfg.data_floor_bits / cnt, 1.0});
        d(k) = seed;
    }
    return d;
}

// One SCA loop shared by both phases (a == nullptr selects the coupled
// phase). The reference is advanced to each subproblem optimum; the loop
// stops when the relative objective improvement falls under rel_obj_tol.
PhaseResult sca_loop(const ScenarioConfig& cfg, const Eigen::MatrixXi* a,
                     ReferencePoint ref, const SCAOptions& opts) {
    PhaseResult out;
    subproblem::BuildOptions bopts;
    bopts.freeze_q = opts.freeze_q;
    bopts.soft = opts.soft;

    conic::SolveOptions sopts;
    sopts.tol = opts.solver_tol;
    sopts.verbose = std::max(0, opts.verbose - 1);

    double prev_obj = std::numeric_limits<double>::infinity();
    int restores = 0;
    double restore_slack = std::numeric_limits<double>::infinity();
    int iter = 0;

    // Advances the linearization point to the optimum of a solved
    // subproblem; powers the solver zeroed keep their previous log value.
    const auto advance_ref =
        [&](const subproblem::BuiltProgram& built,
            const subproblem::SubproblemResult& res) -> ReferencePoint {
        Eigen::MatrixXd b_log = ref.b_log;
        for (int r = 0; r < cfg.num_rounds(); ++r)
            for (int k = 0; k < cfg.num_ues(); ++k)
                if (res.state.ue_power_w(k, r) > 0.0)
                    b_log(k, r) = std::log(res.state.ue_power_w(k, r));
        ReferencePoint next = surrogates::make_reference(
            cfg, res.state.q, b_log, res.data_bits, res.state.hover_s);
        if (a) {
            Eigen::VectorXd d_ue(cfg.num_ues());
            for (int k = 0; k < cfg.num_ues(); ++k)
                d_ue(k) = built.value({VarKey::Kind::D, k, -1}, res.solver.x);
            next.data_ue_bits = d_ue;
        } else {
            next.data_ue_bits = ref.data_ue_bits;
        }
        return next;
    };

    while (iter < opts.max_iters) {
        const subproblem::BuiltProgram built =
            a ? subproblem::build_phase2(cfg, *a, ref, bopts)
              : subproblem::build_phase1(cfg, ref, bopts);
        const subproblem::SubproblemResult res = subproblem::solve(built, sopts);
        if (!res.feasible) {
            // Entry-point restoration: before any iterate is accepted, an
            // infeasible subproblem usually means a poor linearization
            // anchor rather than an infeasible configuration. Re-anchor at
            // the optimum of the slack-penalized variant (the surrogates
            // are exact at the anchor, so the true violation there is at
            // most the slack) while the slack keeps improving.
            if (iter == 0 && !bopts.soft && restores < opts.restore_max) {
                subproblem::BuildOptions ropts = bopts;
                ropts.soft = true;
                const subproblem::BuiltProgram rebuilt =
                    a ? subproblem::build_phase2(cfg, *a, ref, ropts)
                      : subproblem::build_phase1(cfg, ref, ropts);
                const subproblem::SubproblemResult rres =
                    subproblem::solve(rebuilt, sopts);
                const bool improving =
                    rres.feasible &&
                    (!std::isfinite(restore_slack) ||
                     rres.soft_slack <
                         restore_slack - 1e-9 * (1.0 + restore_slack));
                if (improving) {
                    ++restores;
                    restore_slack = rres.soft_slack;
                    ref = advance_ref(rebuilt, rres);
                    continue;
                }
            }
            out.feasible = false;
            out.detail = describe_failure(res, iter);
            out.ref = ref;
            return out;
        }

        // movement of the reference (meters / Mb / seconds / nats)
        ReferencePoint next = advance_ref(built, res);
        double step = (next.hover_s - ref.hover_s).cwiseAbs().maxCoeff();
        if (!opts.freeze_q)
            step = std::max(step, (next.q - ref.q).cwiseAbs().maxCoeff());
        step = std::max(step,
                        (next.b_log - ref.b_log).cwiseAbs().maxCoeff());
        if (a)
            step = std::max(step, (next.data_ue_bits - ref.data_ue_bits)
                                          .cwiseAbs()
                                          .maxCoeff() /
                                      1e6);
        else
            step = std::max(
                step,
                (next.data_bits - ref.data_bits).cwiseAbs().maxCoeff() / 1e6);

        out.trace.push_back({iter, res.objective_j, res.solver.gap, step,
                             conic::to_string(res.solver.status)});
        out.state = res.state;
        out.data_bits = res.data_bits;
        out.objective_j = res.objective_j;
        out.soft_slack = res.soft_slack;
        ref = std::move(next);

        const bool stalled =
            std::isfinite(prev_obj) &&
            std::abs(prev_obj - res.objective_j) <=
                opts.rel_obj_tol * std::max(1.0, std::abs(prev_obj));
        prev_obj = res.objective_j;
        ++iter;
        if (stalled) {
            out.detail =
                "objective stalled after " + std::to_string(iter) +
                " iterations";
            break;
        }
    }
    if (out.detail.empty())
        out.detail =
            "iteration cap (" + std::to_string(opts.max_iters) + ") reached";
    if (restores > 0)
        out.detail +=
            "; entry point restored " + std::to_string(restores) + "x";
    out.feasible = true;
    out.ref = ref;
    return out;
}

}  // namespace

ReferencePoint initialize(const ScenarioConfig& cfg) {
    cfg.validate_or_throw();
    const int slots = cfg.num_slots;
    MatX2 q(slots + 1, 2);
    for (int n = 0; n <= slots; ++n) {
        const double f = static_cast<double>(n) / slots;
        q.row(n) =
            ((1.0 - f) * cfg.q_initial_m + f * cfg.q_final_m).transpose();
    }
    const double d0 =
        std::max(cfg.data_floor_bits / cfg.num_rounds(), 1e3);
    Eigen::MatrixXd data =
        Eigen::MatrixXd::Constant(cfg.num_ues(), cfg.num_rounds(), d0);
    Eigen::MatrixXd b_log = Eigen::MatrixXd::Constant(
        cfg.num_ues(), cfg.num_rounds(), std::log(cfg.ue_power_max_w / 2.0));
    Eigen::VectorXd hover =
        Eigen::VectorXd::Constant(cfg.num_rounds(), cfg.t_cm_s);
    ReferencePoint ref = surrogates::make_reference(cfg, q, b_log, data, hover);
    ref.data_ue_bits = Eigen::VectorXd::Constant(
        cfg.num_ues(), std::max(cfg.data_floor_bits, 1e3));
    return ref;
}

ReferencePoint with_trajectory(const ScenarioConfig& cfg,
                               const ReferencePoint& ref, const MatX2& q) {
    ReferencePoint out =
        surrogates::make_reference(cfg, q, ref.b_log, ref.data_bits,
                                   ref.hover_s);
    out.data_ue_bits = ref.data_ue_bits;
    return out;
}

PhaseResult phase1(const ScenarioConfig& cfg, const ReferencePoint& init,
                   const SCAOptions& opts) {
    return sca_loop(cfg, nullptr, init, opts);
}

Eigen::MatrixXi round_participation(const ScenarioConfig& cfg,
                                    const Eigen::MatrixXd& data_bits) {
    const int ues = cfg.num_ues();
    const int rounds = cfg.num_rounds();
    if (data_bits.rows() != ues || data_bits.cols() != rounds)
        throw std::invalid_argument("round_participation: volume shape");
    const double beta = surrogates::participation_beta_per_bit(cfg);
    Eigen::MatrixXi a = Eigen::MatrixXi::Zero(ues, rounds);
    for (int r = 0; r < rounds; ++r)
        for (int k = 0; k < ues; ++k)
            a(k, r) = surrogates::participation_smooth(data_bits(k, r),
                                                       beta) >= 0.5
                          ? 1
                          : 0;
    // repair: promote the largest relaxed volumes until each round
    // reaches the participation floor
    for (int r = 0; r < rounds; ++r) {
        int cnt = a.col(r).sum();
        while (cnt < cfg.participation_min) {
            int best = -1;
            for (int k = 0; k < ues; ++k)
                if (a(k, r) == 0 &&
                    (best < 0 || data_bits(k, r) > data_bits(best, r)))
                    best = k;
            if (best < 0)
                throw std::invalid_argument(
                    "round_participation: floor above the UE count");
            a(best, r) = 1;
            ++cnt;
        }
    }
    return a;
}

PhaseResult phase2(const ScenarioConfig& cfg, const Eigen::MatrixXi& a,
                   const ReferencePoint& init, const SCAOptions& opts) {
    return sca_loop(cfg, &a, init, opts);
}

AuditResult audit_state(const ScenarioConfig& cfg, const DecisionState& state,
                        double tol) {
    AuditResult out;
    ViolationReport rep;
    merge(rep, check_timeslot_feasibility(state, cfg));
    merge(rep, channel::check_rate_constraints(state, cfg));

    rep.add("q_start", (state.q.row(0).transpose() - cfg.q_initial_m).norm());
    rep.add("q_end", (state.q.row(cfg.num_slots).transpose() - cfg.q_final_m)
                         .norm());
    for (int n = 0; n <= cfg.num_slots; ++n) {
        const double outside = std::max(
            {-state.q(n, 0), state.q(n, 0) - cfg.area_x_m, -state.q(n, 1),
             state.q(n, 1) - cfg.area_y_m});
        rep.add("q_box[" + std::to_string(n) + "]", outside);
    }

    for (int r = 0; r < cfg.num_rounds(); ++r) {
        int cnt = 0;
        for (int k = 0; k < cfg.num_ues(); ++k) {
            cnt += state.a(k, r) != 0 ? 1 : 0;
            const double p = state.ue_power_w(k, r);
            rep.add("ue_power_box[" + std::to_string(k) + "," +
                        std::to_string(r) + "]",
                    std::max(p - cfg.ue_power_max_w, -p));
            if (state.a(k, r) == 0)
                rep.add("silent_data[" + std::to_string(k) + "," +
                            std::to_string(r) + "]",
                        std::abs(state.data_bits(k, r)));
        }
        rep.add("participation_floor[" + std::to_string(r) + "]",
                static_cast<double>(cfg.participation_min - cnt));
        rep.add("hover_nonneg[" + std::to_string(r) + "]", -state.hover_s(r));
    }
    for (int b = 0; b < cfg.num_broadcasts(); ++b) {
        const double p = state.uav_power_w(b);
        rep.add("uav_power_box[" + std::to_string(b) + "]",
                std::max(p - cfg.uav_power_max_w, -p));
    }
    for (int k = 0; k < cfg.num_ues(); ++k)
        rep.add("data_floor[" + std::to_string(k) + "]",
                cfg.data_floor_bits - state.data_bits.row(k).sum());

    out.accuracy_budget = cfg.accuracy_eps;
    bool rounds_populated = true;
    for (int r = 0; r < cfg.num_rounds(); ++r) {
        double vol = 0.0;
        for (int k = 0; k < cfg.num_ues(); ++k)
            if (state.a(k, r) != 0) vol += state.data_bits(k, r);
        if (!(vol > 0.0)) rounds_populated = false;
    }
    if (rounds_populated) {
        flbound::ParticipationPlan plan;
        plan.a = state.a;
        plan.data_bits = state.data_bits;
        out.accuracy_lhs =
            flbound::accuracy_lhs(plan, cfg.fl, cfg.num_slots,
                                  cfg.local_iters);
        rep.add("accuracy", out.accuracy_lhs - cfg.accuracy_eps);
    } else {
        out.accuracy_lhs = std::numeric_limits<double>::infinity();
        rep.add("accuracy_defined", 1.0);
    }

    out.energy = energy::total_energy(state, cfg);
    out.report = std::move(rep);
    out.ok = out.report.ok(tol);
    return out;
}

RunReport run_eco(const ScenarioConfig& cfg, std::uint64_t seed,
                  const SCAOptions& opts) {
    const double t0 = now_s();
    RunReport rep;
    rep.method = "eco";
    rep.seed = seed;
    rep.state = DecisionState::zeros(cfg);

    const ReferencePoint init = initialize(cfg);
    const PhaseResult p1 = phase1(cfg, init, opts);
    rep.phase1_trace = p1.trace;
    if (!p1.feasible) {
        rep.detail = "phase1: " + p1.detail;
        rep.wall_s = now_s() - t0;
        return rep;
    }
    const Eigen::MatrixXi a = round_participation(cfg, p1.data_bits);
    ReferencePoint ref2 = p1.ref;
    ref2.data_ue_bits = committed_seed_bits(cfg, a, p1.data_bits);
    const PhaseResult p2 = phase2(cfg, a, ref2, opts);
    rep.phase2_trace = p2.trace;
    if (!p2.feasible) {
        rep.detail = "phase2: " + p2.detail;
        rep.wall_s = now_s() - t0;
        return rep;
    }
    rep.state = p2.state;
    rep.audit = audit_state(cfg, p2.state, 1e-6);
    rep.energy = rep.audit.energy;
    const double slack = std::max(p1.soft_slack, p2.soft_slack);
    if (opts.soft && slack > opts.soft_slack_tol) {
        rep.feasible = false;
        std::ostringstream os;
        os << "requirement slack " << slack << " exceeds "
           << opts.soft_slack_tol;
        rep.detail = os.str();
    } else {
        rep.feasible = true;
        rep.detail = "phase1: " + p1.detail + "; phase2: " + p2.detail;
    }
    rep.wall_s = now_s() - t0;
    return rep;
}

RunReport baseline_participation(const ScenarioConfig& cfg,
                                 ParticipationScheme scheme,
                                 std::uint64_t seed, const SCAOptions& opts) {
    const double t0 = now_s();
    cfg.validate_or_throw();
    RunReport rep;
    rep.method = scheme == ParticipationScheme::fixed_scheme
                     ? "baseline:fixed"
                     : "baseline:random";
    rep.seed = seed;
    rep.state = DecisionState::zeros(cfg);

    const int ues = cfg.num_ues();
    const int rounds = cfg.num_rounds();
    Eigen::MatrixXi a;
    if (scheme == ParticipationScheme::fixed_scheme) {
        a = Eigen::MatrixXi::Ones(ues, rounds);
    } else {
        // exactly `participation_min` distinct UEs per round, seeded
        a = Eigen::MatrixXi::Zero(ues, rounds);
        std::mt19937_64 rng(seed);
        std::vector<int> idx(ues);
        for (int r = 0; r < rounds; ++r) {
            for (int k = 0; k < ues; ++k) idx[k] = k;
            for (int j = 0; j < cfg.participation_min; ++j) {
                const int pick =
                    j + static_cast<int>(rng() %
                                         static_cast<std::uint64_t>(ues - j));
                std::swap(idx[j], idx[pick]);
                a(idx[j], r) = 1;
            }
        }
    }

    ReferencePoint ref = initialize(cfg);
    ref.data_ue_bits = committed_seed_bits(cfg, a, Eigen::MatrixXd());
    SCAOptions sopts = opts;
    sopts.soft = true;  // diagnostic mode: certify infeasible baselines
    const PhaseResult p2 = phase2(cfg, a, ref, sopts);
    rep.phase2_trace = p2.trace;
    if (!p2.feasible) {
        rep.detail = "phase2: " + p2.detail;
        rep.wall_s = now_s() - t0;
        return rep;
    }
    rep.state = p2.state;
    rep.audit = audit_state(cfg, p2.state, 1e-6);
    rep.energy = rep.audit.energy;
    if (p2.soft_slack > sopts.soft_slack_tol) {
        rep.feasible = false;
        std::ostringstream os;
        os << "requirement slack " << p2.soft_slack << " exceeds "
           << sopts.soft_slack_tol;
        rep.detail = os.str();
    } else {
        rep.feasible = true;
        rep.detail = "phase2: " + p2.detail;
    }
    rep.wall_s = now_s() - t0;
    return rep;
}

const char* to_string(TrajectoryShape s) {
    switch (s) {
        case TrajectoryShape::cur:
            return "CUR";
        case TrajectoryShape::str:
            return "STR";
        case TrajectoryShape::mid:
            return "MID";
        case TrajectoryShape::asy:
            return "ASY";
    }
    return "?";
}

TrajectoryShape trajectory_shape_from_string(const std::string& name) {
    std::string up = name;
    for (char& c : up) c = static_cast<char>(std::toupper(c));
    if (up == "CUR") return TrajectoryShape::cur;
    if (up == "STR") return TrajectoryShape::str;
    if (up == "MID") return TrajectoryShape::mid;
    if (up == "ASY") return TrajectoryShape::asy;
    throw std::invalid_argument("unknown trajectory shape: " + name);
}

namespace {

MatX2 sample_polyline(const std::vector<Vec2>& pts, int slots) {
    MatX2 q(slots + 1, 2);
    std::vector<double> cum(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i)
        cum[i] = cum[i - 1] + (pts[i] - pts[i - 1]).norm();
    const double total = cum.back();
    if (!(total > 0.0)) {
        for (int n = 0; n <= slots; ++n) q.row(n) = pts.front().transpose();
        return q;
    }
    for (int n = 0; n <= slots; ++n) {
        const double s = total * n / slots;
        std::size_t seg = 1;
        while (seg + 1 < pts.size() && cum[seg] < s) ++seg;
        const double span = cum[seg] - cum[seg - 1];
        const double f = span > 0.0 ? (s - cum[seg - 1]) / span : 0.0;
        q.row(n) =
            ((1.0 - f) * pts[seg - 1] + f * pts[seg]).transpose();
    }
    return q;
}

MatX2 sample_half_ellipse(const ScenarioConfig& cfg, int slots) {
    const Vec2 center = 0.5 * (cfg.q_initial_m + cfg.q_final_m);
    const Vec2 chord = cfg.q_final_m - cfg.q_initial_m;
    const double semi_major = 0.5 * chord.norm();
    MatX2 q(slots + 1, 2);
    if (!(semi_major > 0.0)) {
        for (int n = 0; n <= slots; ++n)
            q.row(n) = cfg.q_initial_m.transpose();
        return q;
    }
    const Vec2 e1 = chord / (2.0 * semi_major);
    Vec2 e2(-e1.y(), e1.x());
    const Vec2 centroid = cfg.ue_pos_m.colwise().mean().transpose();
    if (e2.dot(centroid - center) < 0.0) e2 = -e2;  // bulge toward the UEs
    const double semi_minor = 0.5 * semi_major;

    auto point = [&](double theta) -> Vec2 {
        return center + semi_major * std::cos(theta) * e1 +
               semi_minor * std::sin(theta) * e2;
    };
    // arc-equidistant sampling of theta: pi -> 0
    const int dense = 8192;
    std::vector<double> theta(dense + 1), cum(dense + 1, 0.0);
    for (int i = 0; i <= dense; ++i)
        theta[i] = std::numbers::pi * (1.0 - static_cast<double>(i) / dense);
    for (int i = 1; i <= dense; ++i)
        cum[i] = cum[i - 1] + (point(theta[i]) - point(theta[i - 1])).norm();
    const double total = cum.back();
    for (int n = 0; n <= slots; ++n) {
        const double s = total * n / slots;
        int seg = 1;
        while (seg < dense && cum[seg] < s) ++seg;
        const double span = cum[seg] - cum[seg - 1];
        const double f = span > 0.0 ? (s - cum[seg - 1]) / span : 0.0;
        q.row(n) =
            point((1.0 - f) * theta[seg - 1] + f * theta[seg]).transpose();
    }
    q.row(0) = cfg.q_initial_m.transpose();
    q.row(slots) = cfg.q_final_m.transpose();
    return q;
}

}  // namespace

MatX2 heuristic_trajectory_points(const ScenarioConfig& cfg,
                                  TrajectoryShape shape) {
    cfg.validate_or_throw();
    const int slots = cfg.num_slots;
    switch (shape) {
        case TrajectoryShape::str:
            return sample_polyline({cfg.q_initial_m, cfg.q_final_m}, slots);
        case TrajectoryShape::mid: {
            const Vec2 center(cfg.area_x_m / 2.0, cfg.area_y_m / 2.0);
            return sample_polyline({cfg.q_initial_m, center, cfg.q_final_m},
                                   slots);
        }
        case TrajectoryShape::asy: {
            const Vec2 centroid =
                cfg.ue_pos_m.colwise().mean().transpose();
            return sample_polyline({cfg.q_initial_m, centroid, cfg.q_final_m},
                                   slots);
        }
        case TrajectoryShape::cur:
            return sample_half_ellipse(cfg, slots);
    }
    throw std::invalid_argument("heuristic_trajectory_points: bad shape");
}

RunReport run_heuristic_trajectory(const ScenarioConfig& cfg,
                                   TrajectoryShape shape, std::uint64_t seed,
                                   const SCAOptions& opts) {
    const double t0 = now_s();
    RunReport rep;
    rep.method = std::string("trajectory:") + to_string(shape);
    rep.seed = seed;
    rep.state = DecisionState::zeros(cfg);

    const MatX2 q = heuristic_trajectory_points(cfg, shape);
    const ReferencePoint init = with_trajectory(cfg, initialize(cfg), q);
    SCAOptions sopts = opts;
    sopts.freeze_q = true;
    sopts.soft = true;  // diagnostic mode: certify infeasible shapes

    const PhaseResult p1 = phase1(cfg, init, sopts);
    rep.phase1_trace = p1.trace;
    if (!p1.feasible) {
        rep.detail = "phase1: " + p1.detail;
        rep.wall_s = now_s() - t0;
        return rep;
    }
    const Eigen::MatrixXi a = round_participation(cfg, p1.data_bits);
    ReferencePoint ref2 = p1.ref;
    ref2.data_ue_bits = committed_seed_bits(cfg, a, p1.data_bits);
    const PhaseResult p2 = phase2(cfg, a, ref2, sopts);
    rep.phase2_trace = p2.trace;
    if (!p2.feasible) {
        rep.detail = "phase2: " + p2.detail;
        rep.wall_s = now_s() - t0;
        return rep;
    }
    rep.state = p2.state;
    rep.audit = audit_state(cfg, p2.state, 1e-6);
    rep.energy = rep.audit.energy;
    const double slack = std::max(p1.soft_slack, p2.soft_slack);
    if (slack > sopts.soft_slack_tol) {
        rep.feasible = false;
        std::ostringstream os;
        os << "requirement slack " << slack << " exceeds "
           << sopts.soft_slack_tol;
        rep.detail = os.str();
    } else {
        rep.feasible = true;
        rep.detail = "phase1: " + p1.detail + "; phase2: " + p2.detail;
    }
    rep.wall_s = now_s() - t0;
    return rep;
}

}  // namespace eco
}  // namespace ecofl
