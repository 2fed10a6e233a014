// Acceptance gate: seven end-to-end checks over the whole library, one
// PASS/FAIL line per check, nonzero exit code when any check fails.
// Every numeric tolerance is pinned as a named constant below.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecofl/channel.hpp"
#include "ecofl/eco.hpp"
#include "ecofl/energy.hpp"
#include "ecofl/flbound.hpp"
#include "ecofl/flsim.hpp"
#include "ecofl/scenario.hpp"
#include "ecofl/surrogates.hpp"

using namespace ecofl;
using surrogates::AffineForm;
using surrogates::ReferencePoint;
using surrogates::VarKey;

namespace {

// ---------------------------------------------------------------------
// pinned tolerances and budgets

constexpr int kSurrogateTrials = 1000;  // (reference, evaluation) pairs
constexpr double kOneSidedTol = 1e-9;   // allowed bound violation (rel)
constexpr double kTightTol = 1e-9;      // equality slack at the reference
constexpr double kGradRelTol = 1e-5;    // finite-difference slope match

constexpr int kBoundSeeds = 50;           // simulator validation seeds
constexpr double kSeedPassShare = 0.95;   // seeds that must stay bounded
constexpr double kBoundRelTol = 1e-12;    // closed form vs recursion
constexpr int kBoundHorizon = 500;        // compared virtual updates

constexpr double kMonotoneRel = 1e-6;  // phase-1 objective monotonicity
constexpr double kAuditTol = 1e-6;     // exact-model audit tolerance

constexpr double kOrderTie = 1e-4;  // relative tie slack in orderings
constexpr double kStrBand = 0.05;   // straight-line proximity band

constexpr double kDetermTol = 1e-7;  // continuous determinism tolerance

// wall-clock budgets, seconds
constexpr double kBudgetSurrogates = 30.0;
constexpr double kBudgetBound = 120.0;
constexpr double kBudgetSca = 600.0;
constexpr double kBudgetSweep = 1800.0;

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

// Accumulates the first failure reason of one criterion.
struct Checker {
    bool ok = true;
    std::string why;
    void expect(bool cond, const std::string& reason) {
        if (!cond && ok) {
            ok = false;
            why = reason;
        }
    }
};

struct Result {
    bool pass = false;
    std::string why;
    double secs = 0.0;
};

Result finish(Checker& c, double t0, double budget_s) {
    const double secs = now_s() - t0;
    c.expect(secs <= budget_s,
             "over the " + num(budget_s) + " s budget (" + num(secs) + " s)");
    return {c.ok, c.why, secs};
}

// Reduced per-phase effort for the method-comparison sweeps (criteria 4,
// 5, 7). The single-scenario behavior check (criterion 3) runs at the
// default solver settings.
eco::SCAOptions sweep_options() {
    eco::SCAOptions o;
    o.max_iters = 12;
    o.solver_tol = 1e-7;
    return o;
}

ScenarioConfig config_with_model_bits(double bits) {
    ScenarioConfig cfg = default_config();
    cfg.model_bits = bits;
    return cfg;
}

// =====================================================================
// criterion 1: every surrogate builder is one-sided, tight at the
// reference, and has coefficients matching finite differences

using Values = std::map<VarKey, double>;
using TruthFn = std::function<double(const Values&)>;

double eval_form(const AffineForm& f, const Values& vals) {
    return f.eval([&](const VarKey& k) { return vals.at(k); });
}

double fd_step(const VarKey& key, double x) {
    switch (key.kind) {
        case VarKey::Kind::QX:
        case VarKey::Kind::QY:
            return 0.5;
        case VarKey::Kind::SQDIST:
            return std::max(0.5, 3e-5 * std::abs(x));
        case VarKey::Kind::B:
            return 1e-5;
        case VarKey::Kind::D:
            return std::max(10.0, 1e-4 * std::abs(x));
        default:
            return std::max(1e-6, 1e-6 * std::abs(x));
    }
}

double fd_slope(Values vals, const VarKey& key, const TruthFn& truth) {
    const double x0 = vals.at(key);
    const double h = fd_step(key, x0);
    vals[key] = x0 + h;
    const double up = truth(vals);
    vals[key] = x0 - h;
    const double dn = truth(vals);
    return (up - dn) / (2.0 * h);
}

VarKey find_key(const AffineForm& f, VarKey::Kind kind, int n) {
    for (const auto& t : f.terms)
        if (t.first.kind == kind && t.first.n == n) return t.first;
    throw std::runtime_error("builder omitted an expected variable");
}

// Reference values for exactly the variables the form touches.
Values ref_values(const AffineForm& f, const ReferencePoint& ref) {
    Values v;
    for (const auto& t : f.terms) {
        const VarKey& key = t.first;
        switch (key.kind) {
            case VarKey::Kind::QX: v[key] = ref.q(key.n, 0); break;
            case VarKey::Kind::QY: v[key] = ref.q(key.n, 1); break;
            case VarKey::Kind::SQDIST:
                v[key] = ref.sq_dist(key.k, key.n);
                break;
            case VarKey::Kind::B: v[key] = ref.b_log(key.k, key.n); break;
            case VarKey::Kind::D:
                v[key] = key.n >= 0 ? ref.data_bits(key.k, key.n)
                                    : ref.data_ue_bits(key.k);
                break;
            default:
                throw std::runtime_error("unexpected variable kind");
        }
    }
    return v;
}

// A random evaluation point over the same variables.
Values eval_values(const AffineForm& f, std::mt19937_64& rng,
                   const ScenarioConfig& cfg, double d_min, double d_max) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double h2 = cfg.altitude_m * cfg.altitude_m;
    Values v;
    for (const auto& t : f.terms) {
        const VarKey& key = t.first;
        switch (key.kind) {
            case VarKey::Kind::QX:
            case VarKey::Kind::QY:
                v[key] = -100.0 + 800.0 * u01(rng);
                break;
            case VarKey::Kind::SQDIST:
                v[key] = h2 + 7.3e5 * u01(rng);
                break;
            case VarKey::Kind::B:
                v[key] = -2.0 + 3.0 * u01(rng);
                break;
            case VarKey::Kind::D:
                v[key] = d_min + (d_max - d_min) * u01(rng);
                break;
            default:
                throw std::runtime_error("unexpected variable kind");
        }
    }
    return v;
}

// sign = +1 when the form must stay below the truth, -1 when above.
void check_pair(Checker& c, const std::string& tag, const AffineForm& form,
                const TruthFn& truth, const Values& at_ref,
                const Values& at_eval, double sign) {
    const double t_eval = truth(at_eval);
    const double f_eval = eval_form(form, at_eval);
    const double scale_e = std::max(1.0, std::abs(t_eval));
    c.expect(sign * (t_eval - f_eval) >= -kOneSidedTol * scale_e,
             tag + ": bound violated by " + num(sign * (f_eval - t_eval)));
    const double t_ref = truth(at_ref);
    const double f_ref = eval_form(form, at_ref);
    const double scale_r = std::max(1.0, std::abs(t_ref));
    c.expect(std::abs(t_ref - f_ref) <= kTightTol * scale_r,
             tag + ": loose at the reference by " + num(t_ref - f_ref));
    for (const auto& term : form.terms) {
        const double fd = fd_slope(at_ref, term.first, truth);
        const double scale =
            std::max({std::abs(fd), std::abs(term.second), 1e-12});
        c.expect(std::abs(fd - term.second) <= kGradRelTol * scale,
                 tag + ": coefficient " + num(term.second) +
                     " vs finite difference " + num(fd));
    }
}

ReferencePoint random_reference(const ScenarioConfig& cfg,
                                std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int ues = cfg.num_ues();
    const int rounds = cfg.num_rounds();
    MatX2 q(cfg.num_slots + 1, 2);
    for (int n = 0; n <= cfg.num_slots; ++n) {
        q(n, 0) = cfg.area_x_m * u01(rng);
        q(n, 1) = cfg.area_y_m * u01(rng);
    }
    Eigen::MatrixXd b(ues, rounds), d(ues, rounds);
    const double b_hi = std::log(cfg.ue_power_max_w);
    for (int k = 0; k < ues; ++k)
        for (int r = 0; r < rounds; ++r) {
            b(k, r) = b_hi - 3.0 * u01(rng);
            d(k, r) = 2e4 + (3e6 - 2e4) * u01(rng);
        }
    const Eigen::VectorXd hover =
        Eigen::VectorXd::Constant(rounds, cfg.t_cm_s);
    return surrogates::make_reference(cfg, q, b, d, hover);
}

Result criterion1() {
    const double t0 = now_s();
    Checker c;
    const ScenarioConfig cfg = default_config();
    const double kc = surrogates::gain_constant_m2(cfg.carrier_hz);
    const double beta = surrogates::participation_beta_per_bit(cfg);
    const double h2 = cfg.altitude_m * cfg.altitude_m;
    const int ues = cfg.num_ues();
    std::mt19937_64 rng(0x5eedu);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    for (int trial = 0; trial < kSurrogateTrials && c.ok; ++trial) {
        ReferencePoint ref = random_reference(cfg, rng);
        const int k = static_cast<int>(rng() % ues);
        const int r = static_cast<int>(rng() % cfg.num_rounds());
        const int n = 1 + static_cast<int>(rng() % cfg.num_slots);
        const int b = static_cast<int>(rng() % cfg.num_broadcasts());
        const std::string at = " (trial " + std::to_string(trial) + ")";

        {  // squared segment length
            const AffineForm f = surrogates::segment_length_sq_lb(ref, n);
            const VarKey x0 = find_key(f, VarKey::Kind::QX, n - 1);
            const VarKey y0 = find_key(f, VarKey::Kind::QY, n - 1);
            const VarKey x1 = find_key(f, VarKey::Kind::QX, n);
            const VarKey y1 = find_key(f, VarKey::Kind::QY, n);
            const TruthFn truth = [=](const Values& v) {
                const double dx = v.at(x1) - v.at(x0);
                const double dy = v.at(y1) - v.at(y0);
                return dx * dx + dy * dy;
            };
            check_pair(c, "segment" + at, f, truth, ref_values(f, ref),
                       eval_values(f, rng, cfg, 0, 0), +1.0);
        }
        {  // log channel gain in the distance slack
            const AffineForm f = surrogates::gain_log_lb(cfg, ref, k, r);
            const VarKey s = f.terms.at(0).first;
            const TruthFn truth = [=](const Values& v) {
                return std::log(kc) - std::log(v.at(s));
            };
            check_pair(c, "gain_log" + at, f, truth, ref_values(f, ref),
                       eval_values(f, rng, cfg, 0, 0), +1.0);
        }
        {  // distance slack vs trajectory
            const AffineForm f = surrogates::gain_coupling_lb(cfg, ref, k, r);
            const VarKey x = find_key(f, VarKey::Kind::QX, r + 1);
            const VarKey y = find_key(f, VarKey::Kind::QY, r + 1);
            const double gx = cfg.ue_pos_m(k, 0), gy = cfg.ue_pos_m(k, 1);
            const TruthFn truth = [=](const Values& v) {
                const double dx = v.at(x) - gx, dy = v.at(y) - gy;
                return (dx * dx + dy * dy + h2) / kc;
            };
            check_pair(c, "gain_coupling" + at, f, truth, ref_values(f, ref),
                       eval_values(f, rng, cfg, 0, 0), +1.0);
        }
        {  // total received power log term
            const AffineForm f = surrogates::rate_r1_lb(cfg, ref, r);
            c.expect(static_cast<int>(f.terms.size()) == 2 * ues,
                     "rate_r1: variable count" + at);
            const double noise = cfg.noise_w;
            const TruthFn truth = [ues, r, kc, noise](const Values& v) {
                double acc = noise;
                for (int i = 0; i < ues; ++i)
                    acc += std::exp(v.at(VarKey{VarKey::Kind::B, i, r})) *
                           kc / v.at(VarKey{VarKey::Kind::SQDIST, i, r});
                return std::log(acc);
            };
            check_pair(c, "rate_r1" + at, f, truth, ref_values(f, ref),
                       eval_values(f, rng, cfg, 0, 0), +1.0);
        }
        {  // interference log term (exact concave form)
            const surrogates::R2Form f2 = surrogates::rate_r2_lb(cfg, k, r);
            c.expect(static_cast<int>(f2.interferers.size()) == ues - 1,
                     "rate_r2: interferer count" + at);
            Eigen::VectorXd bcol(ues), acol(ues);
            for (int i = 0; i < ues; ++i) {
                bcol(i) = -2.0 + 3.0 * u01(rng);
                acol(i) = -23.0 + 5.0 * u01(rng);
            }
            double denom = cfg.noise_w;
            for (int i = 0; i < ues; ++i)
                if (i != k) denom += std::exp(bcol(i) + acol(i));
            const double truth = -std::log(denom);
            const double got = f2.eval(bcol, acol);
            c.expect(std::abs(got - truth) <=
                         kTightTol * std::max(1.0, std::abs(truth)),
                     "rate_r2: value off by " + num(got - truth) + at);
            for (int i = 0; i < ues; ++i) {
                if (i == k) continue;
                const double analytic = -std::exp(bcol(i) + acol(i)) / denom;
                const double h = 1e-5;
                Eigen::VectorXd up = bcol, dn = bcol;
                up(i) += h;
                dn(i) -= h;
                const double fd =
                    (f2.eval(up, acol) - f2.eval(dn, acol)) / (2.0 * h);
                const double scale =
                    std::max({std::abs(fd), std::abs(analytic), 1e-12});
                c.expect(std::abs(fd - analytic) <= kGradRelTol * scale,
                         "rate_r2: slope " + num(analytic) + " vs fd " +
                             num(fd) + at);
            }
            Eigen::VectorXd b2 = bcol, a2 = acol;
            b2(k) += 3.0;
            a2(k) += 2.0;
            c.expect(std::abs(f2.eval(b2, a2) - got) <=
                         1e-12 * std::max(1.0, std::abs(got)),
                     "rate_r2: depends on the sender" + at);
        }
        {  // smoothed participation indicator
            ReferencePoint ref5 = ref;
            ref5.data_bits(k, r) = 1e4 + 5.9e5 * u01(rng);
            const AffineForm f =
                surrogates::participation_affine_ub(ref5, k, r, beta);
            const VarKey dk = f.terms.at(0).first;
            const TruthFn truth = [=](const Values& v) {
                return std::tanh(beta * v.at(dk));
            };
            check_pair(c, "participation" + at, f, truth,
                       ref_values(f, ref5),
                       eval_values(f, rng, cfg, 0.0, 5e6), -1.0);
        }
        {  // squared data total, relaxed and fixed-plan variants
            const AffineForm f = surrogates::sum_data_sq_lb(ref, r);
            c.expect(static_cast<int>(f.terms.size()) == ues,
                     "sum_sq: variable count" + at);
            std::vector<VarKey> keys;
            for (const auto& t : f.terms) keys.push_back(t.first);
            const TruthFn truth = [keys](const Values& v) {
                double total = 0.0;
                for (const auto& kk : keys) total += v.at(kk);
                return total * total;
            };
            check_pair(c, "sum_sq" + at, f, truth, ref_values(f, ref),
                       eval_values(f, rng, cfg, 0.0, 4e6), +1.0);

            ReferencePoint ref6 = ref;
            ref6.data_ue_bits = Eigen::VectorXd(ues);
            Eigen::VectorXi mask(ues);
            for (int i = 0; i < ues; ++i) {
                ref6.data_ue_bits(i) = 2e4 + (3e6 - 2e4) * u01(rng);
                mask(i) = static_cast<int>(rng() % 2);
            }
            mask(k) = 1;
            const AffineForm fm =
                surrogates::sum_data_sq_lb_masked(ref6, mask, r);
            c.expect(static_cast<int>(fm.terms.size()) == mask.sum(),
                     "sum_sq_masked: variable count" + at);
            std::vector<VarKey> mkeys;
            for (const auto& t : fm.terms) mkeys.push_back(t.first);
            const TruthFn mtruth = [mkeys](const Values& v) {
                double total = 0.0;
                for (const auto& kk : mkeys) total += v.at(kk);
                return total * total;
            };
            check_pair(c, "sum_sq_masked" + at, fm, mtruth,
                       ref_values(fm, ref6),
                       eval_values(fm, rng, cfg, 0.0, 4e6), +1.0);
        }
        {  // broadcast requirement
            ReferencePoint ref7 = ref;
            ref7.data_bits(k, b + 1) = 1e4 + 1.18e6 * u01(rng);
            const AffineForm f =
                surrogates::broadcast_lhs_surrogate(cfg, ref7, k, b);
            const VarKey dk = f.terms.at(0).first;
            const TruthFn truth = [&cfg, beta, dk](const Values& v) {
                return surrogates::broadcast_lhs_exact(
                    cfg, surrogates::participation_smooth(v.at(dk), beta));
            };
            check_pair(c, "broadcast" + at, f, truth, ref_values(f, ref7),
                       eval_values(f, rng, cfg, 1e3, 5e6), -1.0);
        }
    }
    return finish(c, t0, kBudgetSurrogates);
}

// =====================================================================
// criterion 2: the convergence bound dominates the simulated loss gap,
// and its closed form matches the recursion

Result criterion2() {
    const double t0 = now_s();
    Checker c;
    const ScenarioConfig cfg = default_config();
    const int ues = 6, dim = 10, rounds = 40;
    const int iters = cfg.local_iters;

    flbound::ParticipationPlan plan;
    plan.a = Eigen::MatrixXi::Ones(ues, rounds);
    plan.data_bits = Eigen::MatrixXd::Constant(ues, rounds, 1e6);

    FLHyperparams fl_est = cfg.fl;
    int seeds_ok = 0;
    for (int seed = 1; seed <= kBoundSeeds; ++seed) {
        const flsim::SyntheticTask task = flsim::make_synthetic_task(
            ues, dim, seed, cfg.fl.mu, cfg.fl.smoothness, 1.0, 0.05);
        const FLHyperparams fl =
            flsim::estimate_constants(task, plan, iters, 8, seed, 1.1);
        if (seed == 1) fl_est = fl;
        const flsim::SimResult sim =
            flsim::run_federated_sgd(task, plan, fl, iters, 32, seed);
        bool covered = true;
        for (int i = iters; i <= rounds * iters; i += iters)
            covered = covered && sim.mean_gap(i) <= sim.bound(i);
        seeds_ok += covered ? 1 : 0;
    }
    const int need =
        static_cast<int>(std::ceil(kSeedPassShare * kBoundSeeds));
    c.expect(seeds_ok >= need, "only " + std::to_string(seeds_ok) + "/" +
                                   std::to_string(kBoundSeeds) +
                                   " seeds stay under the bound");

    flbound::ParticipationPlan wide;
    wide.a = Eigen::MatrixXi::Ones(ues, kBoundHorizon / iters);
    wide.data_bits =
        Eigen::MatrixXd::Constant(ues, kBoundHorizon / iters, 1e6);
    for (const FLHyperparams& fl : {cfg.fl, fl_est}) {
        for (int i = 0; i <= kBoundHorizon && c.ok; ++i) {
            const double closed = flbound::w_gap_bound(wide, fl, iters, i);
            const double rec =
                flbound::w_gap_bound_recursive(wide, fl, iters, i);
            c.expect(std::abs(closed - rec) <=
                         kBoundRelTol *
                             std::max(std::abs(closed), std::abs(rec)),
                     "closed form " + num(closed) + " vs recursion " +
                         num(rec) + " after " + std::to_string(i) +
                         " updates");
        }
    }
    return finish(c, t0, kBudgetBound);
}

// =====================================================================
// criterion 3: two-phase optimizer behavior on the default scenario

Result criterion3() {
    const double t0 = now_s();
    Checker c;
    const ScenarioConfig cfg = default_config();
    const eco::SCAOptions opts;  // full-effort defaults
    const eco::RunReport rep = eco::run_eco(cfg, 1, opts);

    c.expect(rep.feasible, "run verdict infeasible: " + rep.detail);
    c.expect(!rep.phase1_trace.empty() &&
                 static_cast<int>(rep.phase1_trace.size()) <= opts.max_iters,
             "phase 1 took " + std::to_string(rep.phase1_trace.size()) +
                 " iterations");
    for (std::size_t i = 1; i < rep.phase1_trace.size(); ++i) {
        const double prev = rep.phase1_trace[i - 1].objective_j;
        const double cur = rep.phase1_trace[i].objective_j;
        c.expect(cur <= prev + kMonotoneRel * std::max(1.0, std::abs(prev)),
                 "phase-1 objective rose from " + num(prev) + " to " +
                     num(cur) + " at iteration " + std::to_string(i));
    }
    c.expect(rep.audit.report.max_violation <= kAuditTol,
             "audit violation " + num(rep.audit.report.max_violation));
    c.expect(rep.audit.ok, "audit rejected the final state");
    c.expect(rep.audit.accuracy_lhs <= cfg.accuracy_eps,
             "accuracy budget exceeded: " + num(rep.audit.accuracy_lhs));
    return finish(c, t0, kBudgetSca);
}

// =====================================================================
// criteria 4 and 5 share the per-model-size optimizer runs

const eco::RunReport& eco_at(std::map<double, eco::RunReport>& cache,
                             double bits) {
    auto it = cache.find(bits);
    if (it == cache.end()) {
        const ScenarioConfig cfg = config_with_model_bits(bits);
        it = cache.emplace(bits, eco::run_eco(cfg, 1, sweep_options()))
                 .first;
    }
    return it->second;
}

Result criterion4(std::map<double, eco::RunReport>& cache) {
    const double t0 = now_s();
    Checker c;
    const eco::SCAOptions opts = sweep_options();
    const double q_small = 8.065e6, q_large = 1.05133e7;

    const eco::RunReport& eco1 = eco_at(cache, q_small);
    const eco::RunReport& eco2 = eco_at(cache, q_large);
    const eco::RunReport fixed1 = eco::baseline_participation(
        config_with_model_bits(q_small),
        eco::ParticipationScheme::fixed_scheme, 1, opts);
    const eco::RunReport fixed2 = eco::baseline_participation(
        config_with_model_bits(q_large),
        eco::ParticipationScheme::fixed_scheme, 1, opts);
    const eco::RunReport random1 = eco::baseline_participation(
        config_with_model_bits(q_small),
        eco::ParticipationScheme::random_scheme, 1, opts);

    c.expect(eco1.feasible, "optimizer infeasible at the smaller size: " +
                                eco1.detail);
    c.expect(eco2.feasible, "optimizer infeasible at the larger size: " +
                                eco2.detail);
    c.expect(fixed1.feasible,
             "full-participation baseline infeasible: " + fixed1.detail);
    c.expect(fixed2.feasible,
             "full-participation baseline infeasible: " + fixed2.detail);
    c.expect(random1.feasible,
             "random baseline infeasible: " + random1.detail);

    const double e1 = eco1.energy.total_j, f1 = fixed1.energy.total_j;
    const double r1 = random1.energy.total_j;
    c.expect(e1 <= f1 * (1.0 + kOrderTie),
             "optimizer " + num(e1) + " J above fixed baseline " + num(f1) +
                 " J");
    c.expect(f1 <= r1 * (1.0 + kOrderTie),
             "fixed baseline " + num(f1) + " J above random baseline " +
                 num(r1) + " J");
    const double gap1 = f1 - e1;
    const double gap2 = fixed2.energy.total_j - eco2.energy.total_j;
    c.expect(gap2 >= gap1 - kOrderTie * std::max(1.0, std::abs(gap1)),
             "baseline gap shrank from " + num(gap1) + " J to " + num(gap2) +
                 " J as the model grew");
    return finish(c, t0, kBudgetSweep);
}

Result criterion5(std::map<double, eco::RunReport>& cache) {
    const double t0 = now_s();
    Checker c;
    const eco::SCAOptions opts = sweep_options();
    const std::vector<double> q_bits = {1.42496e6, 2.81557e6, 5.50014e6,
                                        1.05133e7};
    for (std::size_t qi = 0; qi < q_bits.size(); ++qi) {
        const double q = q_bits[qi];
        const ScenarioConfig cfg = config_with_model_bits(q);
        const std::string at = " at " + num(q) + " bits";
        const eco::RunReport& best = eco_at(cache, q);
        c.expect(best.feasible, "optimizer infeasible" + at);

        for (const eco::TrajectoryShape shape :
             {eco::TrajectoryShape::cur, eco::TrajectoryShape::mid,
              eco::TrajectoryShape::asy}) {
            const eco::RunReport rep =
                eco::run_heuristic_trajectory(cfg, shape, 1, opts);
            const std::string name = eco::to_string(shape);
            c.expect(rep.feasible, name + " infeasible" + at + ": " +
                                       rep.detail);
            if (rep.feasible && best.feasible)
                c.expect(best.energy.total_j <=
                             rep.energy.total_j * (1.0 + kOrderTie),
                         "optimizer " + num(best.energy.total_j) +
                             " J above " + name + " " +
                             num(rep.energy.total_j) + " J" + at);
        }

        const eco::RunReport straight = eco::run_heuristic_trajectory(
            cfg, eco::TrajectoryShape::str, 1, opts);
        if (qi < 2) {
            c.expect(straight.feasible,
                     "straight line infeasible" + at + ": " +
                         straight.detail);
            if (straight.feasible && best.feasible) {
                const double diff =
                    std::abs(straight.energy.total_j - best.energy.total_j);
                c.expect(diff <= kStrBand * best.energy.total_j,
                         "straight line off by " + num(diff) + " J" + at);
            }
        } else {
            c.expect(!straight.feasible,
                     "straight line unexpectedly feasible" + at);
        }
    }
    return finish(c, t0, 2.0 * kBudgetSweep);
}

// =====================================================================
// criterion 6: closed-form spot values

Result criterion6() {
    const double t0 = now_s();
    Checker c;
    const double pl = channel::path_loss_db(150.0, 2.4e9);
    c.expect(std::abs(pl - 83.6) <= 0.1,
             "path loss at 150 m: " + num(pl) + " dB");
    const RotorModel rotor;
    const double hover = energy::propulsion_power_w(rotor, 0.0);
    c.expect(hover == rotor.blade_power_w + rotor.induced_power_w,
             "hover power " + num(hover) + " W is not the blade+induced sum");
    const double rate = channel::uplink_rate_bps(2.0e7, 1.0);
    c.expect(rate == 2.0e7, "unit-SINR rate " + num(rate) + " b/s");
    return finish(c, t0, kBudgetSurrogates);
}

// =====================================================================
// criterion 7: seeded determinism

double state_diff(const DecisionState& a, const DecisionState& b) {
    double d = (a.q - b.q).cwiseAbs().maxCoeff();
    d = std::max(d, (a.data_bits - b.data_bits).cwiseAbs().maxCoeff());
    d = std::max(d, (a.ue_power_w - b.ue_power_w).cwiseAbs().maxCoeff());
    d = std::max(d, (a.uav_power_w - b.uav_power_w).cwiseAbs().maxCoeff());
    d = std::max(d, (a.hover_s - b.hover_s).cwiseAbs().maxCoeff());
    return d;
}

Result criterion7() {
    const double t0 = now_s();
    Checker c;
    const ScenarioConfig cfg = default_config();
    const eco::SCAOptions opts = sweep_options();

    const eco::RunReport a = eco::baseline_participation(
        cfg, eco::ParticipationScheme::fixed_scheme, 3, opts);
    const eco::RunReport b = eco::baseline_participation(
        cfg, eco::ParticipationScheme::fixed_scheme, 3, opts);
    c.expect(a.feasible == b.feasible, "verdicts differ between runs");
    c.expect((a.state.a - b.state.a).cwiseAbs().maxCoeff() == 0,
             "participation matrices differ between runs");
    c.expect(a.phase2_trace.size() == b.phase2_trace.size(),
             "iteration counts differ between runs");
    for (std::size_t i = 0;
         i < std::min(a.phase2_trace.size(), b.phase2_trace.size()); ++i)
        c.expect(a.phase2_trace[i].status == b.phase2_trace[i].status,
                 "solver statuses differ at iteration " + std::to_string(i));
    const double sd = state_diff(a.state, b.state);
    c.expect(sd <= kDetermTol,
             "continuous outputs differ by " + num(sd));
    c.expect(std::abs(a.energy.total_j - b.energy.total_j) <= kDetermTol,
             "total energy differs by " +
                 num(a.energy.total_j - b.energy.total_j));

    const flsim::SyntheticTask task =
        flsim::make_synthetic_task(6, 10, 5, cfg.fl.mu, cfg.fl.smoothness,
                                   1.0, 0.05);
    flbound::ParticipationPlan plan;
    plan.a = Eigen::MatrixXi::Ones(6, 20);
    plan.data_bits = Eigen::MatrixXd::Constant(6, 20, 1e6);
    const flsim::SimResult s1 =
        flsim::run_federated_sgd(task, plan, cfg.fl, cfg.local_iters, 8, 5);
    const flsim::SimResult s2 =
        flsim::run_federated_sgd(task, plan, cfg.fl, cfg.local_iters, 8, 5);
    c.expect((s1.mean_gap - s2.mean_gap).cwiseAbs().maxCoeff() == 0,
             "simulator repetitions differ");
    return finish(c, t0, kBudgetSweep);
}

}  // namespace

int main() {
    std::map<double, eco::RunReport> cache;
    const std::vector<std::pair<const char*, std::function<Result()>>>
        criteria = {
            {"surrogate soundness and tightness", criterion1},
            {"convergence bound vs simulation", criterion2},
            {"two-phase optimizer behavior", criterion3},
            {"participation-baseline ordering",
             [&] { return criterion4(cache); }},
            {"trajectory-heuristic ordering",
             [&] { return criterion5(cache); }},
            {"closed-form spot values", criterion6},
            {"seeded determinism", criterion7},
        };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Result res;
        const double t0 = now_s();
        try {
            res = criteria[i].second();
        } catch (const std::exception& e) {
            res = {false, std::string("exception: ") + e.what(),
                   now_s() - t0};
        }
        failures += res.pass ? 0 : 1;
        std::printf("[%zu] %s: %s (%.1f s)%s%s\n", i + 1, criteria[i].first,
                    res.pass ? "PASS" : "FAIL", res.secs,
                    res.pass ? "" : " - ", res.pass ? "" : res.why.c_str());
        std::fflush(stdout);
    }
    std::printf("result: %zu/%zu criteria passed\n",
                criteria.size() - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
