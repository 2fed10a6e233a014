#include "ecofl/flsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace ecofl {
namespace flsim {

namespace {

Eigen::VectorXd mission_weights(const flbound::ParticipationPlan& plan) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(plan.ues());
    for (int r = 0; r < plan.rounds(); ++r)
        for (int k = 0; k < plan.ues(); ++k)
            if (plan.a(k, r) != 0) w(k) += plan.data_bits(k, r);
    const double total = w.sum();
    if (!(total > 0.0))
        throw std::invalid_argument("mission_weights: empty plan");
    return w / total;
}

}  // namespace

double SyntheticTask::loss(const Eigen::VectorXd& w,
                           const Eigen::VectorXd& lambda) const {
    double f = 0.0;
    for (int k = 0; k < ues(); ++k) {
        const Eigen::VectorXd d = w - centers.col(k);
        f += lambda(k) * 0.5 * d.dot(hessians[k] * d);
    }
    return f;
}

Eigen::VectorXd SyntheticTask::optimum(const Eigen::VectorXd& lambda) const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    for (int k = 0; k < ues(); ++k) {
        m += lambda(k) * hessians[k];
        rhs += lambda(k) * (hessians[k] * centers.col(k));
    }
    return m.ldlt().solve(rhs);
}

SyntheticTask make_synthetic_task(int num_ues, int dim, std::uint64_t seed,
                                  double mu_target, double l_target,
                                  double center_spread,
                                  double grad_noise_std) {
    if (num_ues < 1 || dim < 1)
        throw std::invalid_argument("make_synthetic_task: sizes");
    if (!(mu_target > 0.0) || !(l_target >= mu_target))
        throw std::invalid_argument("make_synthetic_task: spectrum");
    SyntheticTask task;
    task.dim = dim;
    task.grad_noise_std = grad_noise_std;
    task.centers.resize(dim, num_ues);
    task.w0 = Eigen::VectorXd::Zero(dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int k = 0; k < num_ues; ++k) {
        Eigen::MatrixXd g(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) g(i, j) = gauss(rng);
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        Eigen::MatrixXd q = qr.householderQ();
        Eigen::VectorXd evals(dim);
        for (int i = 0; i < dim; ++i)
            evals(i) = mu_target + (l_target - mu_target) * unif(rng);
        // pin the spectrum ends so every task spans [mu, L] exactly
        evals(0) = mu_target;
        if (dim > 1) evals(1) = l_target;
        task.hessians.push_back(q * evals.asDiagonal() * q.transpose());
        for (int i = 0; i < dim; ++i)
            task.centers(i, k) = center_spread * gauss(rng);
    }
    return task;
}

RepTrace run_single_rep(const SyntheticTask& task,
                        const flbound::ParticipationPlan& plan, double eta,
                        int local_iters, std::uint64_t seed) {
    const int rounds = plan.rounds();
    const int ues = plan.ues();
    if (ues != task.ues())
        throw std::invalid_argument("run_single_rep: plan/task UE mismatch");
    const Eigen::MatrixXd share = flbound::shares(plan);
    const int updates = rounds * local_iters;

    RepTrace trace;
    trace.w_virtual.resize(task.dim, updates + 1);
    trace.w_round.resize(task.dim, rounds + 1);
    trace.w_virtual.col(0) = task.w0;
    trace.w_round.col(0) = task.w0;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Eigen::VectorXd w_global = task.w0;
    Eigen::MatrixXd w_local(task.dim, ues);
    for (int r = 0; r < rounds; ++r) {
        for (int k = 0; k < ues; ++k)
            if (plan.a(k, r) != 0) w_local.col(k) = w_global;
        for (int j = 0; j < local_iters; ++j) {
            Eigen::VectorXd w_bar = Eigen::VectorXd::Zero(task.dim);
            for (int k = 0; k < ues; ++k) {
                if (plan.a(k, r) == 0) continue;
                Eigen::VectorXd grad =
                    task.hessians[k] * (w_local.col(k) - task.centers.col(k));
                for (int i = 0; i < task.dim; ++i)
                    grad(i) += task.grad_noise_std * gauss(rng);
                w_local.col(k) -= eta * grad;
                w_bar += share(k, r) * w_local.col(k);
            }
            trace.w_virtual.col(r * local_iters + j + 1) = w_bar;
        }
        w_global = trace.w_virtual.col((r + 1) * local_iters);
        trace.w_round.col(r + 1) = w_global;
    }
    return trace;
}

SimResult run_federated_sgd(const SyntheticTask& task,
                            const flbound::ParticipationPlan& plan,
                            const FLHyperparams& fl, int local_iters,
                            int reps, std::uint64_t seed) {
    const int updates = plan.rounds() * local_iters;
    const Eigen::VectorXd lambda = mission_weights(plan);
    const Eigen::VectorXd w_star = task.optimum(lambda);
    const double f_star = task.loss(w_star, lambda);

    SimResult result;
    result.rep_gap.resize(reps, updates + 1);
    for (int rep = 0; rep < reps; ++rep) {
        const RepTrace trace = run_single_rep(
            task, plan, fl.eta, local_iters,
            seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(rep + 1));
        for (int i = 0; i <= updates; ++i)
            result.rep_gap(rep, i) =
                task.loss(trace.w_virtual.col(i), lambda) - f_star;
    }
    result.mean_gap = result.rep_gap.colwise().mean().transpose();
    result.bound.resize(updates + 1);
    result.bound(0) = 0.5 * fl.smoothness * fl.w0_gap;
    for (int i = 1; i <= updates; ++i)
        result.bound(i) = flbound::theorem1_bound(plan, fl, local_iters, i);
    return result;
}

FLHyperparams estimate_constants(const SyntheticTask& task,
                                 const flbound::ParticipationPlan& plan,
                                 int local_iters, int sample_reps,
                                 std::uint64_t seed, double margin) {
    FLHyperparams fl;
    const Eigen::VectorXd lambda = mission_weights(plan);

    double l_max = 0.0;
    double mu_min = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd m_global = Eigen::MatrixXd::Zero(task.dim, task.dim);
    for (int k = 0; k < task.ues(); ++k) {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
            task.hessians[k]);
        l_max = std::max(l_max, es.eigenvalues().maxCoeff());
        mu_min = std::min(mu_min, es.eigenvalues().minCoeff());
        m_global += lambda(k) * task.hessians[k];
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_g(m_global);
    l_max = std::max(l_max, es_g.eigenvalues().maxCoeff());
    mu_min = std::min(mu_min, es_g.eigenvalues().minCoeff());

    fl.smoothness = l_max;
    fl.mu = mu_min;
    fl.eta = 0.4 / l_max;
    fl.eps_v2 = static_cast<double>(task.dim) * task.grad_noise_std *
                task.grad_noise_std;

    const Eigen::VectorXd w_star = task.optimum(lambda);
    fl.w0_gap = (task.w0 - w_star).squaredNorm();

    double eps_w = 0.0;
    for (int k = 0; k < task.ues(); ++k)
        eps_w =
            std::max(eps_w, (task.centers.col(k) - w_star).squaredNorm());
    fl.eps_w = margin * eps_w;

    // Sampled bound on the stochastic-gradient second moment along
    // simulated trajectories.
    double eps_s2 = 0.0;
    std::mt19937_64 rng(seed ^ 0xd1b54a32d192ed03ull);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int rep = 0; rep < sample_reps; ++rep) {
        Eigen::VectorXd w = task.w0;
        Eigen::MatrixXd w_local(task.dim, task.ues());
        const Eigen::MatrixXd share = flbound::shares(plan);
        for (int r = 0; r < plan.rounds(); ++r) {
            for (int k = 0; k < task.ues(); ++k)
                if (plan.a(k, r) != 0) w_local.col(k) = w;
            for (int j = 0; j < local_iters; ++j) {
                Eigen::VectorXd w_bar = Eigen::VectorXd::Zero(task.dim);
                for (int k = 0; k < task.ues(); ++k) {
                    if (plan.a(k, r) == 0) continue;
                    Eigen::VectorXd grad =
                        task.hessians[k] *
                        (w_local.col(k) - task.centers.col(k));
                    for (int i = 0; i < task.dim; ++i)
                        grad(i) += task.grad_noise_std * gauss(rng);
                    eps_s2 = std::max(eps_s2, grad.squaredNorm());
                    w_local.col(k) -= fl.eta * grad;
                    w_bar += share(k, r) * w_local.col(k);
                }
                w = w_bar;
            }
        }
    }
    fl.eps_s2 = margin * eps_s2;
    return fl;
}

}  // namespace flsim
}  // namespace ecofl
