#include "ecofl/flbound.hpp"

#include <cmath>
#include <stdexcept>

namespace ecofl {
namespace flbound {

BoundConstants bound_constants(const FLHyperparams& fl, int local_iters) {
    fl.validate_or_throw();
    if (local_iters < 1)
        throw std::invalid_argument("bound_constants: local_iters >= 1");
    BoundConstants c;
    const double eta = fl.eta;
    const double big_l = fl.smoothness;
    c.omega = 1.0 - eta * fl.mu;
    c.zeta = 2.0 * eta * (1.0 - 2.0 * eta * big_l);
    const double iters = static_cast<double>(local_iters);
    c.a1 = (1.0 + c.zeta / (2.0 * eta)) * iters * iters * eta * eta *
               fl.eps_s2 +
           (eta * big_l * big_l * fl.eps_w / 2.0) * (c.zeta + 4.0 * eta);
    return c;
}

Eigen::MatrixXd shares(const ParticipationPlan& plan) {
    const int ues = plan.ues();
    const int rounds = plan.rounds();
    if (plan.data_bits.rows() != ues || plan.data_bits.cols() != rounds)
        throw std::invalid_argument("shares: plan shape mismatch");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(ues, rounds);
    for (int r = 0; r < rounds; ++r) {
        double total = 0.0;
        for (int k = 0; k < ues; ++k)
            if (plan.a(k, r) != 0) total += plan.data_bits(k, r);
        if (!(total > 0.0))
            throw std::invalid_argument(
                "shares: round " + std::to_string(r) +
                " has no participating data");
        for (int k = 0; k < ues; ++k)
            if (plan.a(k, r) != 0) out(k, r) = plan.data_bits(k, r) / total;
    }
    return out;
}

Eigen::VectorXd sum_shares_sq(const ParticipationPlan& plan) {
    const Eigen::MatrixXd s = shares(plan);
    return s.array().square().colwise().sum().transpose();
}

namespace {

void check_updates(const ParticipationPlan& plan, int local_iters,
                   int updates) {
    if (local_iters < 1) throw std::invalid_argument("local_iters >= 1");
    if (updates < 0 || updates > plan.rounds() * local_iters)
        throw std::invalid_argument("updates out of range");
}

}  // namespace

double w_gap_bound(const ParticipationPlan& plan, const FLHyperparams& fl,
                   int local_iters, int updates) {
    check_updates(plan, local_iters, updates);
    const BoundConstants c = bound_constants(fl, local_iters);
    const Eigen::VectorXd s2 = sum_shares_sq(plan);
    const double eta_mu = fl.eta * fl.mu;
    const double omega_i = std::pow(c.omega, updates);
    double noise = 0.0;
    for (int l = 0; l < updates; ++l)
        noise += std::pow(c.omega, updates - 1 - l) * s2(l / local_iters);
    return omega_i * fl.w0_gap + c.a1 * (1.0 - omega_i) / eta_mu +
           fl.eta * fl.eta * fl.eps_v2 * noise;
}

double w_gap_bound_recursive(const ParticipationPlan& plan,
                             const FLHyperparams& fl, int local_iters,
                             int updates) {
    check_updates(plan, local_iters, updates);
    const BoundConstants c = bound_constants(fl, local_iters);
    const Eigen::VectorXd s2 = sum_shares_sq(plan);
    double e = fl.w0_gap;
    for (int l = 0; l < updates; ++l)
        e = c.omega * e + c.a1 +
            fl.eta * fl.eta * fl.eps_v2 * s2(l / local_iters);
    return e;
}

double theorem1_bound(const ParticipationPlan& plan, const FLHyperparams& fl,
                      int local_iters, int updates) {
    return 0.5 * fl.smoothness * w_gap_bound(plan, fl, local_iters, updates);
}

double accuracy_fixed_terms(const FLHyperparams& fl, int num_slots,
                            int local_iters) {
    const BoundConstants c = bound_constants(fl, local_iters);
    const int rounds = num_slots - 1;
    const double total = static_cast<double>(rounds) * local_iters;
    const double omega_ri = std::pow(c.omega, total);
    const double eta_mu = fl.eta * fl.mu;
    return 0.5 * fl.smoothness *
           (omega_ri * fl.w0_gap + c.a1 * (1.0 - omega_ri) / eta_mu);
}

double accuracy_round_weight(const FLHyperparams& fl, int num_slots,
                             int local_iters, int round) {
    const BoundConstants c = bound_constants(fl, local_iters);
    const int rounds = num_slots - 1;
    if (round < 0 || round >= rounds)
        throw std::invalid_argument("accuracy_round_weight: round range");
    const double eta_mu = fl.eta * fl.mu;
    const double block =
        (1.0 - std::pow(c.omega, local_iters)) / eta_mu;  // geometric sum
    return 0.5 * fl.smoothness * fl.eta * fl.eta * fl.eps_v2 * block *
           std::pow(c.omega,
                    static_cast<double>(rounds - 1 - round) * local_iters);
}

double accuracy_lhs(const ParticipationPlan& plan, const FLHyperparams& fl,
                    int num_slots, int local_iters) {
    const int rounds = num_slots - 1;
    if (plan.rounds() != rounds)
        throw std::invalid_argument("accuracy_lhs: plan/slot mismatch");
    const Eigen::VectorXd s2 = sum_shares_sq(plan);
    double lhs = accuracy_fixed_terms(fl, num_slots, local_iters);
    for (int r = 0; r < rounds; ++r)
        lhs += accuracy_round_weight(fl, num_slots, local_iters, r) * s2(r);
    return lhs;
}

}  // namespace flbound
}  // namespace ecofl
