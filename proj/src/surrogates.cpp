#include "ecofl/surrogates.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ecofl {
namespace surrogates {

void AffineForm::add(const VarKey& key, double coef) {
    for (auto& t : terms) {
        if (t.first == key) {
            t.second += coef;
            return;
        }
    }
    terms.emplace_back(key, coef);
}

double gain_constant_m2(double carrier_hz) {
    const double wavelength_scale =
        channel::kSpeedOfLight / (4.0 * std::numbers::pi * carrier_hz);
    return wavelength_scale * wavelength_scale;
}

double gain_log_of_sqdist(double sq_dist_m2, double carrier_hz) {
    return std::log(gain_constant_m2(carrier_hz)) - std::log(sq_dist_m2);
}

ReferencePoint make_reference(const ScenarioConfig& cfg, const MatX2& q,
                              const Eigen::MatrixXd& b_log,
                              const Eigen::MatrixXd& data_bits,
                              const Eigen::VectorXd& hover_s) {
    if (q.rows() != cfg.num_slots + 1)
        throw std::invalid_argument("make_reference: trajectory length");
    ReferencePoint ref;
    ref.q = q;
    ref.b_log = b_log;
    ref.data_bits = data_bits;
    ref.hover_s = hover_s;
    const int ues = cfg.num_ues();
    const int rounds = cfg.num_rounds();
    ref.sq_dist.resize(ues, rounds);
    ref.gain_log.resize(ues, rounds);
    const double h2 = cfg.altitude_m * cfg.altitude_m;
    for (int r = 0; r < rounds; ++r) {
        for (int k = 0; k < ues; ++k) {
            const double s =
                (q.row(r + 1) - cfg.ue_pos_m.row(k)).squaredNorm() + h2;
            ref.sq_dist(k, r) = s;
            ref.gain_log(k, r) = gain_log_of_sqdist(s, cfg.carrier_hz);
        }
    }
    return ref;
}

AffineForm segment_length_sq_lb(const ReferencePoint& ref, int n) {
    if (n < 1 || n >= ref.q.rows())
        throw std::out_of_range("segment_length_sq_lb: segment index");
    const Eigen::RowVector2d delta = ref.q.row(n) - ref.q.row(n - 1);
    AffineForm f;
    f.constant = -delta.squaredNorm();
    f.add({VarKey::Kind::QX, -1, n}, 2.0 * delta(0));
    f.add({VarKey::Kind::QY, -1, n}, 2.0 * delta(1));
    f.add({VarKey::Kind::QX, -1, n - 1}, -2.0 * delta(0));
    f.add({VarKey::Kind::QY, -1, n - 1}, -2.0 * delta(1));
    return f;
}

AffineForm gain_log_lb(const ScenarioConfig& cfg, const ReferencePoint& ref,
                       int k, int r) {
    const double s_ref = ref.sq_dist(k, r);
    AffineForm f;
    f.constant =
        std::log(gain_constant_m2(cfg.carrier_hz)) - std::log(s_ref) + 1.0;
    f.add({VarKey::Kind::SQDIST, k, r}, -1.0 / s_ref);
    return f;
}

AffineForm gain_coupling_lb(const ScenarioConfig& cfg,
                            const ReferencePoint& ref, int k, int r) {
    const double kc = gain_constant_m2(cfg.carrier_hz);
    const Eigen::RowVector2d q_ref = ref.q.row(r + 1);
    const Eigen::RowVector2d diff = q_ref - cfg.ue_pos_m.row(k);
    const double s_ref = ref.sq_dist(k, r);
    AffineForm f;
    f.constant = (s_ref - 2.0 * diff.dot(q_ref)) / kc;
    f.add({VarKey::Kind::QX, -1, r + 1}, 2.0 * diff(0) / kc);
    f.add({VarKey::Kind::QY, -1, r + 1}, 2.0 * diff(1) / kc);
    return f;
}

AffineForm rate_r1_lb(const ScenarioConfig& cfg, const ReferencePoint& ref,
                      int r) {
    const int ues = cfg.num_ues();
    Eigen::VectorXd z(ues);
    for (int i = 0; i < ues; ++i) z(i) = ref.b_log(i, r) + ref.gain_log(i, r);
    const double shift = std::max(z.maxCoeff(), std::log(cfg.noise_w));
    double mass = cfg.noise_w * std::exp(-shift);
    for (int i = 0; i < ues; ++i) mass += std::exp(z(i) - shift);
    const double r1_ref = shift + std::log(mass);

    AffineForm f;
    f.constant = r1_ref;
    for (int i = 0; i < ues; ++i) {
        const double w = std::exp(z(i) - shift) / mass;
        if (w == 0.0) continue;
        f.add({VarKey::Kind::B, i, r}, w);
        f.constant -= w * ref.b_log(i, r);
        // gain_log_lb(i) - gain_log_ref(i) collapses to 1 - S/S_ref
        f.constant += w;
        f.add({VarKey::Kind::SQDIST, i, r}, -w / ref.sq_dist(i, r));
    }
    return f;
}

double R2Form::eval(const Eigen::VectorXd& b_col,
                    const Eigen::VectorXd& atil_col) const {
    double shift = std::log(noise_w);
    for (int i : interferers)
        shift = std::max(shift, b_col(i) + atil_col(i));
    double mass = noise_w * std::exp(-shift);
    for (int i : interferers)
        mass += std::exp(b_col(i) + atil_col(i) - shift);
    return -(shift + std::log(mass));
}

R2Form rate_r2_lb(const ScenarioConfig& cfg, int k, int r) {
    R2Form f;
    f.k = k;
    f.r = r;
    f.noise_w = cfg.noise_w;
    for (int i = 0; i < cfg.num_ues(); ++i)
        if (i != k) f.interferers.push_back(i);
    return f;
}

double participation_beta_per_bit(const ScenarioConfig& cfg) {
    (void)cfg;
    return 5.0e-6;  // saturates around one megabit of scheduled data
}

double participation_smooth(double data_bits, double beta_per_bit) {
    return std::tanh(beta_per_bit * data_bits);
}

AffineForm participation_affine_ub(const ReferencePoint& ref, int k, int r,
                                   double beta_per_bit) {
    const double d_ref = ref.data_bits(k, r);
    if (d_ref < 0.0)
        throw std::invalid_argument("participation_affine_ub: negative ref");
    const double t = std::tanh(beta_per_bit * d_ref);
    const double slope = beta_per_bit * (1.0 - t * t);
    AffineForm f;
    f.constant = t - slope * d_ref;
    f.add({VarKey::Kind::D, k, r}, slope);
    return f;
}

AffineForm sum_data_sq_lb(const ReferencePoint& ref, int r) {
    const double total_ref = ref.data_bits.col(r).sum();
    AffineForm f;
    f.constant = -total_ref * total_ref;
    for (int k = 0; k < ref.data_bits.rows(); ++k)
        f.add({VarKey::Kind::D, k, r}, 2.0 * total_ref);
    return f;
}

AffineForm sum_data_sq_lb_masked(const ReferencePoint& ref,
                                 const Eigen::VectorXi& mask, int r) {
    (void)r;  // the committed-phase volumes are per UE, not per round
    double total_ref = 0.0;
    for (int k = 0; k < mask.size(); ++k)
        if (mask(k) != 0) total_ref += ref.data_ue_bits(k);
    AffineForm f;
    f.constant = -total_ref * total_ref;
    for (int k = 0; k < mask.size(); ++k)
        if (mask(k) != 0)
            f.add({VarKey::Kind::D, k, -1}, 2.0 * total_ref);
    return f;
}

namespace {

// ln(exp(x) - 1), stable for large x; requires x > 0.
double log_expm1(double x) {
    if (!(x > 0.0))
        throw std::invalid_argument("broadcast level must be positive");
    if (x > 30.0) return x + std::log1p(-std::exp(-x));
    return std::log(std::expm1(x));
}

}  // namespace

double broadcast_lhs_exact(const ScenarioConfig& cfg, double smooth_level) {
    const double qhat = cfg.model_bits * std::numbers::ln2 /
                        (cfg.t_bc_s * cfg.bandwidth_hz);
    return log_expm1(smooth_level * qhat);
}

AffineForm broadcast_lhs_surrogate(const ScenarioConfig& cfg,
                                   const ReferencePoint& ref, int k, int b) {
    const int r = b + 1;  // gated round
    const double qhat = cfg.model_bits * std::numbers::ln2 /
                        (cfg.t_bc_s * cfg.bandwidth_hz);
    const double beta = participation_beta_per_bit(cfg);
    constexpr double kLevelFloor = 0.02;
    const double a_ref = std::max(
        kLevelFloor, participation_smooth(ref.data_bits(k, r), beta));
    const double x = a_ref * qhat;
    const double phi_ref = log_expm1(x);
    // d/da ln(exp(a qhat) - 1) = qhat / (1 - exp(-a qhat)), positive
    const double phi_slope = qhat / (-std::expm1(-x));

    const double d_ref = ref.data_bits(k, r);
    const double t = std::tanh(beta * d_ref);
    const double a_slope = beta * (1.0 - t * t);

    AffineForm f;
    f.constant = phi_ref + phi_slope * ((t - a_slope * d_ref) - a_ref);
    f.add({VarKey::Kind::D, k, r}, phi_slope * a_slope);
    return f;
}

}  // namespace surrogates
}  // namespace ecofl
