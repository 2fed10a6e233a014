#include "ecofl/channel.hpp"

#include <cmath>
#include <numbers>

namespace ecofl {
namespace channel {

double distance_m(const Vec2& q_m, const Vec2& ue_m, double altitude_m) {
    return std::sqrt((q_m - ue_m).squaredNorm() + altitude_m * altitude_m);
}

double path_loss_db(double distance_m, double carrier_hz) {
    if (!(distance_m > 0.0) || !(carrier_hz > 0.0))
        throw std::invalid_argument("path_loss_db: d and f must be positive");
    return 20.0 * std::log10(4.0 * std::numbers::pi * carrier_hz * distance_m /
                             kSpeedOfLight);
}

double gain_lin(double distance_m, double carrier_hz) {
    return std::pow(10.0, -path_loss_db(distance_m, carrier_hz) / 10.0);
}

double uplink_sinr(const Eigen::VectorXd& power_w, const Eigen::VectorXd& gain,
                   const Eigen::VectorXi& active, int k, double noise_w) {
    double interference = 0.0;
    for (int i = 0; i < power_w.size(); ++i) {
        if (i == k || active(i) == 0) continue;
        interference += power_w(i) * gain(i);
    }
    return power_w(k) * gain(k) / (interference + noise_w);
}

double uplink_rate_bps(double bandwidth_hz, double sinr) {
    return bandwidth_hz * std::log2(1.0 + sinr);
}

double broadcast_rate_bps(double bandwidth_hz, double uav_power_w, double gain,
                          double noise_w) {
    return bandwidth_hz * std::log2(1.0 + uav_power_w * gain / noise_w);
}

ViolationReport check_rate_constraints(const DecisionState& state,
                                       const ScenarioConfig& cfg) {
    ViolationReport rep;
    const int n_ues = cfg.num_ues();
    Eigen::VectorXd gains(n_ues);
    // Uplink: every participating UE must deliver the model within the
    // uplink window against the interference of the other participants.
    for (int r = 0; r < cfg.num_rounds(); ++r) {
        const Vec2 pos = state.q.row(r + 1).transpose();
        for (int k = 0; k < n_ues; ++k)
            gains(k) = gain_lin(
                distance_m(pos, cfg.ue_pos_m.row(k).transpose(),
                           cfg.altitude_m),
                cfg.carrier_hz);
        for (int k = 0; k < n_ues; ++k) {
            if (state.a(k, r) == 0) continue;
            const double sinr = uplink_sinr(state.ue_power_w.col(r), gains,
                                            state.a.col(r), k, cfg.noise_w);
            const double deliverable =
                cfg.t_cm_s * uplink_rate_bps(cfg.bandwidth_hz, sinr);
            rep.add("uplink_rate[" + std::to_string(k) + "," +
                        std::to_string(r) + "]",
                    cfg.model_bits - deliverable);
        }
    }
    // Broadcast b at q[b+1] must reach the participants of round b+1.
    for (int b = 0; b < cfg.num_broadcasts(); ++b) {
        const Vec2 pos = state.q.row(b + 1).transpose();
        for (int k = 0; k < n_ues; ++k) {
            if (state.a(k, b + 1) == 0) continue;
            const double g = gain_lin(
                distance_m(pos, cfg.ue_pos_m.row(k).transpose(),
                           cfg.altitude_m),
                cfg.carrier_hz);
            const double deliverable =
                cfg.t_bc_s * broadcast_rate_bps(cfg.bandwidth_hz,
                                                state.uav_power_w(b), g,
                                                cfg.noise_w);
            rep.add("broadcast_rate[" + std::to_string(k) + "," +
                        std::to_string(b) + "]",
                    cfg.model_bits - deliverable);
        }
    }
    return rep;
}

}  // namespace channel
}  // namespace ecofl
