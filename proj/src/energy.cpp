#include "ecofl/energy.hpp"

#include <cmath>

namespace ecofl {
namespace energy {

double propulsion_power_w(const RotorModel& rotor, double speed_mps) {
    const double v2 = speed_mps * speed_mps;
    const double blade =
        rotor.blade_power_w *
        (1.0 + 3.0 * v2 / (rotor.tip_speed_mps * rotor.tip_speed_mps));
    const double v0_2 = rotor.hover_induced_mps * rotor.hover_induced_mps;
    const double induced =
        rotor.induced_power_w *
        std::sqrt(std::sqrt(1.0 + v2 * v2 / (4.0 * v0_2 * v0_2)) -
                  v2 / (2.0 * v0_2));
    const double parasite = 0.5 * rotor.drag_ratio * rotor.air_density *
                            rotor.rotor_solidity * rotor.disc_area_m2 * v2 *
                            speed_mps;
    return blade + induced + parasite;
}

double compute_energy_j(double data_bits, int local_iters, double chip_coeff,
                        double cycles_per_bit, double cpu_hz) {
    return data_bits * static_cast<double>(local_iters) * chip_coeff *
           cycles_per_bit * cpu_hz * cpu_hz;
}

EnergyBreakdown total_energy(const DecisionState& state,
                             const ScenarioConfig& cfg) {
    EnergyBreakdown e;
    const int n_ues = cfg.num_ues();
    e.ue_compute_j = Eigen::VectorXd::Zero(n_ues);
    e.ue_uplink_j = Eigen::VectorXd::Zero(n_ues);

    const double p_cruise = propulsion_power_w(cfg.rotor, cfg.speed_mps);
    for (int n = 1; n <= cfg.num_slots; ++n)
        e.fly_j += fly_time(state.q, n, cfg.speed_mps) * p_cruise;

    const double p_hover = propulsion_power_w(cfg.rotor, 0.0);
    for (int r = 0; r < cfg.num_rounds(); ++r) {
        e.hover_j += state.hover_s(r) * p_hover;
        for (int k = 0; k < n_ues; ++k) {
            e.ue_compute_j(k) += compute_energy_j(
                state.data_bits(k, r), cfg.local_iters, cfg.chip_coeff,
                cfg.cycles_per_bit, cfg.ue_cpu_hz(k));
            if (state.ue_power_w(k, r) > 0.0)
                e.ue_uplink_j(k) += cfg.t_cm_s * state.ue_power_w(k, r);
        }
    }
    for (int b = 0; b < cfg.num_broadcasts(); ++b)
        e.broadcast_j += cfg.t_bc_s * state.uav_power_w(b);

    e.compute_j = e.ue_compute_j.sum();
    e.uplink_j = e.ue_uplink_j.sum();
    e.total_j =
        e.fly_j + e.hover_j + e.broadcast_j + e.compute_j + e.uplink_j;
    return e;
}

}  // namespace energy
}  // namespace ecofl
