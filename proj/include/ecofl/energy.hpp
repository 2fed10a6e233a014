#pragma once

// Mission energy model: rotary-wing propulsion power and the total energy
// bookkeeping (flight, hover, UE computation, UE uplink, UAV broadcast).

#include "ecofl/scenario.hpp"

namespace ecofl {
namespace energy {

// Propulsion power at forward speed v:
//   P0*(1 + 3 v^2/U_tip^2)
// + Pi*sqrt( sqrt(1 + v^4/(4 v0^4)) - v^2/(2 v0^2) )
// + 0.5*d0*rho*s*A*v^3.
// v = 0 gives the hover power P0 + Pi.
double propulsion_power_w(const RotorModel& rotor, double speed_mps);

struct EnergyBreakdown {
    double fly_j = 0.0;        // propulsion over all N segments
    double hover_j = 0.0;      // hover over the N-1 rounds
    double broadcast_j = 0.0;  // UAV downlink over the N-2 broadcast slots
    Eigen::VectorXd ue_compute_j;  // per-UE local training energy
    Eigen::VectorXd ue_uplink_j;   // per-UE transmit energy
    double compute_j = 0.0;    // sum of ue_compute_j
    double uplink_j = 0.0;     // sum of ue_uplink_j
    double total_j = 0.0;
};

// Energy of one round of local training on `data_bits` at clock f_cpu:
// data * I * psi * C * f_cpu^2.
double compute_energy_j(double data_bits, int local_iters, double chip_coeff,
                        double cycles_per_bit, double cpu_hz);

// Full mission breakdown for a decision state. Uplink energy charges
// t_cm * p for every round with p > 0; broadcast charges t_bc * p_uav.
EnergyBreakdown total_energy(const DecisionState& state,
                             const ScenarioConfig& cfg);

}  // namespace energy
}  // namespace ecofl
