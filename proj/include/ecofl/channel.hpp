#pragma once

// Air-to-ground channel model: free-space path loss at a fixed altitude,
// uplink SINR with intra-round interference, and the achievable-rate
// checkers used by the final solution audit.

#include "ecofl/scenario.hpp"

namespace ecofl {
namespace channel {

inline constexpr double kSpeedOfLight = 2.99792458e8;  // m/s

// Slant distance between UAV position q (metres, 2-D) and UE k's ground
// position at altitude H.
double distance_m(const Vec2& q_m, const Vec2& ue_m, double altitude_m);

// Free-space path loss 20*log10(4*pi*f*d/c) in dB. Requires d > 0, f > 0.
double path_loss_db(double distance_m, double carrier_hz);

// Linear channel power gain 10^(-PL/10).
double gain_lin(double distance_m, double carrier_hz);

// Uplink SINR of UE k against the simultaneous transmissions of the other
// active UEs: p_k g_k / (sum_{i != k, active} p_i g_i + noise).
// `active` marks which UEs transmit this round; `power_w` are their powers.
double uplink_sinr(const Eigen::VectorXd& power_w,
                   const Eigen::VectorXd& gain,
                   const Eigen::VectorXi& active,
                   int k,
                   double noise_w);

// Shannon uplink rate W*log2(1+SINR) in bit/s.
double uplink_rate_bps(double bandwidth_hz, double sinr);

// Broadcast (downlink) rate to UE k with no interference:
// W*log2(1 + p_uav * g_k / noise).
double broadcast_rate_bps(double bandwidth_hz, double uav_power_w, double gain,
                          double noise_w);

// Rate-constraint audit for a full decision state:
//  - uplink:    a(k,r) * model_bits <= t_cm * R_k (position q[r+1]);
//  - broadcast: a(k, b+1) * model_bits <= t_bc * Rbc_k (position q[b+1]).
// Violations are reported in bits (shortfall of deliverable volume).
ViolationReport check_rate_constraints(const DecisionState& state,
                                       const ScenarioConfig& cfg);

}  // namespace channel
}  // namespace ecofl
