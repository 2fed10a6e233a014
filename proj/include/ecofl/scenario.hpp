#pragma once

// Scenario description for UAV-assisted federated learning missions:
// physical constants, mission timing, the decision-state container shared by
// every module, and the per-slot timing feasibility checker.
//
// Index conventions used across the library:
//   - Waypoints q[0..N] (N+1 points, metres); q[0] and q[N] are pinned to the
//     configured start/finish.
//   - Learning rounds r = 0..N-2 (count R = N-1). Round r takes place while
//     the UAV hovers at q[r+1]; the flight segment q[r] -> q[r+1] belongs to
//     the same slot.
//   - Broadcast slots b = 0..N-3 (count N-2): the broadcast at position
//     q[b+1] delivers the global model to the UEs participating in round b+1.
// All public quantities are SI (metres, seconds, watts, bits, hertz).

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace ecofl {

using Vec2 = Eigen::Vector2d;
using MatX2 = Eigen::Matrix<double, Eigen::Dynamic, 2>;

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Rotary-wing propulsion model parameters (hover + induced + parasite terms).
struct RotorModel {
    double blade_power_w = 79.86;      // P0: blade profile power in hover
    double induced_power_w = 88.63;    // Pi: induced power in hover
    double tip_speed_mps = 120.0;      // U_tip: rotor blade tip speed
    double hover_induced_mps = 4.03;   // v0: mean rotor induced velocity in hover
    double drag_ratio = 0.6;           // d0: fuselage drag ratio
    double air_density = 1.225;        // rho (kg/m^3)
    double rotor_solidity = 0.05;      // s
    double disc_area_m2 = 0.503;       // A

    void validate_or_throw() const;
};

// Hyperparameters of the federated learning process that enter the
// convergence bound. eps_* are the usual second-moment bounds; w0_gap is
// E||w_bar^0 - w*||^2.
struct FLHyperparams {
    double eta = 0.01;       // learning rate, must satisfy eta <= 1/(2L)
    double mu = 1.0;         // strong-convexity modulus
    double smoothness = 10.0;// L
    double eps_v2 = 100.0;   // gradient-noise variance bound
    double eps_s2 = 0.5;     // stochastic-gradient second-moment bound
    double eps_w = 0.1;      // max squared distance between local and global optima
    double w0_gap = 10.0;    // initial squared distance to the global optimum

    void validate_or_throw() const;
};

struct ScenarioConfig {
    // Geometry
    double area_x_m = 600.0;
    double area_y_m = 600.0;
    MatX2 ue_pos_m;            // K x 2 ground positions
    double altitude_m = 150.0; // H, fixed flight altitude
    double speed_mps = 10.0;   // v_uav, constant cruise speed
    Vec2 q_initial_m{0.0, 300.0};
    Vec2 q_final_m{600.0, 300.0};

    // Mission timing
    int num_slots = 50;        // N
    double mission_s = 500.0;  // T
    double t_cm_s = 2.0;       // uplink window per round
    double t_agg_s = 0.5;      // aggregation time per round
    double t_bc_s = 0.5;       // broadcast window per broadcast slot

    // Radio
    double bandwidth_hz = 2.0e7;    // W
    double carrier_hz = 2.4e9;      // f_c
    double noise_w = 1.0e-11;       // sigma_z^2 (total noise power)
    double ue_power_max_w = 1.5135612484362087;  // 31.8 dBm
    double uav_power_max_w = 1.0;                // 30 dBm

    // Learning workload
    double model_bits = 8.065e6;     // Q, model size exchanged per link
    double cycles_per_bit = 10.0;    // C
    double chip_coeff = 1.0e-25;     // psi, effective chipset coefficient
    Eigen::VectorXd ue_cpu_hz;       // f_cpu per UE (K)
    int local_iters = 5;             // I, updates per round
    int participation_min = 2;       // a_min
    double data_floor_bits = 50.0e6; // D_th per UE over the mission
    double accuracy_eps = 10.0;      // eps_G, convergence-bound budget

    FLHyperparams fl;
    RotorModel rotor;

    int num_ues() const { return static_cast<int>(ue_pos_m.rows()); }
    int num_rounds() const { return num_slots - 1; }
    int num_broadcasts() const { return num_slots - 2; }
    // Compute seconds per bit for UE k: I * C / f_cpu.
    double compute_s_per_bit(int k) const {
        return static_cast<double>(local_iters) * cycles_per_bit / ue_cpu_hz(k);
    }

    void validate_or_throw() const;
};

// Full decision state of one mission. `data_bits(k, r)` is the data volume UE
// k trains on in round r (for integer participation it equals a(k,r) * D_k).
struct DecisionState {
    MatX2 q;                    // (N+1) x 2 waypoints, metres
    Eigen::MatrixXi a;          // K x R participation indicators
    Eigen::MatrixXd data_bits;  // K x R per-round training data volume
    Eigen::MatrixXd ue_power_w; // K x R uplink transmit power
    Eigen::VectorXd uav_power_w;// (N-2) broadcast transmit power
    Eigen::VectorXd hover_s;    // R hover durations

    static DecisionState zeros(const ScenarioConfig& cfg);
};

struct Violation {
    std::string name;
    double amount = 0.0;  // > 0 means violated by this much (SI units of the row)
};

struct ViolationReport {
    std::vector<Violation> items;  // every checked row, including satisfied ones
    double max_violation = 0.0;

    bool ok(double tol) const { return max_violation <= tol; }
    void add(std::string name, double amount);
};

// Flight time of segment n (from q[n-1] to q[n]) at constant speed v.
// Requires 1 <= n <= N.
double fly_time(const MatX2& q, int n, double speed_mps);

// Per-slot timing audit: hover covers the uplink window, computation +
// upload fit within flight + hover of the slot, and the mission fits in T.
ViolationReport check_timeslot_feasibility(const DecisionState& state,
                                           const ScenarioConfig& cfg);

// Built-in default scenario (the K=6 layout used throughout the tests).
ScenarioConfig default_config();

// JSON config I/O. Numeric fields accept either plain SI numbers or strings
// with an explicit unit suffix ("-80 dBm", "31.8 dBm", "50 Mb", "2.4 GHz",
// "20 MHz"). Unknown keys anywhere are a hard error.
ScenarioConfig load_config(const std::string& path);
ScenarioConfig parse_config_json(const std::string& json_text);
std::string config_to_json(const ScenarioConfig& cfg);

}  // namespace ecofl
