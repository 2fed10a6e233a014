#pragma once

// Convexifying surrogate builders used by the successive convex
// approximation loop. Every builder returns a form that bounds its target
// from the safe side everywhere (not just locally) and is tight with
// matching gradient at the reference point; both properties are covered
// by randomized tests.

#include <vector>

#include "ecofl/channel.hpp"
#include "ecofl/scenario.hpp"

namespace ecofl {
namespace surrogates {

// Identity of an optimization variable appearing in an affine form.
// Index n is the trajectory slot of the quantity (see scenario.hpp for
// the slot conventions); k is the UE, or -1 when not applicable.
struct VarKey {
    enum class Kind {
        QX,      // q[n] x-coordinate, meters
        QY,      // q[n] y-coordinate, meters
        SQDIST,  // S_k[n] = ||q[n]-g_k||^2 + H^2, square meters
        B,       // ln of UE transmit power in round n (log-watts)
        ATILDE,  // surrogate log channel gain of UE k, round n
        C,       // ln of UAV broadcast power before slot n (log-watts)
        D,       // data volume of UE k in round n, bits
        DHAT,    // epigraph of (sum_k D_k[n])^2, bits^2
        DLB,     // lower bound on segment length n, meters
        THOV     // hover time after segment n, seconds
    };
    Kind kind;
    int k;
    int n;

    friend bool operator==(const VarKey& a, const VarKey& b) {
        return a.kind == b.kind && a.k == b.k && a.n == b.n;
    }
    friend bool operator<(const VarKey& a, const VarKey& b) {
        if (a.kind != b.kind) return a.kind < b.kind;
        if (a.k != b.k) return a.k < b.k;
        return a.n < b.n;
    }
};

// constant + sum_i coef_i * var_i
struct AffineForm {
    double constant = 0.0;
    std::vector<std::pair<VarKey, double>> terms;

    void add(const VarKey& key, double coef);
    // Evaluates with a value callback (used heavily by the tests).
    template <typename Fn>
    double eval(Fn&& value_of) const {
        double v = constant;
        for (const auto& t : terms) v += t.second * value_of(t.first);
        return v;
    }
};

// Linearization reference shared by all builders in one SCA iteration.
struct ReferencePoint {
    MatX2 q;                    // (N+1) x 2 trajectory
    Eigen::MatrixXd b_log;      // K x R log UE powers
    Eigen::MatrixXd data_bits;  // K x R relaxed data (coupled phase)
    Eigen::VectorXd data_ue_bits;  // K per-UE data (fixed-plan phase)
    Eigen::VectorXd hover_s;    // R hover times

    // Caches filled by make_reference:
    Eigen::MatrixXd sq_dist;    // K x R, S_k at q[r+1]
    Eigen::MatrixXd gain_log;   // K x R, ln gain at q[r+1]
};

// Fills the distance/gain caches for the round positions q[r+1].
ReferencePoint make_reference(const ScenarioConfig& cfg, const MatX2& q,
                              const Eigen::MatrixXd& b_log,
                              const Eigen::MatrixXd& data_bits,
                              const Eigen::VectorXd& hover_s);

// ln(gain) as a function of the slack S (exact): ln Kc - ln S.
double gain_log_of_sqdist(double sq_dist_m2, double carrier_hz);
// Free-space gain constant Kc = (c / (4 pi f))^2, square meters.
double gain_constant_m2(double carrier_hz);

// --- builder 1: segment length ---------------------------------------
// Affine upper bound on dlb_n^2 that is itself a global lower bound on
// ||q[n] - q[n-1]||^2: first-order expansion of the convex squared norm
// at the reference. Returned form is over {QX,QY} at slots n-1 and n;
// impose  DLB_n^2 <= form  (as a quadratic-epigraph row).
AffineForm segment_length_sq_lb(const ReferencePoint& ref, int n);

// --- builder 2: log channel gain --------------------------------------
// Affine-in-S global lower bound on ln gain of UE k in round r:
//   ln Kc - ln S_ref - (S - S_ref)/S_ref.
// Form is over {SQDIST,k,r}.
AffineForm gain_log_lb(const ScenarioConfig& cfg, const ReferencePoint& ref,
                       int k, int r);

// Affine-in-q global lower bound on S_k(q)/Kc, used to couple ATILDE to
// the trajectory through  exp(-ATILDE) <= form. Over {QX,QY} at slot r+1.
AffineForm gain_coupling_lb(const ScenarioConfig& cfg,
                            const ReferencePoint& ref, int k, int r);

// --- builder 3: common rate term --------------------------------------
// Global affine lower bound on ln(sum_i exp(B_i + ln gain_i(q)) + noise)
// in round r: tangent of the convex log-sum-exp at the reference,
// composed with gain_log_lb. Over {B,i,r} and {SQDIST,i,r} for all i.
AffineForm rate_r1_lb(const ScenarioConfig& cfg, const ReferencePoint& ref,
                      int r);

// --- builder 4: interference term -------------------------------------
// Concave exact form -ln(sum_{i != k} exp(B_i + ATILDE_i) + noise),
// imposed through a log-sum-exp row; sound as long as the coupling rows
// of builder gain_coupling_lb hold for every interferer.
struct R2Form {
    int k = -1;
    int r = -1;
    double noise_w = 0.0;
    std::vector<int> interferers;
    // eval at explicit (B, Atilde) columns for round r
    double eval(const Eigen::VectorXd& b_col,
                const Eigen::VectorXd& atil_col) const;
};
R2Form rate_r2_lb(const ScenarioConfig& cfg, int k, int r);

// --- builder 5: participation indicator -------------------------------
// Affine global upper bound on the smooth participation indicator
// tanh(beta * D) (D in bits, beta in 1/bit): tangent at the reference
// data volume, valid on D >= 0. Over {D,k,r}.
double participation_smooth(double data_bits, double beta_per_bit);
double participation_beta_per_bit(const ScenarioConfig& cfg);
AffineForm participation_affine_ub(const ReferencePoint& ref, int k, int r,
                                   double beta_per_bit);

// --- builder 6: squared data total ------------------------------------
// Affine global lower bound on (sum_k D_k[r])^2 (tangent of the convex
// square), used in the epigraph  DHAT_r >= (sum_k D_k[r])^2  direction
// needed by the accuracy constraint. Over {D,k,r} for all k.
AffineForm sum_data_sq_lb(const ReferencePoint& ref, int r);
// Fixed-plan variant: only UEs with mask != 0 contribute, reference data
// taken from ref.data_ue_bits.
AffineForm sum_data_sq_lb_masked(const ReferencePoint& ref,
                                 const Eigen::VectorXi& mask, int r);

// --- builder 7: broadcast requirement ---------------------------------
// The broadcast row asks  ln(exp(a * Qhat) - 1) <= C + ln gain, with a
// the smooth participation level of the gated round. The left side is
// concave and increasing in a, so its tangent at the reference is a
// global upper bound (conservative). Composed with the affine
// participation bound this stays an upper bound only while the tangent
// slope is nonnegative, which holds since both pieces are increasing.
// Form is over {D,k,r} of the gated round r = b+1.
AffineForm broadcast_lhs_surrogate(const ScenarioConfig& cfg,
                                   const ReferencePoint& ref, int k, int b);
// Exact left side used when participation is fixed at level a in {0,1}.
double broadcast_lhs_exact(const ScenarioConfig& cfg, double smooth_level);

}  // namespace surrogates
}  // namespace ecofl
