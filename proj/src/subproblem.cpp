#include "ecofl/subproblem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "ecofl/energy.hpp"
#include "ecofl/flbound.hpp"

namespace ecofl {
namespace subproblem {

namespace {

using conic::LinExpr;
using surrogates::AffineForm;
using surrogates::VarKey;

// Solver units: positions in hectometres, squared distances in hm^2,
// data in megabits, energies in hectojoules.
constexpr double kPos = 100.0;
constexpr double kSq = 1e4;
constexpr double kMb = 1e6;
constexpr double kMb2 = 1e12;
constexpr double kJ = 100.0;
// Interior pad of the segment-length tangent rows (hm^2); keeps the row
// nonempty when a reference segment collapses, while staying far below
// the audit tolerances.
constexpr double kSegEps = 1e-16;
constexpr double kDhatFloorMb2 = 1e-12;

double unit_scale(VarKey::Kind kind) {
    switch (kind) {
        case VarKey::Kind::QX:
        case VarKey::Kind::QY:
        case VarKey::Kind::DLB:
            return kPos;
        case VarKey::Kind::SQDIST:
            return kSq;
        case VarKey::Kind::D:
            return kMb;
        case VarKey::Kind::DHAT:
            return kMb2;
        default:
            return 1.0;
    }
}

std::string pair_tag(const char* name, int k, int n) {
    return std::string(name) + "[" + std::to_string(k) + "," +
           std::to_string(n) + "]";
}

std::string slot_tag(const char* name, int n) {
    return std::string(name) + "[" + std::to_string(n) + "]";
}

}  // namespace

// -----------------------------------------------------------------------
// BuiltProgram accessors
// -----------------------------------------------------------------------

int BuiltProgram::column(const surrogates::VarKey& key) const {
    const int ues = cfg.num_ues();
    auto pair_idx = [&](int k, int r) { return k + ues * r; };
    switch (key.kind) {
        case VarKey::Kind::QX:
            return qx_col.size() ? qx_col(key.n) : -1;
        case VarKey::Kind::QY:
            return qy_col.size() ? qy_col(key.n) : -1;
        case VarKey::Kind::SQDIST:
            return sq_col.size() ? sq_col(pair_idx(key.k, key.n)) : -1;
        case VarKey::Kind::B:
            return b_col.size() ? b_col(pair_idx(key.k, key.n)) : -1;
        case VarKey::Kind::ATILDE:
            return atil_col.size() ? atil_col(pair_idx(key.k, key.n)) : -1;
        case VarKey::Kind::C:
            return c_col.size() ? c_col(key.n) : -1;
        case VarKey::Kind::D:
            if (phase2) return d_col(key.k);
            return d_col(pair_idx(key.k, key.n));
        case VarKey::Kind::DHAT:
            return dhat_col.size() ? dhat_col(key.n) : -1;
        case VarKey::Kind::DLB:
            return dlb_col.size() ? dlb_col(key.n) : -1;
        case VarKey::Kind::THOV:
            return thov_col.size() ? thov_col(key.n) : -1;
    }
    return -1;
}

namespace {

// SI value a fixed/absent key folds to (trajectory pinned or frozen;
// silent non-participants).
double fixed_value_si(const BuiltProgram& bp, const VarKey& key) {
    switch (key.kind) {
        case VarKey::Kind::QX:
            return bp.ref.q(key.n, 0);
        case VarKey::Kind::QY:
            return bp.ref.q(key.n, 1);
        case VarKey::Kind::SQDIST:
            return bp.ref.sq_dist(key.k, key.n);
        case VarKey::Kind::B:
            return std::log(1e-12);
        case VarKey::Kind::ATILDE:
            return bp.ref.gain_log(key.k, key.n);
        case VarKey::Kind::D:
            return 0.0;
        case VarKey::Kind::DLB:
            // round n flies the segment ending at its service point q[n+1]
            return (bp.ref.q.row(key.n + 1) - bp.ref.q.row(key.n)).norm();
        default:
            throw std::logic_error("fixed_value_si: unmapped key kind");
    }
}

}  // namespace

double BuiltProgram::value(const surrogates::VarKey& key,
                           const Eigen::VectorXd& x) const {
    const int col = column(key);
    if (col >= 0) return x(col) * unit_scale(key.kind);
    return fixed_value_si(*this, key);
}

DecisionState BuiltProgram::extract_state(const Eigen::VectorXd& x) const {
    DecisionState s = DecisionState::zeros(cfg);
    const int ues = cfg.num_ues();
    for (int n = 0; n <= cfg.num_slots; ++n) {
        s.q(n, 0) = value({VarKey::Kind::QX, -1, n}, x);
        s.q(n, 1) = value({VarKey::Kind::QY, -1, n}, x);
    }
    const Eigen::MatrixXd data = extract_data_bits(x);
    const double beta = surrogates::participation_beta_per_bit(cfg);
    for (int r = 0; r < cfg.num_rounds(); ++r) {
        for (int k = 0; k < ues; ++k) {
            s.data_bits(k, r) = data(k, r);
            if (phase2) {
                s.a(k, r) = a(k, r);
                const int bc = b_col(k + ues * r);
                s.ue_power_w(k, r) =
                    (a(k, r) != 0 && bc >= 0) ? std::exp(x(bc)) : 0.0;
            } else {
                s.a(k, r) =
                    surrogates::participation_smooth(data(k, r), beta) >= 0.5
                        ? 1
                        : 0;
                s.ue_power_w(k, r) = std::exp(x(b_col(k + ues * r)));
            }
        }
        s.hover_s(r) = x(thov_col(r));
    }
    for (int b = 0; b < cfg.num_broadcasts(); ++b)
        s.uav_power_w(b) = std::exp(x(c_col(b)));
    return s;
}

Eigen::MatrixXd BuiltProgram::extract_data_bits(
    const Eigen::VectorXd& x) const {
    const int ues = cfg.num_ues();
    Eigen::MatrixXd data = Eigen::MatrixXd::Zero(ues, cfg.num_rounds());
    for (int r = 0; r < cfg.num_rounds(); ++r)
        for (int k = 0; k < ues; ++k) {
            if (phase2)
                data(k, r) = a(k, r) != 0 ? x(d_col(k)) * kMb : 0.0;
            else
                data(k, r) = x(d_col(k + ues * r)) * kMb;
        }
    return data;
}

double BuiltProgram::max_soft_slack(const Eigen::VectorXd& x) const {
    double worst = 0.0;
    for (int i = 0; i < slack_col.size(); ++i)
        worst = std::max(worst, x(slack_col(i)));
    return worst;
}

double BuiltProgram::objective_j(const Eigen::VectorXd& x) const {
    return (prog.objective_vector().dot(x) + prog.objective_constant()) * kJ;
}

// -----------------------------------------------------------------------
// Assembler shared by both phases
// -----------------------------------------------------------------------

namespace {

class Assembler {
  public:
    Assembler(const ScenarioConfig& cfg, const surrogates::ReferencePoint& ref,
              const Eigen::MatrixXi* a, const BuildOptions& opts)
        : cfg_(cfg), ref_(ref), a_(a), opts_(opts) {}

    BuiltProgram run() {
        validate();
        allocate();
        build_x0();
        add_structural_rows();
        add_requirement_rows();
        add_objective();
        return std::move(bp_);
    }

  private:
    bool participating(int k, int r) const {
        return a_ == nullptr || (*a_)(k, r) != 0;
    }
    int pair_idx(int k, int r) const { return k + cfg_.num_ues() * r; }
    double seg_ref_m(int n) const {
        return (ref_.q.row(n) - ref_.q.row(n - 1)).norm();
    }
    VarKey dkey(int k, int r) const {
        return {VarKey::Kind::D, k, a_ ? -1 : r};
    }

    void validate() {
        cfg_.validate_or_throw();
        if (ref_.q.rows() != cfg_.num_slots + 1)
            throw std::invalid_argument("build: reference trajectory length");
        if ((ref_.q.row(0).transpose() - cfg_.q_initial_m).norm() > 1e-9 ||
            (ref_.q.row(cfg_.num_slots).transpose() - cfg_.q_final_m).norm() >
                1e-9)
            throw std::invalid_argument(
                "build: reference endpoints must match the mission");
        if (a_ != nullptr) {
            if (a_->rows() != cfg_.num_ues() || a_->cols() != cfg_.num_rounds())
                throw std::invalid_argument("build: plan shape");
            if (ref_.data_ue_bits.size() != cfg_.num_ues())
                throw std::invalid_argument(
                    "build: committed phase needs per-UE reference data");
            for (int r = 0; r < cfg_.num_rounds(); ++r) {
                int cnt = 0;
                for (int k = 0; k < cfg_.num_ues(); ++k)
                    cnt += (*a_)(k, r) != 0 ? 1 : 0;
                if (cnt < cfg_.participation_min)
                    throw std::invalid_argument(
                        "build: plan violates the participation floor");
            }
            for (int k = 0; k < cfg_.num_ues(); ++k)
                if (!(ref_.data_ue_bits(k) > 0.0))
                    throw std::invalid_argument(
                        "build: committed reference data must be positive");
        } else {
            if (ref_.data_bits.rows() != cfg_.num_ues() ||
                ref_.data_bits.cols() != cfg_.num_rounds())
                throw std::invalid_argument("build: reference data shape");
            for (int r = 0; r < cfg_.num_rounds(); ++r)
                if (!(ref_.data_bits.col(r).sum() > 10.0))
                    throw std::invalid_argument(
                        "build: reference data too small in round " +
                        std::to_string(r));
        }
        if (ref_.b_log.rows() != cfg_.num_ues() ||
            ref_.b_log.cols() != cfg_.num_rounds())
            throw std::invalid_argument("build: reference power shape");
        if (ref_.hover_s.size() != cfg_.num_rounds())
            throw std::invalid_argument("build: reference hover shape");
    }

    void allocate() {
        bp_.cfg = cfg_;
        bp_.ref = ref_;
        bp_.phase2 = a_ != nullptr;
        bp_.frozen_q = opts_.freeze_q;
        if (a_) bp_.a = *a_;
        bp_.obj_scale = kJ;

        const int ues = cfg_.num_ues();
        const int rounds = cfg_.num_rounds();
        const int slots = cfg_.num_slots;
        const int bcs = cfg_.num_broadcasts();
        auto& p = bp_.prog;

        bp_.qx_col = Eigen::VectorXi::Constant(slots + 1, -1);
        bp_.qy_col = Eigen::VectorXi::Constant(slots + 1, -1);
        if (!opts_.freeze_q) {
            const int qx0 = p.add_block("qx", slots - 1);
            const int qy0 = p.add_block("qy", slots - 1);
            for (int n = 1; n < slots; ++n) {
                bp_.qx_col(n) = qx0 + n - 1;
                bp_.qy_col(n) = qy0 + n - 1;
            }
            const int len0 = p.add_block("len", slots);
            bp_.len_col = Eigen::VectorXi::LinSpaced(slots, len0,
                                                     len0 + slots - 1);
        }

        // squared-distance epigraphs: rate rows of participating pairs
        // plus the broadcast positions of gated participants
        bp_.sq_col = Eigen::VectorXi::Constant(ues * rounds, -1);
        if (!opts_.freeze_q) {
            std::vector<int> need;
            for (int r = 0; r < rounds; ++r)
                for (int k = 0; k < ues; ++k) {
                    bool used = participating(k, r);
                    if (r < bcs && participating(k, r + 1)) used = true;
                    if (used) need.push_back(pair_idx(k, r));
                }
            const int sq0 = p.add_block("sq", static_cast<int>(need.size()));
            for (std::size_t i = 0; i < need.size(); ++i)
                bp_.sq_col(need[i]) = sq0 + static_cast<int>(i);
        }

        bp_.b_col = Eigen::VectorXi::Constant(ues * rounds, -1);
        bp_.atil_col = Eigen::VectorXi::Constant(ues * rounds, -1);
        bp_.ucm_col = Eigen::VectorXi::Constant(ues * rounds, -1);
        bp_.uacc_col = Eigen::VectorXi::Constant(ues * rounds, -1);
        {
            std::vector<int> part;
            for (int r = 0; r < rounds; ++r)
                for (int k = 0; k < ues; ++k)
                    if (participating(k, r)) part.push_back(pair_idx(k, r));
            const int n_part = static_cast<int>(part.size());
            const int b0 = p.add_block("b", n_part);
            const int at0 = p.add_block("atil", n_part);
            const int uc0 = p.add_block("ucm", n_part);
            const int ua0 = p.add_block("uacc", n_part);
            for (int i = 0; i < n_part; ++i) {
                bp_.b_col(part[i]) = b0 + i;
                bp_.atil_col(part[i]) = at0 + i;
                bp_.ucm_col(part[i]) = uc0 + i;
                bp_.uacc_col(part[i]) = ua0 + i;
            }
        }

        const int c0 = p.add_block("c", bcs);
        bp_.c_col = Eigen::VectorXi::LinSpaced(bcs, c0, c0 + bcs - 1);
        const int ub0 = p.add_block("ubc", bcs);
        bp_.ubc_col = Eigen::VectorXi::LinSpaced(bcs, ub0, ub0 + bcs - 1);

        if (a_) {
            const int d0 = p.add_block("d", ues);
            bp_.d_col = Eigen::VectorXi::LinSpaced(ues, d0, d0 + ues - 1);
        } else {
            const int d0 = p.add_block("d", ues * rounds);
            bp_.d_col = Eigen::VectorXi::LinSpaced(
                ues * rounds, d0, d0 + ues * rounds - 1);
        }
        const int dh0 = p.add_block("dhat", rounds);
        bp_.dhat_col =
            Eigen::VectorXi::LinSpaced(rounds, dh0, dh0 + rounds - 1);
        bp_.dlb_col = Eigen::VectorXi::Constant(rounds, -1);
        if (!opts_.freeze_q) {
            const int dl0 = p.add_block("dlb", rounds);
            for (int r = 0; r < rounds; ++r) bp_.dlb_col(r) = dl0 + r;
        }
        const int th0 = p.add_block("thov", rounds);
        bp_.thov_col =
            Eigen::VectorXi::LinSpaced(rounds, th0, th0 + rounds - 1);

        if (opts_.soft) {
            const int s0 = p.add_block("slack", 3);
            bp_.slack_col = Eigen::VectorXi::LinSpaced(3, s0, s0 + 2);
        }
    }

    // Maps an SI-unit affine form onto solver columns, folding fixed
    // keys into the constant. target_scale divides the whole row.
    void map_form(const AffineForm& f, double target_scale, LinExpr& expr,
                  double& constant) const {
        constant += f.constant / target_scale;
        for (const auto& [key, coef] : f.terms) {
            const int col = bp_.column(key);
            if (col >= 0)
                expr.push_back(
                    {col, coef * unit_scale(key.kind) / target_scale});
            else
                constant += coef * fixed_value_si(bp_, key) / target_scale;
        }
    }

    void build_x0() {
        auto& x0 = bp_.x0;
        x0 = Eigen::VectorXd::Zero(bp_.prog.num_vars());
        const int ues = cfg_.num_ues();
        const int rounds = cfg_.num_rounds();
        const double qpad = 1e-9;  // hm
        for (int n = 1; n < cfg_.num_slots; ++n) {
            if (bp_.qx_col(n) < 0) continue;
            x0(bp_.qx_col(n)) = std::clamp(ref_.q(n, 0) / kPos, qpad,
                                           cfg_.area_x_m / kPos - qpad);
            x0(bp_.qy_col(n)) = std::clamp(ref_.q(n, 1) / kPos, qpad,
                                           cfg_.area_y_m / kPos - qpad);
        }
        if (!opts_.freeze_q)
            for (int n = 1; n <= cfg_.num_slots; ++n)
                x0(bp_.len_col(n - 1)) = 1.02 * seg_ref_m(n) / kPos + 1e-6;

        const double b_lo = std::log(opts_.power_floor_w);
        const double b_hi = std::log(cfg_.ue_power_max_w);
        for (int r = 0; r < rounds; ++r) {
            for (int k = 0; k < ues; ++k) {
                const int idx = pair_idx(k, r);
                if (bp_.sq_col(idx) >= 0)
                    x0(bp_.sq_col(idx)) = 1.05 * ref_.sq_dist(k, r) / kSq;
                if (bp_.b_col(idx) >= 0)
                    x0(bp_.b_col(idx)) = std::clamp(
                        ref_.b_log(k, r), b_lo + 1e-6, b_hi - 1e-6);
                if (bp_.atil_col(idx) >= 0)
                    x0(bp_.atil_col(idx)) = ref_.gain_log(k, r) + 0.05;
                if (bp_.ucm_col(idx) >= 0)
                    x0(bp_.ucm_col(idx)) =
                        1.5 * cfg_.t_cm_s * std::exp(x0(bp_.b_col(idx))) / kJ;
            }
            if (bp_.dlb_col(r) >= 0) {
                const double seg_hm = seg_ref_m(r + 1) / kPos;
                x0(bp_.dlb_col(r)) =
                    0.9 * std::sqrt(seg_hm * seg_hm + kSegEps);
            }
            x0(bp_.thov_col(r)) = std::max(ref_.hover_s(r), 1e-6);
        }
        const double c_init = std::log(cfg_.uav_power_max_w / 2.0);
        for (int b = 0; b < cfg_.num_broadcasts(); ++b) {
            x0(bp_.c_col(b)) = c_init;
            x0(bp_.ubc_col(b)) = 1.5 * cfg_.t_bc_s * std::exp(c_init) / kJ;
        }
        if (a_) {
            for (int k = 0; k < ues; ++k)
                x0(bp_.d_col(k)) =
                    std::max(ref_.data_ue_bits(k) / kMb, 1e-9);
        } else {
            for (int r = 0; r < rounds; ++r)
                for (int k = 0; k < ues; ++k)
                    x0(bp_.d_col(pair_idx(k, r))) =
                        std::max(ref_.data_bits(k, r) / kMb, 1e-9);
        }
        for (int r = 0; r < rounds; ++r) {
            double total_mb = 0.0;
            for (int k = 0; k < ues; ++k)
                if (participating(k, r))
                    total_mb += a_ ? x0(bp_.d_col(k))
                                   : x0(bp_.d_col(pair_idx(k, r)));
            const double dhat = 0.999 * total_mb * total_mb;
            x0(bp_.dhat_col(r)) = dhat;
            for (int k = 0; k < ues; ++k) {
                const int idx = pair_idx(k, r);
                if (bp_.uacc_col(idx) < 0) continue;
                const double dv =
                    a_ ? x0(bp_.d_col(k)) : x0(bp_.d_col(idx));
                x0(bp_.uacc_col(idx)) = 1.5 * dv * dv / dhat + 1e-9;
            }
        }
        for (int i = 0; i < bp_.slack_col.size(); ++i)
            x0(bp_.slack_col(i)) = 1.0;
    }

    // --- structural rows: domains, epigraphs, caps (never shifted) ---
    void add_structural_rows() {
        auto& p = bp_.prog;
        const int ues = cfg_.num_ues();
        const int rounds = cfg_.num_rounds();
        const int slots = cfg_.num_slots;

        auto bound_lo = [&](int col, double lo, const std::string& tag) {
            conic::LinRow row;  // lo - x <= 0
            row.a.push_back({col, -1.0});
            row.b = lo;
            row.tag = tag;
            p.add(std::move(row));
        };
        auto bound_hi = [&](int col, double hi, const std::string& tag) {
            conic::LinRow row;  // x - hi <= 0
            row.a.push_back({col, 1.0});
            row.b = -hi;
            row.tag = tag;
            p.add(std::move(row));
        };

        if (!opts_.freeze_q) {
            for (int n = 1; n < slots; ++n) {
                bound_lo(bp_.qx_col(n), 0.0, slot_tag("qx_lo", n));
                bound_hi(bp_.qx_col(n), cfg_.area_x_m / kPos,
                         slot_tag("qx_hi", n));
                bound_lo(bp_.qy_col(n), 0.0, slot_tag("qy_lo", n));
                bound_hi(bp_.qy_col(n), cfg_.area_y_m / kPos,
                         slot_tag("qy_hi", n));
            }
            // flight-length epigraphs ||q[n] - q[n-1]|| <= len_n
            const double len_cap =
                cfg_.speed_mps * cfg_.mission_s / kPos;
            for (int n = 1; n <= slots; ++n) {
                conic::SocRow soc;
                soc.off = Eigen::VectorXd::Zero(2);
                for (int axis = 0; axis < 2; ++axis) {
                    LinExpr e;
                    const Eigen::VectorXi& cmap =
                        axis == 0 ? bp_.qx_col : bp_.qy_col;
                    double off = 0.0;
                    if (cmap(n) >= 0)
                        e.push_back({cmap(n), 1.0});
                    else
                        off += ref_.q(n, axis) / kPos;
                    if (cmap(n - 1) >= 0)
                        e.push_back({cmap(n - 1), -1.0});
                    else
                        off -= ref_.q(n - 1, axis) / kPos;
                    soc.rows.push_back(std::move(e));
                    soc.off(axis) = off;
                }
                soc.t.push_back({bp_.len_col(n - 1), 1.0});
                soc.tag = slot_tag("len_epi", n);
                p.add(std::move(soc));
                bound_hi(bp_.len_col(n - 1), len_cap, slot_tag("len_cap", n));
            }
            // squared-distance epigraphs per needed (k, r)
            const double sq_cap =
                2.0 *
                (cfg_.area_x_m * cfg_.area_x_m + cfg_.area_y_m * cfg_.area_y_m +
                 cfg_.altitude_m * cfg_.altitude_m) /
                kSq;
            for (int r = 0; r < rounds; ++r)
                for (int k = 0; k < ues; ++k) {
                    const int col = bp_.sq_col(pair_idx(k, r));
                    if (col < 0) continue;
                    conic::SqEpiRow row;
                    row.off = Eigen::VectorXd::Zero(2);
                    for (int axis = 0; axis < 2; ++axis) {
                        LinExpr e;
                        const Eigen::VectorXi& cmap =
                            axis == 0 ? bp_.qx_col : bp_.qy_col;
                        e.push_back({cmap(r + 1), 1.0});
                        row.rows.push_back(std::move(e));
                        row.off(axis) = -cfg_.ue_pos_m(k, axis) / kPos;
                    }
                    row.c0 = cfg_.altitude_m * cfg_.altitude_m / kSq;
                    row.rhs.push_back({col, 1.0});
                    row.tag = pair_tag("sq_epi", k, r);
                    p.add(std::move(row));
                    bound_hi(col, sq_cap, pair_tag("sq_cap", k, r));
                }
            // segment lower-bound tangents dlb_r^2 <= ~||q[r+1]-q[r]||^2
            for (int r = 0; r < rounds; ++r) {
                conic::SqEpiRow row;
                row.rows.push_back(LinExpr{{bp_.dlb_col(r), 1.0}});
                row.off = Eigen::VectorXd::Zero(1);
                double cst = kSegEps;
                map_form(surrogates::segment_length_sq_lb(ref_, r + 1), kSq,
                         row.rhs, cst);
                row.rhs0 = cst;
                row.tag = slot_tag("dlb_tan", r);
                p.add(std::move(row));
                bound_lo(bp_.dlb_col(r), 0.0, slot_tag("dlb_lo", r));
            }
        }

        const double b_lo = std::log(opts_.power_floor_w);
        const double b_hi = std::log(cfg_.ue_power_max_w);
        const double atil_cap =
            std::log(surrogates::gain_constant_m2(cfg_.carrier_hz) /
                     (cfg_.altitude_m * cfg_.altitude_m)) +
            10.0;
        const double ucm_cap = 2.0 * cfg_.t_cm_s * cfg_.ue_power_max_w / kJ;
        for (int r = 0; r < rounds; ++r)
            for (int k = 0; k < ues; ++k) {
                const int idx = pair_idx(k, r);
                if (bp_.b_col(idx) < 0) continue;
                bound_lo(bp_.b_col(idx), b_lo, pair_tag("b_lo", k, r));
                bound_hi(bp_.b_col(idx), b_hi, pair_tag("b_hi", k, r));
                bound_hi(bp_.atil_col(idx), atil_cap,
                         pair_tag("atil_hi", k, r));
                // uplink energy epigraph exp(B + ln(t_cm/kJ)) <= ucm
                conic::ExpRow erow;
                erow.u.push_back({bp_.b_col(idx), 1.0});
                erow.u0 = std::log(cfg_.t_cm_s / kJ);
                erow.w.push_back({bp_.ucm_col(idx), 1.0});
                erow.tag = pair_tag("ucm_epi", k, r);
                p.add(std::move(erow));
                bound_hi(bp_.ucm_col(idx), ucm_cap, pair_tag("ucm_cap", k, r));
                // channel-gain coupling exp(-Atil + A_ref) <= S_lin/S_ref
                conic::ExpRow crow;
                crow.u.push_back({bp_.atil_col(idx), -1.0});
                crow.u0 = ref_.gain_log(k, r);
                double cst = 0.0;
                // gain_coupling_lb is S_lin/Kc; rescale rows by S_ref/Kc
                const double row_scale =
                    ref_.sq_dist(k, r) /
                    surrogates::gain_constant_m2(cfg_.carrier_hz);
                map_form(surrogates::gain_coupling_lb(cfg_, ref_, k, r),
                         row_scale, crow.w, cst);
                crow.w0 = cst;
                crow.tag = pair_tag("couple", k, r);
                p.add(std::move(crow));
            }

        const double c_lo = std::log(opts_.power_floor_w);
        const double c_hi = std::log(cfg_.uav_power_max_w);
        const double ubc_cap = 2.0 * cfg_.t_bc_s * cfg_.uav_power_max_w / kJ;
        for (int b = 0; b < cfg_.num_broadcasts(); ++b) {
            bound_lo(bp_.c_col(b), c_lo, slot_tag("c_lo", b));
            bound_hi(bp_.c_col(b), c_hi, slot_tag("c_hi", b));
            conic::ExpRow erow;
            erow.u.push_back({bp_.c_col(b), 1.0});
            erow.u0 = std::log(cfg_.t_bc_s / kJ);
            erow.w.push_back({bp_.ubc_col(b), 1.0});
            erow.tag = slot_tag("ubc_epi", b);
            p.add(std::move(erow));
            bound_hi(bp_.ubc_col(b), ubc_cap, slot_tag("ubc_cap", b));
        }

        for (int i = 0; i < bp_.d_col.size(); ++i)
            bound_lo(bp_.d_col(i), 0.0, slot_tag("d_lo", i));
        if (opts_.data_cap_bits > 0.0)
            for (int i = 0; i < bp_.d_col.size(); ++i)
                bound_hi(bp_.d_col(i), opts_.data_cap_bits / kMb,
                         slot_tag("d_cap", i));

        for (int r = 0; r < rounds; ++r) {
            bound_lo(bp_.dhat_col(r), kDhatFloorMb2, slot_tag("dhat_lo", r));
            bound_lo(bp_.thov_col(r), 0.0, slot_tag("thov_lo", r));
            // dhat_r <= tangent of (sum data)^2
            conic::LinRow tan;
            tan.a.push_back({bp_.dhat_col(r), 1.0});
            double cst = 0.0;
            AffineForm form;
            if (a_) {
                form = surrogates::sum_data_sq_lb_masked(ref_, a_->col(r), r);
            } else {
                form = surrogates::sum_data_sq_lb(ref_, r);
            }
            // move the tangent to the right-hand side
            for (auto& t : form.terms) t.second = -t.second;
            form.constant = -form.constant;
            map_form(form, kMb2, tan.a, cst);
            tan.b = cst;
            tan.tag = slot_tag("dhat_tan", r);
            p.add(std::move(tan));
            // accuracy epigraphs (D)^2 <= dhat * uacc
            for (int k = 0; k < ues; ++k) {
                const int idx = pair_idx(k, r);
                if (bp_.uacc_col(idx) < 0) continue;
                conic::QolRow q;
                double qcst = 0.0;
                AffineForm dform;
                dform.add(dkey(k, r), 1.0);
                map_form(dform, kMb, q.num, qcst);
                q.num0 = qcst;
                q.y1.push_back({bp_.dhat_col(r), 1.0});
                q.y2.push_back({bp_.uacc_col(idx), 1.0});
                q.tag = pair_tag("acc_epi", k, r);
                p.add(std::move(q));
            }
        }

        if (opts_.soft)
            for (int i = 0; i < 3; ++i) {
                bound_lo(bp_.slack_col(i), 0.0, slot_tag("slack_lo", i));
                bound_hi(bp_.slack_col(i), 1e6, slot_tag("slack_hi", i));
            }
    }

    void soften(conic::LinRow& row, int which) const {
        if (opts_.soft) row.a.push_back({bp_.slack_col(which), -1.0});
    }

    // --- mission requirement rows (phase-1 shiftable) ---
    void add_requirement_rows() {
        auto& p = bp_.prog;
        const int ues = cfg_.num_ues();
        const int rounds = cfg_.num_rounds();
        const double qtld = cfg_.model_bits * std::numbers::ln2 /
                            (cfg_.t_cm_s * cfg_.bandwidth_hz);
        const double beta = surrogates::participation_beta_per_bit(cfg_);

        // hover covers the uplink window
        for (int r = 0; r < rounds; ++r) {
            conic::LinRow row;
            row.a.push_back({bp_.thov_col(r), -1.0});
            row.b = cfg_.t_cm_s;
            row.shiftable = true;
            row.tag = slot_tag("hover_cover", r);
            p.add(std::move(row));
        }

        // per-slot window: uplink + computation fit in flight + hover
        for (int r = 0; r < rounds; ++r)
            for (int k = 0; k < ues; ++k) {
                if (!participating(k, r)) continue;
                conic::LinRow row;
                row.b = cfg_.t_cm_s;
                AffineForm f;
                f.add(dkey(k, r), cfg_.compute_s_per_bit(k));
                f.add({VarKey::Kind::DLB, -1, r}, -1.0 / cfg_.speed_mps);
                map_form(f, 1.0, row.a, row.b);
                row.a.push_back({bp_.thov_col(r), -1.0});
                row.shiftable = true;
                row.tag = pair_tag("slot_window", k, r);
                p.add(std::move(row));
            }

        // mission time budget
        {
            conic::LinRow row;
            row.b = -cfg_.mission_s +
                    cfg_.t_agg_s * static_cast<double>(rounds) +
                    cfg_.t_bc_s * static_cast<double>(cfg_.num_broadcasts());
            for (int n = 1; n <= cfg_.num_slots; ++n) {
                if (opts_.freeze_q)
                    row.b += seg_ref_m(n) / cfg_.speed_mps;
                else
                    row.a.push_back(
                        {bp_.len_col(n - 1), kPos / cfg_.speed_mps});
            }
            for (int r = 0; r < rounds; ++r)
                row.a.push_back({bp_.thov_col(r), 1.0});
            row.shiftable = true;
            row.tag = "time_budget";
            p.add(std::move(row));
        }

        // per-UE mission data floor
        for (int k = 0; k < ues; ++k) {
            conic::LinRow row;
            row.b = cfg_.data_floor_bits / kMb;
            if (a_) {
                double cnt = 0.0;
                for (int r = 0; r < rounds; ++r)
                    cnt += (*a_)(k, r) != 0 ? 1.0 : 0.0;
                row.a.push_back({bp_.d_col(k), -cnt});
            } else {
                for (int r = 0; r < rounds; ++r)
                    row.a.push_back({bp_.d_col(pair_idx(k, r)), -1.0});
            }
            row.shiftable = true;
            row.tag = slot_tag("data_floor", k);
            p.add(std::move(row));
        }

        // participation floor (coupled phase only; committed plans are
        // validated upfront)
        if (!a_)
            for (int r = 0; r < rounds; ++r) {
                conic::TanhRow row;
                row.arg0 = Eigen::VectorXd::Zero(ues);
                for (int k = 0; k < ues; ++k)
                    row.args.push_back(
                        LinExpr{{bp_.d_col(pair_idx(k, r)), beta * kMb}});
                row.floor = static_cast<double>(cfg_.participation_min);
                row.shiftable = true;
                row.tag = slot_tag("participation", r);
                p.add(std::move(row));
            }

        // uplink rate rows
        for (int r = 0; r < rounds; ++r) {
            AffineForm r1;
            if (a_)
                r1 = masked_rate_r1_lb(r);
            else
                r1 = surrogates::rate_r1_lb(cfg_, ref_, r);
            for (int k = 0; k < ues; ++k) {
                if (!participating(k, r)) continue;
                conic::LseRow row;
                row.extra = cfg_.noise_w;
                for (int i = 0; i < ues; ++i) {
                    if (i == k || !participating(i, r)) continue;
                    row.args.push_back(
                        LinExpr{{bp_.b_col(pair_idx(i, r)), 1.0},
                                {bp_.atil_col(pair_idx(i, r)), 1.0}});
                }
                row.arg0 = Eigen::VectorXd::Zero(
                    static_cast<long>(row.args.size()));
                AffineForm rhs = r1;
                if (a_) {
                    rhs.constant -= qtld;
                } else {
                    const AffineForm level =
                        surrogates::participation_affine_ub(ref_, k, r, beta);
                    rhs.constant -= qtld * level.constant;
                    for (const auto& [key, coef] : level.terms)
                        rhs.add(key, -qtld * coef);
                }
                map_form(rhs, 1.0, row.rhs, row.rhs0);
                if (opts_.soft)
                    row.rhs.push_back({bp_.slack_col(1), 1.0});
                row.shiftable = true;
                row.tag = pair_tag("uplink", k, r);
                p.add(std::move(row));
            }
        }

        // broadcast reachability rows
        for (int b = 0; b < cfg_.num_broadcasts(); ++b)
            for (int k = 0; k < ues; ++k) {
                if (!participating(k, b + 1)) continue;
                conic::LinRow row;
                AffineForm lhs;  // requirement minus offer, <= 0
                if (a_) {
                    lhs.constant = surrogates::broadcast_lhs_exact(cfg_, 1.0);
                } else {
                    lhs = surrogates::broadcast_lhs_surrogate(cfg_, ref_, k, b);
                }
                lhs.constant += std::log(cfg_.noise_w);
                AffineForm gain = surrogates::gain_log_lb(cfg_, ref_, k, b);
                lhs.constant -= gain.constant;
                for (const auto& [key, coef] : gain.terms)
                    lhs.add(key, -coef);
                map_form(lhs, 1.0, row.a, row.b);
                row.a.push_back({bp_.c_col(b), -1.0});
                soften(row, 2);
                row.shiftable = true;
                row.tag = pair_tag("broadcast", k, b);
                p.add(std::move(row));
            }

        // mission accuracy budget
        {
            conic::LinRow row;
            row.b = flbound::accuracy_fixed_terms(cfg_.fl, cfg_.num_slots,
                                                  cfg_.local_iters) -
                    cfg_.accuracy_eps;
            for (int r = 0; r < rounds; ++r) {
                const double wgt = flbound::accuracy_round_weight(
                    cfg_.fl, cfg_.num_slots, cfg_.local_iters, r);
                for (int k = 0; k < ues; ++k) {
                    const int col = bp_.uacc_col(pair_idx(k, r));
                    if (col >= 0) row.a.push_back({col, wgt});
                }
            }
            soften(row, 0);
            row.shiftable = true;
            row.tag = "accuracy";
            p.add(std::move(row));
        }
    }

    // Tangent of ln(sum_participants exp(B + ln gain) + noise) for the
    // committed phase (participants of round r only).
    AffineForm masked_rate_r1_lb(int r) const {
        const int ues = cfg_.num_ues();
        double shift = std::log(cfg_.noise_w);
        Eigen::VectorXd z = Eigen::VectorXd::Zero(ues);
        for (int i = 0; i < ues; ++i) {
            if (!participating(i, r)) continue;
            z(i) = ref_.b_log(i, r) + ref_.gain_log(i, r);
            shift = std::max(shift, z(i));
        }
        double mass = cfg_.noise_w * std::exp(-shift);
        for (int i = 0; i < ues; ++i)
            if (participating(i, r)) mass += std::exp(z(i) - shift);
        AffineForm f;
        f.constant = shift + std::log(mass);
        for (int i = 0; i < ues; ++i) {
            if (!participating(i, r)) continue;
            const double w = std::exp(z(i) - shift) / mass;
            if (w == 0.0) continue;
            f.add({VarKey::Kind::B, i, r}, w);
            f.constant -= w * ref_.b_log(i, r);
            f.constant += w;
            f.add({VarKey::Kind::SQDIST, i, r}, -w / ref_.sq_dist(i, r));
        }
        return f;
    }

    void add_objective() {
        auto& p = bp_.prog;
        const int ues = cfg_.num_ues();
        const int rounds = cfg_.num_rounds();
        const double p_cruise =
            energy::propulsion_power_w(cfg_.rotor, cfg_.speed_mps);
        const double p_hover = energy::propulsion_power_w(cfg_.rotor, 0.0);

        if (opts_.freeze_q) {
            double fly_j = 0.0;
            for (int n = 1; n <= cfg_.num_slots; ++n)
                fly_j += p_cruise * seg_ref_m(n) / cfg_.speed_mps;
            bp_.obj_fixed_j = fly_j;
            p.add_objective_constant(fly_j / kJ);
        } else {
            for (int n = 1; n <= cfg_.num_slots; ++n)
                p.add_objective(bp_.len_col(n - 1),
                                p_cruise * kPos / cfg_.speed_mps / kJ);
        }
        for (int r = 0; r < rounds; ++r) {
            p.add_objective(bp_.thov_col(r), p_hover / kJ);
            for (int k = 0; k < ues; ++k) {
                const int idx = pair_idx(k, r);
                if (bp_.ucm_col(idx) >= 0)
                    p.add_objective(bp_.ucm_col(idx), 1.0);
            }
        }
        for (int b = 0; b < cfg_.num_broadcasts(); ++b)
            p.add_objective(bp_.ubc_col(b), 1.0);
        for (int k = 0; k < ues; ++k) {
            const double per_bit = energy::compute_energy_j(
                1.0, cfg_.local_iters, cfg_.chip_coeff, cfg_.cycles_per_bit,
                cfg_.ue_cpu_hz(k));
            if (a_) {
                double cnt = 0.0;
                for (int r = 0; r < rounds; ++r)
                    cnt += (*a_)(k, r) != 0 ? 1.0 : 0.0;
                p.add_objective(bp_.d_col(k), cnt * per_bit * kMb / kJ);
            } else {
                for (int r = 0; r < rounds; ++r)
                    p.add_objective(bp_.d_col(pair_idx(k, r)),
                                    per_bit * kMb / kJ);
            }
        }
        for (int i = 0; i < bp_.slack_col.size(); ++i)
            p.add_objective(bp_.slack_col(i), opts_.soft_penalty_j / kJ);
    }

    const ScenarioConfig& cfg_;
    const surrogates::ReferencePoint& ref_;
    const Eigen::MatrixXi* a_;
    const BuildOptions& opts_;
    BuiltProgram bp_;
};

}  // namespace

BuiltProgram build_phase1(const ScenarioConfig& cfg,
                          const surrogates::ReferencePoint& ref,
                          const BuildOptions& opts) {
    return Assembler(cfg, ref, nullptr, opts).run();
}

BuiltProgram build_phase2(const ScenarioConfig& cfg, const Eigen::MatrixXi& a,
                          const surrogates::ReferencePoint& ref,
                          const BuildOptions& opts) {
    return Assembler(cfg, ref, &a, opts).run();
}

SubproblemResult solve(const BuiltProgram& built,
                       const conic::SolveOptions& opts) {
    SubproblemResult out;
    out.solver = conic::solve(built.prog, built.x0, opts);
    out.feasible = out.solver.status == conic::SolveStatus::optimal ||
                   out.solver.status == conic::SolveStatus::iteration_limit;
    if (out.feasible) {
        out.state = built.extract_state(out.solver.x);
        out.data_bits = built.extract_data_bits(out.solver.x);
        out.objective_j = built.objective_j(out.solver.x);
        out.soft_slack = built.max_soft_slack(out.solver.x);
    }
    return out;
}

void dump_program(const BuiltProgram& built, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("dump_program: cannot open " + path);
    built.prog.dump(os);
}

}  // namespace subproblem
}  // namespace ecofl
