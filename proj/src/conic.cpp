#include "ecofl/conic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <Eigen/SparseCholesky>

namespace ecofl {
namespace conic {

double eval_expr(const LinExpr& e, const Eigen::VectorXd& x) {
    double v = 0.0;
    for (const auto& t : e) v += t.coef * x(t.col);
    return v;
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::iteration_limit: return "iteration_limit";
        case SolveStatus::numerical_trouble: return "numerical_trouble";
    }
    return "unknown";
}

// -----------------------------------------------------------------------
// ConicProgram bookkeeping
// -----------------------------------------------------------------------

int ConicProgram::add_block(const std::string& name, int size) {
    if (size < 0) throw std::invalid_argument("add_block: negative size");
    blocks_.push_back({name, num_vars_, size});
    num_vars_ += size;
    return blocks_.back().offset;
}

const VarBlock& ConicProgram::block(const std::string& name) const {
    for (const auto& b : blocks_)
        if (b.name == name) return b;
    throw std::out_of_range("ConicProgram: no block named '" + name + "'");
}

void ConicProgram::add_objective(int col, double coef) {
    if (col < 0 || col >= num_vars_)
        throw std::out_of_range("add_objective: column out of range");
    obj_.emplace_back(col, coef);
}

Eigen::VectorXd ConicProgram::objective_vector() const {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(num_vars_);
    for (const auto& [col, coef] : obj_) c(col) += coef;
    return c;
}

int ConicProgram::num_rows() const {
    return static_cast<int>(lin_.size() + sqepi_.size() + soc_.size() +
                            qol_.size() + exp_.size() + lse_.size() +
                            tanh_.size());
}

double ConicProgram::barrier_nu() const {
    return static_cast<double>(lin_.size()) + sqepi_.size() +
           2.0 * soc_.size() + 2.0 * qol_.size() + 2.0 * exp_.size() +
           lse_.size() + tanh_.size();
}

namespace {

double lse_shifted(const std::vector<LinExpr>& args,
                   const Eigen::VectorXd& arg0, double extra,
                   const Eigen::VectorXd& x) {
    double shift = extra > 0.0 ? std::log(extra)
                               : -std::numeric_limits<double>::infinity();
    const int m = static_cast<int>(args.size());
    Eigen::VectorXd z(m);
    for (int i = 0; i < m; ++i) {
        z(i) = eval_expr(args[i], x) + arg0(i);
        shift = std::max(shift, z(i));
    }
    double mass = extra > 0.0 ? extra * std::exp(-shift) : 0.0;
    for (int i = 0; i < m; ++i) mass += std::exp(z(i) - shift);
    return shift + std::log(mass);
}

}  // namespace

Eigen::VectorXd ConicProgram::margins(const Eigen::VectorXd& x) const {
    std::vector<double> m;
    m.reserve(num_rows());
    for (const auto& r : lin_) m.push_back(-(eval_expr(r.a, x) + r.b));
    for (const auto& r : sqepi_) {
        double quad = r.c0;
        for (int j = 0; j < static_cast<int>(r.rows.size()); ++j) {
            const double v = eval_expr(r.rows[j], x) + r.off(j);
            quad += v * v;
        }
        m.push_back(eval_expr(r.rhs, x) + r.rhs0 - quad);
    }
    for (const auto& r : soc_) {
        const double sigma = eval_expr(r.t, x) + r.t0;
        double rho2 = 0.0;
        for (int j = 0; j < static_cast<int>(r.rows.size()); ++j) {
            const double v = eval_expr(r.rows[j], x) + r.off(j);
            rho2 += v * v;
        }
        m.push_back(sigma <= 0.0 ? sigma : sigma - std::sqrt(rho2));
    }
    for (const auto& r : qol_) {
        const double y1 = eval_expr(r.y1, x) + r.y10;
        const double y2 = eval_expr(r.y2, x) + r.y20;
        const double v = eval_expr(r.num, x) + r.num0;
        m.push_back(std::min({y1, y2, y1 * y2 - v * v}));
    }
    for (const auto& r : exp_) {
        const double w = eval_expr(r.w, x) + r.w0;
        const double u = eval_expr(r.u, x) + r.u0;
        m.push_back(w <= 0.0 ? w : std::min(w, std::log(w) - u));
    }
    for (const auto& r : lse_) {
        const double lhs = lse_shifted(r.args, r.arg0, r.extra, x);
        m.push_back(eval_expr(r.rhs, x) + r.rhs0 - lhs);
    }
    for (const auto& r : tanh_) {
        double h = -r.floor;
        for (int i = 0; i < static_cast<int>(r.args.size()); ++i)
            h += std::tanh(eval_expr(r.args[i], x) + r.arg0(i));
        m.push_back(h);
    }
    return Eigen::Map<Eigen::VectorXd>(m.data(), m.size());
}

std::vector<std::pair<std::string, double>> ConicProgram::violations(
    const Eigen::VectorXd& x, double tol) const {
    std::vector<std::pair<std::string, double>> out;
    const Eigen::VectorXd m = margins(x);
    int idx = 0;
    auto scan = [&](const auto& rows) {
        for (const auto& r : rows) {
            if (-m(idx) > tol) out.emplace_back(r.tag, -m(idx));
            ++idx;
        }
    };
    scan(lin_);
    scan(sqepi_);
    scan(soc_);
    scan(qol_);
    scan(exp_);
    scan(lse_);
    scan(tanh_);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.second > b.second;
    });
    return out;
}

namespace {

void dump_expr(std::ostream& os, const LinExpr& e) {
    for (const auto& t : e) os << " " << t.coef << "*x" << t.col;
}

}  // namespace

void ConicProgram::dump(std::ostream& os) const {
    os.precision(17);
    os << "vars " << num_vars_ << " rows " << num_rows() << " nu "
       << barrier_nu() << "\n";
    for (const auto& b : blocks_)
        os << "block " << b.name << " offset " << b.offset << " size "
           << b.size << "\n";
    os << "objective const " << obj0_ << "\n";
    for (const auto& [col, coef] : obj_)
        os << "objective x" << col << " " << coef << "\n";
    for (const auto& r : lin_) {
        os << "lin " << r.tag << (r.shiftable ? " soft:" : " hard:");
        dump_expr(os, r.a);
        os << " + " << r.b << " <= 0\n";
    }
    for (const auto& r : sqepi_) {
        os << "sqepi " << r.tag << (r.shiftable ? " soft:" : " hard:")
           << " sum_sq(" << r.rows.size() << " rows) + " << r.c0 << " <=";
        dump_expr(os, r.rhs);
        os << " + " << r.rhs0 << "\n";
    }
    for (const auto& r : soc_) {
        os << "soc " << r.tag << (r.shiftable ? " soft:" : " hard:")
           << " norm(" << r.rows.size() << " rows) <=";
        dump_expr(os, r.t);
        os << " + " << r.t0 << "\n";
    }
    for (const auto& r : qol_) {
        os << "qol " << r.tag << (r.shiftable ? " soft:" : " hard:") << " (";
        dump_expr(os, r.num);
        os << " + " << r.num0 << ")^2 <= (";
        dump_expr(os, r.y1);
        os << " + " << r.y10 << ")*(";
        dump_expr(os, r.y2);
        os << " + " << r.y20 << ")\n";
    }
    for (const auto& r : exp_) {
        os << "exp " << r.tag << (r.shiftable ? " soft:" : " hard:")
           << " exp(";
        dump_expr(os, r.u);
        os << " + " << r.u0 << ") <=";
        dump_expr(os, r.w);
        os << " + " << r.w0 << "\n";
    }
    for (const auto& r : lse_) {
        os << "lse " << r.tag << (r.shiftable ? " soft:" : " hard:")
           << " ln(sum_exp(" << r.args.size() << " args) + " << r.extra
           << ") <=";
        dump_expr(os, r.rhs);
        os << " + " << r.rhs0 << "\n";
    }
    for (const auto& r : tanh_) {
        os << "tanh " << r.tag << (r.shiftable ? " soft:" : " hard:")
           << " sum_tanh(" << r.args.size() << " args) >= " << r.floor
           << "\n";
    }
}

// -----------------------------------------------------------------------
// Barrier machinery
// -----------------------------------------------------------------------

namespace {

// Internal model: a copy of the program rows, optionally extended with a
// shared phase-1 slack column tau (relaxing every shiftable row), plus
// the objective used for this phase.
struct Model {
    int dim = 0;
    int tau_col = -1;
    Eigen::VectorXd c;
    double nu = 0.0;
    std::vector<LinRow> lin;
    std::vector<SqEpiRow> sqepi;
    std::vector<SocRow> soc;
    std::vector<QolRow> qol;
    std::vector<ExpRow> exp;
    std::vector<LseRow> lse;
    std::vector<TanhRow> tanh;
    // tanh rows get a linear add-on for tau (outside the tanh terms)
    std::vector<LinExpr> tanh_shift;
};

Model build_model(const ConicProgram& p, bool with_tau) {
    Model m;
    m.dim = p.num_vars() + (with_tau ? 1 : 0);
    m.tau_col = with_tau ? p.num_vars() : -1;
    m.nu = p.barrier_nu();
    m.lin = p.lin_rows();
    m.sqepi = p.sqepi_rows();
    m.soc = p.soc_rows();
    m.qol = p.qol_rows();
    m.exp = p.exp_rows();
    m.lse = p.lse_rows();
    m.tanh = p.tanh_rows();
    m.tanh_shift.resize(m.tanh.size());
    if (with_tau) {
        for (auto& r : m.lin)
            if (r.shiftable) r.a.push_back({m.tau_col, -1.0});
        for (auto& r : m.sqepi)
            if (r.shiftable) r.rhs.push_back({m.tau_col, 1.0});
        for (auto& r : m.soc)
            if (r.shiftable) r.t.push_back({m.tau_col, 1.0});
        for (auto& r : m.qol)
            if (r.shiftable)
                throw std::logic_error("qol rows cannot be shiftable");
        for (auto& r : m.exp)
            if (r.shiftable) r.w.push_back({m.tau_col, 1.0});
        for (auto& r : m.lse)
            if (r.shiftable) r.rhs.push_back({m.tau_col, 1.0});
        for (std::size_t i = 0; i < m.tanh.size(); ++i)
            if (m.tanh[i].shiftable)
                m.tanh_shift[i].push_back({m.tau_col, 1.0});
        // keep tau bounded below so the phase-1 center exists
        LinRow floor_row;
        floor_row.a.push_back({m.tau_col, -1.0});
        floor_row.b = -1.0;  // tau >= -1
        floor_row.tag = "tau_floor";
        m.lin.push_back(floor_row);
        m.nu += 1.0;
        m.c = Eigen::VectorXd::Zero(m.dim);
        m.c(m.tau_col) = 1.0;
    } else {
        m.c = p.objective_vector();
    }
    return m;
}

class Barrier {
  public:
    explicit Barrier(const Model& m) : m_(m), scratch_(m.dim) {
        scratch_.setZero();
    }

    // Barrier value; sets ok=false when x is outside the domain.
    double value(const Eigen::VectorXd& x, bool* ok) const {
        double f = 0.0;
        *ok = true;
        auto guard = [&](double margin) -> double {
            if (!(margin > 0.0) || !std::isfinite(margin)) {
                *ok = false;
                return 1.0;
            }
            return margin;
        };
        for (const auto& r : m_.lin)
            f -= std::log(guard(-(eval_expr(r.a, x) + r.b)));
        for (const auto& r : m_.sqepi) {
            double quad = r.c0;
            for (int j = 0; j < static_cast<int>(r.rows.size()); ++j) {
                const double v = eval_expr(r.rows[j], x) + r.off(j);
                quad += v * v;
            }
            f -= std::log(guard(eval_expr(r.rhs, x) + r.rhs0 - quad));
        }
        for (const auto& r : m_.soc) {
            const double sigma = eval_expr(r.t, x) + r.t0;
            double rho2 = 0.0;
            for (int j = 0; j < static_cast<int>(r.rows.size()); ++j) {
                const double v = eval_expr(r.rows[j], x) + r.off(j);
                rho2 += v * v;
            }
            if (!(sigma > 0.0)) {
                *ok = false;
                continue;
            }
            f -= std::log(guard(sigma * sigma - rho2));
        }
        for (const auto& r : m_.qol) {
            const double y1 = eval_expr(r.y1, x) + r.y10;
            const double y2 = eval_expr(r.y2, x) + r.y20;
            const double v = eval_expr(r.num, x) + r.num0;
            if (!(y1 > 0.0) || !(y2 > 0.0)) {
                *ok = false;
                continue;
            }
            f -= std::log(guard(y1 * y2 - v * v));
        }
        for (const auto& r : m_.exp) {
            const double w = eval_expr(r.w, x) + r.w0;
            if (!(w > 0.0)) {
                *ok = false;
                continue;
            }
            const double rho = std::log(w) - (eval_expr(r.u, x) + r.u0);
            f -= std::log(guard(rho));
            f -= std::log(w);
        }
        for (const auto& r : m_.lse) {
            const double lhs = lse_shifted(r.args, r.arg0, r.extra, x);
            f -= std::log(guard(eval_expr(r.rhs, x) + r.rhs0 - lhs));
        }
        for (std::size_t i = 0; i < m_.tanh.size(); ++i) {
            const auto& r = m_.tanh[i];
            double h = -r.floor + eval_expr(m_.tanh_shift[i], x);
            for (int j = 0; j < static_cast<int>(r.args.size()); ++j)
                h += std::tanh(eval_expr(r.args[j], x) + r.arg0(j));
            f -= std::log(guard(h));
        }
        return f;
    }

    // Gradient of the barrier and Hessian triplets (both accumulated).
    void grad_hess(const Eigen::VectorXd& x, Eigen::VectorXd& g,
                   std::vector<Eigen::Triplet<double>>& trip) const {
        for (const auto& r : m_.lin) {
            const double s = -(eval_expr(r.a, x) + r.b);
            axpy(g, r.a, 1.0 / s);
            rank1(trip, r.a, r.a, 1.0 / (s * s));
        }
        for (const auto& r : m_.sqepi) {
            double quad = r.c0;
            const int jn = static_cast<int>(r.rows.size());
            Eigen::VectorXd v(jn);
            for (int j = 0; j < jn; ++j) {
                v(j) = eval_expr(r.rows[j], x) + r.off(j);
                quad += v(j) * v(j);
            }
            const double s = eval_expr(r.rhs, x) + r.rhs0 - quad;
            begin_scratch();
            acc(r.rhs, 1.0);
            for (int j = 0; j < jn; ++j) acc(r.rows[j], -2.0 * v(j));
            const LinExpr gs = end_scratch();
            axpy(g, gs, -1.0 / s);
            rank1(trip, gs, gs, 1.0 / (s * s));
            for (int j = 0; j < jn; ++j)
                rank1(trip, r.rows[j], r.rows[j], 2.0 / s);
        }
        for (const auto& r : m_.soc) {
            const double sigma = eval_expr(r.t, x) + r.t0;
            const int jn = static_cast<int>(r.rows.size());
            Eigen::VectorXd v(jn);
            double rho2 = 0.0;
            for (int j = 0; j < jn; ++j) {
                v(j) = eval_expr(r.rows[j], x) + r.off(j);
                rho2 += v(j) * v(j);
            }
            const double s2 = sigma * sigma - rho2;
            begin_scratch();
            acc(r.t, 2.0 * sigma);
            for (int j = 0; j < jn; ++j) acc(r.rows[j], -2.0 * v(j));
            const LinExpr gs = end_scratch();
            axpy(g, gs, -1.0 / s2);
            rank1(trip, gs, gs, 1.0 / (s2 * s2));
            for (int j = 0; j < jn; ++j)
                rank1(trip, r.rows[j], r.rows[j], 2.0 / s2);
            rank1(trip, r.t, r.t, -2.0 / s2);
        }
        for (const auto& r : m_.qol) {
            const double y1 = eval_expr(r.y1, x) + r.y10;
            const double y2 = eval_expr(r.y2, x) + r.y20;
            const double v = eval_expr(r.num, x) + r.num0;
            const double s = y1 * y2 - v * v;
            begin_scratch();
            acc(r.y1, y2);
            acc(r.y2, y1);
            acc(r.num, -2.0 * v);
            const LinExpr gs = end_scratch();
            axpy(g, gs, -1.0 / s);
            rank1(trip, gs, gs, 1.0 / (s * s));
            rank1(trip, r.y1, r.y2, -1.0 / s);
            rank1(trip, r.y2, r.y1, -1.0 / s);
            rank1(trip, r.num, r.num, 2.0 / s);
        }
        for (const auto& r : m_.exp) {
            const double w = eval_expr(r.w, x) + r.w0;
            const double rho = std::log(w) - (eval_expr(r.u, x) + r.u0);
            begin_scratch();
            acc(r.w, 1.0 / w);
            acc(r.u, -1.0);
            const LinExpr gr = end_scratch();
            axpy(g, gr, -1.0 / rho);
            axpy(g, r.w, -1.0 / w);
            rank1(trip, gr, gr, 1.0 / (rho * rho));
            rank1(trip, r.w, r.w, (1.0 + 1.0 / rho) / (w * w));
        }
        for (const auto& r : m_.lse) {
            const int mn = static_cast<int>(r.args.size());
            double shift = r.extra > 0.0
                               ? std::log(r.extra)
                               : -std::numeric_limits<double>::infinity();
            Eigen::VectorXd z(mn);
            for (int i = 0; i < mn; ++i) {
                z(i) = eval_expr(r.args[i], x) + r.arg0(i);
                shift = std::max(shift, z(i));
            }
            double mass = r.extra > 0.0 ? r.extra * std::exp(-shift) : 0.0;
            Eigen::VectorXd p(mn);
            for (int i = 0; i < mn; ++i) {
                p(i) = std::exp(z(i) - shift);
                mass += p(i);
            }
            p /= mass;
            const double lhs = shift + std::log(mass);
            const double s = eval_expr(r.rhs, x) + r.rhs0 - lhs;
            begin_scratch();
            for (int i = 0; i < mn; ++i) acc(r.args[i], p(i));
            const LinExpr gm = end_scratch();  // gradient of the LSE
            begin_scratch();
            acc(r.rhs, 1.0);
            acc(gm, -1.0);
            const LinExpr gs = end_scratch();
            axpy(g, gs, -1.0 / s);
            rank1(trip, gs, gs, 1.0 / (s * s));
            for (int i = 0; i < mn; ++i)
                rank1(trip, r.args[i], r.args[i], p(i) / s);
            rank1(trip, gm, gm, -1.0 / s);
        }
        for (std::size_t ri = 0; ri < m_.tanh.size(); ++ri) {
            const auto& r = m_.tanh[ri];
            const int mn = static_cast<int>(r.args.size());
            double h = -r.floor + eval_expr(m_.tanh_shift[ri], x);
            Eigen::VectorXd th(mn);
            for (int i = 0; i < mn; ++i) {
                th(i) = std::tanh(eval_expr(r.args[i], x) + r.arg0(i));
                h += th(i);
            }
            begin_scratch();
            for (int i = 0; i < mn; ++i)
                acc(r.args[i], 1.0 - th(i) * th(i));
            acc(m_.tanh_shift[ri], 1.0);
            const LinExpr gh = end_scratch();
            axpy(g, gh, -1.0 / h);
            rank1(trip, gh, gh, 1.0 / (h * h));
            for (int i = 0; i < mn; ++i)
                rank1(trip, r.args[i], r.args[i],
                      2.0 * th(i) * (1.0 - th(i) * th(i)) / h);
        }
    }

  private:
    void axpy(Eigen::VectorXd& g, const LinExpr& e, double scale) const {
        for (const auto& t : e) g(t.col) += scale * t.coef;
    }
    void rank1(std::vector<Eigen::Triplet<double>>& trip, const LinExpr& a,
               const LinExpr& b, double scale) const {
        if (scale == 0.0) return;
        for (const auto& ta : a)
            for (const auto& tb : b)
                trip.emplace_back(ta.col, tb.col,
                                  scale * ta.coef * tb.coef);
    }
    void begin_scratch() const { touched_.clear(); }
    void acc(const LinExpr& e, double scale) const {
        for (const auto& t : e) {
            if (scratch_(t.col) == 0.0) touched_.push_back(t.col);
            scratch_(t.col) += scale * t.coef;
        }
    }
    LinExpr end_scratch() const {
        LinExpr out;
        out.reserve(touched_.size());
        for (int col : touched_) {
            if (scratch_(col) != 0.0) out.push_back({col, scratch_(col)});
            scratch_(col) = 0.0;
        }
        return out;
    }

    const Model& m_;
    mutable Eigen::VectorXd scratch_;
    mutable std::vector<int> touched_;
};

struct CenterOutcome {
    bool converged = false;
    bool trouble = false;
    int iters = 0;
    // Newton decrement squared at the exit iterate (infinity if it was
    // never computed, e.g. an early stop-predicate exit).
    double lambda2 = std::numeric_limits<double>::infinity();
    Eigen::VectorXd grad_total;  // t*c + barrier gradient at exit
};

// Damped Newton centering of t*c'x + barrier(x). The predicate `stop`
// allows early exit (phase-1 watches tau).
template <typename StopFn>
CenterOutcome center(const Model& model, const Barrier& barrier, double tw,
                     Eigen::VectorXd& x, double center_tol, int max_iters,
                     double armijo, StopFn&& stop, int verbose = 0) {
    CenterOutcome out;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    std::vector<Eigen::Triplet<double>> trip;
    bool ok = false;
    double f = tw * model.c.dot(x) + barrier.value(x, &ok);
    if (!ok) {
        out.trouble = true;
        return out;
    }
    int stall = 0;
    double lambda2_prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iters; ++it) {
        if (stop(x)) {
            out.converged = true;
            return out;
        }
        Eigen::VectorXd g = tw * model.c;
        trip.clear();
        barrier.grad_hess(x, g, trip);
        out.grad_total = g;

        Eigen::VectorXd p;
        double lambda2 = -1.0;
        double ridge = 0.0;
        for (int attempt = 0; attempt < 8; ++attempt) {
            std::vector<Eigen::Triplet<double>> t2 = trip;
            if (ridge > 0.0)
                for (int i = 0; i < model.dim; ++i)
                    t2.emplace_back(i, i, ridge);
            Eigen::SparseMatrix<double> h(model.dim, model.dim);
            h.setFromTriplets(t2.begin(), t2.end());
            ldlt.compute(h);
            if (ldlt.info() == Eigen::Success) {
                p = ldlt.solve(-g);
                lambda2 = -g.dot(p);
                if (std::isfinite(lambda2) && lambda2 >= 0.0) break;
            }
            ridge = ridge == 0.0 ? 1e-10 : ridge * 100.0;
            lambda2 = -1.0;
        }
        if (lambda2 < 0.0) {
            out.trouble = true;
            return out;
        }
        out.lambda2 = lambda2;
        if (0.5 * lambda2 <= center_tol) {
            out.converged = true;
            return out;
        }
        // The Armijo test below cannot certify decreases smaller than the
        // floating-point resolution of f; a decrement under that floor at
        // a non-improving step still counts as converged because the
        // caller's gap certificate accounts for the achieved decrement.
        const double f_floor = 16.0 *
                               std::numeric_limits<double>::epsilon() *
                               (1.0 + std::abs(f)) / armijo;

        const double f_before = f;
        double alpha = 1.0;
        bool stepped = false;
        for (int back = 0; back < 60; ++back) {
            Eigen::VectorXd xn = x + alpha * p;
            bool okn = false;
            const double fn = tw * model.c.dot(xn) + barrier.value(xn, &okn);
            if (okn && fn <= f - armijo * alpha * lambda2) {
                x = xn;
                f = fn;
                stepped = true;
                break;
            }
            alpha *= 0.5;
        }
        ++out.iters;
        if (verbose >= 2)
            std::fprintf(stderr,
                         "    newton it=%d lambda2=%.3e alpha=%.3e f=%.9e%s\n",
                         it, lambda2, alpha, f, stepped ? "" : " (stuck)");
        if (!stepped) {
            // Cannot make progress: accept the iterate if the decrement
            // is already small, otherwise report trouble.
            out.converged =
                0.5 * lambda2 <= std::max({center_tol, f_floor, 1e-7});
            out.trouble = !out.converged;
            return out;
        }
        // A run of steps where the decrement stops contracting AND the
        // achieved decrease is below the floating-point resolution of f
        // means Armijo is accepting rounding jitter: the iterate is as
        // centered as floating point allows. Same rule as the stuck exit.
        if (lambda2 >= 0.9 * lambda2_prev && f_before - f <= f_floor) {
            if (++stall >= 8) {
                out.converged =
                    0.5 * lambda2 <= std::max({center_tol, f_floor, 1e-7});
                out.trouble = !out.converged;
                return out;
            }
        } else {
            stall = 0;
        }
        lambda2_prev = lambda2;
    }
    return out;  // iteration budget exhausted
}

}  // namespace

// -----------------------------------------------------------------------
// solve()
// -----------------------------------------------------------------------

SolveResult solve(const ConicProgram& prog, const Eigen::VectorXd& x0,
                  const SolveOptions& opts) {
    if (x0.size() != prog.num_vars())
        throw std::invalid_argument("solve: x0 size mismatch");
    SolveResult res;
    res.x = x0;

    // Contract: non-shiftable rows must be strictly interior at x0.
    {
        const Eigen::VectorXd m = prog.margins(x0);
        int idx = 0;
        auto check = [&](const auto& rows) {
            for (const auto& r : rows) {
                if (!r.shiftable && !(m(idx) > 0.0))
                    throw std::invalid_argument(
                        "solve: starting point violates structural row '" +
                        r.tag + "' (margin " + std::to_string(m(idx)) + ")");
                ++idx;
            }
        };
        check(prog.lin_rows());
        check(prog.sqepi_rows());
        check(prog.soc_rows());
        check(prog.qol_rows());
        check(prog.exp_rows());
        check(prog.lse_rows());
        check(prog.tanh_rows());
    }

    Eigen::VectorXd x = x0;
    int total_newton = 0;

    // ---- phase 1: drive the shared slack tau negative ----
    {
        const Eigen::VectorXd m = prog.margins(x0);
        double worst = std::numeric_limits<double>::infinity();
        int idx = 0;
        auto scan = [&](const auto& rows) {
            for (const auto& r : rows) {
                if (r.shiftable) worst = std::min(worst, m(idx));
                ++idx;
            }
        };
        scan(prog.lin_rows());
        scan(prog.sqepi_rows());
        scan(prog.soc_rows());
        scan(prog.qol_rows());
        scan(prog.exp_rows());
        scan(prog.lse_rows());
        scan(prog.tanh_rows());

        if (std::isfinite(worst) && worst <= 1e-9) {
            const Model m1 = build_model(prog, true);
            const Barrier barrier1(m1);
            Eigen::VectorXd xe(m1.dim);
            xe.head(prog.num_vars()) = x;
            xe(m1.tau_col) = std::max(1.0, 2.0 * std::max(0.0, -worst) + 1.0);

            double tw = opts.t0;
            bool feasible = false;
            bool proven = false;
            int stalled1 = 0;
            // A centered iterate with tau < 0 is already strictly interior
            // for every row; keep the deepest one as a fallback entry point
            // in case later stages fail before reaching tau_stop.
            Eigen::VectorXd x1_best;
            bool have_interior = false;
            for (int stage = 0; stage < opts.max_stages; ++stage) {
                auto outcome = center(
                    m1, barrier1, tw, xe, opts.center_tol,
                    opts.max_newton_per_stage, opts.armijo,
                    [&](const Eigen::VectorXd& xc) {
                        return xc(m1.tau_col) < opts.tau_stop;
                    },
                    opts.verbose >= 3 ? opts.verbose - 1 : 0);
                total_newton += outcome.iters;
                if (outcome.trouble) {
                    if (have_interior) break;
                    res.status = SolveStatus::numerical_trouble;
                    res.x = xe.head(prog.num_vars());
                    res.newton_iters = total_newton;
                    return res;
                }
                const double tau = xe(m1.tau_col);
                if (tau < opts.tau_stop) {
                    feasible = true;
                    break;
                }
                if (!(outcome.converged && outcome.lambda2 <= 1.0)) {
                    // An exhausted iteration budget will not recover at a
                    // larger weight; continue once at this one, then stop.
                    if (++stalled1 >= 2) {
                        if (have_interior) break;
                        res.status = SolveStatus::numerical_trouble;
                        res.x = xe.head(prog.num_vars());
                        res.newton_iters = total_newton;
                        return res;
                    }
                    continue;
                }
                stalled1 = 0;
                if (tau < 0.0) {
                    x1_best = xe.head(prog.num_vars());
                    have_interior = true;
                }
                // tau* >= tau - gap1 by duality at a centered point of the
                // phase-1 path, so tau - gap1 > 0 proves the shiftable
                // rows are infeasible. Keep tightening until the reported
                // measure is accurate to ~1e-5 relative before returning.
                const double lam1 = std::sqrt(std::max(outcome.lambda2, 0.0));
                const double gap1 = (m1.nu + lam1 * std::sqrt(m1.nu)) / tw;
                if (tau - gap1 > 0.0) {
                    proven = true;
                    if (gap1 <= 1e-5 * std::abs(tau)) {
                        res.status = SolveStatus::infeasible;
                        res.infeas_measure = tau;
                        res.x = xe.head(prog.num_vars());
                        res.violated_rows = prog.violations(res.x, 1e-9);
                        res.newton_iters = total_newton;
                        return res;
                    }
                }
                tw *= opts.t_mu;
            }
            if (feasible) {
                x = xe.head(prog.num_vars());
            } else if (have_interior) {
                x = x1_best;
            } else {
                res.status = proven ? SolveStatus::infeasible
                                    : SolveStatus::iteration_limit;
                res.x = xe.head(prog.num_vars());
                res.infeas_measure = xe(m1.tau_col);
                res.newton_iters = total_newton;
                return res;
            }
        }
    }

    // ---- phase 2: follow the central path of the true objective ----
    const Model m2 = build_model(prog, false);
    const Barrier barrier2(m2);
    double tw = opts.t0;
    Eigen::VectorXd grad_total;
    double tw_at_grad = tw;
    bool reached = false;
    bool trouble = false;
    int stalled = 0;
    // Last certified iterate: if a later stage fails, return this point
    // with its certified gap instead of discarding the whole solve.
    Eigen::VectorXd x_best;
    double gap_best = std::numeric_limits<double>::infinity();
    const auto never = [](const Eigen::VectorXd&) { return false; };
    res.gap = m2.nu / tw;
    for (int stage = 0; stage < opts.max_stages; ++stage) {
        auto outcome =
            center(m2, barrier2, tw, x, opts.center_tol,
                   opts.max_newton_per_stage, opts.armijo, never,
                   opts.verbose >= 3 ? opts.verbose - 1 : 0);
        total_newton += outcome.iters;
        res.stages = stage + 1;
        if (outcome.trouble) {
            trouble = true;
            break;
        }
        if (outcome.grad_total.size() > 0) {
            grad_total = outcome.grad_total;
            tw_at_grad = tw;
        }
        res.gap = m2.nu / tw;
        double tw_next = tw * opts.t_mu;
        // Only a converged centering step certifies the gap: with Newton
        // decrement lambda < 1 the implied multipliers 1/(t s_i) bound
        // the distance to the optimum by (nu + lambda sqrt(nu)) / t.
        if (outcome.converged && outcome.lambda2 <= 1.0) {
            stalled = 0;
            const double lam = std::sqrt(std::max(outcome.lambda2, 0.0));
            res.gap = (m2.nu + lam * std::sqrt(m2.nu)) / tw;
            x_best = x;
            gap_best = res.gap;
            const double obj = m2.c.dot(x) + prog.objective_constant();
            const double target = opts.tol * std::max(1.0, std::abs(obj));
            if (opts.verbose >= 1)
                std::fprintf(stderr,
                             "  stage %d tw=%.3e iters=%d lambda2=%.3e "
                             "gap=%.3e obj=%.9e\n",
                             stage, tw, outcome.iters, outcome.lambda2,
                             res.gap, obj);
            if (res.gap <= target) {
                reached = true;
                break;
            }
            // Aim the next stage at the smallest weight that can meet the
            // target instead of overshooting by a full factor: the final
            // Newton systems stay as well conditioned as possible.
            const double tw_needed = 1.25 * res.gap * tw / target;
            if (tw_needed > tw && tw_needed < tw_next) tw_next = tw_needed;
        } else {
            // An exhausted iteration budget will not recover at a larger
            // weight; continue once at the same weight, then stop.
            if (opts.verbose >= 1)
                std::fprintf(stderr,
                             "  stage %d tw=%.3e iters=%d lambda2=%.3e "
                             "uncertified (converged=%d)\n",
                             stage, tw, outcome.iters, outcome.lambda2,
                             outcome.converged ? 1 : 0);
            if (++stalled >= 2) {
                trouble = true;
                break;
            }
            tw_next = tw;
        }
        tw = tw_next;
    }

    // Fall back to the last certified iterate when the path ended early.
    if (!reached && x_best.size() == m2.dim) {
        x = x_best;
        res.gap = gap_best;
        trouble = false;
    }

    res.x = x;
    res.objective = m2.c.dot(x) + prog.objective_constant();
    if (grad_total.size() == m2.dim)
        res.dual_residual = grad_total.lpNorm<Eigen::Infinity>() / tw_at_grad;
    else
        res.dual_residual = std::numeric_limits<double>::infinity();
    const Eigen::VectorXd mfin = prog.margins(x);
    res.primal_residual = std::max(0.0, -mfin.minCoeff());
    res.newton_iters = total_newton;

    if (trouble) {
        res.status = SolveStatus::numerical_trouble;
    } else if (reached && res.primal_residual <= opts.tol) {
        res.status = SolveStatus::optimal;
    } else if (reached) {
        res.status = SolveStatus::numerical_trouble;
    } else {
        res.status = SolveStatus::iteration_limit;
    }
    res.violated_rows = prog.violations(x, 1e-9);
    return res;
}

}  // namespace conic
}  // namespace ecofl
