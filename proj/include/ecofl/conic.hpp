#pragma once

// Structured convex solver used by the per-iteration subproblems.
//
// A program is a linear objective plus a catalog of convex "rows", each
// of which describes one constraint g_i(x) <= 0 together with a
// self-concordant barrier term. The solver runs a standard two-phase
// log-barrier path-following scheme:
//
//   phase 1: an extra slack variable tau is added to every row marked
//     `shiftable` (g_i(x) <= tau); tau is minimized until it is strictly
//     negative, which certifies a strictly feasible interior point, or
//     until the barrier converges with tau >= 0, which certifies
//     infeasibility of the shiftable rows given the others. Rows not
//     marked shiftable must be strictly satisfied by the caller-supplied
//     starting point (auxiliary/epigraph rows are constructed that way).
//
//   phase 2: the true objective is minimized along the central path with
//     increasing barrier weight t. At an iterate whose Newton decrement
//     lambda is small, the implied multipliers 1/(t s_i) certify a
//     duality gap of at most (nu_total + lambda sqrt(nu_total)) / t,
//     where nu_total is the sum of the barrier parameters of all rows.
//
// Status `optimal` is only reported when that gap certificate, evaluated
// at a converged centering step, and the primal violation are both below
// the requested tolerance (scaled by the problem magnitude). The
// infinity-norm KKT residual || c + sum_i grad F_i(x)/t ||_inf is
// reported as a diagnostic but is not a gate: near an active row the
// barrier gradient moves in steps of ~ulp(x)/s^2, so the residual's
// floating-point floor grows with t and cannot honor a fixed tolerance.
// Anything else is reported honestly as iteration_limit /
// numerical_trouble / infeasible.
//
// Determinism: the solver is straight-line floating-point code with no
// randomness or concurrency; identical inputs give identical iterates.

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace ecofl {
namespace conic {

// One linear expression sum coef_j * x_{col_j} (constant kept separately
// by each row type).
struct Term {
    int col;
    double coef;
};
using LinExpr = std::vector<Term>;

double eval_expr(const LinExpr& e, const Eigen::VectorXd& x);

// g = a'x + b <= 0.                                  barrier nu = 1
struct LinRow {
    LinExpr a;
    double b = 0.0;
    bool shiftable = false;
    std::string tag;
};

// sum_j (r_j'x + off_j)^2 + c0 <= rhs'x + rhs0.      barrier nu = 1
struct SqEpiRow {
    std::vector<LinExpr> rows;
    Eigen::VectorXd off;
    double c0 = 0.0;
    LinExpr rhs;
    double rhs0 = 0.0;
    bool shiftable = false;
    std::string tag;
};

// || A x + b ||_2 <= t'x + t0.                       barrier nu = 2
struct SocRow {
    std::vector<LinExpr> rows;
    Eigen::VectorXd off;
    LinExpr t;
    double t0 = 0.0;
    bool shiftable = false;
    std::string tag;
};

// (num'x + num0)^2 <= (y1'x + y10)(y2'x + y20),
// with both factors positive.                        barrier nu = 2
struct QolRow {
    LinExpr num;
    double num0 = 0.0;
    LinExpr y1;
    double y10 = 0.0;
    LinExpr y2;
    double y20 = 0.0;
    bool shiftable = false;
    std::string tag;
};

// exp(u'x + u0) <= w'x + w0.                         barrier nu = 2
struct ExpRow {
    LinExpr u;
    double u0 = 0.0;
    LinExpr w;
    double w0 = 0.0;
    bool shiftable = false;
    std::string tag;
};

// ln( sum_i exp(a_i'x + a0_i) + extra ) <= rhs'x + rhs0, extra >= 0.
//                                                    barrier nu = 1
struct LseRow {
    std::vector<LinExpr> args;
    Eigen::VectorXd arg0;
    double extra = 0.0;
    LinExpr rhs;
    double rhs0 = 0.0;
    bool shiftable = false;
    std::string tag;
};

// sum_i tanh(a_i'x + a0_i) >= floor, arguments kept nonnegative by
// accompanying bound rows (the row is concave there). barrier nu = 1
struct TanhRow {
    std::vector<LinExpr> args;
    Eigen::VectorXd arg0;
    double floor = 0.0;
    bool shiftable = false;
    std::string tag;
};

struct VarBlock {
    std::string name;
    int offset = 0;
    int size = 0;
};

class ConicProgram {
  public:
    int add_block(const std::string& name, int size);
    int num_vars() const { return num_vars_; }
    const std::vector<VarBlock>& blocks() const { return blocks_; }
    const VarBlock& block(const std::string& name) const;

    void add_objective(int col, double coef);
    void add_objective_constant(double c) { obj0_ += c; }
    double objective_constant() const { return obj0_; }
    Eigen::VectorXd objective_vector() const;

    void add(LinRow r) { lin_.push_back(std::move(r)); }
    void add(SqEpiRow r) { sqepi_.push_back(std::move(r)); }
    void add(SocRow r) { soc_.push_back(std::move(r)); }
    void add(QolRow r) { qol_.push_back(std::move(r)); }
    void add(ExpRow r) { exp_.push_back(std::move(r)); }
    void add(LseRow r) { lse_.push_back(std::move(r)); }
    void add(TanhRow r) { tanh_.push_back(std::move(r)); }

    const std::vector<LinRow>& lin_rows() const { return lin_; }
    const std::vector<SqEpiRow>& sqepi_rows() const { return sqepi_; }
    const std::vector<SocRow>& soc_rows() const { return soc_; }
    const std::vector<QolRow>& qol_rows() const { return qol_; }
    const std::vector<ExpRow>& exp_rows() const { return exp_; }
    const std::vector<LseRow>& lse_rows() const { return lse_; }
    const std::vector<TanhRow>& tanh_rows() const { return tanh_; }

    int num_rows() const;
    double barrier_nu() const;

    // Slack (margin to the boundary) of every row at x, in row-catalog
    // order lin, sqepi, soc, qol, exp, lse, tanh. Positive = strictly
    // inside. For rows with multi-part domains the reported slack is the
    // innermost (most binding) part.
    Eigen::VectorXd margins(const Eigen::VectorXd& x) const;
    // max_i (violation of row i) with names, using natural row scaling.
    std::vector<std::pair<std::string, double>> violations(
        const Eigen::VectorXd& x, double tol) const;

    // Plain-text dump: blocks, objective and one line per row.
    void dump(std::ostream& os) const;

  private:
    int num_vars_ = 0;
    std::vector<VarBlock> blocks_;
    std::vector<std::pair<int, double>> obj_;
    double obj0_ = 0.0;
    std::vector<LinRow> lin_;
    std::vector<SqEpiRow> sqepi_;
    std::vector<SocRow> soc_;
    std::vector<QolRow> qol_;
    std::vector<ExpRow> exp_;
    std::vector<LseRow> lse_;
    std::vector<TanhRow> tanh_;
};

// iteration_limit means the requested tolerance was not certified before
// the stage budget ran out (or a late stage stalled numerically); x then
// holds the last centrally-certified iterate and gap its certified bound,
// so the point is still a valid feasible near-optimum.
enum class SolveStatus {
    optimal,
    infeasible,
    iteration_limit,
    numerical_trouble
};

const char* to_string(SolveStatus s);

struct SolveOptions {
    double tol = 1e-8;          // gap / dual / primal target (relative)
    double t0 = 1.0;            // initial barrier weight
    double t_mu = 10.0;         // barrier weight multiplier per stage
    int max_newton_per_stage = 120;
    int max_stages = 40;
    double armijo = 0.3;
    double center_tol = 1e-10;  // lambda^2/2 threshold for centering
    double tau_stop = -1e-4;    // phase-1 early exit once tau below this
    int verbose = 0;
};

struct SolveResult {
    SolveStatus status = SolveStatus::numerical_trouble;
    Eigen::VectorXd x;
    double objective = 0.0;      // c'x + const at the final iterate
    double gap = 0.0;            // certified duality gap at the exit iterate
    double dual_residual = 0.0;  // ||c + sum grad F_i / t||_inf (diagnostic)
    double primal_residual = 0.0;
    double infeas_measure = 0.0;  // phase-1 tau* when infeasible
    std::vector<std::pair<std::string, double>> violated_rows;
    int newton_iters = 0;
    int stages = 0;
};

// x0 must strictly satisfy every row that is not marked shiftable.
SolveResult solve(const ConicProgram& prog, const Eigen::VectorXd& x0,
                  const SolveOptions& opts);

}  // namespace conic
}  // namespace ecofl
