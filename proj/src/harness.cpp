#include "ecofl/harness.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ecofl/flsim.hpp"

namespace ecofl {
namespace harness {

namespace {

std::ofstream open_csv(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << std::setprecision(17);
    return os;
}

std::string seed_suffix(std::uint64_t seed) {
    return "_seed" + std::to_string(seed);
}

eco::SCAOptions sca_options(const Options& opts) {
    eco::SCAOptions s;
    s.max_iters = opts.sca_max_iters;
    s.solver_tol = opts.solver_tol;
    s.verbose = opts.verbose;
    return s;
}

ScenarioConfig load_or_default(const Options& opts) {
    if (opts.config_path.empty()) return default_config();
    return load_config(opts.config_path);
}

// Runs `tasks` on a small pool; every task writes only its own slot, so
// scheduling cannot change any result, only completion order.
void run_pool(std::vector<std::function<void()>>& tasks, int jobs) {
    if (jobs <= 1 || tasks.size() <= 1) {
        for (auto& t : tasks) t();
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            tasks[i]();
        }
    };
    const int n = std::min<int>(jobs, static_cast<int>(tasks.size()));
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

void write_standard_artifacts(const std::string& dir,
                              const eco::RunReport& rep) {
    const std::string tag = seed_suffix(rep.seed);
    write_trajectory_csv(dir + "/trajectory" + tag + ".csv", rep);
    write_participation_csv(dir + "/participation" + tag + ".csv", rep);
    write_iteration_trace_csv(dir + "/iterations" + tag + ".csv", rep);
    write_energy_breakdown_csv(dir + "/energy" + tag + ".csv", rep);
}

int run_single_method(const Options& opts,
                      const std::function<eco::RunReport(
                          const ScenarioConfig&, std::uint64_t)>& fn) {
    const ScenarioConfig cfg = load_or_default(opts);
    std::vector<eco::RunReport> reports(opts.seeds.size());
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < opts.seeds.size(); ++i)
        tasks.push_back(
            [&, i]() { reports[i] = fn(cfg, opts.seeds[i]); });
    run_pool(tasks, opts.jobs);
    bool all_feasible = true;
    for (const auto& rep : reports) {
        write_standard_artifacts(opts.out_dir, rep);
        all_feasible = all_feasible && rep.feasible;
        if (opts.verbose > 0)
            std::cout << rep.method << " seed " << rep.seed << ": "
                      << (rep.feasible ? "feasible" : "infeasible") << ", "
                      << rep.energy.total_j << " J (" << rep.detail << ")\n";
    }
    write_run_report_csv(opts.out_dir + "/run_report.csv", reports);
    return all_feasible ? 0 : 3;
}

int run_bound_validation(const Options& opts) {
    const ScenarioConfig cfg = load_or_default(opts);
    const int ues = cfg.num_ues();
    const int rounds = cfg.num_rounds();
    std::ofstream summary = open_csv(opts.out_dir + "/bound_summary.csv");
    summary << "seed,updates,fraction_under_bound,final_gap,final_bound\n";
    for (const std::uint64_t seed : opts.seeds) {
        flsim::SyntheticTask task = flsim::make_synthetic_task(
            ues, 16, seed, cfg.fl.mu, cfg.fl.smoothness, 1.0, 0.05);
        flbound::ParticipationPlan plan;
        plan.a = Eigen::MatrixXi::Ones(ues, rounds);
        plan.data_bits = Eigen::MatrixXd::Constant(
            ues, rounds, std::max(cfg.data_floor_bits / rounds, 1.0));
        const FLHyperparams fl = flsim::estimate_constants(
            task, plan, cfg.local_iters, 8, seed, 1.1);
        const flsim::SimResult sim = flsim::run_federated_sgd(
            task, plan, fl, cfg.local_iters, 32, seed);
        write_gap_vs_bound_csv(
            opts.out_dir + "/gap_vs_bound" + seed_suffix(seed) + ".csv",
            sim.mean_gap, sim.bound, cfg.local_iters);
        int under = 0;
        const int updates = static_cast<int>(sim.bound.size()) - 1;
        for (int i = 1; i <= updates; ++i)
            if (sim.mean_gap(i) <= sim.bound(i)) ++under;
        summary << seed << "," << updates << ","
                << static_cast<double>(under) / updates << ","
                << sim.mean_gap(updates) << "," << sim.bound(updates)
                << "\n";
    }
    return 0;
}

int run_q_sweep(const Options& opts) {
    const ScenarioConfig base = load_or_default(opts);
    std::vector<double> qs = opts.sweep_model_bits;
    if (qs.empty()) qs = {1.42496e6, 2.81557e6, 5.50014e6, 1.05133e7};
    const std::uint64_t seed = opts.seeds.empty() ? 1 : opts.seeds.front();
    const eco::SCAOptions sopts = sca_options(opts);

    struct Cell {
        double q_bits;
        std::string method;
        eco::RunReport rep;
    };
    std::vector<Cell> cells;
    for (const double q : qs)
        for (const char* m : {"eco", "baseline:fixed", "baseline:random"})
            cells.push_back({q, m, {}});
    std::vector<std::function<void()>> tasks;
    for (auto& cell : cells)
        tasks.push_back([&base, &cell, seed, sopts]() {
            ScenarioConfig cfg = base;
            cfg.model_bits = cell.q_bits;
            if (cell.method == "eco")
                cell.rep = eco::run_eco(cfg, seed, sopts);
            else if (cell.method == "baseline:fixed")
                cell.rep = eco::baseline_participation(
                    cfg, eco::ParticipationScheme::fixed_scheme, seed, sopts);
            else
                cell.rep = eco::baseline_participation(
                    cfg, eco::ParticipationScheme::random_scheme, seed,
                    sopts);
        });
    run_pool(tasks, opts.jobs);

    std::ofstream os = open_csv(opts.out_dir + "/q_sweep.csv");
    os << "model_bits,method,seed,feasible,total_energy_j,accuracy_lhs,"
          "detail\n";
    bool all_feasible = true;
    for (const auto& cell : cells) {
        all_feasible = all_feasible && cell.rep.feasible;
        os << cell.q_bits << "," << csv_escape(cell.method) << ","
           << cell.rep.seed << "," << (cell.rep.feasible ? 1 : 0) << ","
           << cell.rep.energy.total_j << "," << cell.rep.audit.accuracy_lhs
           << "," << csv_escape(cell.rep.detail) << "\n";
    }
    return all_feasible ? 0 : 3;
}

}  // namespace

std::vector<std::string> known_experiments() {
    return {"eco",
            "baseline:random",
            "baseline:fixed",
            "trajectory:CUR",
            "trajectory:STR",
            "trajectory:MID",
            "trajectory:ASY",
            "bound-validation",
            "q-sweep"};
}

int run_experiment(const Options& opts) {
    std::filesystem::create_directories(opts.out_dir);
    const eco::SCAOptions sopts = sca_options(opts);
    const std::string& exp = opts.experiment;
    if (exp == "eco")
        return run_single_method(
            opts, [&](const ScenarioConfig& cfg, std::uint64_t seed) {
                return eco::run_eco(cfg, seed, sopts);
            });
    if (exp == "baseline:random" || exp == "baseline:fixed") {
        const auto scheme = exp == "baseline:random"
                                ? eco::ParticipationScheme::random_scheme
                                : eco::ParticipationScheme::fixed_scheme;
        return run_single_method(
            opts, [&](const ScenarioConfig& cfg, std::uint64_t seed) {
                return eco::baseline_participation(cfg, scheme, seed, sopts);
            });
    }
    if (exp.rfind("trajectory:", 0) == 0) {
        const eco::TrajectoryShape shape =
            eco::trajectory_shape_from_string(exp.substr(11));
        return run_single_method(
            opts, [&](const ScenarioConfig& cfg, std::uint64_t seed) {
                return eco::run_heuristic_trajectory(cfg, shape, seed, sopts);
            });
    }
    if (exp == "bound-validation") return run_bound_validation(opts);
    if (exp == "q-sweep") return run_q_sweep(opts);
    throw std::invalid_argument("unknown experiment: " + exp);
}

void write_run_report_csv(const std::string& path,
                          const std::vector<eco::RunReport>& reports) {
    std::ofstream os = open_csv(path);
    os << "method,seed,feasible,total_energy_j,fly_j,hover_j,broadcast_j,"
          "ue_compute_j,ue_uplink_j,accuracy_lhs,accuracy_budget,"
          "max_violation,phase1_iters,phase2_iters,wall_s,detail\n";
    for (const auto& r : reports) {
        os << csv_escape(r.method) << "," << r.seed << ","
           << (r.feasible ? 1 : 0) << "," << r.energy.total_j << ","
           << r.energy.fly_j << "," << r.energy.hover_j << ","
           << r.energy.broadcast_j << "," << r.energy.compute_j << ","
           << r.energy.uplink_j << "," << r.audit.accuracy_lhs << ","
           << r.audit.accuracy_budget << ","
           << r.audit.report.max_violation << "," << r.phase1_trace.size()
           << "," << r.phase2_trace.size() << "," << r.wall_s << ","
           << csv_escape(r.detail) << "\n";
    }
}

void write_energy_breakdown_csv(const std::string& path,
                                const eco::RunReport& report) {
    std::ofstream os = open_csv(path);
    os << "component,energy_j\n";
    os << "fly," << report.energy.fly_j << "\n";
    os << "hover," << report.energy.hover_j << "\n";
    os << "broadcast," << report.energy.broadcast_j << "\n";
    os << "ue_compute," << report.energy.compute_j << "\n";
    os << "ue_uplink," << report.energy.uplink_j << "\n";
    os << "total," << report.energy.total_j << "\n";
}

void write_trajectory_csv(const std::string& path,
                          const eco::RunReport& report) {
    std::ofstream os = open_csv(path);
    os << "slot,x_m,y_m,hover_s\n";
    const auto& st = report.state;
    for (int n = 0; n < st.q.rows(); ++n) {
        const int r = n - 1;
        const double hover =
            (r >= 0 && r < st.hover_s.size()) ? st.hover_s(r) : 0.0;
        os << n << "," << st.q(n, 0) << "," << st.q(n, 1) << "," << hover
           << "\n";
    }
}

void write_participation_csv(const std::string& path,
                             const eco::RunReport& report) {
    std::ofstream os = open_csv(path);
    os << "round,ue,participates,data_bits,ue_power_w\n";
    const auto& st = report.state;
    for (int r = 0; r < st.a.cols(); ++r)
        for (int k = 0; k < st.a.rows(); ++k)
            os << r << "," << k << "," << st.a(k, r) << ","
               << st.data_bits(k, r) << "," << st.ue_power_w(k, r) << "\n";
}

void write_iteration_trace_csv(const std::string& path,
                               const eco::RunReport& report) {
    std::ofstream os = open_csv(path);
    os << "phase,iter,objective_j,solver_gap,step_norm,status\n";
    for (const auto& it : report.phase1_trace)
        os << 1 << "," << it.iter << "," << it.objective_j << ","
           << it.solver_gap << "," << it.step_norm << ","
           << csv_escape(it.status) << "\n";
    for (const auto& it : report.phase2_trace)
        os << 2 << "," << it.iter << "," << it.objective_j << ","
           << it.solver_gap << "," << it.step_norm << ","
           << csv_escape(it.status) << "\n";
}

void write_gap_vs_bound_csv(const std::string& path,
                            const Eigen::VectorXd& mean_gap,
                            const Eigen::VectorXd& bound, int local_iters) {
    std::ofstream os = open_csv(path);
    os << "update,round,mean_gap,bound\n";
    for (int i = 0; i < mean_gap.size(); ++i)
        os << i << "," << (i > 0 ? (i - 1) / local_iters : 0) << ","
           << mean_gap(i) << "," << (i < bound.size() ? bound(i) : 0.0)
           << "\n";
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (const char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    char c;
    while (is.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (is.peek() == '"') {
                    is.get(c);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else if (c != '\r') {
            field += c;
        }
    }
    if (any) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace harness
}  // namespace ecofl
