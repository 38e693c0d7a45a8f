// Command-line front end: adaptive runs, uniform convergence tables,
// estimator studies, and the standalone Darcy solve.
//
// Exit codes: 0 ok, 2 configuration error, 3 solver failure, 4 I/O error.

#include "adr/adaptivity.hpp"
#include "adr/io.hpp"
#include "adr/problems.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace adr;

namespace {

struct RunConfig {
    std::string problem = "ex1";
    double eps = -1.0; // override for ex1's diffusion when >= 0
    double mu = 0.1;   // ex4 viscosity
    int degree = 2;
    double ttol = 1e-3;
    double stol_plus = 3e-4;
    double stol_minus = 3e-7;
    double tau0 = 0.25;
    double tfinal = -1.0; // problem default when < 0
    int nx = 2, ny = 2;
    bool prepare = true;
    bool uniform = false;
    int vtk_every = 0; // 0 = final only
    int levels = 3;    // converge mode
    double fixed_tau = 0.005; // estimate mode
    std::string out = "out";
    std::string newton_log;
};

ProblemSpec make_problem(const RunConfig& cfg) {
    if (cfg.problem == "ex1")
        return cfg.eps >= 0.0 ? example1(cfg.eps) : example1();
    if (cfg.problem == "ex2") return example2();
    if (cfg.problem == "ex3") return example3();
    if (cfg.problem == "ex4") {
        Example4Options opts;
        opts.mu = cfg.mu;
        return example4(opts);
    }
    throw CLI::ValidationError("--problem", "unknown problem " + cfg.problem);
}

fs::path output_dir(const RunConfig& cfg) {
    fs::path root = cfg.out;
    if (const char* env = std::getenv("ADR_OUT_ROOT"))
        root = fs::path(env) / cfg.out;
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw std::ios_base::failure("cannot create " + root.string());
    return root;
}

void write_solution_vtk(const fs::path& path, const std::vector<DGFunction>& u,
                        const StepEstimate* est) {
    std::ofstream os(path);
    if (!os) throw std::ios_base::failure("cannot write " + path.string());
    const Mesh& mesh = u[0].space().mesh();
    std::vector<std::pair<std::string, Eigen::VectorXd>> cell, point;
    for (size_t c = 0; c < u.size(); ++c) {
        std::string suffix = u.size() > 1 ? "_" + std::to_string(c + 1) : "";
        cell.emplace_back("u" + suffix, cell_values(u[c]));
        point.emplace_back("u" + suffix, vertex_averages(u[c]));
        if (est) {
            // Per-element eta_{S1,k}^2 aggregated onto the solution mesh.
            cell.emplace_back("eta_S1_sq" + suffix,
                              est->s1_on_current(static_cast<int>(c), mesh));
        }
    }
    write_vtk(mesh, os, cell, point);
}

int cmd_run(const RunConfig& cfg) {
    ProblemSpec prob = make_problem(cfg);
    double T = cfg.tfinal > 0 ? cfg.tfinal : prob.final_time;
    Tolerances tol{cfg.ttol, cfg.stol_plus, cfg.stol_minus};
    if (cfg.uniform) tol = Tolerances::none();
    tol.validate();

    fs::path dir = output_dir(cfg);
    MeshPtr mesh = build_structured(prob.domain, cfg.nx, cfg.ny, prob.boundary);
    double tau = cfg.tau0;
    if (cfg.prepare && !cfg.uniform) {
        PrepareResult prep = prepare_initial_mesh(prob, tol, mesh, tau, cfg.degree);
        if (!prep.converged)
            std::cerr << "note: initial-mesh preparation hit its cap after "
                      << prep.iterations << " rounds\n";
        mesh = prep.mesh;
        tau = prep.tau;
    }

    std::ofstream trace_file(dir / "trace.csv");
    if (!trace_file) throw std::ios_base::failure("cannot write trace.csv");
    TraceWriter writer(trace_file, prob.n_components);
    std::ofstream newton_file;
    AdaptiveCallbacks cb;
    cb.on_step = [&](const TraceRow& row) { writer.write_row(row); };
    if (!cfg.newton_log.empty()) {
        newton_file.open(dir / cfg.newton_log);
        if (!newton_file) throw std::ios_base::failure("cannot write newton log");
        newton_file << "step,iter,residual_norm,damping_halvings\n";
        cb.newton_log = &newton_file;
    }
    cb.on_solution = [&](const TraceRow& row, const std::vector<DGFunction>& u,
                         const StepEstimate& est) {
        bool last = row.t >= T * (1 - 1e-12);
        if (cfg.vtk_every > 0 && (row.step % cfg.vtk_every == 0 || last)) {
            write_solution_vtk(
                dir / ("solution_" + std::to_string(row.step) + ".vtk"), u, &est);
        }
    };

    AdaptiveResult res = adaptive_run(prob, tol, mesh, tau, T, cfg.degree, cb);
    writer.write_summary(res.trace);
    write_solution_vtk(dir / "solution_final.vtk", res.u_final, nullptr);
    {
        std::ofstream ms(dir / "mesh_final.txt");
        save_mesh(*res.final_mesh, ms);
    }

    if (res.aborted) {
        std::cerr << "solver failure: " << res.abort_reason << "\n";
        return 3;
    }
    std::cout << "steps=" << res.trace.rows.size() - 1
              << " weighted_dofs=" << csv_number(weighted_dofs(res.trace));
    if (res.trace.has_error)
        std::cout << " err_star=" << csv_number(res.trace.error.norm());
    std::cout << "\n";
    return 0;
}

int cmd_converge(const RunConfig& cfg) {
    ProblemSpec prob = make_problem(cfg);
    if (!prob.has_exact)
        throw CLI::ValidationError("--problem", "converge needs an exact solution");
    double T = cfg.tfinal > 0 ? cfg.tfinal : prob.final_time;
    fs::path dir = output_dir(cfg);
    std::ofstream table(dir / "convergence.csv");
    if (!table) throw std::ios_base::failure("cannot write convergence.csv");
    table << "level,h,tau,dofs,err_star,err_final_l2,eta_S,eta_T,runtime_s\n";

    std::vector<double> errs, etas;
    MeshPtr mesh = build_structured(prob.domain, cfg.nx, cfg.ny, prob.boundary);
    double tau = cfg.tau0;
    for (int level = 0; level < cfg.levels; ++level) {
        auto t0 = std::chrono::steady_clock::now();
        AdaptiveResult res = adaptive_run(prob, Tolerances::none(), mesh, tau, T,
                                          cfg.degree);
        if (res.aborted) {
            std::cerr << "solver failure: " << res.abort_reason << "\n";
            return 3;
        }
        double runtime =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        double h = 0.0;
        for (int t : mesh->leaves) h = std::max(h, mesh->diameter(t));
        double err = res.trace.error.norm();
        double eta_s = std::sqrt(res.trace.run[0].eta_S_sq());
        double eta_t = std::sqrt(res.trace.run[0].eta_T_sq());
        errs.push_back(err);
        etas.push_back(eta_s);
        table << level << "," << csv_number(h) << "," << csv_number(tau) << ","
              << res.u_final[0].space().dof() * prob.n_components << ","
              << csv_number(err) << ","
              << csv_number(res.trace.error.final_l2) << ","
              << csv_number(eta_s) << "," << csv_number(eta_t) << ","
              << csv_number(runtime) << "\n";
        table.flush();
        mesh = uniform_refine(*mesh, 2); // halves h
        tau *= 0.5;
    }
    for (size_t i = 1; i < errs.size(); ++i)
        std::cout << "rate level " << i << ": err "
                  << csv_number(std::log2(errs[i - 1] / errs[i])) << " estimator "
                  << csv_number(std::log2(etas[i - 1] / etas[i])) << "\n";
    return 0;
}

int cmd_estimate(const RunConfig& cfg) {
    ProblemSpec prob = make_problem(cfg);
    if (!prob.has_exact)
        throw CLI::ValidationError("--problem", "estimate needs an exact solution");
    double T = cfg.tfinal > 0 ? cfg.tfinal : prob.final_time;
    // Fixed time step: spatial adaptivity only.
    Tolerances tol{std::numeric_limits<double>::infinity(), cfg.stol_plus,
                   cfg.stol_minus};
    tol.validate();
    fs::path dir = output_dir(cfg);
    MeshPtr mesh = build_structured(prob.domain, cfg.nx, cfg.ny, prob.boundary);

    std::ofstream trace_file(dir / "trace.csv");
    if (!trace_file) throw std::ios_base::failure("cannot write trace.csv");
    TraceWriter writer(trace_file, prob.n_components);
    AdaptiveCallbacks cb;
    cb.on_step = [&](const TraceRow& row) { writer.write_row(row); };

    AdaptiveResult res =
        adaptive_run(prob, tol, mesh, cfg.fixed_tau, T, cfg.degree, cb);
    writer.write_summary(res.trace);
    if (res.aborted) {
        std::cerr << "solver failure: " << res.abort_reason << "\n";
        return 3;
    }
    double err = res.trace.error.norm();
    double eta_s = std::sqrt(res.trace.run[0].eta_S_sq());
    std::cout << "stol_plus=" << csv_number(cfg.stol_plus)
              << " eta_S=" << csv_number(eta_s) << " err_star=" << csv_number(err)
              << " effectivity=" << csv_number(effectivity(eta_s, err))
              << " weighted_dofs=" << csv_number(weighted_dofs(res.trace)) << "\n";
    return 0;
}

int cmd_darcy(const RunConfig& cfg) {
    Example4Options opts;
    opts.mu = cfg.mu;
    opts.darcy_nx = cfg.nx > 2 ? cfg.nx : 30;
    opts.darcy_ny = cfg.ny > 2 ? cfg.ny : 20;
    DarcyResult res = example4_darcy(opts);
    fs::path dir = output_dir(cfg);
    std::ofstream os(dir / "darcy.vtk");
    if (!os) throw std::ios_base::failure("cannot write darcy.vtk");
    const Mesh& mesh = res.pressure.space().mesh();
    Eigen::VectorXd speed(mesh.leaf_count());
    Eigen::VectorXd vx(mesh.leaf_count()), vy(mesh.leaf_count());
    for (int li = 0; li < mesh.leaf_count(); ++li) {
        Vec2 v = res.velocity(mesh.centroid(mesh.leaves[li]));
        speed[li] = v.norm();
        vx[li] = v.x();
        vy[li] = v.y();
    }
    write_vtk(mesh, os,
              {{"pressure", cell_values(res.pressure)},
               {"speed", speed},
               {"velocity_x", vx},
               {"velocity_y", vy}},
              {{"pressure", vertex_averages(res.pressure)}});
    std::cout << "pressure range: [" << csv_number(cell_values(res.pressure).minCoeff())
              << ", " << csv_number(cell_values(res.pressure).maxCoeff()) << "]\n";
    return 0;
}

void add_common(CLI::App* app, RunConfig& cfg) {
    app->add_option("--problem", cfg.problem, "ex1 | ex2 | ex3 | ex4");
    app->add_option("--eps", cfg.eps, "diffusion override (ex1)");
    app->add_option("--mu", cfg.mu, "fluid viscosity (ex4)");
    app->add_option("--degree", cfg.degree, "polynomial degree k >= 1");
    app->add_option("--nx", cfg.nx, "initial grid cells in x");
    app->add_option("--ny", cfg.ny, "initial grid cells in y");
    app->add_option("--tau0", cfg.tau0, "initial time step");
    app->add_option("--tfinal", cfg.tfinal, "final time (problem default)");
    app->add_option("--out", cfg.out, "output directory");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive SIPG solver for semi-linear "
                 "advection-diffusion-reaction systems"};
    app.set_config("--config", "", "key = value configuration file");
    app.require_subcommand(1);
    RunConfig cfg;

    CLI::App* run = app.add_subcommand("run", "time-space adaptive run");
    add_common(run, cfg);
    run->add_option("--ttol", cfg.ttol, "temporal tolerance");
    run->add_option("--stol-plus", cfg.stol_plus, "spatial refinement tolerance");
    run->add_option("--stol-minus", cfg.stol_minus, "spatial coarsening tolerance");
    run->add_flag("--uniform{true},--adaptive{false}", cfg.uniform,
                  "disable adaptivity");
    run->add_flag("--prepare,!--no-prepare", cfg.prepare,
                  "iterate the initial mesh before the run");
    run->add_option("--vtk-every", cfg.vtk_every, "solution VTK cadence");
    run->add_option("--newton-log", cfg.newton_log, "newton iteration CSV");

    CLI::App* conv = app.add_subcommand("converge", "uniform refinement table");
    add_common(conv, cfg);
    conv->add_option("--levels", cfg.levels, "refinement levels");

    CLI::App* est = app.add_subcommand("estimate",
                                       "fixed-step spatial estimator study");
    add_common(est, cfg);
    est->add_option("--stol-plus", cfg.stol_plus, "spatial refinement tolerance");
    est->add_option("--stol-minus", cfg.stol_minus, "spatial coarsening tolerance");
    est->add_option("--tau", cfg.fixed_tau, "fixed time step");

    CLI::App* darcy = app.add_subcommand("darcy", "pressure/velocity solve only");
    add_common(darcy, cfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(cfg);
        if (conv->parsed()) return cmd_converge(cfg);
        if (est->parsed()) return cmd_estimate(cfg);
        if (darcy->parsed()) return cmd_darcy(cfg);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
