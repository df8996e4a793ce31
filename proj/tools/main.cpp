#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "curvkit/harness.hpp"
#include "curvkit/quadratic.hpp"
#include "curvkit/verify.hpp"

namespace {

struct ProbeOptions {
    std::string checkpoint;
    std::string kind = "traces";
    std::string out = "probe_out";
    std::uint64_t seed = 0;
    int samples = 1000;
    std::string dataset = "blobs";
    std::size_t n = 64, d = 2, k = 2;
    std::uint64_t data_seed = 0;
    std::string idx_images, idx_labels;
    std::size_t index_a = 0, index_b = 1;
    double half_range = 2.0;
    int resolution = 41;
};

void add_probe_flags(CLI::App* cmd, ProbeOptions& p, bool fixed_kind) {
    cmd->add_option("--checkpoint", p.checkpoint, "model checkpoint JSON")->required();
    if (!fixed_kind)
        cmd->add_option("--kind", p.kind, "traces | spectra | scan | ntk")
            ->check(CLI::IsMember({"traces", "spectra", "scan", "ntk"}));
    cmd->add_option("--out", p.out, "output directory");
    cmd->add_option("--seed", p.seed, "estimator seed");
    cmd->add_option("--samples", p.samples, "estimator sample count");
    cmd->add_option("--dataset", p.dataset, "blobs | spirals | teacher_mlp | idx");
    cmd->add_option("--n", p.n, "dataset size");
    cmd->add_option("--d", p.d, "input dimension");
    cmd->add_option("--k", p.k, "classes / outputs");
    cmd->add_option("--data-seed", p.data_seed, "dataset seed");
    cmd->add_option("--idx-images", p.idx_images, "IDX image file");
    cmd->add_option("--idx-labels", p.idx_labels, "IDX label file");
    cmd->add_option("--index-a", p.index_a, "scan: first parameter index");
    cmd->add_option("--index-b", p.index_b, "scan: second parameter index");
    cmd->add_option("--half-range", p.half_range, "scan: half width of the grid");
    cmd->add_option("--resolution", p.resolution, "scan: grid resolution");
}

int run_probe(const ProbeOptions& p) {
    curvkit::Model m = curvkit::load_checkpoint(p.checkpoint);
    curvkit::Dataset ds =
        p.dataset == "idx"
            ? curvkit::load_idx(p.idx_images, p.idx_labels)
            : curvkit::make_synthetic(curvkit::synthetic_kind_from_string(p.dataset), p.n,
                                      p.d, p.k, p.data_seed);
    curvkit::Batch b = curvkit::full_batch(ds);
    curvkit::probe(m, b, p.kind, p.out, p.seed, p.samples, p.index_a, p.index_b,
                   p.half_range, p.resolution);
    std::printf("wrote %s/%s.{csv,json}\n", p.out.c_str(), p.kind.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"curvkit: second-order curvature toolkit for small MLPs"};
    app.require_subcommand(1);

    // train
    std::string train_config;
    std::string train_out;
    std::uint64_t train_seed = 0;
    bool train_seed_set = false, train_out_set = false;
    auto* train_cmd = app.add_subcommand("train", "run a configured training loop");
    train_cmd->add_option("--config", train_config, "run config JSON")->required();
    train_cmd->add_option("--seed", train_seed, "override config seed")
        ->each([&](const std::string&) { train_seed_set = true; });
    train_cmd->add_option("--out", train_out, "override output directory")
        ->each([&](const std::string&) { train_out_set = true; });

    // sweep
    std::string sweep_config, sweep_out = "sweep_out";
    std::vector<double> sweep_rhos = {0.0, 0.01, 0.03, 0.1};
    std::vector<std::string> sweep_acts = {"relu", "gelu"};
    auto* sweep_cmd = app.add_subcommand("sweep", "rho x activation grid of training runs");
    sweep_cmd->add_option("--config", sweep_config, "base run config JSON")->required();
    sweep_cmd->add_option("--rhos", sweep_rhos, "rho grid")->delimiter(',');
    sweep_cmd->add_option("--activations", sweep_acts,
                          "activation kinds (kind or kind:beta)")
        ->delimiter(',');
    sweep_cmd->add_option("--out", sweep_out, "sweep output directory");

    // probe / scan
    ProbeOptions probe_opts, scan_opts;
    auto* probe_cmd = app.add_subcommand("probe", "curvature probes on a checkpoint");
    add_probe_flags(probe_cmd, probe_opts, false);
    scan_opts.kind = "scan";
    scan_opts.out = "scan_out";
    auto* scan_cmd = app.add_subcommand("scan", "two-parameter loss/NME landscape scan");
    add_probe_flags(scan_cmd, scan_opts, true);

    // quadratic
    std::vector<double> q_lambdas = {0.5, 1.0, 2.0};
    std::vector<double> q_theta0;
    double q_alpha = 0.05, q_rho = 0.0;
    int q_steps = 100;
    std::string q_out = "quadratic_out";
    auto* quad_cmd = app.add_subcommand("quadratic", "closed-form quadratic dynamics");
    quad_cmd->add_option("--lambdas", q_lambdas, "Hessian eigenvalues")->delimiter(',');
    quad_cmd->add_option("--theta0", q_theta0, "initial point (default all ones)")
        ->delimiter(',');
    quad_cmd->add_option("--alpha", q_alpha, "learning rate");
    quad_cmd->add_option("--rho", q_rho, "penalty strength");
    quad_cmd->add_option("--steps", q_steps, "step count");
    quad_cmd->add_option("--out", q_out, "output directory");

    // verify
    std::string verify_out = "verify_out";
    auto* verify_cmd = app.add_subcommand("verify", "run the acceptance suite");
    verify_cmd->add_option("--out", verify_out, "scratch directory for artifacts");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            curvkit::RunConfig cfg = curvkit::load_run_config(train_config);
            if (train_seed_set) cfg.seed = train_seed;
            if (train_out_set) cfg.out_dir = train_out;
            curvkit::TrainResult res = curvkit::train(cfg);
            std::printf("train: %d steps, train loss %.6g, test loss %.6g%s\n",
                        res.steps_completed, res.final_train_loss, res.final_test_loss,
                        res.diverged ? " [DIVERGED]" : "");
            return res.diverged ? 1 : 0;
        }
        if (sweep_cmd->parsed()) {
            curvkit::RunConfig base = curvkit::load_run_config(sweep_config);
            std::vector<curvkit::ActivationSpec> acts;
            for (const auto& s : sweep_acts) {
                const auto colon = s.find(':');
                curvkit::ActivationSpec a;
                a.kind = curvkit::activation_kind_from_string(s.substr(0, colon));
                a.beta = colon == std::string::npos ? 1.0 : std::stod(s.substr(colon + 1));
                acts.push_back(a);
            }
            curvkit::sweep(base, sweep_rhos, acts, sweep_out);
            std::printf("wrote %s/sweep_summary.csv\n", sweep_out.c_str());
            return 0;
        }
        if (probe_cmd->parsed()) return run_probe(probe_opts);
        if (scan_cmd->parsed()) return run_probe(scan_opts);
        if (quad_cmd->parsed()) {
            if (q_theta0.empty()) q_theta0.assign(q_lambdas.size(), 1.0);
            curvkit::QuadraticProblem p{q_lambdas, q_theta0, q_alpha, q_rho};
            auto traj = curvkit::evolve(p, q_steps);
            std::filesystem::create_directories(q_out);
            std::ofstream f(q_out + "/trajectory.csv");
            f << std::setprecision(17);
            f << "# curvkit csv schema v1: step,mode,value\n";
            f << "step,mode,value\n";
            for (std::size_t t = 0; t < traj.size(); ++t)
                for (std::size_t i = 0; i < traj[t].size(); ++i)
                    f << t << "," << i << "," << traj[t][i] << "\n";
            std::ofstream g(q_out + "/residuals.csv");
            g << std::setprecision(17);
            g << "# curvkit csv schema v1: lambda,alpha,residual\n";
            g << "lambda,alpha,residual\n";
            for (double l : q_lambdas)
                g << l << "," << q_alpha << ","
                  << curvkit::step_doubling_residual(l, q_alpha) << "\n";
            std::printf("wrote %s/trajectory.csv and %s/residuals.csv\n", q_out.c_str(),
                        q_out.c_str());
            return 0;
        }
        if (verify_cmd->parsed()) {
            auto results = curvkit::run_acceptance(verify_out);
            return curvkit::print_acceptance(results) ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
