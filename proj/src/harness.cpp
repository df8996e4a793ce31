#include "curvkit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <thread>

#include "curvkit/rng.hpp"
#include "json.hpp"

namespace curvkit {

namespace {

nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["widths"] = c.widths;
    j["activation"] = {{"kind", to_string(c.activation.kind)}, {"beta", c.activation.beta}};
    j["bias"] = c.bias;
    j["final_activation"] = c.final_activation;
    j["dataset"] = c.dataset;
    j["n"] = c.n;
    j["d"] = c.d;
    j["k"] = c.k;
    j["idx_images"] = c.idx_images;
    j["idx_labels"] = c.idx_labels;
    j["loss"] = to_string(c.loss);
    j["regularizer"] = {{"kind", to_string(c.reg.kind)},
                        {"rho", c.reg.rho},
                        {"sigma2", c.reg.sigma2},
                        {"n_estimator_samples", c.reg.n_estimator_samples},
                        {"grad_norm_epsilon", c.reg.grad_norm_epsilon},
                        {"straight_through", c.reg.straight_through}};
    j["lr"] = c.lr;
    j["schedule"] = c.schedule == LrSchedule::Cosine ? "cosine" : "constant";
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    c.widths = j.value("widths", std::vector<std::size_t>{});
    if (j.contains("activation")) {
        c.activation.kind =
            activation_kind_from_string(j["activation"].value("kind", "gelu"));
        c.activation.beta = j["activation"].value("beta", 1.0);
    }
    c.bias = j.value("bias", false);
    c.final_activation = j.value("final_activation", false);
    c.dataset = j.value("dataset", "blobs");
    c.n = j.value("n", std::size_t{512});
    c.d = j.value("d", std::size_t{2});
    c.k = j.value("k", std::size_t{2});
    c.idx_images = j.value("idx_images", "");
    c.idx_labels = j.value("idx_labels", "");
    c.loss = loss_kind_from_string(j.value("loss", "cross_entropy"));
    if (j.contains("regularizer")) {
        const auto& r = j["regularizer"];
        c.reg.kind = reg_kind_from_string(r.value("kind", "none"));
        c.reg.rho = r.value("rho", 0.0);
        c.reg.sigma2 = r.value("sigma2", 0.0);
        c.reg.n_estimator_samples = r.value("n_estimator_samples", 1);
        c.reg.grad_norm_epsilon = r.value("grad_norm_epsilon", 1e-12);
        c.reg.straight_through = r.value("straight_through", false);
    }
    c.lr = j.value("lr", 0.05);
    c.schedule = j.value("schedule", "constant") == std::string("cosine")
                     ? LrSchedule::Cosine
                     : LrSchedule::Constant;
    c.epochs = j.value("epochs", 10);
    c.batch_size = j.value("batch_size", std::size_t{32});
    if (!j.contains("seed"))
        throw std::runtime_error("run config: seed is mandatory");
    c.seed = j["seed"].get<std::uint64_t>();
    c.out_dir = j.value("out_dir", "run");
    return c;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write: " + path);
    f << std::setprecision(17);
    return f;
}

Dataset dataset_from_config(const RunConfig& c) {
    if (c.dataset == "idx") return load_idx(c.idx_images, c.idx_labels);
    Dataset ds = make_synthetic(synthetic_kind_from_string(c.dataset), c.n, c.d, c.k, c.seed);
    if (ds.loss != c.loss)
        throw std::runtime_error("run config: loss '" + to_string(c.loss) +
                                 "' does not match dataset '" + c.dataset + "'");
    return ds;
}

std::vector<std::size_t> default_widths(const RunConfig& c, const Dataset& ds) {
    if (!c.widths.empty()) return c.widths;
    if (c.dataset == "idx") return {ds.input_dim(), 256, 256, ds.target_dim()};
    return {ds.input_dim(), 64, 64, ds.target_dim()};
}

struct Metrics {
    double loss = 0.0;
    double accuracy = 0.0;
};

Metrics evaluate(const Model& m, const Dataset& ds, const std::vector<std::size_t>& idx) {
    Metrics out;
    if (idx.empty()) return out;
    Batch b = make_batch(ds, idx);
    Tensor Z = model_forward(m, b.inputs).z;
    const std::size_t k = Z.rows(), B = Z.cols();
    std::size_t correct = 0;
    for (std::size_t c = 0; c < B; ++c) {
        Tensor zc({k});
        for (std::size_t i = 0; i < k; ++i) zc.data[i] = Z.at(i, c);
        if (b.loss == LossKind::Mse) {
            Tensor yc({k});
            for (std::size_t i = 0; i < k; ++i) yc.data[i] = b.targets.at(i, c);
            out.loss += loss_eval(LossKind::Mse, zc, yc).loss;
        } else {
            out.loss += loss_eval(LossKind::CrossEntropy, zc, b.labels[c]).loss;
            std::size_t arg = 0;
            for (std::size_t i = 1; i < k; ++i)
                if (zc.data[i] > zc.data[arg]) arg = i;
            if (static_cast<int>(arg) == b.labels[c]) ++correct;
        }
    }
    out.loss /= static_cast<double>(B);
    out.accuracy = b.loss == LossKind::Mse ? 0.0 : static_cast<double>(correct) / B;
    return out;
}

std::uint64_t step_seed(std::uint64_t run_seed, int step) {
    return run_seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(step + 1));
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read run config: " + path);
    nlohmann::json j;
    f >> j;
    return config_from_json(j);
}

void save_run_config(const RunConfig& c, const std::string& path) {
    auto f = open_out(path);
    f << config_to_json(c).dump(2) << "\n";
}

std::string config_hash(const RunConfig& c) {
    // the hash identifies the experiment, not where its logs land
    nlohmann::json j = config_to_json(c);
    j.erase("out_dir");
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char b : s) {
        h ^= b;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

double scheduled_lr(const RunConfig& c, int step, int total_steps) {
    if (c.schedule == LrSchedule::Constant || total_steps <= 0) return c.lr;
    return c.lr * 0.5 *
           (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps));
}

TrainResult train(const RunConfig& config) {
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    const auto t0 = std::chrono::steady_clock::now();

    Dataset ds = dataset_from_config(config);
    RunConfig c = config;
    c.widths = default_widths(config, ds);
    Model m = make_model(c.widths, c.activation, c.seed, c.bias, c.final_activation);

    save_run_config(c, c.out_dir + "/config.json");
    auto steps_csv = open_out(c.out_dir + "/steps.csv");
    steps_csv << "# curvkit csv schema v1: step,lr,loss,penalty,grad_norm,"
                 "penalty_term_norm,seed\n";
    steps_csv << "step,lr,loss,penalty,grad_norm,penalty_term_norm,seed\n";
    auto epochs_csv = open_out(c.out_dir + "/epochs.csv");
    epochs_csv << "# curvkit csv schema v1: epoch,train_loss,test_loss,"
                  "train_accuracy,test_accuracy\n";
    epochs_csv << "epoch,train_loss,test_loss,train_accuracy,test_accuracy\n";

    TrainResult res;
    const std::size_t ntrain = ds.train_idx.size();
    const std::size_t bs = std::min(c.batch_size, ntrain);
    const int steps_per_epoch = static_cast<int>((ntrain + bs - 1) / bs);
    const int total_steps = c.epochs * steps_per_epoch;
    int step = 0;
    std::string divergence_message;

    for (int epoch = 0; epoch < c.epochs && !res.diverged; ++epoch) {
        std::vector<std::size_t> order = ds.train_idx;
        CounterRng shuffle_rng(c.seed ^ (0xc2b2ae3d27d4eb4full * (epoch + 1)));
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(shuffle_rng.uniform(1, i) * i);
            std::swap(order[i - 1], order[j < i ? j : i - 1]);
        }
        for (std::size_t b0 = 0; b0 < ntrain && !res.diverged; b0 += bs) {
            const std::size_t b1 = std::min(b0 + bs, ntrain);
            std::vector<std::size_t> idx(order.begin() + b0, order.begin() + b1);
            Batch batch = make_batch(ds, idx);
            const double lr = scheduled_lr(c, step, total_steps);
            const std::uint64_t sseed = step_seed(c.seed, step);
            try {
                StepReport rep = regularized_step(m, batch, c.reg, lr, sseed);
                steps_csv << step << "," << lr << "," << rep.base_loss << ","
                          << rep.penalty_value << "," << rep.grad_norm << ","
                          << rep.penalty_term_norm << "," << sseed << "\n";
                steps_csv.flush();
                ++step;
            } catch (const std::exception& e) {
                res.diverged = true;
                divergence_message = e.what();
            }
        }
        // a diverged model can make evaluation itself throw; keep the last
        // finite metrics and the logs written so far in that case
        try {
            Metrics tr = evaluate(m, ds, ds.train_idx);
            Metrics te = evaluate(m, ds, ds.test_idx);
            epochs_csv << epoch << "," << tr.loss << "," << te.loss << "," << tr.accuracy
                       << "," << te.accuracy << "\n";
            epochs_csv.flush();
            res.final_train_loss = tr.loss;
            res.final_test_loss = te.loss;
            res.final_train_accuracy = tr.accuracy;
            res.final_test_accuracy = te.accuracy;
        } catch (const std::exception& e) {
            res.diverged = true;
            if (divergence_message.empty()) divergence_message = e.what();
        }
    }
    res.steps_completed = step;
    res.checkpoint_path = c.out_dir + "/checkpoint.json";
    if (m.params.size() == m.param_count() &&
        std::all_of(m.params.begin(), m.params.end(),
                    [](double x) { return std::isfinite(x); }))
        save_checkpoint(m, res.checkpoint_path);
    else
        res.checkpoint_path.clear();

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    nlohmann::json summary;
    summary["schema_version"] = 1;
    summary["config_hash"] = config_hash(c);
    summary["final_train_loss"] = res.final_train_loss;
    summary["final_test_loss"] = res.final_test_loss;
    summary["final_train_accuracy"] = res.final_train_accuracy;
    summary["final_test_accuracy"] = res.final_test_accuracy;
    summary["steps_completed"] = res.steps_completed;
    summary["diverged"] = res.diverged;
    if (res.diverged) summary["divergence_message"] = divergence_message;
    summary["wall_time_sec"] = wall;  // excluded from reproducibility checks
    res.summary_path = c.out_dir + "/summary.json";
    auto sf = open_out(res.summary_path);
    sf << summary.dump(2) << "\n";
    return res;
}

CurvatureReport probe(const Model& m, const Batch& batch, const std::string& kind,
                      const std::string& out_dir, std::uint64_t seed, int n_samples,
                      std::size_t scan_index_a, std::size_t scan_index_b,
                      double scan_half_range, int scan_resolution,
                      const OverrideRegistry* reg) {
    std::filesystem::create_directories(out_dir);
    CurvatureReport r;
    r.kind = kind;
    r.seed = seed;
    r.hash = model_hash(m);
    if (kind == "traces") {
        CurvatureOperator h(CurvatureKind::Hessian, m, batch, reg);
        CurvatureOperator gn(CurvatureKind::GaussNewton, m, batch, reg);
        auto th = hutchinson_trace(h, n_samples, seed);
        auto tg = hutchinson_trace(gn, n_samples, seed);
        r.rows.push_back({"hutchinson_hessian", th.estimate, th.stderr_, th.n_samples});
        r.rows.push_back({"hutchinson_gauss_newton", tg.estimate, tg.stderr_, tg.n_samples});
        if (batch.loss == LossKind::CrossEntropy) {
            auto ts = gn_trace_sampled(m, batch, n_samples, seed, reg);
            r.rows.push_back({"gn_trace_sampled", ts.estimate, ts.stderr_, ts.n_samples});
        }
        if (m.param_count() <= 2000) {
            double dh = 0.0, dg = 0.0;
            Tensor H = full_matrix(h);
            Tensor G = full_matrix(gn);
            for (std::size_t i = 0; i < H.rows(); ++i) {
                dh += H.at(i, i);
                dg += G.at(i, i);
            }
            r.rows.push_back({"dense_hessian_trace", dh, 0.0, 0});
            r.rows.push_back({"dense_gauss_newton_trace", dg, 0.0, 0});
        }
    } else if (kind == "spectra") {
        CurvatureOperator h(CurvatureKind::Hessian, m, batch, reg);
        r.spectrum = eigenvalues_sym(full_matrix(h));
    } else if (kind == "scan") {
        r.scan = nme_scan(m, batch, scan_index_a, scan_index_b, scan_half_range,
                          scan_resolution, reg);
    } else if (kind == "ntk") {
        r.matrix = ntk(m, batch, reg).mat;
    } else {
        throw std::invalid_argument("unknown probe kind: " + kind);
    }
    write_csv(r, out_dir + "/" + kind + ".csv");
    write_json(r, out_dir + "/" + kind + ".json");
    return r;
}

void sweep(const RunConfig& base, const std::vector<double>& rhos,
           const std::vector<ActivationSpec>& activations, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    struct Cell {
        RunConfig config;
        TrainResult result;
        std::string error;
    };
    std::vector<Cell> cells;
    for (std::size_t ai = 0; ai < activations.size(); ++ai)
        for (std::size_t ri = 0; ri < rhos.size(); ++ri) {
            Cell cell;
            cell.config = base;
            cell.config.activation = activations[ai];
            cell.config.reg.rho = rhos[ri];
            cell.config.out_dir =
                out_dir + "/cell_" + std::to_string(ai) + "_" + std::to_string(ri);
            cells.push_back(std::move(cell));
        }
    std::atomic<std::size_t> next{0};
    const std::size_t workers =
        std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), cells.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
                try {
                    cells[i].result = train(cells[i].config);
                } catch (const std::exception& e) {
                    cells[i].error = e.what();
                }
            }
        });
    for (auto& t : pool) t.join();

    auto f = open_out(out_dir + "/sweep_summary.csv");
    f << "# curvkit csv schema v1: activation,beta,rho,train_loss,test_loss,"
         "train_accuracy,test_accuracy,diverged,out_dir\n";
    f << "activation,beta,rho,train_loss,test_loss,train_accuracy,test_accuracy,"
         "diverged,out_dir\n";
    for (const auto& cell : cells) {
        f << to_string(cell.config.activation.kind) << "," << cell.config.activation.beta
          << "," << cell.config.reg.rho << "," << cell.result.final_train_loss << ","
          << cell.result.final_test_loss << "," << cell.result.final_train_accuracy << ","
          << cell.result.final_test_accuracy << ","
          << (cell.result.diverged || !cell.error.empty() ? 1 : 0) << ","
          << cell.config.out_dir << "\n";
    }
}

}  // namespace curvkit
