#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "curvkit/harness.hpp"
#include "oracles.hpp"

using namespace curvkit;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& leaf) {
    fs::path p = fs::temp_directory_path() / ("curvkit_test_" + leaf);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

std::size_t data_rows(const std::string& csv) {
    std::size_t rows = 0;
    std::istringstream is(csv);
    std::string line;
    while (std::getline(is, line))
        if (!line.empty() && line[0] != '#') ++rows;
    return rows > 0 ? rows - 1 : 0;  // minus the header
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("run configs round-trip; hashes track content, not location") {
    fs::path dir = scratch_dir("config");
    RunConfig c;
    c.widths = {2, 8, 2};
    c.activation = {ActivationKind::BetaGelu, 4.0};
    c.dataset = "spirals";
    c.n = 99;
    c.reg.kind = RegKind::Sam;
    c.reg.rho = 0.07;
    c.schedule = LrSchedule::Cosine;
    c.seed = 42;
    c.out_dir = (dir / "a").string();
    save_run_config(c, (dir / "c.json").string());
    RunConfig r = load_run_config((dir / "c.json").string());
    CHECK(r.widths == c.widths);
    CHECK(r.activation.kind == c.activation.kind);
    CHECK(r.activation.beta == c.activation.beta);
    CHECK(r.dataset == c.dataset);
    CHECK(r.reg.kind == c.reg.kind);
    CHECK(r.reg.rho == c.reg.rho);
    CHECK(r.schedule == LrSchedule::Cosine);
    CHECK(r.seed == c.seed);
    CHECK(config_hash(r) == config_hash(c));
    // hash ignores the output directory but not the hyperparameters
    RunConfig moved = c;
    moved.out_dir = (dir / "b").string();
    CHECK(config_hash(moved) == config_hash(c));
    RunConfig tweaked = c;
    tweaked.lr *= 2;
    CHECK(config_hash(tweaked) != config_hash(c));
    // seed is mandatory on load
    std::ofstream((dir / "noseed.json").string()) << "{\"widths\": [2, 2]}\n";
    CHECK_THROWS_WITH_AS(load_run_config((dir / "noseed.json").string()),
                         doctest::Contains("seed"), std::runtime_error);
}

TEST_CASE("cosine schedule follows the half-cosine") {
    RunConfig c;
    c.lr = 0.1;
    c.schedule = LrSchedule::Cosine;
    CHECK(scheduled_lr(c, 0, 100) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(scheduled_lr(c, 50, 100) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(scheduled_lr(c, 100, 100) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
    for (int t : {7, 23, 61})
        CHECK(scheduled_lr(c, t, 100) ==
              doctest::Approx(0.1 * 0.5 * (1.0 + std::cos(std::numbers::pi * t / 100.0)))
                  .epsilon(1e-15));
    c.schedule = LrSchedule::Constant;
    CHECK(scheduled_lr(c, 50, 100) == 0.1);
}

TEST_CASE("synthetic datasets: determinism, splits, teacher interpolation") {
    Dataset a = make_synthetic(SyntheticKind::Blobs, 100, 2, 3, 5);
    Dataset b = make_synthetic(SyntheticKind::Blobs, 100, 2, 3, 5);
    CHECK(a.inputs.data == b.inputs.data);  // bit-identical in the seed
    CHECK(a.train_idx == b.train_idx);
    CHECK(a.loss == LossKind::CrossEntropy);
    CHECK(a.train_idx.size() == 80);
    CHECK(a.test_idx.size() == 20);
    std::set<std::size_t> all(a.train_idx.begin(), a.train_idx.end());
    all.insert(a.test_idx.begin(), a.test_idx.end());
    CHECK(all.size() == 100);  // disjoint and covering
    Dataset c = make_synthetic(SyntheticKind::Blobs, 100, 2, 3, 6);
    CHECK(a.inputs.data != c.inputs.data);

    CHECK_THROWS_AS(make_synthetic(SyntheticKind::Spirals, 10, 3, 2, 1),
                    std::invalid_argument);

    // a student initialized at the teacher interpolates exactly
    Dataset t = make_synthetic(SyntheticKind::TeacherMlp, 32, 2, 2, 9);
    REQUIRE(t.has_teacher);
    CHECK(t.loss == LossKind::Mse);
    Batch fb = full_batch(t);
    LossGraph lg = build_loss_graph(t.teacher, fb);
    CHECK(eval(lg.graph, t.teacher.params, lg.loss).data[0] == doctest::Approx(0.0));
}

TEST_CASE("idx files: round-trip and truncation diagnostics") {
    fs::path dir = scratch_dir("idx");
    // pixels on the 1/255 grid survive the byte round trip exactly
    Dataset ds;
    ds.loss = LossKind::CrossEntropy;
    ds.inputs = Tensor({4, 3});
    CounterRng rng(3);
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t i = 0; i < 3; ++i)
            ds.inputs.at(j, i) =
                static_cast<double>(static_cast<int>(rng.uniform(j, i) * 255)) / 255.0;
    ds.labels = {0, 2, 1};
    ds.targets = Tensor({3, 3});
    for (std::size_t i = 0; i < 3; ++i) ds.targets.at(ds.labels[i], i) = 1.0;
    const std::string img = (dir / "img.idx").string(), lab = (dir / "lab.idx").string();
    save_idx(ds, img, lab);
    Dataset r = load_idx(img, lab);
    CHECK(r.inputs.data == ds.inputs.data);
    CHECK(r.labels == ds.labels);
    CHECK(r.target_dim() == 3);
    CHECK(r.train_idx.size() == 3);

    // cutting the image payload short names the expected and actual sizes
    std::string bytes = slurp(img);
    std::ofstream((dir / "cut.idx").string(), std::ios::binary)
        << bytes.substr(0, bytes.size() - 5);
    CHECK_THROWS_WITH_AS(load_idx((dir / "cut.idx").string(), lab),
                         doctest::Contains("truncated"), std::runtime_error);
    // wrong magic is rejected
    std::ofstream((dir / "bad.idx").string(), std::ios::binary) << std::string(16, '\0');
    CHECK_THROWS_WITH_AS(load_idx((dir / "bad.idx").string(), lab),
                         doctest::Contains("magic"), std::runtime_error);
}

TEST_CASE("training separates blobs and is byte-reproducible") {
    fs::path dir = scratch_dir("train");
    RunConfig c;
    c.widths = {2, 8, 3};
    c.dataset = "blobs";
    c.n = 120;
    c.d = 2;
    c.k = 3;
    c.loss = LossKind::CrossEntropy;
    c.lr = 0.1;
    c.epochs = 12;
    c.batch_size = 32;
    c.seed = 11;
    c.out_dir = (dir / "a").string();
    TrainResult ra = train(c);
    CHECK_FALSE(ra.diverged);
    CHECK(ra.final_train_accuracy >= 0.99);
    CHECK(ra.final_test_accuracy >= 0.9);
    CHECK(ra.steps_completed == 12 * 3);  // ceil(96/32) batches per epoch
    CHECK(fs::exists(ra.checkpoint_path));

    c.out_dir = (dir / "b").string();
    TrainResult rb = train(c);
    for (const char* f : {"steps.csv", "epochs.csv", "checkpoint.json"})
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    CHECK(data_rows(slurp(dir / "a" / "steps.csv")) == 36);
    CHECK(ra.final_train_loss == rb.final_train_loss);
}

TEST_CASE("a diverging run keeps its partial logs and marks the summary") {
    fs::path dir = scratch_dir("diverge");
    RunConfig c;
    c.widths = {2, 8, 2};
    c.dataset = "teacher_mlp";
    c.n = 64;
    c.d = 2;
    c.k = 2;
    c.loss = LossKind::Mse;
    c.lr = 1e12;  // guaranteed blow-up
    c.epochs = 2;
    c.batch_size = 16;
    c.seed = 3;
    c.out_dir = (dir / "run").string();
    TrainResult r = train(c);
    CHECK(r.diverged);
    CHECK(fs::exists(dir / "run" / "summary.json"));
    const std::string summary = slurp(dir / "run" / "summary.json");
    CHECK(summary.find("\"diverged\": true") != std::string::npos);
    CHECK(data_rows(slurp(dir / "run" / "steps.csv")) >= 1);  // survivors
}

TEST_CASE("probes write one csv and one json per kind") {
    fs::path dir = scratch_dir("probe");
    Model m = make_model({2, 6, 2}, {ActivationKind::Gelu, 1.0}, 17);
    Batch b = oracles::random_batch(LossKind::CrossEntropy, 2, 2, 6, 19);
    CurvatureReport tr = probe(m, b, "traces", dir.string(), 1, 200);
    bool found_dense = false;
    for (const auto& row : tr.rows)
        if (row.name == "dense_hessian_trace") {
            found_dense = true;
            // the Hutchinson estimate targets the dense value
            for (const auto& hrow : tr.rows)
                if (hrow.name == "hutchinson_hessian")
                    CHECK(std::abs(hrow.value - row.value) <= 5.0 * hrow.stderr_);
        }
    CHECK(found_dense);
    probe(m, b, "spectra", dir.string(), 1);
    probe(m, b, "ntk", dir.string(), 1);
    probe(m, b, "scan", dir.string(), 1, 100, m.weight_index(1, 0, 1),
          m.weight_index(1, 1, 3), 1.0, 5);
    for (const char* k : {"traces", "spectra", "ntk", "scan"}) {
        CHECK(fs::exists(dir / (std::string(k) + ".csv")));
        CHECK(fs::exists(dir / (std::string(k) + ".json")));
        // versioned schema comment on line one
        CHECK(slurp(dir / (std::string(k) + ".csv")).rfind("# curvkit csv schema", 0) == 0);
    }
    CHECK_THROWS_AS(probe(m, b, "volcano", dir.string(), 1), std::invalid_argument);
}

TEST_CASE("sweep runs every cell and tabulates them") {
    fs::path dir = scratch_dir("sweep");
    RunConfig base;
    base.widths = {2, 6, 2};
    base.dataset = "blobs";
    base.n = 48;
    base.d = 2;
    base.k = 2;
    base.loss = LossKind::CrossEntropy;
    base.reg.kind = RegKind::GradPenaltyP2;
    base.lr = 0.05;
    base.epochs = 1;
    base.batch_size = 16;
    base.seed = 29;
    sweep(base, {0.0, 0.05}, {{ActivationKind::Relu, 1.0}}, dir.string());
    const std::string csv = slurp(dir / "sweep_summary.csv");
    CHECK(data_rows(csv) == 2);
    CHECK(fs::exists(dir / "cell_0_0" / "summary.json"));
    CHECK(fs::exists(dir / "cell_0_1" / "summary.json"));
}

}  // TEST_SUITE
