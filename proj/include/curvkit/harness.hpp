#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "curvkit/data.hpp"
#include "curvkit/optim.hpp"
#include "curvkit/report.hpp"

namespace curvkit {

enum class LrSchedule { Constant, Cosine };

struct RunConfig {
    // model
    std::vector<std::size_t> widths;
    ActivationSpec activation{ActivationKind::Gelu, 1.0};
    bool bias = false;
    bool final_activation = false;

    // data: blobs | spirals | teacher_mlp | idx
    std::string dataset = "blobs";
    std::size_t n = 512, d = 2, k = 2;
    std::string idx_images, idx_labels;

    LossKind loss = LossKind::CrossEntropy;
    RegularizerSpec reg;

    double lr = 0.05;
    LrSchedule schedule = LrSchedule::Constant;
    int epochs = 10;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    std::string out_dir = "run";
};

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& c, const std::string& path);
/// FNV-1a over the canonical JSON form (excludes nothing; two configs hash
/// equal iff every field matches)
std::string config_hash(const RunConfig& c);

/// lr(t) = lr0 * 0.5 * (1 + cos(pi * t / T)) for cosine, lr0 otherwise
double scheduled_lr(const RunConfig& c, int step, int total_steps);

struct TrainResult {
    double final_train_loss = 0.0;
    double final_test_loss = 0.0;
    double final_train_accuracy = 0.0;  // classification only
    double final_test_accuracy = 0.0;
    bool diverged = false;
    int steps_completed = 0;
    std::string checkpoint_path;
    std::string summary_path;
};

/// Runs the configured optimizer; writes steps.csv, epochs.csv,
/// checkpoint.json and summary.json into the output directory. A non-finite
/// loss aborts the run, leaving all rows written so far intact and a
/// divergence marker in the summary.
TrainResult train(const RunConfig& config);

/// Dispatches to the curvature module and writes <kind>.csv / <kind>.json.
/// kinds: traces | spectra | scan | ntk
CurvatureReport probe(const Model& m, const Batch& batch, const std::string& kind,
                      const std::string& out_dir, std::uint64_t seed, int n_samples = 1000,
                      std::size_t scan_index_a = 0, std::size_t scan_index_b = 1,
                      double scan_half_range = 2.0, int scan_resolution = 41,
                      const OverrideRegistry* reg = nullptr);

/// One run per (rho, activation) cell, executed in parallel with private
/// output directories; emits sweep_summary.csv (one row per cell).
void sweep(const RunConfig& base, const std::vector<double>& rhos,
           const std::vector<ActivationSpec>& activations, const std::string& out_dir);

}  // namespace curvkit
