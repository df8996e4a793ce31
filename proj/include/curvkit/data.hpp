#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "curvkit/loss.hpp"
#include "curvkit/model.hpp"

namespace curvkit {

/// Samples are stored one per column (inputs d x N), matching Batch.
/// Train/test splits are disjoint index sets over the columns.
struct Dataset {
    Tensor inputs;             // d x N
    Tensor targets;            // k x N (regression values or one-hot rows)
    std::vector<int> labels;   // class indices (classification only)
    LossKind loss = LossKind::Mse;
    std::vector<std::size_t> train_idx, test_idx;

    bool has_teacher = false;  // teacher_mlp datasets carry their generator
    Model teacher;

    std::size_t size() const { return inputs.cols(); }
    std::size_t input_dim() const { return inputs.rows(); }
    std::size_t target_dim() const { return targets.rows(); }
};

enum class SyntheticKind { Blobs, Spirals, TeacherMlp };

SyntheticKind synthetic_kind_from_string(const std::string& s);

/// Deterministic in seed. blobs/spirals are classification (cross-entropy);
/// teacher_mlp is regression (MSE) with targets from a frozen random MLP so
/// a student of the same architecture can interpolate exactly.
Dataset make_synthetic(SyntheticKind kind, std::size_t n, std::size_t d, std::size_t k,
                       std::uint64_t seed);

/// Regression dataset labeled by an explicit teacher model.
Dataset make_teacher_dataset(const Model& teacher, std::size_t n, std::uint64_t seed);

/// IDX-format (big-endian) image/label pair; pixels scaled to [0,1],
/// labels one-hot. Cross-entropy dataset.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Fixture writer for round-trip tests.
void save_idx(const Dataset& ds, const std::string& images_path,
              const std::string& labels_path);

/// Batch over a subset of columns.
Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices);
Batch full_batch(const Dataset& ds);

}  // namespace curvkit
