#include "curvkit/data.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "curvkit/rng.hpp"

namespace curvkit {

namespace {

void default_split(Dataset& ds, std::uint64_t seed) {
    const std::size_t n = ds.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    // Fisher-Yates with counter-based draws
    CounterRng rng(seed ^ 0x517a9e5511ull);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform(1, i) * i);
        std::swap(idx[i - 1], idx[j < i ? j : i - 1]);
    }
    const std::size_t ntrain = n - n / 5;
    ds.train_idx.assign(idx.begin(), idx.begin() + ntrain);
    ds.test_idx.assign(idx.begin() + ntrain, idx.end());
}

void one_hot_targets(Dataset& ds, std::size_t k) {
    ds.targets = Tensor({k, ds.size()});
    for (std::size_t i = 0; i < ds.size(); ++i) ds.targets.at(ds.labels[i], i) = 1.0;
}

std::uint32_t read_be32(std::istream& f, const std::string& what) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("idx: truncated while reading " + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

SyntheticKind synthetic_kind_from_string(const std::string& s) {
    if (s == "blobs") return SyntheticKind::Blobs;
    if (s == "spirals") return SyntheticKind::Spirals;
    if (s == "teacher_mlp") return SyntheticKind::TeacherMlp;
    throw std::invalid_argument("unknown synthetic dataset kind: " + s);
}

Dataset make_synthetic(SyntheticKind kind, std::size_t n, std::size_t d, std::size_t k,
                       std::uint64_t seed) {
    if (n == 0 || d == 0 || k == 0)
        throw std::invalid_argument("make_synthetic: n, d, k must be positive");
    CounterRng rng(seed);
    Dataset ds;
    switch (kind) {
        case SyntheticKind::Blobs: {
            if (k < 2) throw std::invalid_argument("blobs needs k >= 2 classes");
            ds.loss = LossKind::CrossEntropy;
            ds.inputs = Tensor({d, n});
            ds.labels.resize(n);
            // class means on a radius-6 circle in the first two coordinates
            // (separation >> unit noise, so blobs are linearly separable)
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t c = i % k;
                ds.labels[i] = static_cast<int>(c);
                const double ang = 2.0 * std::numbers::pi * c / k;
                for (std::size_t j = 0; j < d; ++j) {
                    double mu = 0.0;
                    if (j == 0) mu = 6.0 * std::cos(ang);
                    if (j == 1) mu = 6.0 * std::sin(ang);
                    if (d == 1) mu = 8.0 * (static_cast<double>(c) - 0.5 * (k - 1));
                    ds.inputs.at(j, i) = mu + rng.normal(i, j);
                }
            }
            one_hot_targets(ds, k);
            break;
        }
        case SyntheticKind::Spirals: {
            if (d != 2) throw std::invalid_argument("spirals requires d = 2");
            if (k < 2) throw std::invalid_argument("spirals needs k >= 2 arms");
            ds.loss = LossKind::CrossEntropy;
            ds.inputs = Tensor({2, n});
            ds.labels.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t c = i % k;
                ds.labels[i] = static_cast<int>(c);
                const double t = 3.0 * std::numbers::pi * rng.uniform(i, 0);
                const double ang = t + 2.0 * std::numbers::pi * c / k;
                const double r = 0.5 + t;
                ds.inputs.at(0, i) = r * std::cos(ang) + 0.1 * rng.normal(i, 1);
                ds.inputs.at(1, i) = r * std::sin(ang) + 0.1 * rng.normal(i, 2);
            }
            one_hot_targets(ds, k);
            break;
        }
        case SyntheticKind::TeacherMlp: {
            Model teacher = make_model({d, 8, 8, k}, {ActivationKind::Tanh, 1.0},
                                       seed ^ 0x7eac4e5ull);
            return make_teacher_dataset(teacher, n, seed);
        }
    }
    default_split(ds, seed);
    return ds;
}

Dataset make_teacher_dataset(const Model& teacher, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("make_teacher_dataset: n must be positive");
    Dataset ds;
    ds.loss = LossKind::Mse;
    ds.has_teacher = true;
    ds.teacher = teacher;
    const std::size_t d = teacher.widths.front();
    CounterRng rng(seed);
    ds.inputs = Tensor({d, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) ds.inputs.at(j, i) = rng.normal(i, j);
    ds.targets = model_forward(teacher, ds.inputs).z;
    default_split(ds, seed);
    return ds;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream fi(images_path, std::ios::binary);
    if (!fi) throw std::runtime_error("idx: cannot open " + images_path);
    if (read_be32(fi, "image magic") != 0x00000803u)
        throw std::runtime_error("idx: bad image magic in " + images_path +
                                 " (expected 0x00000803)");
    const std::size_t n = read_be32(fi, "image count");
    const std::size_t rows = read_be32(fi, "row count");
    const std::size_t cols = read_be32(fi, "column count");
    std::vector<unsigned char> pixels(n * rows * cols);
    fi.read(reinterpret_cast<char*>(pixels.data()), pixels.size());
    if (static_cast<std::size_t>(fi.gcount()) != pixels.size())
        throw std::runtime_error("idx: truncated image data in " + images_path +
                                 ": expected " + std::to_string(pixels.size()) +
                                 " bytes, got " + std::to_string(fi.gcount()));

    std::ifstream fl(labels_path, std::ios::binary);
    if (!fl) throw std::runtime_error("idx: cannot open " + labels_path);
    if (read_be32(fl, "label magic") != 0x00000801u)
        throw std::runtime_error("idx: bad label magic in " + labels_path +
                                 " (expected 0x00000801)");
    const std::size_t nl = read_be32(fl, "label count");
    if (nl != n)
        throw std::runtime_error("idx: image/label count mismatch: " + std::to_string(n) +
                                 " vs " + std::to_string(nl));
    std::vector<unsigned char> raw(n);
    fl.read(reinterpret_cast<char*>(raw.data()), raw.size());
    if (static_cast<std::size_t>(fl.gcount()) != raw.size())
        throw std::runtime_error("idx: truncated label data in " + labels_path +
                                 ": expected " + std::to_string(raw.size()) +
                                 " bytes, got " + std::to_string(fl.gcount()));

    Dataset ds;
    ds.loss = LossKind::CrossEntropy;
    const std::size_t d = rows * cols;
    ds.inputs = Tensor({d, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            ds.inputs.at(j, i) = pixels[i * d + j] / 255.0;
    ds.labels.resize(n);
    int kmax = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ds.labels[i] = raw[i];
        kmax = std::max(kmax, ds.labels[i]);
    }
    one_hot_targets(ds, static_cast<std::size_t>(kmax) + 1);
    ds.train_idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) ds.train_idx[i] = i;
    return ds;
}

void save_idx(const Dataset& ds, const std::string& images_path,
              const std::string& labels_path) {
    const std::size_t n = ds.size(), d = ds.input_dim();
    std::ofstream fi(images_path, std::ios::binary);
    if (!fi) throw std::runtime_error("idx: cannot write " + images_path);
    write_be32(fi, 0x00000803u);
    write_be32(fi, static_cast<std::uint32_t>(n));
    write_be32(fi, static_cast<std::uint32_t>(d));
    write_be32(fi, 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const unsigned char b =
                static_cast<unsigned char>(std::lround(ds.inputs.at(j, i) * 255.0));
            fi.write(reinterpret_cast<const char*>(&b), 1);
        }
    std::ofstream fl(labels_path, std::ios::binary);
    if (!fl) throw std::runtime_error("idx: cannot write " + labels_path);
    write_be32(fl, 0x00000801u);
    write_be32(fl, static_cast<std::uint32_t>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char b = static_cast<unsigned char>(ds.labels[i]);
        fl.write(reinterpret_cast<const char*>(&b), 1);
    }
}

Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw std::invalid_argument("make_batch: empty index set");
    Batch b;
    b.loss = ds.loss;
    const std::size_t d = ds.input_dim(), k = ds.target_dim(), m = indices.size();
    b.inputs = Tensor({d, m});
    b.targets = Tensor({k, m});
    for (std::size_t c = 0; c < m; ++c) {
        const std::size_t i = indices[c];
        if (i >= ds.size()) throw std::out_of_range("make_batch: index out of range");
        for (std::size_t j = 0; j < d; ++j) b.inputs.at(j, c) = ds.inputs.at(j, i);
        for (std::size_t j = 0; j < k; ++j) b.targets.at(j, c) = ds.targets.at(j, i);
        if (!ds.labels.empty()) b.labels.push_back(ds.labels[i]);
    }
    return b;
}

Batch full_batch(const Dataset& ds) {
    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return make_batch(ds, idx);
}

}  // namespace curvkit
