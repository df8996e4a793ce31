#pragma once

#include <string>
#include <vector>

#include "curvkit/curvature.hpp"
#include "curvkit/model.hpp"

namespace curvkit {

/// FNV-1a over widths, flags, and the raw parameter bytes; identifies the
/// exact parameter snapshot a report was produced from.
std::string model_hash(const Model& m);

struct ProbeRow {
    std::string name;
    double value = 0.0;
    double stderr_ = 0.0;
    int n_samples = 0;
};

/// Probe output bundle. Exactly one payload is populated per report,
/// selected by `kind` (traces | spectra | scan | ntk).
struct CurvatureReport {
    std::string kind;
    std::uint64_t seed = 0;
    std::string hash;  // model hash

    std::vector<ProbeRow> rows;    // traces
    std::vector<double> spectrum;  // spectra (ascending)
    Tensor matrix;                 // ntk
    ScanGrid scan;                 // scan
};

/// One row per probe/cell/entry; first line is a versioned schema comment.
void write_csv(const CurvatureReport& r, const std::string& path);
/// Metadata + payload (seeds, sample counts, model hash).
void write_json(const CurvatureReport& r, const std::string& path);

}  // namespace curvkit
