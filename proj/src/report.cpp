#include "curvkit/report.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace curvkit {

std::string model_hash(const Model& m) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    for (auto w : m.widths) mix(&w, sizeof(w));
    const int kind = static_cast<int>(m.activation.kind);
    mix(&kind, sizeof(kind));
    mix(&m.activation.beta, sizeof(double));
    mix(&m.bias, sizeof(bool));
    mix(&m.final_activation, sizeof(bool));
    mix(m.params.data(), m.params.size() * sizeof(double));
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write: " + path);
    f << std::setprecision(17);
    return f;
}

}  // namespace

void write_csv(const CurvatureReport& r, const std::string& path) {
    auto f = open_out(path);
    if (r.kind == "traces") {
        f << "# curvkit csv schema v1: name,value,stderr,n_samples\n";
        f << "name,value,stderr,n_samples\n";
        for (const auto& row : r.rows)
            f << row.name << "," << row.value << "," << row.stderr_ << ","
              << row.n_samples << "\n";
    } else if (r.kind == "spectra") {
        f << "# curvkit csv schema v1: index,eigenvalue\n";
        f << "index,eigenvalue\n";
        for (std::size_t i = 0; i < r.spectrum.size(); ++i)
            f << i << "," << r.spectrum[i] << "\n";
    } else if (r.kind == "scan") {
        f << "# curvkit csv schema v1: a,b,loss,nme_norm\n";
        f << "a,b,loss,nme_norm\n";
        for (std::size_t i = 0; i < r.scan.a_values.size(); ++i)
            for (std::size_t j = 0; j < r.scan.b_values.size(); ++j)
                f << r.scan.a_values[i] << "," << r.scan.b_values[j] << ","
                  << r.scan.loss.at(i, j) << "," << r.scan.nme_norm.at(i, j) << "\n";
    } else if (r.kind == "ntk") {
        f << "# curvkit csv schema v1: i,j,value\n";
        f << "i,j,value\n";
        for (std::size_t i = 0; i < r.matrix.rows(); ++i)
            for (std::size_t j = 0; j < r.matrix.cols(); ++j)
                f << i << "," << j << "," << r.matrix.at(i, j) << "\n";
    } else {
        throw std::invalid_argument("unknown report kind: " + r.kind);
    }
}

void write_json(const CurvatureReport& r, const std::string& path) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = r.kind;
    j["seed"] = r.seed;
    j["model_hash"] = r.hash;
    if (r.kind == "traces") {
        for (const auto& row : r.rows)
            j["traces"].push_back({{"name", row.name},
                                   {"value", row.value},
                                   {"stderr", row.stderr_},
                                   {"n_samples", row.n_samples}});
    } else if (r.kind == "spectra") {
        j["spectrum"] = r.spectrum;
    } else if (r.kind == "scan") {
        j["index_a"] = r.scan.index_a;
        j["index_b"] = r.scan.index_b;
        j["a_values"] = r.scan.a_values;
        j["b_values"] = r.scan.b_values;
        j["loss"] = r.scan.loss.data;
        j["nme_norm"] = r.scan.nme_norm.data;
    } else if (r.kind == "ntk") {
        j["rows"] = r.matrix.rows();
        j["values"] = r.matrix.data;
    } else {
        throw std::invalid_argument("unknown report kind: " + r.kind);
    }
    auto f = open_out(path);
    f << j.dump(2) << "\n";
}

}  // namespace curvkit
