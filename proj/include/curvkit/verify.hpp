#pragma once

#include <string>
#include <vector>

namespace curvkit {

struct CriterionResult {
    int index = 0;
    std::string name;
    bool pass = false;
    bool gating = true;  // qualitative smoke checks are logged, not gating
    std::string detail;
};

/// Runs the full acceptance suite (12 criteria). scratch_dir receives the
/// artifacts of the reproducibility and smoke checks.
std::vector<CriterionResult> run_acceptance(const std::string& scratch_dir);

/// One line per criterion; returns true when every gating criterion passed.
bool print_acceptance(const std::vector<CriterionResult>& results);

}  // namespace curvkit
