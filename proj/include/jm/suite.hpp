#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "jm/report.hpp"

namespace jm {

struct CheckResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string summary;  // one line, measured values against their bounds
    Json details;
    double seconds = 0.0;  // wall time, kept out of the report
};

struct SuiteOptions {
    int threads = 0;
    std::uint64_t seed = 1;
    std::string out_dir;  // render artifacts go here when set
    std::vector<int> only;  // empty: all checks
};

/// The invariant suite behind `verify --all`. Checks run in id order; the
/// callback fires after each one.
std::vector<CheckResult> run_suite(const SuiteOptions& opts,
                                   const std::function<void(const CheckResult&)>& on_result = {});

/// Deterministic report: everything but the timings.
Json suite_report(const std::vector<CheckResult>& results);

}  // namespace jm
