#pragma once

// Property suites shared by the `selftest` command and the acceptance test.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace fcl::checks {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Softmax lower bound on 10,000 random score vectors; two-class equality.
SuiteResult bound_suite(std::uint64_t seed = 1);

/// Analytic against central-difference gradients of L_total on 50 random
/// objectives (toy and affine text encoders, CL and CL-HP).
SuiteResult gradient_suite(std::uint64_t seed = 2);

/// Exploration and evidence kernels against the brute-force oracles.
SuiteResult oracle_suite(std::uint64_t seed = 3);

/// Sum-to-one of every distribution type on 1,000 random inputs.
SuiteResult normalization_suite(std::uint64_t seed = 4);

/// L_cal and the common-evidence gap on 100 biased synthetic episodes.
SuiteResult calibration_suite(std::uint64_t seed = 23);

/// Confidence amplification, wrong votes and FCL flips on the biased world.
SuiteResult failure_suite();

/// ECEC split by zero-shot correctness and the swept EUEC–entropy correlation.
SuiteResult trend_suite();

/// Proxy reconstruction on 200 toy images.
SuiteResult proxy_suite();

/// Evaluates the fixture config twice at parallelism 1 and once at 8 and
/// compares the reports byte for byte.
SuiteResult determinism_suite(const std::filesystem::path& fixture_config);

using SuiteReporter = std::function<void(const SuiteResult&)>;

/// Every suite in order; `report` sees each result as it finishes.
std::vector<SuiteResult> run_all(const std::filesystem::path& fixture_config,
                                 const SuiteReporter& report = {});

/// "PASS name (1.23 s): detail"
std::string format_result(const SuiteResult& r);

}  // namespace fcl::checks
