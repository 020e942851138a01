// One PASS/FAIL line per acceptance criterion; exits nonzero on any failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cli.hpp"
#include "suites.hpp"

namespace fs = std::filesystem;

namespace {

struct Line {
  std::string criterion;
  bool passed = false;
  std::string detail;
};

void print(const Line& l) {
  std::cout << (l.passed ? "PASS " : "FAIL ") << l.criterion << ": " << l.detail << std::endl;
}

Line from_suite(const std::string& criterion, const std::function<fcl::checks::SuiteResult()>& suite) {
  try {
    const fcl::checks::SuiteResult r = suite();
    return {criterion, r.passed, fcl::checks::format_result(r)};
  } catch (const std::exception& e) {
    return {criterion, false, std::string("exception: ") + e.what()};
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Runs `fcl evaluate` on the fixture into a fresh directory.
bool evaluate_into(const fs::path& dir, int parallel, std::string& json, std::string& csv,
                   std::string& error) {
  fs::remove_all(dir);
  std::ostringstream out;
  std::ostringstream err;
  const fs::path config = fs::path(FCL_FIXTURE_DIR) / "config.json";
  const int code = fcl::cli::run({"evaluate", "--config", config.string(), "--out", dir.string(),
                                  "--parallel", std::to_string(parallel)},
                                 out, err);
  if (code != 0) {
    error = "evaluate exited " + std::to_string(code) + ": " + err.str();
    return false;
  }
  json = slurp(dir / "report.json");
  csv = slurp(dir / "report.csv");
  return !json.empty() && !csv.empty();
}

Line determinism() {
  const fs::path root =
      fs::temp_directory_path() / ("fcl-acceptance-" + std::to_string(::getpid()));
  std::string json[3];
  std::string csv[3];
  std::string error;
  const int parallel[3] = {1, 1, 8};
  bool ok = true;
  for (int i = 0; i < 3 && ok; ++i) {
    ok = evaluate_into(root / ("run" + std::to_string(i)), parallel[i], json[i], csv[i], error);
  }
  fs::remove_all(root);
  if (!ok) return {"determinism", false, error};
  const bool repeat = json[0] == json[1] && csv[0] == csv[1];
  const bool across = json[0] == json[2] && csv[0] == csv[2];
  std::ostringstream d;
  d << "two runs at --parallel 1 " << (repeat ? "identical" : "DIFFER") << "; --parallel 1 vs 8 "
    << (across ? "identical" : "DIFFER") << " (report.json " << json[0].size() << " bytes, report.csv "
    << csv[0].size() << " bytes)";
  return {"determinism", repeat && across, d.str()};
}

Line selftest_time() {
  std::ostringstream out;
  std::ostringstream err;
  const auto start = std::chrono::steady_clock::now();
  const int code = fcl::cli::run({"selftest"}, out, err);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream d;
  d << "exit " << code << ", " << seconds << " s (limit 300 s)";
  return {"selftest wall time", code == 0 && seconds < 300.0, d.str()};
}

}  // namespace

int main() {
  using namespace fcl::checks;
  std::vector<Line> lines;
  auto add = [&](Line l) {
    print(l);
    lines.push_back(std::move(l));
  };
  add(from_suite("bound suite", [] { return bound_suite(); }));
  add(from_suite("gradient suite", [] { return gradient_suite(); }));
  add(from_suite("oracle equivalence", [] { return oracle_suite(); }));
  add(from_suite("normalization", [] { return normalization_suite(); }));
  add(from_suite("calibration efficacy", [] { return calibration_suite(); }));
  add(from_suite("failure-mode reproduction", [] { return failure_suite(); }));
  add(from_suite("metric trend", [] { return trend_suite(); }));
  add(from_suite("proxy reconstruction", [] { return proxy_suite(); }));
  add(determinism());
  add(selftest_time());

  std::size_t failed = 0;
  for (const Line& l : lines) failed += l.passed ? 0 : 1;
  std::cout << lines.size() - failed << "/" << lines.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
