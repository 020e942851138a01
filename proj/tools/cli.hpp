#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace fcl::cli {

enum ExitCode : int { ok = 0, runtime_failure = 1, usage = 2 };

/// Runs one command line (without the program name). Reports go to `out`,
/// diagnostics and warnings to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Fixture config used by `selftest` when --fixture is not given.
std::filesystem::path default_fixture();

}  // namespace fcl::cli
