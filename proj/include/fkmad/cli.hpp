#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fkmad {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,  // verify found a failing check
  kExitUsage = 2,        // bad arguments or configuration
  kExitData = 3,         // unreadable or inconsistent data
  kExitNumeric = 4,      // divergence
};

/// `fkmad train|score|eval|verify|synth [options]`; `args` excludes the
/// program name. Never throws: every failure maps to an exit code with a
/// message on `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fkmad
