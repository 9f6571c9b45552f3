#pragma once

// Numerical self-checks of the scan, its discretization, and the model
// gradient. Each suite returns one result per check with the measured worst
// case next to its tolerance.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fkmad::verify {

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  bool lower_bound = false;  // passes when measured >= tolerance instead of <=
  std::string detail;
};

struct Options {
  std::uint64_t seed = 1;
  /// Multiplies the scan's discrete transition; anything but 1 must make the
  /// scan check fail.
  double a_scale = 1.0;
};

/// selective_scan against the explicit time-varying convolution.
std::vector<CheckResult> scan_suite(const Options& opts = {});
/// Second-order Taylor discretization error ratio under step halving.
std::vector<CheckResult> taylor_suite(const Options& opts = {});
/// Analytic kernel derivative against central differences.
std::vector<CheckResult> kernel_derivative_suite(const Options& opts = {});
/// Time- and frequency-domain output energies of frozen windows.
std::vector<CheckResult> parseval_suite(const Options& opts = {});
/// Quadratic growth of output energy around a near-zero operating point and
/// the operator-norm gain bound.
std::vector<CheckResult> energy_suite(const Options& opts = {});
/// Full-model backward pass against finite differences.
std::vector<CheckResult> gradient_suite(const Options& opts = {});

/// scan, taylor, dhk, parseval, energy, gradient.
const std::vector<std::string>& suite_names();

/// Runs one suite by name, or every suite for "all". ConfigError for an
/// unknown name.
std::vector<CheckResult> run_suite(const std::string& name, const Options& opts = {});

/// One line: PASS/FAIL, suite/name, measured value, tolerance, detail.
std::string format(const CheckResult& r);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace fkmad::verify
