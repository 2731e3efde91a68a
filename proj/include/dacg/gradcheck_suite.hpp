// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dacg {

struct GradCheckResult {
  std::string group;  // primitives, dam, caga, cgdm, agf, model
  std::string name;
  double max_rel_error = 0.0;
  double threshold = 0.0;
  std::size_t checked = 0;

  bool passed() const { return max_rel_error <= threshold; }
};

struct GradCheckSuiteOptions {
  /// Restrict to one group or one target name. Empty runs everything.
  std::string only;
  int seeds = 5;
  std::uint64_t base_seed = 0;
  /// Parameters sampled in the end-to-end model check.
  std::size_t model_samples = 128;
};

std::vector<std::string> grad_check_groups();

/// Runs the 64-bit gradient checks. Each target reports its worst error over
/// all seeds. on_result fires as each target finishes.
/// Throws ConfigError if `only` matches nothing.
std::vector<GradCheckResult> run_grad_check_suite(const GradCheckSuiteOptions& opts,
                                                  const std::function<void(const GradCheckResult&)>& on_result = {});

}  // namespace dacg
