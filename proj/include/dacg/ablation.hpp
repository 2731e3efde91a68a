// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dacg/model.hpp"

namespace dacg {

struct AblationOptions {
  ModelConfig base = ModelConfig::preset("tiny");
  /// Skip training: parameters and one forward/backward only.
  bool dry_run = false;
  int steps = 50;
  double lr0 = 2e-3;
  int train_pairs = 32;
  int eval_pairs = 8;
  int patch = 32;
  double sigma = 25.0;
  std::uint64_t seed = 0;
};

struct AblationRow {
  std::string label;
  std::string description;
  std::size_t params = 0;
  /// Sum of |grad| over all parameters after one backward on 1x3x32x32.
  double grad_l1 = 0.0;
  std::optional<double> final_loss;
  std::optional<double> psnr;
};

std::vector<AblationRow> run_ablation(const AblationOptions& opts,
                                      const std::function<void(const AblationRow&)>& on_row = {});

}  // namespace dacg
