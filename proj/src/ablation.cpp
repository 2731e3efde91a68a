// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include "dacg/ablation.hpp"

#include <cmath>

#include "dacg/errors.hpp"
#include "dacg/evaluate.hpp"
#include "dacg/train.hpp"

namespace dacg {

std::vector<AblationRow> run_ablation(const AblationOptions& opts,
                                      const std::function<void(const AblationRow&)>& on_row) {
  std::vector<ImagePair> train_set, eval_set;
  if (!opts.dry_run) {
    const auto spec = DegradationSpec::gaussian(opts.sigma, opts.seed);
    train_set = make_patch_set("", spec, opts.patch, opts.train_pairs, Rng::mix(opts.seed, 1));
    eval_set = make_patch_set("", spec, opts.patch, opts.eval_pairs, Rng::mix(opts.seed, 2));
  }
  const Tensor<float> probe_input = to_tensor<float>(procedural_image(32, 32, opts.seed));

  std::vector<AblationRow> rows;
  for (const auto& v : ablation_variants(opts.base)) {
    Model<float> model(v.config);
    AblationRow row;
    row.label = v.label;
    row.description = v.description;
    row.params = model.param_count();

    auto out = model(probe_input);
    sum(square(sub(out, probe_input))).backward();
    for (const auto& e : model.params().entries()) {
      if (!e.second.has_grad()) {
        throw UsageError("variant " + v.label + ": parameter '" + e.first + "' receives no gradient");
      }
      for (float g : e.second.grad()) row.grad_l1 += std::abs(g);
    }
    model.params().zero_grad();
    if (!std::isfinite(row.grad_l1)) throw NumericalError("non-finite gradient in variant " + v.label);

    if (!opts.dry_run) {
      TrainConfig tc;
      tc.lr0 = opts.lr0;
      tc.steps = opts.steps;
      tc.seed = opts.seed;
      const auto report = train_loop(model, train_set, tc);
      row.final_loss = report.records.back().loss;
      row.psnr = evaluate_pairs(model, eval_set).psnr_output;
    }
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace dacg
