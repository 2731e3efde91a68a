// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <json.hpp>

#include "dacg/checkpoint.hpp"
#include "dacg/degrade.hpp"
#include "dacg/model.hpp"

namespace dacg {

struct TrainConfig {
  double lr0 = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  int batch = 4;
  int steps = 500;
  double lambda_fourier = 0.1;
  double lr_min = 1e-6;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // 0: final checkpoint only

  /// lr_min above lr0 is lowered to lr0, so lr0 = 0 freezes the model.
  double effective_lr_min() const { return std::min(lr_min, lr0); }
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// mean|pred - target| + lambda * mean(|Re D| + |Im D|), D = fft2d(pred - target)
/// per (image, channel) plane.
template <class T>
Tensor<T> loss_rgb_fourier(const Tensor<T>& pred, const Tensor<T>& target, T lambda);

/// lr_min + (lr0 - lr_min)(1 + cos(pi t / T)) / 2; t beyond T gives lr_min.
double cosine_lr(long t, long total, double lr0, double lr_min);

template <class T>
struct AdamState {
  long t = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

/// Bias-corrected Adam over every parameter of ps. Throws UsageError naming
/// the first parameter without a gradient.
template <class T>
void adam_step(ParamStore<T>& ps, AdamState<T>& state, double lr, const TrainConfig& cfg);

struct StepRecord {
  long step = 0;  // 1-based
  double lr = 0.0;
  double loss = 0.0;
  double wall_ms = 0.0;
};

nlohmann::json to_json(const StepRecord& r);

struct TrainingReport {
  std::vector<StepRecord> records;
  std::vector<std::filesystem::path> checkpoints;
  double wall_ms = 0.0;
};

struct TrainOptions {
  /// Checkpoints go to <out_dir>/step_<k> and <out_dir>/final when set.
  std::optional<std::filesystem::path> out_dir;
  /// One JSON object per step.
  std::ostream* report = nullptr;
  /// Resume from this checkpoint (weights, optimizer moments, step).
  std::optional<std::filesystem::path> resume_from;
  /// Stop after this step even if cfg.steps is larger (the schedule still
  /// spans cfg.steps). 0: run to cfg.steps.
  long stop_after = 0;
};

/// Step s (1-based) draws its batch from Rng(Rng::mix(cfg.seed, s)), so a run
/// resumed at step k replays steps k+1.. exactly. Throws NumericalError naming
/// the first non-finite tensor when the loss stops being finite.
template <class T>
TrainingReport train_loop(Model<T>& model, const std::vector<ImagePair>& pairs, const TrainConfig& cfg,
                          const TrainOptions& opts = {});

/// Checkpoint with weights, Adam moments ("adam.m/<name>", "adam.v/<name>")
/// and {"step", "adam_t", "train"} in its state.
template <class T>
Checkpoint make_training_checkpoint(const Model<T>& model, const AdamState<T>& adam, long step,
                                    const TrainConfig& cfg);

}  // namespace dacg
