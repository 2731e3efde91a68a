// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "dacg/layers.hpp"

namespace dacg {

struct DamConfig {
  int num_scales = 3;
  int in_channels = 48;
  int global_dim = 256;
  std::array<int, 4> stage_dims{48, 96, 192, 384};
  /// Off: only P_global is produced and the prompt stages are not built.
  bool layer_prompts = true;

  /// stage_dims = (C, 2C, 4C, 8C).
  static DamConfig for_width(int channels, int global_dim = 256, int num_scales = 3);
  void validate() const;
};

/// Depth-wise kernel size of multi-scale branch s (0-based).
constexpr int branch_kernel_size(int s) { return 2 * s + 3; }

template <class T>
struct DegradationContext {
  Tensor<T> global_feature;                // (n, D_g, 1, 1)
  std::array<Tensor<T>, 4> layer_prompts;  // (n, stage_dims[i], 1, 1); empty when disabled
};

/// Degradation-aware prompt generator.
///
/// F_in -> S depth-wise/point-wise branches -> 1x1 fuse -> spatial sigmoid
/// gate -> (mean, std) pooling -> MLP (P_global) -> chained prompts P_1..P_4.
template <class T>
class Dam {
 public:
  struct Branch {
    Conv2d<T> depthwise;
    Conv2d<T> pointwise;
  };
  struct PromptStage {
    Linear<T> proj;
    Norm<T> norm;
  };

  Dam(ParamStore<T>& ps, const std::string& prefix, DamConfig cfg);

  std::vector<Tensor<T>> multi_scale_extract(const Tensor<T>& f_in) const;

  /// Returns F_gated. When non-null, fused/gate receive F_fuse and the sigmoid mask.
  Tensor<T> fuse_and_gate(const std::vector<Tensor<T>>& branches, Tensor<T>* fused = nullptr,
                          Tensor<T>* gate = nullptr) const;

  /// (n, 2C, 1, 1): spatial means then population standard deviations.
  Tensor<T> stat_pool(const Tensor<T>& gated) const;
  Tensor<T> global_encode(const Tensor<T>& z_stat) const;
  std::array<Tensor<T>, 4> make_layer_prompts(const Tensor<T>& p_global) const;

  DegradationContext<T> operator()(const Tensor<T>& f_in) const;

  const DamConfig& config() const { return cfg_; }

  std::vector<Branch> branches;
  Conv2d<T> fuse;
  Conv2d<T> gate;
  Linear<T> mlp_in;
  Linear<T> mlp_out;
  std::array<PromptStage, 4> prompt_stages;

 private:
  DamConfig cfg_;
};

extern template class Dam<float>;
extern template class Dam<double>;

}  // namespace dacg
