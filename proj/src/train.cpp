// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include "dacg/train.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>

#include "dacg/rng.hpp"

namespace dacg {

void TrainConfig::validate() const {
  if (!(lr0 >= 0.0) || !(lr_min >= 0.0)) throw ConfigError("train: lr0 and lr_min must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train: betas must be in [0, 1)");
  }
  if (!(eps_adam > 0.0)) throw ConfigError("train: eps_adam must be > 0");
  if (batch < 1) throw ConfigError("train: batch must be >= 1");
  if (steps < 1) throw ConfigError("train: steps must be >= 1");
  if (!(lambda_fourier >= 0.0)) throw ConfigError("train: lambda_fourier must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("train: checkpoint_every must be >= 0");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr0", c.lr0},           {"beta1", c.beta1},   {"beta2", c.beta2},
          {"eps_adam", c.eps_adam}, {"batch", c.batch},   {"steps", c.steps},
          {"lambda_fourier", c.lambda_fourier},           {"lr_min", c.lr_min},
          {"seed", c.seed},         {"checkpoint_every", c.checkpoint_every}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "lr0") c.lr0 = v.get<double>();
      else if (key == "beta1") c.beta1 = v.get<double>();
      else if (key == "beta2") c.beta2 = v.get<double>();
      else if (key == "eps_adam") c.eps_adam = v.get<double>();
      else if (key == "batch") c.batch = v.get<int>();
      else if (key == "steps") c.steps = v.get<int>();
      else if (key == "lambda_fourier") c.lambda_fourier = v.get<double>();
      else if (key == "lr_min") c.lr_min = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "checkpoint_every") c.checkpoint_every = v.get<int>();
      else throw ConfigError("train config: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("train config: bad value for '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

template <class T>
Tensor<T> loss_rgb_fourier(const Tensor<T>& pred, const Tensor<T>& target, T lambda) {
  if (!(pred.shape() == target.shape())) {
    throw DimensionError("loss: prediction " + pred.shape().str() + " vs target " + target.shape().str());
  }
  const Tensor<T> delta = sub(pred, target);
  Tensor<T> loss = mean(abs(delta));
  if (lambda != T(0)) {
    const ComplexMap<T> z = fft2d(delta);
    loss = add(loss, scale(add(mean(abs(z.real)), mean(abs(z.imag))), lambda));
  }
  return loss;
}

template Tensor<float> loss_rgb_fourier(const Tensor<float>&, const Tensor<float>&, float);
template Tensor<double> loss_rgb_fourier(const Tensor<double>&, const Tensor<double>&, double);

double cosine_lr(long t, long total, double lr0, double lr_min) {
  if (total <= 0 || t >= total) return lr_min;
  if (t <= 0) return lr0;
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) / total));
}

template <class T>
void adam_step(ParamStore<T>& ps, AdamState<T>& st, double lr, const TrainConfig& cfg) {
  const auto& entries = ps.entries();
  if (st.m.empty()) {
    for (const auto& e : entries) {
      st.m.emplace_back(e.second.numel(), T(0));
      st.v.emplace_back(e.second.numel(), T(0));
    }
  }
  if (st.m.size() != entries.size()) throw UsageError("adam: optimizer state does not match the parameter set");
  for (const auto& [name, p] : entries) {
    if (!p.has_grad()) throw UsageError("adam: parameter '" + name + "' has no gradient");
  }
  ++st.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T step = static_cast<T>(lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(cfg.eps_adam);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    Tensor<T> p = entries[k].second;
    const std::vector<T> g = p.grad();
    auto& w = p.values();
    auto& m = st.m[k];
    auto& v = st.v[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      w[i] -= step * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
    }
  }
}

template void adam_step(ParamStore<float>&, AdamState<float>&, double, const TrainConfig&);
template void adam_step(ParamStore<double>&, AdamState<double>&, double, const TrainConfig&);

nlohmann::json to_json(const StepRecord& r) {
  return {{"step", r.step}, {"lr", r.lr}, {"loss", r.loss}, {"wall_ms", r.wall_ms}};
}

template <class T>
Checkpoint make_training_checkpoint(const Model<T>& model, const AdamState<T>& adam, long step,
                                    const TrainConfig& cfg) {
  Checkpoint ckpt = make_checkpoint(model, {{"step", step}, {"adam_t", adam.t}, {"train", to_json(cfg)}});
  const auto& entries = model.params().entries();
  if (!adam.m.empty()) {
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& [name, p] = entries[k];
      ckpt.tensors.push_back({"adam.m/" + name, p.shape(), std::vector<float>(adam.m[k].begin(), adam.m[k].end())});
      ckpt.tensors.push_back({"adam.v/" + name, p.shape(), std::vector<float>(adam.v[k].begin(), adam.v[k].end())});
    }
  }
  return ckpt;
}

template Checkpoint make_training_checkpoint(const Model<float>&, const AdamState<float>&, long, const TrainConfig&);
template Checkpoint make_training_checkpoint(const Model<double>&, const AdamState<double>&, long, const TrainConfig&);

namespace {

template <class T>
bool all_finite(const std::vector<T>& v) {
  for (T x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

template <class T>
std::string first_non_finite(const Model<T>& model, const Tensor<T>& input, const Tensor<T>& pred) {
  if (!all_finite(input.values())) return "input batch";
  for (const auto& [name, p] : model.params().entries()) {
    if (!all_finite(p.values())) return "parameter '" + name + "'";
  }
  if (!all_finite(pred.values())) return "prediction";
  return "loss";
}

template <class T>
AdamState<T> restore_training(Model<T>& model, const Checkpoint& ckpt, long& step) {
  if (!(ckpt.config == model.config())) {
    throw ConfigError("resume: checkpoint model config differs from the requested model");
  }
  restore_tensors(model.params(), ckpt);
  AdamState<T> st;
  step = ckpt.state.value("step", 0L);
  st.t = ckpt.state.value("adam_t", 0L);
  if (st.t > 0) {
    for (const auto& [name, p] : model.params().entries()) {
      const NamedArray* m = ckpt.find("adam.m/" + name);
      const NamedArray* v = ckpt.find("adam.v/" + name);
      if (m == nullptr || v == nullptr) throw ConfigError("resume: checkpoint lacks optimizer state for '" + name + "'");
      if (!(m->shape == p.shape()) || !(v->shape == p.shape())) {
        throw ConfigError("resume: optimizer state shape mismatch for '" + name + "'");
      }
      st.m.emplace_back(m->values.begin(), m->values.end());
      st.v.emplace_back(v->values.begin(), v->values.end());
    }
  }
  return st;
}

}  // namespace

template <class T>
TrainingReport train_loop(Model<T>& model, const std::vector<ImagePair>& pairs, const TrainConfig& cfg,
                          const TrainOptions& opts) {
  cfg.validate();
  if (pairs.empty()) throw DataError("train: dataset is empty");
  using Clock = std::chrono::steady_clock;
  const auto t_start = Clock::now();

  long step = 0;
  AdamState<T> adam;
  if (opts.resume_from) adam = restore_training(model, load_checkpoint(*opts.resume_from), step);

  const long last = opts.stop_after > 0 ? std::min<long>(opts.stop_after, cfg.steps) : cfg.steps;
  const double lr_min = cfg.effective_lr_min();
  TrainingReport report;

  const auto save = [&](const std::string& name) {
    if (!opts.out_dir) return;
    const auto path = *opts.out_dir / name;
    save_checkpoint(path, make_training_checkpoint(model, adam, step, cfg));
    report.checkpoints.push_back(path);
  };

  while (step < last) {
    ++step;
    const auto t0 = Clock::now();
    Rng rng(Rng::mix(cfg.seed, static_cast<std::uint64_t>(step)));
    std::vector<ImageBuffer> degraded, clean;
    for (int b = 0; b < cfg.batch; ++b) {
      const auto& pair = pairs[rng.below(pairs.size())];
      degraded.push_back(pair.degraded);
      clean.push_back(pair.clean);
    }
    const Tensor<T> input = to_tensor<T>(degraded);
    const Tensor<T> target = to_tensor<T>(clean);
    const double lr = cosine_lr(step - 1, cfg.steps, cfg.lr0, lr_min);

    model.params().zero_grad();
    const Tensor<T> pred = model(input);
    const Tensor<T> loss = loss_rgb_fourier(pred, target, static_cast<T>(cfg.lambda_fourier));
    const double value = static_cast<double>(loss.item());
    if (!std::isfinite(value)) {
      throw NumericalError("step " + std::to_string(step) + ": loss is " + std::to_string(value) +
                           "; first non-finite tensor: " + first_non_finite(model, input, pred));
    }
    loss.backward();
    for (const auto& [name, p] : model.params().entries()) {
      if (!all_finite(p.grad())) {
        throw NumericalError("step " + std::to_string(step) + ": first non-finite tensor: gradient of '" + name + "'");
      }
    }
    adam_step(model.params(), adam, lr, cfg);

    StepRecord rec{step, lr, value, std::chrono::duration<double, std::milli>(Clock::now() - t0).count()};
    report.records.push_back(rec);
    if (opts.report != nullptr) *opts.report << to_json(rec).dump() << '\n' << std::flush;
    if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step != last) {
      save("step_" + std::to_string(step));
    }
  }
  save("final");
  report.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t_start).count();
  return report;
}

template TrainingReport train_loop(Model<float>&, const std::vector<ImagePair>&, const TrainConfig&,
                                   const TrainOptions&);
template TrainingReport train_loop(Model<double>&, const std::vector<ImagePair>&, const TrainConfig&,
                                   const TrainOptions&);

}  // namespace dacg
