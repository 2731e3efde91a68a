// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dacg/rng.hpp"
#include "dacg/tensor.hpp"

namespace dacg {

enum class Init { fan_in_uniform, zeros, ones };

/// Ordered, uniquely named learnable tensors.
///
/// Initial values are drawn in construction order from a single seeded
/// stream in double precision, so a float and a double store built from the
/// same sequence of add() calls hold the same weights up to rounding.
template <class T>
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed), rng_(seed) {}

  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  /// fan_in scales the uniform bound 1/sqrt(fan_in).
  Tensor<T> add(const std::string& name, Shape shape, Init init, int fan_in = 1) {
    if (index_.count(name) != 0) throw ConfigError("duplicate parameter name '" + name + "'");
    std::vector<T> values(shape.numel(), T(0));
    if (init == Init::ones) {
      std::fill(values.begin(), values.end(), T(1));
    } else if (init == Init::fan_in_uniform) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
      for (auto& v : values) v = static_cast<T>(rng_.uniform(-bound, bound));
    }
    Tensor<T> t(shape, std::move(values), true);
    index_.emplace(name, entries_.size());
    entries_.emplace_back(name, t);
    return t;
  }

  const std::vector<std::pair<std::string, Tensor<T>>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  Tensor<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &entries_[it->second].second;
  }
  const Tensor<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &entries_[it->second].second;
  }
  Tensor<T>& at(const std::string& name) {
    Tensor<T>* t = find(name);
    if (t == nullptr) throw UsageError("no parameter named '" + name + "'");
    return *t;
  }

  /// Total number of scalar parameters.
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.second.numel();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) e.second.zero_grad();
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  Rng rng_;
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace dacg
