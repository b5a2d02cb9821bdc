#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "metarule/errors.hpp"
#include "metarule/gradient.hpp"
#include "metarule/policy.hpp"

namespace metarule {

struct NamedView {
  std::string name;
  std::span<double> data;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

struct ConstNamedView {
  std::string name;
  std::span<const double> data;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

// Flat views of every tensor in checkpoint order: policy then critic.
inline std::vector<NamedView> tensor_views(PolicyParams& p, CriticParams& c) {
  std::vector<NamedView> out;
  auto add = [&](const char* name, auto& t) {
    out.push_back({name, std::span<double>(t.data(), static_cast<std::size_t>(t.size())), t.rows(), t.cols()});
  };
  PolicyParams::for_each_tensor(p, add);
  CriticParams::for_each_tensor(c, add);
  return out;
}

inline std::vector<ConstNamedView> tensor_views(const PolicyParams& p, const CriticParams& c) {
  std::vector<ConstNamedView> out;
  auto add = [&](const char* name, const auto& t) {
    out.push_back({name, std::span<const double>(t.data(), static_cast<std::size_t>(t.size())), t.rows(), t.cols()});
  };
  PolicyParams::for_each_tensor(p, add);
  CriticParams::for_each_tensor(c, add);
  return out;
}

inline std::vector<NamedView> tensor_views(ModelParams& m) { return tensor_views(m.policy, m.critic); }
inline std::vector<ConstNamedView> tensor_views(const ModelParams& m) { return tensor_views(m.policy, m.critic); }

enum class OptimizerKind { Sgd, Adam };

struct AdamState {
  ModelParams first{PolicyParams::zeros(), CriticParams::zeros()};
  ModelParams second{PolicyParams::zeros(), CriticParams::zeros()};
  std::uint64_t steps = 0;
};

struct Optimizer {
  OptimizerKind kind = OptimizerKind::Sgd;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  AdamState adam;

  // Descends the loss by one step.
  void apply(ModelParams& params, const Gradients& grad) {
    if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
    auto p = tensor_views(params);
    const auto g = tensor_views(grad.policy, grad.critic);
    if (kind == OptimizerKind::Sgd) {
      for (std::size_t k = 0; k < p.size(); ++k) {
        for (std::size_t i = 0; i < p[k].data.size(); ++i) p[k].data[i] -= learning_rate * g[k].data[i];
      }
      return;
    }
    ++adam.steps;
    auto m = tensor_views(adam.first);
    auto v = tensor_views(adam.second);
    const double t = static_cast<double>(adam.steps);
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t k = 0; k < p.size(); ++k) {
      for (std::size_t i = 0; i < p[k].data.size(); ++i) {
        const double gi = g[k].data[i];
        m[k].data[i] = beta1 * m[k].data[i] + (1.0 - beta1) * gi;
        v[k].data[i] = beta2 * v[k].data[i] + (1.0 - beta2) * gi * gi;
        p[k].data[i] -= learning_rate * (m[k].data[i] / c1) / (std::sqrt(v[k].data[i] / c2) + epsilon);
      }
    }
  }
};

}  // namespace metarule
