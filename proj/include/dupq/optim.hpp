#pragma once

#include "dupq/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace dupq {

enum class OptimizerKind { kAdam, kSgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

OptimizerKind parse_optimizer(const std::string& name);
std::string to_string(OptimizerKind kind);

template <typename Scalar>
using ParamBlock = Eigen::Map<Vector<Scalar>>;
template <typename Scalar>
using ConstParamBlock = Eigen::Map<const Vector<Scalar>>;

template <typename Derived>
auto as_block(Eigen::PlainObjectBase<Derived>& m) {
  return Eigen::Map<Vector<typename Derived::Scalar>>(m.data(), m.size());
}
template <typename Derived>
auto as_block(const Eigen::PlainObjectBase<Derived>& m) {
  return Eigen::Map<const Vector<typename Derived::Scalar>>(m.data(), m.size());
}

/// First-order minimiser over a fixed list of parameter blocks (Adam with
/// bias correction, or plain SGD).
template <typename Scalar>
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, const std::vector<Eigen::Index>& block_sizes) : cfg_(cfg) {
    for (auto n : block_sizes) {
      m_.push_back(Vector<Scalar>::Zero(n));
      v_.push_back(Vector<Scalar>::Zero(n));
    }
  }

  void step(std::vector<ParamBlock<Scalar>> params, const std::vector<ConstParamBlock<Scalar>>& grads) {
    ++t_;
    const Scalar lr = Scalar(cfg_.learning_rate);
    if (cfg_.kind == OptimizerKind::kSgd) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
      return;
    }
    const Scalar b1 = Scalar(cfg_.beta1), b2 = Scalar(cfg_.beta2), eps = Scalar(cfg_.epsilon);
    const Scalar c1 = Scalar(1) - std::pow(b1, Scalar(t_));
    const Scalar c2 = Scalar(1) - std::pow(b2, Scalar(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * grads[i];
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * grads[i].cwiseAbs2();
      params[i].array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
    }
  }

 private:
  OptimizerConfig cfg_;
  long t_ = 0;
  std::vector<Vector<Scalar>> m_;
  std::vector<Vector<Scalar>> v_;
};

}  // namespace dupq
