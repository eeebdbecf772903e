#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "quill/graph.hpp"

namespace quill {

// Adaptive moment estimation with optional linear warmup over the first
// fraction of the declared total steps.
template <class S>
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Parameter<S>*> params, double lr, std::int64_t total_steps = 0,
                double warmup_fraction = 0.05, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : params_(std::move(params)),
        lr_(lr),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps),
        total_steps_(total_steps),
        warmup_steps_(total_steps > 0
                          ? std::max<std::int64_t>(
                                1, static_cast<std::int64_t>(warmup_fraction *
                                                             static_cast<double>(total_steps)))
                          : 0) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (Parameter<S>* p : params_) {
      m_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void zero_grads() {
    for (Parameter<S>* p : params_) p->zero_grad();
  }

  void step() {
    ++t_;
    double lr = lr_;
    if (warmup_steps_ > 0 && t_ <= warmup_steps_) {
      lr = lr_ * static_cast<double>(t_) / static_cast<double>(warmup_steps_);
    } else if (total_steps_ > warmup_steps_ && t_ <= total_steps_) {
      // cosine decay to 10% of the base rate over the declared run
      const double progress = static_cast<double>(t_ - warmup_steps_) /
                              static_cast<double>(total_steps_ - warmup_steps_);
      lr = lr_ * (0.1 + 0.9 * 0.5 * (1.0 + std::cos(progress * 3.14159265358979323846)));
    } else if (total_steps_ > 0 && t_ > total_steps_) {
      lr = lr_ * 0.1;
    }
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const S alpha = static_cast<S>(lr * std::sqrt(bc2) / bc1);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Parameter<S>* p = params_[i];
      m_[i] = S(beta1_) * m_[i] + S(1 - beta1_) * p->grad;
      v_[i].array() = S(beta2_) * v_[i].array() + S(1 - beta2_) * p->grad.array().square();
      p->value.array() -=
          alpha * m_[i].array() / (v_[i].array().sqrt() + S(eps_ * std::sqrt(bc2)));
    }
  }

  std::int64_t steps_taken() const { return t_; }

 private:
  std::vector<Parameter<S>*> params_;
  std::vector<Mat<S>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t total_steps_;
  std::int64_t warmup_steps_;
  std::int64_t t_ = 0;
};

}  // namespace quill
