// nn/adam.hpp

#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "btseg/nn/core.hpp"

namespace btseg::nn {

// Adam with a constant learning rate. First/second moments are kept in
// double regardless of the parameter type.
template <typename T>
class Adam {
  public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::span<ParamView<T>> params) {
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.emplace_back(p.size, 0.0);
                v_.emplace_back(p.size, 0.0);
            }
        }
        if (m_.size() != params.size())
            throw std::runtime_error("Adam: parameter set changed");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i];
            double* m = m_[i].data();
            double* v = v_[i].data();
            for (size_t j = 0; j < p.size; ++j) {
                const double g = static_cast<double>(p.grad[j]);
                m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
                v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
                const double update =
                    lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
                p.value[j] = static_cast<T>(static_cast<double>(p.value[j]) -
                                            update);
            }
        }
    }

    long steps() const { return t_; }

  private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace btseg::nn
