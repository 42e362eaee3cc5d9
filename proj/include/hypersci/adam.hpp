#pragma once

#include <cstdint>
#include <vector>

#include "hypersci/tensor.hpp"

namespace hypersci {

// Adam with bias correction. Moment buffers are keyed by position in the
// parameter list, which must stay stable across steps.
class AdamState {
public:
    explicit AdamState(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                       double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);

    std::int64_t step_count() const { return t_; }
    double learning_rate() const { return lr_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

}  // namespace hypersci
