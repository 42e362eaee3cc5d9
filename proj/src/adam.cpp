#include "hypersci/adam.hpp"

#include <cmath>

namespace hypersci {

void AdamState::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    if (params.size() != grads.size()) throw ShapeMismatch("adam: params/grads count mismatch");
    if (m_.empty()) {
        m_.reserve(params.size());
        v_.reserve(params.size());
        for (const Tensor* p : params) {
            m_.emplace_back(p->rows, p->cols);
            v_.emplace_back(p->rows, p->cols);
        }
    }
    if (m_.size() != params.size()) throw ShapeMismatch("adam: parameter list changed size");

    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t p = 0; p < params.size(); ++p) {
        Tensor& param = *params[p];
        const Tensor& g = grads[p];
        if (!param.same_shape(g) || !param.same_shape(m_[p]))
            throw ShapeMismatch("adam: gradient shape mismatch at param " + std::to_string(p));
        for (size_t k = 0; k < param.size(); ++k) {
            double gk = g.data[k];
            m_[p].data[k] = beta1_ * m_[p].data[k] + (1.0 - beta1_) * gk;
            v_[p].data[k] = beta2_ * v_[p].data[k] + (1.0 - beta2_) * gk * gk;
            double mhat = m_[p].data[k] / bc1;
            double vhat = v_[p].data[k] / bc2;
            param.data[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace hypersci
