#include "mfpt/train/optimizer.hpp"

#include <cmath>

namespace mfpt::train {

AdamW::AdamW(double learning_rate, double beta1, double beta2, double weight_decay,
             double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), weight_decay_(weight_decay),
      eps_(eps) {}

void AdamW::step(nn::ParamStore& store) {
    if (m_.empty()) {
        m_.resize(store.count());
        v_.resize(store.count());
        for (size_t i = 0; i < store.count(); ++i) {
            const nn::Param& p = store.at(static_cast<int>(i));
            if (!p.trainable) continue;
            m_[i] = Tensor(p.value.rows(), p.value.cols());
            v_[i] = Tensor(p.value.rows(), p.value.cols());
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < store.count(); ++i) {
        nn::Param& p = store.at(static_cast<int>(i));
        if (!p.trainable) continue;
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (size_t k = 0; k < p.value.size(); ++k) {
            const double g = p.grad[k];
            m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
            v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            p.value[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            p.value[k] -= lr_ * weight_decay_ * p.value[k];
        }
    }
}

}  // namespace mfpt::train
