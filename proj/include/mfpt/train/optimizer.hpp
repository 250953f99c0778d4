#pragma once

#include <vector>

#include "mfpt/nn/params.hpp"

namespace mfpt::train {

// AdamW with decoupled weight decay. Only trainable parameters are touched;
// a zero learning rate leaves every parameter bit-identical.
class AdamW {
public:
    AdamW(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
          double weight_decay = 0.01, double eps = 1e-8);

    void step(nn::ParamStore& store);

    int iterations_done() const { return t_; }

private:
    double lr_;
    double beta1_;
    double beta2_;
    double weight_decay_;
    double eps_;
    int t_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

}  // namespace mfpt::train
