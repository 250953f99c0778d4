#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "mfpt/model/network.hpp"
#include "mfpt/nn/graph.hpp"

using mfpt::Tensor;
using mfpt::model::FfrpNodes;
using mfpt::model::HeadChannelSplit;
using mfpt::nn::Graph;

namespace {

Tensor random_tensor(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    Tensor t(rows, cols);
    for (size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

struct FfrpProblem {
    HeadChannelSplit split;
    int group_length = 2;
    std::vector<Tensor> inputs;  // x_r, wq_h, wk_h, wv_h, wq_l, wk_l, wv_l, t_f, t_m
    Tensor weighting;            // fixed projection to a scalar objective
};

FfrpProblem make_problem(unsigned long seed) {
    const int channels = 4, length = 6;
    FfrpProblem p;
    p.split = mfpt::model::split_heads_channels(4, channels, 0.75);  // (3,1,3,1)
    std::mt19937_64 rng(seed);
    p.inputs.push_back(random_tensor(rng, channels, length));            // x_r
    p.inputs.push_back(random_tensor(rng, p.split.channels_high, channels));
    p.inputs.push_back(random_tensor(rng, p.split.channels_high, channels));
    p.inputs.push_back(random_tensor(rng, p.split.channels_high, channels));
    p.inputs.push_back(random_tensor(rng, p.split.channels_low, channels));
    p.inputs.push_back(random_tensor(rng, p.split.channels_low, channels));
    p.inputs.push_back(random_tensor(rng, p.split.channels_low, channels));
    p.inputs.push_back(random_tensor(rng, channels, 1));                 // filter token
    p.inputs.push_back(random_tensor(rng, channels, channels));          // matching token
    p.weighting = random_tensor(rng, channels, length);
    return p;
}

double objective(const FfrpProblem& p, const std::vector<Tensor>& inputs,
                 std::vector<double>* grads_out) {
    Graph g;
    const bool with_grad = grads_out != nullptr;
    std::vector<int> ids;
    for (const auto& t : inputs) ids.push_back(g.leaf(t, with_grad));
    FfrpNodes nodes;
    nodes.wq_high = ids[1];
    nodes.wk_high = ids[2];
    nodes.wv_high = ids[3];
    nodes.wq_low = ids[4];
    nodes.wk_low = ids[5];
    nodes.wv_low = ids[6];
    nodes.filter_token = ids[7];
    nodes.matching_token = ids[8];
    const int out = mfpt::model::build_ffrp(g, ids[0], nodes, p.split, p.group_length);
    const int loss = g.sum_all(g.mul(out, g.constant(p.weighting)));
    const double value = g.val(loss)(0, 0);
    if (grads_out) {
        g.backward(loss);
        grads_out->clear();
        for (int id : ids) {
            const Tensor& gt = g.grad(id);
            for (size_t i = 0; i < gt.size(); ++i) grads_out->push_back(gt[i]);
        }
    }
    return value;
}

}  // namespace

TEST_CASE("full feature-prompter block matches central finite differences") {
    const FfrpProblem p = make_problem(2024);
    std::vector<double> analytic;
    objective(p, p.inputs, &analytic);

    const double step = 1e-6;
    double max_rel_err = 0.0;
    size_t flat = 0;
    for (size_t k = 0; k < p.inputs.size(); ++k) {
        for (size_t i = 0; i < p.inputs[k].size(); ++i, ++flat) {
            std::vector<Tensor> plus = p.inputs;
            std::vector<Tensor> minus = p.inputs;
            plus[k][i] += step;
            minus[k][i] -= step;
            const double numeric =
                (objective(p, plus, nullptr) - objective(p, minus, nullptr)) / (2.0 * step);
            const double denom =
                std::max({std::fabs(numeric), std::fabs(analytic[flat]), 1e-8});
            max_rel_err = std::max(max_rel_err, std::fabs(numeric - analytic[flat]) / denom);
        }
    }
    INFO("max relative error " << max_rel_err);
    CHECK(max_rel_err <= 1e-4);
}

TEST_CASE("gradients vanish for tokens the gate guards") {
    // A zero column in x_hlr carries no gradient through the cosine gate.
    Graph g;
    Tensor x(3, 2);
    x(0, 1) = 1.0;
    x(1, 1) = 2.0;
    Tensor t(3, 1);
    t.fill(0.5);
    Tensor r(3, 2);
    r.fill(1.0);
    const int xs = g.leaf(x, true);
    const int ts = g.leaf(t, true);
    const int rs = g.leaf(r, false);
    const int sim = g.cos_sim_cols(xs, ts);
    const int out = g.sum_all(g.scale_cols(rs, sim));
    g.backward(out);
    for (int row = 0; row < 3; ++row) CHECK(g.grad(xs)(row, 0) == 0.0);
    CHECK(g.grad(xs)(0, 1) != 0.0);
}
