#pragma once

#include <functional>
#include <vector>

#include "mfpt/core/tensor.hpp"

namespace mfpt::nn {

// Define-by-run reverse-mode autodiff over Tensor. A Graph is built per
// forward pass; backward() walks nodes in reverse creation order. Node ids
// are indices into the graph's arena, so op builders return plain ints.
//
// Layout conventions follow the rest of the toolkit: feature blocks are
// channels x tokens, image grids are height x width flattened column-major
// per row (row-major pixels).
class Graph {
public:
    int leaf(Tensor value, bool needs_grad);
    int constant(Tensor value) { return leaf(std::move(value), false); }

    // Elementwise, same shape.
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int div(int a, int b);
    // k * x + c, elementwise with scalars.
    int affine(int x, double k, double c);

    int matmul(int a, int b);        // A * B
    int matmul_at_b(int a, int b);   // A^T * B
    int matmul_a_bt(int a, int b);   // A * B^T

    // b has shape (rows x 1), broadcast across columns.
    int add_bias(int x, int b);

    int row_softmax(int x);
    int gelu(int x);
    int sigmoid(int x);
    int log(int x);
    int clamp(int x, double lo, double hi);

    // Normalizes each column over rows; gamma/beta are (rows x 1).
    int layernorm_cols(int x, int gamma, int beta, double eps = 1e-6);

    int sum_all(int x);    // 1x1
    int mean_all(int x);   // 1x1

    int slice_rows(int x, int r0, int r1);
    int concat_rows(int a, int b);
    int slice_cols(int x, int c0, int c1);
    int pad_cols_right(int x, int count);
    int concat_cols(const std::vector<int>& parts);

    // Mean over non-overlapping column windows; tail window may be shorter.
    int avgpool_cols(int x, int window);

    // Cosine similarity of every column of x (C x L) against t (C x 1),
    // producing 1 x L. Columns whose norm (or t's norm) falls below
    // norm_guard yield exactly 0 with zero gradient.
    int cos_sim_cols(int x, int t, double norm_guard = 1e-8);
    // y[:, l] = s[0, l] * x[:, l]; s is 1 x L.
    int scale_cols(int x, int s);

    // x is C x (gh * gw); result is C x (oh * ow), bilinear with half-pixel
    // centers (matches resize_bilinear).
    int bilinear_upsample(int x, int gh, int gw, int oh, int ow);

    // x: C_in x (gh * gw); w: C_out x (C_in * 9); b: C_out x 1; zero padding.
    int conv3x3(int x, int w, int b, int gh, int gw);

    const Tensor& val(int id) const { return nodes_[id].value; }
    Tensor& grad(int id);
    bool needs_grad(int id) const { return nodes_[id].needs_grad; }

    // Seeds d(root)/d(root) = seed (or ones) and propagates to all leaves.
    void backward(int root);
    void backward(int root, const Tensor& seed);

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        std::function<void(Graph&)> back;
    };

    int push(Tensor value, bool needs_grad, std::function<void(Graph&)> back);

    std::vector<Node> nodes_;
};

}  // namespace mfpt::nn
