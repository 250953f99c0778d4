#include "mfpt/nn/graph.hpp"

#include <algorithm>
#include <cmath>

#include "mfpt/core/error.hpp"

namespace mfpt::nn {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) throw NumericError(std::string("graph: shape mismatch in ") + what);
}

}  // namespace

int Graph::push(Tensor value, bool needs_grad, std::function<void(Graph&)> back) {
    Node node;
    node.value = std::move(value);
    node.needs_grad = needs_grad;
    node.back = std::move(back);
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Graph::grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
    return n.grad;
}

int Graph::leaf(Tensor value, bool needs_grad) {
    return push(std::move(value), needs_grad, nullptr);
}

int Graph::add(int a, int b) {
    check_same_shape(val(a), val(b), "add");
    Tensor out = val(a);
    const Tensor& vb = val(b);
    for (size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
    const bool ng = needs_grad(a) || needs_grad(b);
    const int id = push(std::move(out), ng, nullptr);
    nodes_[id].back = [a, b, id](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        if (g.needs_grad(a)) {
            Tensor& ga = g.grad(a);
            for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        }
        if (g.needs_grad(b)) {
            Tensor& gb = g.grad(b);
            for (size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
        }
    };
    return id;
}

int Graph::sub(int a, int b) {
    check_same_shape(val(a), val(b), "sub");
    Tensor out = val(a);
    const Tensor& vb = val(b);
    for (size_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
    const bool ng = needs_grad(a) || needs_grad(b);
    const int id = push(std::move(out), ng, nullptr);
    nodes_[id].back = [a, b, id](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        if (g.needs_grad(a)) {
            Tensor& ga = g.grad(a);
            for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        }
        if (g.needs_grad(b)) {
            Tensor& gb = g.grad(b);
            for (size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
        }
    };
    return id;
}

int Graph::mul(int a, int b) {
    check_same_shape(val(a), val(b), "mul");
    Tensor out = val(a);
    const Tensor& vb = val(b);
    for (size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
    const bool ng = needs_grad(a) || needs_grad(b);
    const int id = push(std::move(out), ng, nullptr);
    nodes_[id].back = [a, b, id](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        if (g.needs_grad(a)) {
            Tensor& ga = g.grad(a);
            const Tensor& vb2 = g.val(b);
            for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * vb2[i];
        }
        if (g.needs_grad(b)) {
            Tensor& gb = g.grad(b);
            const Tensor& va2 = g.val(a);
            for (size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * va2[i];
        }
    };
    return id;
}

int Graph::div(int a, int b) {
    check_same_shape(val(a), val(b), "div");
    Tensor out = val(a);
    const Tensor& vb = val(b);
    for (size_t i = 0; i < out.size(); ++i) out[i] /= vb[i];
    const bool ng = needs_grad(a) || needs_grad(b);
    const int id = push(std::move(out), ng, nullptr);
    nodes_[id].back = [a, b, id](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& va2 = g.val(a);
        const Tensor& vb2 = g.val(b);
        if (g.needs_grad(a)) {
            Tensor& ga = g.grad(a);
            for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i] / vb2[i];
        }
        if (g.needs_grad(b)) {
            Tensor& gb = g.grad(b);
            for (size_t i = 0; i < go.size(); ++i)
                gb[i] -= go[i] * va2[i] / (vb2[i] * vb2[i]);
        }
    };
    return id;
}

int Graph::affine(int x, double k, double c) {
    Tensor out = val(x);
    for (size_t i = 0; i < out.size(); ++i) out[i] = k * out[i] + c;
    const int id = push(std::move(out), needs_grad(x), nullptr);
    nodes_[id].back = [x, k, id](Graph& g) {
        if (!g.needs_grad(x)) return;
        const Tensor& go = g.nodes_[id].grad;
        Tensor& gx = g.grad(x);
        for (size_t i = 0; i < go.size(); ++i) gx[i] += k * go[i];
    };
    return id;
}

int Graph::matmul(int a, int b) {
    Tensor out = mfpt::matmul(val(a), val(b));
    const bool ng = needs_grad(a) || needs_grad(b);
    const int id = push(std::move(out), ng, nullptr);
    nodes_[id].back = [a, b, id](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        if (g.needs_grad(a)) matmul_a_bt_acc(go, g.val(b), g.grad(a));
        if (g.needs_grad(b)) matmul_at_b_acc(g.val(a), go, g.grad(b));
    };
    return id;
}

int Graph::matmul_at_b(int a, int b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    Tensor out(va.cols(), vb.cols());
    matmul_at_b_acc(va, vb, out);
    const bool ng = needs_grad(a) || needs_grad(b);
    const int id = push(std::move(out), ng, nullptr);
    nodes_[id].back = [a, b, id](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        // C = A^T B: dA = B dC^T, dB = A dC.
        if (g.needs_grad(a)) matmul_a_bt_acc(g.val(b), go, g.grad(a));
        if (g.needs_grad(b)) matmul_acc(g.val(a), go, g.grad(b));
    };
    return id;
}

int Graph::matmul_a_bt(int a, int b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    Tensor out(va.rows(), vb.rows());
    matmul_a_bt_acc(va, vb, out);
    const bool ng = needs_grad(a) || needs_grad(b);
    const int id = push(std::move(out), ng, nullptr);
    nodes_[id].back = [a, b, id](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        // C = A B^T: dA = dC B, dB = dC^T A.
        if (g.needs_grad(a)) matmul_acc(go, g.val(b), g.grad(a));
        if (g.needs_grad(b)) matmul_at_b_acc(go, g.val(a), g.grad(b));
    };
    return id;
}

int Graph::add_bias(int x, int b) {
    const Tensor& vx = val(x);
    const Tensor& vb = val(b);
    if (vb.rows() != vx.rows() || vb.cols() != 1) {
        throw NumericError("graph: bias must be (rows x 1)");
    }
    Tensor out = vx;
    for (int r = 0; r < out.rows(); ++r)
        for (int c = 0; c < out.cols(); ++c) out(r, c) += vb(r, 0);
    const bool ng = needs_grad(x) || needs_grad(b);
    const int id = push(std::move(out), ng, nullptr);
    nodes_[id].back = [x, b, id](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        if (g.needs_grad(x)) {
            Tensor& gx = g.grad(x);
            for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
        }
        if (g.needs_grad(b)) {
            Tensor& gb = g.grad(b);
            for (int r = 0; r < go.rows(); ++r) {
                double s = 0.0;
                for (int c = 0; c < go.cols(); ++c) s += go(r, c);
                gb(r, 0) += s;
            }
        }
    };
    return id;
}

int Graph::row_softmax(int x) {
    Tensor out = val(x);
    for (int r = 0; r < out.rows(); ++r) {
        double mx = -1e300;
        for (int c = 0; c < out.cols(); ++c) mx = std::max(mx, out(r, c));
        double denom = 0.0;
        for (int c = 0; c < out.cols(); ++c) {
            out(r, c) = std::exp(out(r, c) - mx);
            denom += out(r, c);
        }
        for (int c = 0; c < out.cols(); ++c) out(r, c) /= denom;
    }
    const int id = push(std::move(out), needs_grad(x), nullptr);
    nodes_[id].back = [x, id](Graph& g) {
        if (!g.needs_grad(x)) return;
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& y = g.val(id);
        Tensor& gx = g.grad(x);
        for (int r = 0; r < y.rows(); ++r) {
            double dot = 0.0;
            for (int c = 0; c < y.cols(); ++c) dot += go(r, c) * y(r, c);
            for (int c = 0; c < y.cols(); ++c)
                gx(r, c) += y(r, c) * (go(r, c) - dot);
        }
    };
    return id;
}

int Graph::gelu(int x) {
    Tensor out = val(x);
    for (size_t i = 0; i < out.size(); ++i) {
        const double v = out[i];
        out[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    }
    const int id = push(std::move(out), needs_grad(x), nullptr);
    nodes_[id].back = [x, id](Graph& g) {
        if (!g.needs_grad(x)) return;
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& vx = g.val(x);
        Tensor& gx = g.grad(x);
        for (size_t i = 0; i < go.size(); ++i) {
            const double v = vx[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
            gx[i] += go[i] * (cdf + v * pdf);
        }
    };
    return id;
}

int Graph::sigmoid(int x) {
    Tensor out = val(x);
    for (size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    const int id = push(std::move(out), needs_grad(x), nullptr);
    nodes_[id].back = [x, id](Graph& g) {
        if (!g.needs_grad(x)) return;
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& y = g.val(id);
        Tensor& gx = g.grad(x);
        for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * y[i] * (1.0 - y[i]);
    };
    return id;
}

int Graph::log(int x) {
    Tensor out = val(x);
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
    const int id = push(std::move(out), needs_grad(x), nullptr);
    nodes_[id].back = [x, id](Graph& g) {
        if (!g.needs_grad(x)) return;
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& vx = g.val(x);
        Tensor& gx = g.grad(x);
        for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i] / vx[i];
    };
    return id;
}

int Graph::clamp(int x, double lo, double hi) {
    Tensor out = val(x);
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], lo, hi);
    const int id = push(std::move(out), needs_grad(x), nullptr);
    nodes_[id].back = [x, lo, hi, id](Graph& g) {
        if (!g.needs_grad(x)) return;
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& vx = g.val(x);
        Tensor& gx = g.grad(x);
        for (size_t i = 0; i < go.size(); ++i)
            if (vx[i] > lo && vx[i] < hi) gx[i] += go[i];
    };
    return id;
}

int Graph::layernorm_cols(int x, int gamma, int beta, double eps) {
    const Tensor& vx = val(x);
    const Tensor& vg = val(gamma);
    const Tensor& vb = val(beta);
    const int rows = vx.rows(), cols = vx.cols();
    if (vg.rows() != rows || vg.cols() != 1 || vb.rows() != rows || vb.cols() != 1) {
        throw NumericError("graph: layernorm gamma/beta must be (rows x 1)");
    }
    Tensor xhat(rows, cols);
    Tensor inv_std(1, cols);
    Tensor out(rows, cols);
    for (int c = 0; c < cols; ++c) {
        double mean = 0.0;
        for (int r = 0; r < rows; ++r) mean += vx(r, c);
        mean /= rows;
        double var = 0.0;
        for (int r = 0; r < rows; ++r) {
            const double d = vx(r, c) - mean;
            var += d * d;
        }
        var /= rows;
        const double istd = 1.0 / std::sqrt(var + eps);
        inv_std(0, c) = istd;
        for (int r = 0; r < rows; ++r) {
            xhat(r, c) = (vx(r, c) - mean) * istd;
            out(r, c) = vg(r, 0) * xhat(r, c) + vb(r, 0);
        }
    }
    const bool ng = needs_grad(x) || needs_grad(gamma) || needs_grad(beta);
    const int id = push(std::move(out), ng, nullptr);
    nodes_[id].back = [x, gamma, beta, id, xhat, inv_std](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& vg2 = g.val(gamma);
        const int rows = go.rows(), cols = go.cols();
        if (g.needs_grad(beta)) {
            Tensor& gb = g.grad(beta);
            for (int r = 0; r < rows; ++r) {
                double s = 0.0;
                for (int c = 0; c < cols; ++c) s += go(r, c);
                gb(r, 0) += s;
            }
        }
        if (g.needs_grad(gamma)) {
            Tensor& gg = g.grad(gamma);
            for (int r = 0; r < rows; ++r) {
                double s = 0.0;
                for (int c = 0; c < cols; ++c) s += go(r, c) * xhat(r, c);
                gg(r, 0) += s;
            }
        }
        if (g.needs_grad(x)) {
            Tensor& gx = g.grad(x);
            for (int c = 0; c < cols; ++c) {
                double mean_d = 0.0, mean_dx = 0.0;
                for (int r = 0; r < rows; ++r) {
                    const double dxh = go(r, c) * vg2(r, 0);
                    mean_d += dxh;
                    mean_dx += dxh * xhat(r, c);
                }
                mean_d /= rows;
                mean_dx /= rows;
                for (int r = 0; r < rows; ++r) {
                    const double dxh = go(r, c) * vg2(r, 0);
                    gx(r, c) += inv_std(0, c) * (dxh - mean_d - xhat(r, c) * mean_dx);
                }
            }
        }
    };
    return id;
}

int Graph::sum_all(int x) {
    Tensor out(1, 1);
    out(0, 0) = val(x).sum();
    const int id = push(std::move(out), needs_grad(x), nullptr);
    nodes_[id].back = [x, id](Graph& g) {
        if (!g.needs_grad(x)) return;
        const double go = g.nodes_[id].grad(0, 0);
        Tensor& gx = g.grad(x);
        for (size_t i = 0; i < gx.size(); ++i) gx[i] += go;
    };
    return id;
}

int Graph::mean_all(int x) {
    const double n = static_cast<double>(val(x).size());
    Tensor out(1, 1);
    out(0, 0) = val(x).sum() / n;
    const int id = push(std::move(out), needs_grad(x), nullptr);
    nodes_[id].back = [x, n, id](Graph& g) {
        if (!g.needs_grad(x)) return;
        const double go = g.nodes_[id].grad(0, 0) / n;
        Tensor& gx = g.grad(x);
        for (size_t i = 0; i < gx.size(); ++i) gx[i] += go;
    };
    return id;
}

int Graph::slice_rows(int x, int r0, int r1) {
    const Tensor& vx = val(x);
    Tensor out(r1 - r0, vx.cols());
    for (int r = r0; r < r1; ++r)
        for (int c = 0; c < vx.cols(); ++c) out(r - r0, c) = vx(r, c);
    const int id = push(std::move(out), needs_grad(x), nullptr);
    nodes_[id].back = [x, r0, id](Graph& g) {
        if (!g.needs_grad(x)) return;
        const Tensor& go = g.nodes_[id].grad;
        Tensor& gx = g.grad(x);
        for (int r = 0; r < go.rows(); ++r)
            for (int c = 0; c < go.cols(); ++c) gx(r + r0, c) += go(r, c);
    };
    return id;
}

int Graph::concat_rows(int a, int b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    if (va.cols() != vb.cols()) throw NumericError("graph: concat_rows column mismatch");
    Tensor out(va.rows() + vb.rows(), va.cols());
    for (int r = 0; r < va.rows(); ++r)
        for (int c = 0; c < va.cols(); ++c) out(r, c) = va(r, c);
    for (int r = 0; r < vb.rows(); ++r)
        for (int c = 0; c < vb.cols(); ++c) out(r + va.rows(), c) = vb(r, c);
    const bool ng = needs_grad(a) || needs_grad(b);
    const int split = va.rows();
    const int id = push(std::move(out), ng, nullptr);
    nodes_[id].back = [a, b, split, id](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        if (g.needs_grad(a)) {
            Tensor& ga = g.grad(a);
            for (int r = 0; r < split; ++r)
                for (int c = 0; c < go.cols(); ++c) ga(r, c) += go(r, c);
        }
        if (g.needs_grad(b)) {
            Tensor& gb = g.grad(b);
            for (int r = split; r < go.rows(); ++r)
                for (int c = 0; c < go.cols(); ++c) gb(r - split, c) += go(r, c);
        }
    };
    return id;
}

int Graph::slice_cols(int x, int c0, int c1) {
    const Tensor& vx = val(x);
    Tensor out(vx.rows(), c1 - c0);
    for (int r = 0; r < vx.rows(); ++r)
        for (int c = c0; c < c1; ++c) out(r, c - c0) = vx(r, c);
    const int id = push(std::move(out), needs_grad(x), nullptr);
    nodes_[id].back = [x, c0, id](Graph& g) {
        if (!g.needs_grad(x)) return;
        const Tensor& go = g.nodes_[id].grad;
        Tensor& gx = g.grad(x);
        for (int r = 0; r < go.rows(); ++r)
            for (int c = 0; c < go.cols(); ++c) gx(r, c + c0) += go(r, c);
    };
    return id;
}

int Graph::pad_cols_right(int x, int count) {
    const Tensor& vx = val(x);
    Tensor out(vx.rows(), vx.cols() + count);
    for (int r = 0; r < vx.rows(); ++r)
        for (int c = 0; c < vx.cols(); ++c) out(r, c) = vx(r, c);
    const int keep = vx.cols();
    const int id = push(std::move(out), needs_grad(x), nullptr);
    nodes_[id].back = [x, keep, id](Graph& g) {
        if (!g.needs_grad(x)) return;
        const Tensor& go = g.nodes_[id].grad;
        Tensor& gx = g.grad(x);
        for (int r = 0; r < go.rows(); ++r)
            for (int c = 0; c < keep; ++c) gx(r, c) += go(r, c);
    };
    return id;
}

int Graph::concat_cols(const std::vector<int>& parts) {
    if (parts.empty()) throw NumericError("graph: concat_cols with no parts");
    const int rows = val(parts[0]).rows();
    int total = 0;
    bool ng = false;
    for (int p : parts) {
        if (val(p).rows() != rows) throw NumericError("graph: concat_cols row mismatch");
        total += val(p).cols();
        ng = ng || needs_grad(p);
    }
    Tensor out(rows, total);
    int off = 0;
    for (int p : parts) {
        const Tensor& vp = val(p);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < vp.cols(); ++c) out(r, off + c) = vp(r, c);
        off += vp.cols();
    }
    const int id = push(std::move(out), ng, nullptr);
    std::vector<int> parts_copy = parts;
    nodes_[id].back = [parts_copy, id](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        int off2 = 0;
        for (int p : parts_copy) {
            const int w = g.val(p).cols();
            if (g.needs_grad(p)) {
                Tensor& gp = g.grad(p);
                for (int r = 0; r < go.rows(); ++r)
                    for (int c = 0; c < w; ++c) gp(r, c) += go(r, off2 + c);
            }
            off2 += w;
        }
    };
    return id;
}

int Graph::avgpool_cols(int x, int window) {
    const Tensor& vx = val(x);
    const int cols = vx.cols();
    const int groups = (cols + window - 1) / window;
    Tensor out(vx.rows(), groups);
    for (int g2 = 0; g2 < groups; ++g2) {
        const int c0 = g2 * window;
        const int c1 = std::min(cols, c0 + window);
        for (int r = 0; r < vx.rows(); ++r) {
            double s = 0.0;
            for (int c = c0; c < c1; ++c) s += vx(r, c);
            out(r, g2) = s / (c1 - c0);
        }
    }
    const int id = push(std::move(out), needs_grad(x), nullptr);
    nodes_[id].back = [x, window, id](Graph& g) {
        if (!g.needs_grad(x)) return;
        const Tensor& go = g.nodes_[id].grad;
        Tensor& gx = g.grad(x);
        const int cols2 = gx.cols();
        for (int g2 = 0; g2 < go.cols(); ++g2) {
            const int c0 = g2 * window;
            const int c1 = std::min(cols2, c0 + window);
            const double inv = 1.0 / (c1 - c0);
            for (int r = 0; r < go.rows(); ++r)
                for (int c = c0; c < c1; ++c) gx(r, c) += go(r, g2) * inv;
        }
    };
    return id;
}

int Graph::cos_sim_cols(int x, int t, double norm_guard) {
    const Tensor& vx = val(x);
    const Tensor& vt = val(t);
    if (vt.rows() != vx.rows() || vt.cols() != 1) {
        throw NumericError("graph: cos_sim_cols token must be (rows x 1)");
    }
    const int rows = vx.rows(), cols = vx.cols();
    double tnorm2 = 0.0;
    for (int r = 0; r < rows; ++r) tnorm2 += vt(r, 0) * vt(r, 0);
    const double tnorm = std::sqrt(tnorm2);
    Tensor out(1, cols);
    Tensor xnorm(1, cols);
    for (int c = 0; c < cols; ++c) {
        double dot = 0.0, n2 = 0.0;
        for (int r = 0; r < rows; ++r) {
            dot += vx(r, c) * vt(r, 0);
            n2 += vx(r, c) * vx(r, c);
        }
        const double n = std::sqrt(n2);
        xnorm(0, c) = n;
        out(0, c) = (n < norm_guard || tnorm < norm_guard) ? 0.0 : dot / (n * tnorm);
    }
    const bool ng = needs_grad(x) || needs_grad(t);
    const int id = push(std::move(out), ng, nullptr);
    nodes_[id].back = [x, t, norm_guard, id, xnorm, tnorm](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& s = g.val(id);
        const Tensor& vx2 = g.val(x);
        const Tensor& vt2 = g.val(t);
        const int rows = vx2.rows(), cols = vx2.cols();
        if (tnorm < norm_guard) return;
        Tensor* gx = g.needs_grad(x) ? &g.grad(x) : nullptr;
        Tensor* gt = g.needs_grad(t) ? &g.grad(t) : nullptr;
        for (int c = 0; c < cols; ++c) {
            const double n = xnorm(0, c);
            if (n < norm_guard) continue;  // guarded columns carry no gradient
            const double gs = go(0, c);
            if (gs == 0.0) continue;
            const double sc = s(0, c);
            for (int r = 0; r < rows; ++r) {
                const double xv = vx2(r, c);
                const double tv = vt2(r, 0);
                if (gx) (*gx)(r, c) += gs * (tv / (n * tnorm) - sc * xv / (n * n));
                if (gt) (*gt)(r, 0) += gs * (xv / (n * tnorm) - sc * tv / (tnorm * tnorm));
            }
        }
    };
    return id;
}

int Graph::scale_cols(int x, int s) {
    const Tensor& vx = val(x);
    const Tensor& vs = val(s);
    if (vs.rows() != 1 || vs.cols() != vx.cols()) {
        throw NumericError("graph: scale_cols scale must be (1 x cols)");
    }
    Tensor out = vx;
    for (int r = 0; r < out.rows(); ++r)
        for (int c = 0; c < out.cols(); ++c) out(r, c) *= vs(0, c);
    const bool ng = needs_grad(x) || needs_grad(s);
    const int id = push(std::move(out), ng, nullptr);
    nodes_[id].back = [x, s, id](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& vx2 = g.val(x);
        const Tensor& vs2 = g.val(s);
        if (g.needs_grad(x)) {
            Tensor& gx = g.grad(x);
            for (int r = 0; r < go.rows(); ++r)
                for (int c = 0; c < go.cols(); ++c) gx(r, c) += go(r, c) * vs2(0, c);
        }
        if (g.needs_grad(s)) {
            Tensor& gs = g.grad(s);
            for (int c = 0; c < go.cols(); ++c) {
                double acc = 0.0;
                for (int r = 0; r < go.rows(); ++r) acc += go(r, c) * vx2(r, c);
                gs(0, c) += acc;
            }
        }
    };
    return id;
}

int Graph::bilinear_upsample(int x, int gh, int gw, int oh, int ow) {
    const Tensor& vx = val(x);
    if (vx.cols() != gh * gw) throw NumericError("graph: upsample input grid mismatch");
    const int ch = vx.rows();
    Tensor out(ch, oh * ow);
    const double sy = static_cast<double>(gh) / oh;
    const double sx = static_cast<double>(gw) / ow;
    // Precompute the 4-tap stencil once; reused by the backward pass.
    struct Tap {
        int i00, i01, i10, i11;
        double w00, w01, w10, w11;
    };
    std::vector<Tap> taps(static_cast<size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y) {
        double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(gh - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, gh - 1);
        const double wy = fy - y0;
        for (int x2 = 0; x2 < ow; ++x2) {
            double fx = std::clamp((x2 + 0.5) * sx - 0.5, 0.0, static_cast<double>(gw - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, gw - 1);
            const double wx = fx - x0;
            Tap& t = taps[static_cast<size_t>(y) * ow + x2];
            t.i00 = y0 * gw + x0;
            t.i01 = y0 * gw + x1;
            t.i10 = y1 * gw + x0;
            t.i11 = y1 * gw + x1;
            t.w00 = (1 - wy) * (1 - wx);
            t.w01 = (1 - wy) * wx;
            t.w10 = wy * (1 - wx);
            t.w11 = wy * wx;
        }
    }
    for (int c = 0; c < ch; ++c) {
        const double* src = vx.data() + static_cast<size_t>(c) * gh * gw;
        double* dst = out.data() + static_cast<size_t>(c) * oh * ow;
        for (size_t p = 0; p < taps.size(); ++p) {
            const Tap& t = taps[p];
            dst[p] = t.w00 * src[t.i00] + t.w01 * src[t.i01] + t.w10 * src[t.i10] +
                     t.w11 * src[t.i11];
        }
    }
    const int id = push(std::move(out), needs_grad(x), nullptr);
    nodes_[id].back = [x, gh, gw, oh, ow, id, taps](Graph& g) {
        if (!g.needs_grad(x)) return;
        const Tensor& go = g.nodes_[id].grad;
        Tensor& gx = g.grad(x);
        const int ch = gx.rows();
        for (int c = 0; c < ch; ++c) {
            double* gsrc = gx.data() + static_cast<size_t>(c) * gh * gw;
            const double* gdst = go.data() + static_cast<size_t>(c) * oh * ow;
            for (size_t p = 0; p < taps.size(); ++p) {
                const auto& t = taps[p];
                const double gv = gdst[p];
                gsrc[t.i00] += t.w00 * gv;
                gsrc[t.i01] += t.w01 * gv;
                gsrc[t.i10] += t.w10 * gv;
                gsrc[t.i11] += t.w11 * gv;
            }
        }
    };
    return id;
}

int Graph::conv3x3(int x, int w, int b, int gh, int gw) {
    const Tensor& vx = val(x);
    const Tensor& vw = val(w);
    const Tensor& vb = val(b);
    const int cin = vx.rows();
    const int cout = vw.rows();
    if (vx.cols() != gh * gw) throw NumericError("graph: conv3x3 input grid mismatch");
    if (vw.cols() != cin * 9) throw NumericError("graph: conv3x3 weight shape mismatch");
    if (vb.rows() != cout || vb.cols() != 1) throw NumericError("graph: conv3x3 bias shape");
    Tensor out(cout, gh * gw);
    for (int co = 0; co < cout; ++co) {
        for (int y = 0; y < gh; ++y) {
            for (int x2 = 0; x2 < gw; ++x2) {
                double acc = vb(co, 0);
                for (int ci = 0; ci < cin; ++ci) {
                    for (int ky = -1; ky <= 1; ++ky) {
                        const int yy = y + ky;
                        if (yy < 0 || yy >= gh) continue;
                        for (int kx = -1; kx <= 1; ++kx) {
                            const int xx = x2 + kx;
                            if (xx < 0 || xx >= gw) continue;
                            acc += vw(co, ci * 9 + (ky + 1) * 3 + (kx + 1)) *
                                   vx(ci, yy * gw + xx);
                        }
                    }
                }
                out(co, y * gw + x2) = acc;
            }
        }
    }
    const bool ng = needs_grad(x) || needs_grad(w) || needs_grad(b);
    const int id = push(std::move(out), ng, nullptr);
    nodes_[id].back = [x, w, b, gh, gw, id](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& vx2 = g.val(x);
        const Tensor& vw2 = g.val(w);
        const int cin = vx2.rows();
        const int cout = vw2.rows();
        if (g.needs_grad(b)) {
            Tensor& gb = g.grad(b);
            for (int co = 0; co < cout; ++co) {
                double s = 0.0;
                for (int c = 0; c < go.cols(); ++c) s += go(co, c);
                gb(co, 0) += s;
            }
        }
        Tensor* grad_x = g.needs_grad(x) ? &g.grad(x) : nullptr;
        Tensor* grad_w = g.needs_grad(w) ? &g.grad(w) : nullptr;
        for (int co = 0; co < cout; ++co) {
            for (int y = 0; y < gh; ++y) {
                for (int x2 = 0; x2 < gw; ++x2) {
                    const double gv = go(co, y * gw + x2);
                    if (gv == 0.0) continue;
                    for (int ci = 0; ci < cin; ++ci) {
                        for (int ky = -1; ky <= 1; ++ky) {
                            const int yy = y + ky;
                            if (yy < 0 || yy >= gh) continue;
                            for (int kx = -1; kx <= 1; ++kx) {
                                const int xx = x2 + kx;
                                if (xx < 0 || xx >= gw) continue;
                                const int wi = ci * 9 + (ky + 1) * 3 + (kx + 1);
                                if (grad_x) (*grad_x)(ci, yy * gw + xx) += gv * vw2(co, wi);
                                if (grad_w) (*grad_w)(co, wi) += gv * vx2(ci, yy * gw + xx);
                            }
                        }
                    }
                }
            }
        }
    };
    return id;
}

void Graph::backward(int root) {
    Tensor seed(val(root).rows(), val(root).cols());
    seed.fill(1.0);
    backward(root, seed);
}

void Graph::backward(int root, const Tensor& seed) {
    if (!nodes_[root].needs_grad) return;
    Tensor& g = grad(root);
    for (size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
    for (int id = root; id >= 0; --id) {
        Node& node = nodes_[id];
        if (!node.needs_grad || node.grad.empty() || !node.back) continue;
        node.back(*this);
    }
}

}  // namespace mfpt::nn
