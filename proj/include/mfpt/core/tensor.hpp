#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace mfpt {

// Dense row-major 2-D array of doubles. The whole toolkit computes in double
// precision; feature blocks use rows=channels, cols=tokens, image grids use
// rows=height, cols=width.
class Tensor {
public:
    Tensor() : rows_(0), cols_(0) {}
    Tensor(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(static_cast<size_t>(rows) * cols, fill) {}
    Tensor(int rows, int cols, std::vector<double> values);

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }
    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    double& operator()(int r, int c) { return v_[static_cast<size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return v_[static_cast<size_t>(r) * cols_ + c]; }
    double& operator[](size_t i) { return v_[i]; }
    double operator[](size_t i) const { return v_[i]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    void fill(double value);
    double sum() const;
    double min() const;
    double max() const;
    double abs_max() const;

    Tensor transposed() const;

    bool all_finite() const;

private:
    int rows_;
    int cols_;
    std::vector<double> v_;
};

// C = A * B. Shapes (m x k) * (k x n) -> (m x n).
Tensor matmul(const Tensor& a, const Tensor& b);
// C += A * B.
void matmul_acc(const Tensor& a, const Tensor& b, Tensor& out);
// C += A^T * B, with A (k x m), B (k x n) -> (m x n).
void matmul_at_b_acc(const Tensor& a, const Tensor& b, Tensor& out);
// C += A * B^T, with A (m x k), B (n x k) -> (m x n).
void matmul_a_bt_acc(const Tensor& a, const Tensor& b, Tensor& out);

}  // namespace mfpt
