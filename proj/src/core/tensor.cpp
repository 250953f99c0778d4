#include "mfpt/core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "mfpt/core/error.hpp"

namespace mfpt {

Tensor::Tensor(int rows, int cols, std::vector<double> values)
    : rows_(rows), cols_(cols), v_(std::move(values)) {
    if (v_.size() != static_cast<size_t>(rows) * cols) {
        throw NumericError("tensor: value count does not match shape");
    }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    Tensor t(r, c);
    int i = 0;
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != c) {
            throw NumericError("tensor: ragged initializer");
        }
        int j = 0;
        for (double value : row) t(i, j++) = value;
        ++i;
    }
    return t;
}

void Tensor::fill(double value) { std::fill(v_.begin(), v_.end(), value); }

double Tensor::sum() const {
    double s = 0.0;
    for (double x : v_) s += x;
    return s;
}

double Tensor::min() const {
    double m = v_.empty() ? 0.0 : v_[0];
    for (double x : v_) m = std::min(m, x);
    return m;
}

double Tensor::max() const {
    double m = v_.empty() ? 0.0 : v_[0];
    for (double x : v_) m = std::max(m, x);
    return m;
}

double Tensor::abs_max() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, std::fabs(x));
    return m;
}

Tensor Tensor::transposed() const {
    Tensor t(cols_, rows_);
    for (int r = 0; r < rows_; ++r)
        for (int c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

bool Tensor::all_finite() const {
    for (double x : v_)
        if (!std::isfinite(x)) return false;
    return true;
}

namespace {

void check_mm(int ak, int bk, const char* what) {
    if (ak != bk) throw NumericError(std::string("matmul: inner dimensions disagree in ") + what);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    Tensor out(a.rows(), b.cols());
    matmul_acc(a, b, out);
    return out;
}

void matmul_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    check_mm(a.cols(), b.rows(), "A*B");
    const int m = a.rows(), k = a.cols(), n = b.cols();
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = out.data();
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double aik = pa[static_cast<size_t>(i) * k + p];
            if (aik == 0.0) continue;
            const double* brow = pb + static_cast<size_t>(p) * n;
            double* crow = pc + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

void matmul_at_b_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    check_mm(a.rows(), b.rows(), "A^T*B");
    const int k = a.rows(), m = a.cols(), n = b.cols();
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = out.data();
    for (int p = 0; p < k; ++p) {
        const double* arow = pa + static_cast<size_t>(p) * m;
        const double* brow = pb + static_cast<size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const double aip = arow[i];
            if (aip == 0.0) continue;
            double* crow = pc + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void matmul_a_bt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    check_mm(a.cols(), b.cols(), "A*B^T");
    const int m = a.rows(), k = a.cols(), n = b.rows();
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = out.data();
    for (int i = 0; i < m; ++i) {
        const double* arow = pa + static_cast<size_t>(i) * k;
        double* crow = pc + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = pb + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

}  // namespace mfpt
