#include "cntnet/matrix.hpp"

#include <algorithm>
#include <stdexcept>

namespace cntnet {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw std::invalid_argument("Matrix: data size does not match shape");
}

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
    assert(a.cols() == b.rows());
    if (out.rows() != a.rows() || out.cols() != b.cols()) out = Matrix(a.rows(), b.cols());
    else std::fill(out.values().begin(), out.values().end(), 0.0);
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* dst = out.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* src = b.row(k).data();
            for (std::size_t j = 0; j < n; ++j) dst[j] += aik * src[j];
        }
    }
}

void matmul_at_b(const Matrix& a, const Matrix& b, Matrix& out) {
    assert(a.rows() == b.rows());
    if (out.rows() != a.cols() || out.cols() != b.cols()) out = Matrix(a.cols(), b.cols());
    else std::fill(out.values().begin(), out.values().end(), 0.0);
    const std::size_t n = b.cols();
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* src = b.row(k).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            if (aki == 0.0) continue;
            double* dst = out.row(i).data();
            for (std::size_t j = 0; j < n; ++j) dst[j] += aki * src[j];
        }
    }
}

void matmul_a_bt(const Matrix& a, const Matrix& b, Matrix& out) {
    assert(a.cols() == b.cols());
    if (out.rows() != a.rows() || out.cols() != b.rows()) out = Matrix(a.rows(), b.rows());
    const std::size_t n = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ar = a.row(i).data();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* br = b.row(j).data();
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) acc += ar[k] * br[k];
            out(i, j) = acc;
        }
    }
}

std::vector<double> vecmat(std::span<const double> x, const Matrix& w) {
    assert(x.size() == w.rows());
    std::vector<double> y(w.cols(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i) {
        const double xi = x[i];
        const auto r = w.row(i);
        for (std::size_t j = 0; j < y.size(); ++j) y[j] += xi * r[j];
    }
    return y;
}

}  // namespace cntnet
