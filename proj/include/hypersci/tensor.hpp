#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "hypersci/errors.hpp"

namespace hypersci {

// Dense row-major matrix of doubles. Vectors are n x 1 (or 1 x n) tensors.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0) {}

    static Tensor zeros(int r, int c) { return Tensor(r, c); }
    static Tensor full(int r, int c, double v) {
        Tensor t(r, c);
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }
    static Tensor identity(int n) {
        Tensor t(n, n);
        for (int i = 0; i < n; ++i) t(i, i) = 1.0;
        return t;
    }
    static Tensor scalar(double v) {
        Tensor t(1, 1);
        t.data[0] = v;
        return t;
    }
    static Tensor column(const std::vector<double>& v) {
        Tensor t(static_cast<int>(v.size()), 1);
        t.data = v;
        return t;
    }
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
        int r = static_cast<int>(rows_init.size());
        int c = r > 0 ? static_cast<int>(rows_init.begin()->size()) : 0;
        Tensor t(r, c);
        int i = 0;
        for (const auto& row : rows_init) {
            if (static_cast<int>(row.size()) != c)
                throw ShapeMismatch("from_rows: ragged initializer");
            int j = 0;
            for (double v : row) t(i, j++) = v;
            ++i;
        }
        return t;
    }

    double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

    size_t size() const { return data.size(); }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double item() const {
        if (rows != 1 || cols != 1) throw ShapeMismatch("item: tensor is not 1x1");
        return data[0];
    }
};

// Plain (non-recorded) kernels. The gradient tape reuses these.
Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// a^T * b
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace hypersci
