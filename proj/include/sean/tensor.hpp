#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace sean {

/// Row-major dense matrix of doubles. Vectors are 1 x n.
struct Tensor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    std::size_t size() const { return data.size(); }
    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    void zero() { std::fill(data.begin(), data.end(), 0.0); }
    void resize(std::size_t r, std::size_t c) {
        rows = r;
        cols = c;
        data.assign(r * c, 0.0);
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

namespace linalg {

inline double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

/// y += M x
inline void gemv(const Tensor& m, const double* x, double* y) {
    for (std::size_t i = 0; i < m.rows; ++i) y[i] += dot(m.row(i), x, m.cols);
}

/// y += M^T x
inline void gemv_t(const Tensor& m, const double* x, double* y) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* r = m.row(i);
        for (std::size_t j = 0; j < m.cols; ++j) y[j] += r[j] * xi;
    }
}

/// M += a b^T
inline void outer_add(Tensor& m, const double* a, const double* b) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double ai = a[i];
        if (ai == 0.0) continue;
        double* r = m.row(i);
        for (std::size_t j = 0; j < m.cols; ++j) r[j] += ai * b[j];
    }
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// In-place softmax; returns nothing, output sums to 1.
inline void softmax(std::span<double> v) {
    if (v.empty()) return;
    double mx = v[0];
    for (double x : v) mx = x > mx ? x : mx;
    double s = 0.0;
    for (double& x : v) s += (x = std::exp(x - mx));
    for (double& x : v) x /= s;
}

/// Backward of softmax: given y = softmax(x) and dL/dy, writes dL/dx.
inline void softmax_backward(std::span<const double> y, std::span<const double> dy, std::span<double> dx) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * dy[i];
    for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] * (dy[i] - s);
}

} // namespace linalg

/// Normal(0, 2 / (fan_in + fan_out)).
inline void xavier_normal(Tensor& t, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)));
    for (double& x : t.data) x = dist(rng);
}

} // namespace sean
