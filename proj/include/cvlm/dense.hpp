#pragma once

// Small dense helpers for the toy encoder and prefill model.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace cvlm {

/// Row-major matrix of doubles.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    std::span<double> row(int r) { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
    std::span<const double> row(int r) const {
        return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }
    double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    bool operator==(const Matrix&) const = default;
};

/// Uniform(-1/sqrt(cols), 1/sqrt(cols)) initialization.
inline Matrix random_matrix(int rows, int cols, std::mt19937_64& rng) {
    Matrix m(rows, cols);
    const double a = 1.0 / std::sqrt(static_cast<double>(cols));
    std::uniform_real_distribution<double> dist(-a, a);
    for (auto& v : m.data) v = dist(rng);
    return m;
}

inline std::vector<double> random_vector(int n, double scale, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = dist(rng);
    return v;
}

/// y = W x (+ bias when given).
inline void matvec(const Matrix& w, std::span<const double> x, std::span<double> y,
                   std::span<const double> bias = {}) {
    for (int r = 0; r < w.rows; ++r) {
        double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(r)];
        const auto wr = w.row(r);
        for (int c = 0; c < w.cols; ++c) acc += wr[static_cast<std::size_t>(c)] * x[static_cast<std::size_t>(c)];
        y[static_cast<std::size_t>(r)] = acc;
    }
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace cvlm
