#pragma once

#include <cassert>
#include <cmath>
#include <span>
#include <vector>

namespace cgro {

/// Minimal dense row-major matrix of doubles.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    std::span<double> row(int r) {
        return {a.data() + static_cast<std::size_t>(r) * cols,
                static_cast<std::size_t>(cols)};
    }
    std::span<const double> row(int r) const {
        return {a.data() + static_cast<std::size_t>(r) * cols,
                static_cast<std::size_t>(cols)};
    }
    double& operator()(int r, int c) {
        return a[static_cast<std::size_t>(r) * cols + c];
    }
    double operator()(int r, int c) const {
        return a[static_cast<std::size_t>(r) * cols + c];
    }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double x : a) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    }
};

inline double dot(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm2(std::span<const double> x) {
    return std::sqrt(dot(x, x));
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace cgro
