#include "cgro/model.hpp"

#include <cmath>

#include "cgro/errors.hpp"

namespace cgro {

double negative_sigmoid(double z) {
    if (z >= 0.0) {
        const double e = std::exp(-z);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(z));
}

double stable_softplus_neg(double z) {
    if (z > 30.0) return std::exp(-z);
    if (z < -30.0) return -z;
    return std::log1p(std::exp(-z));
}

ScoreCache score_cache(const CnnWeights& w, const Mat& patches) {
    if (patches.cols != w.d())
        throw ConfigError("patch dimension does not match weights");
    ScoreCache c;
    c.s = Mat(w.m(), patches.rows);
    double f = 0.0;
    for (int r = 0; r < w.m(); ++r) {
        const auto wr = w.rows.row(r);
        for (int j = 0; j < patches.rows; ++j) {
            const double s = dot(wr, patches.row(j));
            c.s(r, j) = s;
            f += s * s * s;
        }
    }
    c.f = f;
    return c;
}

double forward(const CnnWeights& w, const Mat& patches) {
    return score_cache(w, patches).f;
}

double logistic_loss(const CnnWeights& w, const Mat& patches, int label) {
    return stable_softplus_neg(label * forward(w, patches));
}

Mat grad_weights(const CnnWeights& w, const Mat& patches, int label) {
    const ScoreCache c = score_cache(w, patches);
    const double psi = negative_sigmoid(label * c.f);
    Mat g(w.m(), w.d());
    for (int r = 0; r < w.m(); ++r) {
        auto gr = g.row(r);
        for (int j = 0; j < patches.rows; ++j) {
            const double s = c.s(r, j);
            axpy(-3.0 * psi * label * s * s, patches.row(j), gr);
        }
    }
    return g;
}

Mat grad_input(const CnnWeights& w, const Mat& patches, int label) {
    const ScoreCache c = score_cache(w, patches);
    const double psi = negative_sigmoid(label * c.f);
    Mat g(patches.rows, patches.cols);
    for (int j = 0; j < patches.rows; ++j) {
        auto gj = g.row(j);
        for (int r = 0; r < w.m(); ++r) {
            const double s = c.s(r, j);
            axpy(-3.0 * psi * label * s * s, w.rows.row(r), gj);
        }
    }
    return g;
}

}  // namespace cgro
