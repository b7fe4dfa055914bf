#pragma once

#include "cgro/matrix.hpp"

namespace cgro {

/// First-layer weights of the cubic-activation CNN
/// f_W(X) = sum_r sum_j <w_r, X[j]>^3. The second layer is fixed to ones
/// and there are no biases.
struct CnnWeights {
    Mat rows;  // m x d

    CnnWeights() = default;
    CnnWeights(int m, int d) : rows(m, d) {}
    int m() const { return rows.rows; }
    int d() const { return rows.cols; }
};

/// Negative sigmoid psi(z) = 1 / (1 + e^z), overflow-safe.
double negative_sigmoid(double z);

/// log(1 + e^-z), evaluated in branches around |z| = 30 so that both
/// tails stay finite and accurate.
double stable_softplus_neg(double z);

double forward(const CnnWeights& w, const Mat& patches);

double logistic_loss(const CnnWeights& w, const Mat& patches, int label);

/// d(loss)/dW, row r = -3 psi(y f) y sum_j <w_r,X[j]>^2 X[j].
Mat grad_weights(const CnnWeights& w, const Mat& patches, int label);

/// d(loss)/dX, patch j = -3 psi(y f) y sum_r <w_r,X[j]>^2 w_r.
Mat grad_input(const CnnWeights& w, const Mat& patches, int label);

/// Shared forward pass: inner products s(r,j) = <w_r, X[j]> and the score.
struct ScoreCache {
    Mat s;          // m x P
    double f = 0.0;
};
ScoreCache score_cache(const CnnWeights& w, const Mat& patches);

}  // namespace cgro
