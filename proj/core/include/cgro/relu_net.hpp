#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace cgro {

/// One affine stage of a layered ReLU network. Weights are stored sparsely
/// per output unit; absent entries are absent connections. The dense
/// serialization materializes them as zeros.
struct ReluLayer {
    int in = 0;
    int out = 0;
    std::vector<std::vector<std::pair<int, double>>> w;  // per-row (col, weight)
    std::vector<double> b;

    ReluLayer() = default;
    ReluLayer(int in_dim, int out_dim)
        : in(in_dim), out(out_dim), w(out_dim), b(out_dim, 0.0) {}
    void add(int row, int col, double weight) { w[row].push_back({col, weight}); }
};

/// Layered affine maps with a rectifier between consecutive layers and an
/// affine output (no rectifier after the last layer).
struct ReluNet {
    int input_dim = 0;
    std::vector<ReluLayer> layers;

    int output_dim() const { return layers.empty() ? input_dim : layers.back().out; }
    int depth() const { return static_cast<int>(layers.size()); }
};

std::vector<double> relu_forward_vec(const ReluNet& net, std::span<const double> x);

/// Scalar forward pass; requires output_dim() == 1.
double relu_forward(const ReluNet& net, std::span<const double> x);

/// Gradient of the scalar output in the input, by backprop. The rectifier
/// subgradient at a kink is taken as 0.
std::vector<double> relu_input_gradient(const ReluNet& net, std::span<const double> x);

/// Structural parameter count: stored weight entries plus offsets.
long param_count(const ReluNet& net);

// --- combinators -----------------------------------------------------------

ReluNet affine_net(int in, int out,
                   const std::vector<std::vector<std::pair<int, double>>>& w,
                   const std::vector<double>& b);

/// Function composition b(a(x)). The seam fuses a's output affine into
/// b's first affine so no spurious rectifier is inserted.
ReluNet compose(const ReluNet& a, const ReluNet& b);

/// Side-by-side composition: subnet k reads input columns input_cols[k]
/// and the outputs are concatenated in order. Nets of different depth are
/// padded with exact identity stages (a +/- rectifier pair per carried
/// value).
ReluNet parallel(const std::vector<ReluNet>& nets,
                 const std::vector<std::vector<int>>& input_cols, int input_dim);

/// Exact identity carry of `dim` values (one +/- rectifier pair each).
ReluNet identity_net(int dim);

ReluNet pad_to_depth(const ReluNet& net, int depth);

// --- gadgets ---------------------------------------------------------------

/// x^2 on [0,1] within eps, by s = max(1, ceil(log2(1/eps)/2)) composed
/// sawtooth stages of the classic series x^2 = x - sum_k g_k(x)/4^k.
/// Exact at both endpoints; O(s) parameters.
ReluNet square_gadget(double eps);

/// xy on [0,B]^2 within eps via the polarization identity
/// xy = 2B^2 [ q((x+y)/2B) - q(x/2B) - q(y/2B) ] on three square gadgets.
/// The exact-zero property of the reference construction (xy = 0 implies
/// output 0) is NOT guaranteed here, only the eps bound.
ReluNet product_gadget(double eps, double B);

/// ||X - x0||^2 on [0,1]^D within eps: |t| = rect(t) + rect(-t) per
/// coordinate feeding D square gadgets at eps/D each.
ReluNet sqdist_gadget(std::span<const double> x0, double eps);

/// Two-rectifier ramp: 1 on (-inf, lo], 0 on [hi, inf), linear between.
ReluNet soft_indicator(double lo, double hi);

// --- CGRO construction -----------------------------------------------------

struct CgroBuildSpec {
    double delta = 0.0;       // memorization radius (l2)
    double eps_sq = 0.0;      // squared-distance tolerance per phi1
    double eps_prod = 0.0;    // per-product-gadget tolerance
    double ramp_width = 0.0;  // indicator ramp in squared distance; 0 = derived
    ReluNet clean_net;        // D -> 1
};

using LabeledPoint = std::pair<std::vector<double>, int>;

struct CgroBuild {
    ReluNet net;
    double range_bound = 0.0;  // B = 1 + max |clean| on the calibration grid
    double lo = 0.0;           // indicator edge delta^2
    double hi = 0.0;           // delta^2 + ramp
    double ramp = 0.0;
    double min_separation = 0.0;  // min pairwise training distance
};

/// Builds the memorizing network
///   h(X) = clean(X) + sum_i [ mux(clip(y_i - clean(X) + B, 0, 2B),
///                             soft_ind(phi1_i(X))) - B * soft_ind(...) ]
/// with mux(a, b) = min(a, 2B b), the exact one-rectifier multiplexer:
/// the term equals y_i - clean(X) where the indicator is 1 and exactly 0
/// where it is 0. phi1_i(X) = SQ(X) - 2<x0_i, X> + ||x0_i||^2 reuses one
/// shared bank of per-coordinate square gadgets across all i, so the
/// parameter count is exactly affine in N. Throws GeometryError listing
/// offending pairs when memorization balls (radius sqrt(hi)) overlap.
CgroBuild build_cgro_net(const CgroBuildSpec& spec,
                         const std::vector<LabeledPoint>& trainset);

/// Exact reference classifier: y_i inside the closed ball B2(X_i, delta)
/// (nearest center wins on overlap, then lowest index), clean_fn outside.
double eval_f_s(std::span<const double> x,
                const std::function<double(std::span<const double>)>& clean_fn,
                const std::vector<LabeledPoint>& trainset, double delta);

}  // namespace cgro
