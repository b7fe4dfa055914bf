#pragma once

#include <cstdint>
#include <vector>

#include "cgro/data.hpp"
#include "cgro/model.hpp"
#include "cgro/train.hpp"

namespace cgro {

/// Holder-conjugate norm pair (p, q): perturbations live in the l_p ball,
/// gradients are measured in l_q. Only (2,2) and (inf,1) are supported.
enum class HolderPair { L2_L2, LInf_L1 };

struct ProbeConfig {
    int steps = 30;
    int restarts = 8;        // restart 0 starts at xi = 0
    double step_mult = 1.5;  // step = step_mult * eps / steps
};

struct ProbeResult {
    double value = 0.0;
    std::vector<double> xi;  // argmax offset, flattened P*d
};

/// Best value of ||grad_X L(X + xi)||_q over ||xi||_p <= eps found by
/// projected gradient ascent with random restarts. The ascent direction
/// is the exact gradient of the norm objective (one Hessian-vector
/// product per step); l1-norm kinks use sign with ties mapped to zero.
/// xi = 0 is always evaluated, so the result is a certified lower bound
/// on the true maximum and never falls below the unperturbed norm.
/// Extra start points (e.g. the argmax found at a smaller radius) may be
/// supplied to seed the search.
ProbeResult max_grad_norm(const CnnWeights& w, const Mat& patches, int label,
                          double eps, HolderPair pair, const ProbeConfig& probe,
                          std::uint64_t seed,
                          const std::vector<std::vector<double>>& extra_starts = {});

/// Best loss increase L(X + xi) - L(X) over the ball; >= 0 since xi = 0
/// is included.
ProbeResult max_loss_change(const CnnWeights& w, const Mat& patches, int label,
                            double eps, HolderPair pair, const ProbeConfig& probe,
                            std::uint64_t seed);

struct MeanEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    int n = 0;
};

/// Monte Carlo estimate of E[max ||grad L||_q] over fresh data.
MeanEstimate global_flatness(const CnnWeights& w, const DataConfig& data,
                             double eps, int n_mc, HolderPair pair,
                             const ProbeConfig& probe, std::uint64_t seed);

struct FlatnessReport {
    int checkpoint = 0;
    double eps = 0.0;
    HolderPair pair = HolderPair::L2_L2;
    double local_flat_train = 0.0;   // mean over training data
    double local_flat_test = 0.0;    // mean over a fixed fresh set
    double global_flat = 0.0;        // MC expectation over fresh draws
    double global_flat_stderr = 0.0;
    double loss_change_train = 0.0;
    double loss_change_test = 0.0;
    double gap = 0.0;                // L_adv - L_adv_hat (Eq. O semantics)
    double bound_rhs = 0.0;          // N^{-1/(D+2)} * global_flat
    double lower_quantity = 0.0;     // delta * E ||grad_X L(X)||_q
};

/// Assembles the full flatness ledger for one checkpoint at one radius.
FlatnessReport flatness_report(const CnnWeights& w, int checkpoint_iter,
                               const Dataset& train, const std::vector<Mat>& adv,
                               const RunConfig& cfg, double eps, HolderPair pair,
                               const ProbeConfig& probe, int n_mc,
                               std::uint64_t seed);

double holder_q_norm(const Mat& g, HolderPair pair);

}  // namespace cgro
