#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cgro/attack.hpp"
#include "cgro/data.hpp"
#include "cgro/model.hpp"
#include "cgro/telemetry.hpp"

namespace cgro {

struct RunConfig {
    DataConfig data;
    int N = 0;                 // training set size
    int m = 0;                 // network width
    double sigma0 = 0.0;       // init scale
    double eta = 1.0;          // learning rate
    int T = 0;                 // GD iterations
    double lambda = 0.5;       // robust trade-off, in [0, 1)
    AttackSpec attack;
    int telemetry_every = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

/// i.i.d. N(0, sigma0^2) entries from stream derive_stream(seed, "init", 0).
CnnWeights init_weights(const RunConfig& cfg);

/// Mean over samples of (1-lambda) * clean logistic loss plus
/// lambda * logistic loss on the cached adversarial inputs.
double adversarial_objective(const CnnWeights& w, const Dataset& data,
                             const std::vector<Mat>& adv, double lambda);

struct TrainResult {
    CnnWeights weights;
    std::vector<TelemetrySnapshot> telemetry;
    std::vector<Mat> adv_examples;
};

/// Full-batch gradient descent W <- W - eta * grad(objective) for exactly
/// T steps. GTA training examples are computed once up front (the target
/// classifier does not depend on W). Telemetry snapshots are taken at
/// iteration 0, every telemetry_every steps, and at T. Per-sample gradient
/// terms are reduced in fixed sample order regardless of thread count.
/// Throws DivergenceError with the iteration index if the objective or
/// gradient stops being finite.
TrainResult train(const RunConfig& cfg, const Dataset& data);

}  // namespace cgro
