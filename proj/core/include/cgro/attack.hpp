#pragma once

#include <cstdint>

#include "cgro/data.hpp"
#include "cgro/matrix.hpp"
#include "cgro/model.hpp"
#include "cgro/rng.hpp"

namespace cgro {

enum class AttackMethod { GTA, PGD };
enum class NormP { L2, LInf };

struct AttackSpec {
    AttackMethod method = AttackMethod::GTA;
    NormP norm_p = NormP::L2;
    double delta = 0.0;
    double gamma = 0.0;       // GTA strength, in [0, 1)
    int steps = 40;           // PGD iterations
    int restarts = 5;         // PGD random restarts (restart 0 starts at X)
    double step_size = 0.0;   // PGD step; 0 means 2.5 * delta / steps

    void validate(const DataConfig& data) const;
    double pgd_step() const;
};

/// Closed-form attack against the fixed linear target
/// g(X) = <w_star, X[signal]>: the signal patch shrinks to
/// alpha*(1-gamma)*y*w_star, noise patches are untouched. Throws
/// ConfigError when gamma*alpha exceeds delta.
Mat gta(const Example& x, const DataConfig& data, double gamma, double delta);

/// Projected gradient ascent on the logistic loss inside the
/// l_{norm_p} ball of radius delta. The clean point is always evaluated
/// and the best-loss iterate is returned, so the attacked loss never
/// drops below the clean loss. Restart ties break toward the lowest
/// restart index.
Mat pgd(const CnnWeights& w, const Mat& patches, int label,
        const AttackSpec& spec, std::uint64_t seed);

/// Distance between inputs under the given norm (patches flattened).
double perturbation_norm(const Mat& x, const Mat& x_adv, NormP p);

}  // namespace cgro
