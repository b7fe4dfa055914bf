#pragma once

#include <cstdint>
#include <vector>

#include "cgro/matrix.hpp"
#include "cgro/rng.hpp"

namespace cgro {

struct RunConfig;  // defined in train.hpp

/// Parameters of the patch data distribution: P patches of dimension d,
/// one signal patch alpha*y*w_star, the rest Gaussian noise projected
/// orthogonal to w_star.
struct DataConfig {
    int d = 0;
    int P = 0;
    double alpha = 0.0;
    double sigma = 0.0;
    std::vector<double> w_star;
    std::uint64_t seed = 0;

    /// Throws ConfigError unless d >= 2, P >= 2, alpha > 0, sigma >= 0 and
    /// w_star is unit length within 1e-12.
    void validate() const;
};

struct Example {
    Mat patches;  // P x d
    int label = 0;
    int signal_index = 0;
};

struct Dataset {
    DataConfig config;
    std::vector<Example> examples;
};

/// One draw from the distribution. Label and signal index are uniform;
/// the signal patch is exactly alpha*label*w_star; noise patches are
/// N(0, sigma^2 I) explicitly projected orthogonal to w_star so that
/// <patch, w_star> vanishes to machine precision.
Example sample_example(const DataConfig& cfg, Rng& rng);

/// N independent examples. Example i draws from the stream
/// derive_stream(cfg.seed, "data.example", i), so generation is
/// deterministic and independent of thread count.
Dataset sample_dataset(const DataConfig& cfg, int n);

/// Instantiates every scalar of the training setup from the dimension,
/// with polylog(d) := polylog_c * ln(d)^2:
///   alpha   = d^0.249 * polylog(d)
///   sigma   = d^-0.509
///   m       = ceil(polylog(d))
///   sigma0  = sqrt(polylog(d) / d)
///   gamma   = 1 - 1/(sqrt(d) * polylog(d))
///   delta   = alpha * gamma
///   P       = max(2, ceil(ln(d)^2 / 2))
///   eta     = 1, lambda = 0.5
/// Requires d >= 8.
RunConfig default_parameterization(int d, double polylog_c = 0.05);

}  // namespace cgro
