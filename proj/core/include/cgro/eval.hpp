#pragma once

#include <cstdint>
#include <vector>

#include "cgro/attack.hpp"
#include "cgro/data.hpp"
#include "cgro/model.hpp"

namespace cgro {

struct RateEstimate {
    double rate = 0.0;
    double stderr_ = 0.0;
    int n = 0;
};

/// Monte Carlo error triple. Ties y*f = 0 count as errors, matching the
/// <= 0 indicator of the error definitions.
struct ErrorReport {
    RateEstimate clean_test;
    RateEstimate robust_test_gta;
    RateEstimate robust_test_pgd;
    double robust_train = 0.0;
    int n_mc = 0;
};

/// Fraction of fresh samples with y f(X) <= 0. Sample i comes from the
/// stream derive_stream(seed, "eval.mc", i), so paired evaluations under
/// different attacks see identical draws.
RateEstimate clean_error(const CnnWeights& w, const DataConfig& data, int n_mc,
                         std::uint64_t seed);

/// Same draws, each attacked first (GTA in closed form, PGD by ascent).
RateEstimate robust_error(const CnnWeights& w, const DataConfig& data,
                          const AttackSpec& attack, int n_mc, std::uint64_t seed);

/// Fraction of cached training adversarial examples with y_i f <= 0.
double robust_train_error(const CnnWeights& w, const Dataset& data,
                          const std::vector<Mat>& adv_examples);

ErrorReport error_report(const CnnWeights& w, const Dataset& data,
                         const std::vector<Mat>& adv_examples,
                         const AttackSpec& attack, int n_mc, std::uint64_t seed);

}  // namespace cgro
