#pragma once

#include <vector>

#include "cgro/data.hpp"
#include "cgro/model.hpp"

namespace cgro {

struct RunConfig;

/// Feature-learning observables of one weight snapshot:
///   u_r = <w_r, w*>,              U   = sum_r u_r^3
///   v[i][j][r] = y_i <w_r, X_i[j]> over noise patches only,
///   V_i = sum_{r, j != signal} v^3.
struct FeatureMetrics {
    double U = 0.0;
    std::vector<double> u;              // m
    std::vector<double> V;              // N
    std::vector<double> v;              // N x (P-1) x m, signal column absent
    int n = 0, p_noise = 0, m = 0;

    double& v_at(int i, int jn, int r) {
        return v[(static_cast<std::size_t>(i) * p_noise + jn) * m + r];
    }
    double v_at(int i, int jn, int r) const {
        return v[(static_cast<std::size_t>(i) * p_noise + jn) * m + r];
    }
};

/// u_r = <w_r, w*> and U = sum u_r^3.
std::pair<std::vector<double>, double> signal_components(
    const CnnWeights& w, std::span<const double> w_star);

/// Per-neuron noise components of one example and their cubic sum V_i.
/// The signal patch is excluded; the slice is ordered by patch index.
std::pair<std::vector<double>, double> noise_components(const CnnWeights& w,
                                                        const Example& ex);

FeatureMetrics feature_metrics(const CnnWeights& w, const Dataset& data);

/// One telemetry snapshot of a training run. psi_clean/psi_adv cache
/// psi(y_i f(X_i)) and psi(y_i f(X_i^adv)) under the snapshot weights,
/// which is exactly what the projected update equalities need.
struct TelemetrySnapshot {
    int iteration = 0;
    CnnWeights weights;
    FeatureMetrics metrics;
    std::vector<double> psi_clean;  // N
    std::vector<double> psi_adv;    // N
    double objective = 0.0;
    double clean_train_err = 0.0;
    double robust_train_err = 0.0;
};

struct ResidualReport {
    int iteration = 0;
    double max_signal_residual = 0.0;
    double max_noise_residual = 0.0;
    bool pass = false;
};

/// Checks the exact projections of the GD update between two consecutive
/// snapshots (iterations t and t+1):
///   signal: u_r' = u_r + (3 eta / N) u_r^2 *
///           sum_i [(1-l) a^3 psi_i + l a^3 (1-g)^3 psi_i^adv]
///   noise:  v'   = v   + (3 eta / N) y_i <M_r, X_i[j]> with
///           M_r = sum_{a,b!=signal} psi~_a <w_r,X_a[b]>^2 y_a X_a[b],
///           psi~_a = (1-l) psi_a + l psi_a^adv.
/// Both are identities of the update given noise _|_ signal; residuals
/// above 1e-9 flag the report as failing. Throws ConfigError unless the
/// snapshots are consecutive.
ResidualReport verify_projection_equalities(const TelemetrySnapshot& at,
                                            const TelemetrySnapshot& next,
                                            const Dataset& data,
                                            const RunConfig& cfg);

/// Tensor-power threshold of the growth recursion
/// z' in [z + m z^2, z + M z^2]: first time from which z stays >= v,
///   t0 = 3 / (m_lo z0) + (8 M_hi / m_lo) * ceil(log2(v / z0)).
double tensor_power_threshold(double z0, double m_lo, double M_hi, double v);

/// Crossing-time bound for the summed recursion
/// |z_t - z0 - A sum z_s^2| <= C with C <= z0/2:
///   t0 = 8 * ceil(log2(v / z0)) + 21 / (z0 * A).
/// The source constant is typeset ambiguously ("(z^(0)) A"); this reads it
/// as 21 / (z0 * A).
double tensor_power_sum_threshold(double z0, double A, double C, double v);

/// Decay bound for z' <= z - A z^2: z_t <= 1 / (A (t - T0)) for t > T0.
double tensor_power_decay_bound(double A, int t, int T0);

}  // namespace cgro
