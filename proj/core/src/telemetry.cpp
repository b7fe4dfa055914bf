#include "cgro/telemetry.hpp"

#include <cmath>

#include "cgro/errors.hpp"
#include "cgro/train.hpp"

namespace cgro {

std::pair<std::vector<double>, double> signal_components(
    const CnnWeights& w, std::span<const double> w_star) {
    std::vector<double> u(w.m());
    double U = 0.0;
    for (int r = 0; r < w.m(); ++r) {
        u[r] = dot(w.rows.row(r), w_star);
        U += u[r] * u[r] * u[r];
    }
    return {std::move(u), U};
}

std::pair<std::vector<double>, double> noise_components(const CnnWeights& w,
                                                        const Example& ex) {
    const int P = ex.patches.rows;
    std::vector<double> slice(static_cast<std::size_t>(P - 1) * w.m());
    double V = 0.0;
    int jn = 0;
    for (int j = 0; j < P; ++j) {
        if (j == ex.signal_index) continue;
        for (int r = 0; r < w.m(); ++r) {
            const double v = ex.label * dot(w.rows.row(r), ex.patches.row(j));
            slice[static_cast<std::size_t>(jn) * w.m() + r] = v;
            V += v * v * v;
        }
        ++jn;
    }
    return {std::move(slice), V};
}

FeatureMetrics feature_metrics(const CnnWeights& w, const Dataset& data) {
    FeatureMetrics fm;
    fm.n = static_cast<int>(data.examples.size());
    fm.p_noise = data.config.P - 1;
    fm.m = w.m();
    auto [u, U] = signal_components(w, data.config.w_star);
    fm.u = std::move(u);
    fm.U = U;
    fm.V.resize(fm.n);
    fm.v.resize(static_cast<std::size_t>(fm.n) * fm.p_noise * fm.m);
    for (int i = 0; i < fm.n; ++i) {
        auto [slice, Vi] = noise_components(w, data.examples[i]);
        fm.V[i] = Vi;
        std::copy(slice.begin(), slice.end(),
                  fm.v.begin() + static_cast<std::size_t>(i) * fm.p_noise * fm.m);
    }
    return fm;
}

ResidualReport verify_projection_equalities(const TelemetrySnapshot& at,
                                            const TelemetrySnapshot& next,
                                            const Dataset& data,
                                            const RunConfig& cfg) {
    if (next.iteration != at.iteration + 1)
        throw ConfigError("snapshots are not consecutive GD steps");
    const int N = static_cast<int>(data.examples.size());
    const int m = cfg.m;
    const int d = cfg.data.d;
    const double eta = cfg.eta;
    const double lambda = cfg.lambda;
    const double a3 = std::pow(cfg.data.alpha, 3);
    const double a3g = a3 * std::pow(1.0 - cfg.attack.gamma, 3);

    ResidualReport rep;
    rep.iteration = at.iteration;

    // Signal projection: the increment of u_r depends on u_r^2 and the
    // cached psi weights only.
    double sum_psi = 0.0;
    for (int i = 0; i < N; ++i)
        sum_psi += (1.0 - lambda) * a3 * at.psi_clean[i] +
                   lambda * a3g * at.psi_adv[i];
    for (int r = 0; r < m; ++r) {
        const double ur = at.metrics.u[r];
        const double predicted = ur + (3.0 * eta / N) * ur * ur * sum_psi;
        rep.max_signal_residual = std::max(
            rep.max_signal_residual, std::abs(next.metrics.u[r] - predicted));
    }

    // Noise projection: M_r = sum over all noise patches of
    // psi~_a <w_r, X_a[b]>^2 y_a X_a[b]; the predicted update of v_{i,j,r}
    // is its projection on y_i X_i[j].
    std::vector<double> Mr(static_cast<std::size_t>(m) * d);
    for (int r = 0; r < m; ++r) {
        std::span<double> row{Mr.data() + static_cast<std::size_t>(r) * d,
                              static_cast<std::size_t>(d)};
        for (int a = 0; a < N; ++a) {
            const Example& ex = data.examples[a];
            const double psi_t = (1.0 - lambda) * at.psi_clean[a] +
                                 lambda * at.psi_adv[a];
            int jn = 0;
            for (int j = 0; j < data.config.P; ++j) {
                if (j == ex.signal_index) continue;
                const double v = at.metrics.v_at(a, jn, r);
                // <w_r, X_a[b]>^2 = v^2 since y^2 = 1.
                axpy(psi_t * v * v * ex.label, ex.patches.row(j), row);
                ++jn;
            }
        }
    }
    for (int i = 0; i < N; ++i) {
        const Example& ex = data.examples[i];
        for (int r = 0; r < m; ++r) {
            std::span<const double> row{
                Mr.data() + static_cast<std::size_t>(r) * d,
                static_cast<std::size_t>(d)};
            int jn = 0;
            for (int j = 0; j < data.config.P; ++j) {
                if (j == ex.signal_index) continue;
                const double inc =
                    (3.0 * eta / N) * ex.label * dot(row, ex.patches.row(j));
                const double predicted = at.metrics.v_at(i, jn, r) + inc;
                rep.max_noise_residual =
                    std::max(rep.max_noise_residual,
                             std::abs(next.metrics.v_at(i, jn, r) - predicted));
                ++jn;
            }
        }
    }
    rep.pass = rep.max_signal_residual <= 1e-9 && rep.max_noise_residual <= 1e-9;
    return rep;
}

double tensor_power_threshold(double z0, double m_lo, double M_hi, double v) {
    if (!(z0 > 0.0) || !(m_lo > 0.0) || M_hi < m_lo || z0 > v)
        throw ConfigError("tensor_power_threshold requires 0 < z0 <= v, 0 < m <= M");
    const double k = std::ceil(std::log(v / z0) / std::log(2.0));
    return 3.0 / (m_lo * z0) + (8.0 * M_hi / m_lo) * k;
}

double tensor_power_sum_threshold(double z0, double A, double C, double v) {
    if (!(z0 > 0.0) || !(A > 0.0) || z0 > v)
        throw ConfigError("tensor_power_sum_threshold requires 0 < z0 <= v, A > 0");
    if (C > z0 / 2.0)
        throw ConfigError("tensor_power_sum_threshold requires C <= z0 / 2");
    const double k = std::ceil(std::log(v / z0) / std::log(2.0));
    return 8.0 * k + 21.0 / (z0 * A);
}

double tensor_power_decay_bound(double A, int t, int T0) {
    if (t <= T0) throw ConfigError("decay bound needs t > T0");
    if (!(A > 0.0)) throw ConfigError("decay bound needs A > 0");
    return 1.0 / (A * (t - T0));
}

}  // namespace cgro
