#include "cgro/data.hpp"

#include <cmath>
#include <string>

#include "cgro/errors.hpp"
#include "cgro/threading.hpp"
#include "cgro/train.hpp"

namespace cgro {

void DataConfig::validate() const {
    if (d < 2) throw ConfigError("data.d must be >= 2", "data.d");
    if (P < 2) throw ConfigError("data.P must be >= 2", "data.P");
    if (!(alpha > 0.0)) throw ConfigError("data.alpha must be > 0", "data.alpha");
    if (!(sigma >= 0.0)) throw ConfigError("data.sigma must be >= 0", "data.sigma");
    if (static_cast<int>(w_star.size()) != d)
        throw ConfigError("data.w_star must have dimension d", "data.w_star");
    const double n = norm2(w_star);
    if (std::abs(n - 1.0) > 1e-12)
        throw ConfigError("data.w_star must be unit length", "data.w_star");
}

Example sample_example(const DataConfig& cfg, Rng& rng) {
    Example ex;
    ex.label = rng.uniform01() < 0.5 ? -1 : 1;
    ex.signal_index = static_cast<int>(rng.uniform_index(cfg.P));
    ex.patches = Mat(cfg.P, cfg.d);
    for (int j = 0; j < cfg.P; ++j) {
        auto patch = ex.patches.row(j);
        if (j == ex.signal_index) {
            for (int c = 0; c < cfg.d; ++c)
                patch[c] = cfg.alpha * ex.label * cfg.w_star[c];
        } else {
            for (int c = 0; c < cfg.d; ++c) patch[c] = cfg.sigma * rng.normal();
            // Explicit projection makes <patch, w*> = 0 to machine
            // precision; applied twice to absorb the rounding of the first
            // pass.
            for (int pass = 0; pass < 2; ++pass) {
                const double p = dot(patch, cfg.w_star);
                axpy(-p, cfg.w_star, patch);
            }
        }
    }
    return ex;
}

Dataset sample_dataset(const DataConfig& cfg, int n) {
    cfg.validate();
    if (n < 1) throw ConfigError("dataset size must be >= 1", "N");
    Dataset out;
    out.config = cfg;
    out.examples.resize(n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        Rng rng(derive_stream(cfg.seed, "data.example", i));
        out.examples[i] = sample_example(cfg, rng);
    });
    return out;
}

RunConfig default_parameterization(int d, double polylog_c) {
    if (d < 8) throw ConfigError("default parameterization requires d >= 8", "data.d");
    if (!(polylog_c > 0.0)) throw ConfigError("polylog_c must be > 0", "polylog_c");
    const double ln2d = std::log(d) * std::log(d);
    const double polylog = polylog_c * ln2d;

    RunConfig cfg;
    cfg.data.d = d;
    cfg.data.P = std::max(2, static_cast<int>(std::ceil(ln2d / 2.0)));
    cfg.data.alpha = std::pow(d, 0.249) * polylog;
    cfg.data.sigma = std::pow(d, -0.509);
    cfg.data.w_star.assign(d, 0.0);
    cfg.data.w_star[0] = 1.0;

    cfg.m = std::max(1, static_cast<int>(std::ceil(polylog)));
    cfg.sigma0 = std::sqrt(polylog / d);
    cfg.eta = 1.0;
    cfg.lambda = 0.5;
    cfg.T = 2000;
    cfg.N = 100;
    cfg.telemetry_every = 100;

    const double gamma = 1.0 - 1.0 / (std::sqrt(d) * polylog);
    cfg.attack.method = AttackMethod::GTA;
    cfg.attack.norm_p = NormP::L2;
    cfg.attack.gamma = gamma;
    cfg.attack.delta = gamma * cfg.data.alpha;
    return cfg;
}

}  // namespace cgro
