#include "cgro/train.hpp"

#include <cmath>
#include <string>

#include "cgro/errors.hpp"
#include "cgro/threading.hpp"

namespace cgro {

void RunConfig::validate() const {
    data.validate();
    if (N < 1) throw ConfigError("N must be >= 1", "N");
    if (m < 1) throw ConfigError("m must be >= 1", "m");
    if (!(sigma0 >= 0.0)) throw ConfigError("sigma0 must be >= 0", "sigma0");
    if (!(eta > 0.0)) throw ConfigError("eta must be > 0", "eta");
    if (T < 0) throw ConfigError("T must be >= 0", "T");
    if (lambda < 0.0 || lambda >= 1.0)
        throw ConfigError("lambda must be in [0, 1)", "lambda");
    if (telemetry_every < 1)
        throw ConfigError("telemetry_every must be >= 1", "telemetry_every");
    attack.validate(data);
}

CnnWeights init_weights(const RunConfig& cfg) {
    Rng rng(derive_stream(cfg.seed, "init", 0));
    CnnWeights w(cfg.m, cfg.data.d);
    for (double& x : w.rows.a) x = cfg.sigma0 * rng.normal();
    return w;
}

double adversarial_objective(const CnnWeights& w, const Dataset& data,
                             const std::vector<Mat>& adv, double lambda) {
    if (adv.size() != data.examples.size())
        throw ConfigError("adversarial cache size does not match dataset");
    double acc = 0.0;
    for (std::size_t i = 0; i < data.examples.size(); ++i) {
        const int y = data.examples[i].label;
        acc += (1.0 - lambda) * logistic_loss(w, data.examples[i].patches, y) +
               lambda * logistic_loss(w, adv[i], y);
    }
    return acc / static_cast<double>(data.examples.size());
}

namespace {

struct StepStats {
    double objective = 0.0;
    double clean_err = 0.0;
    double robust_err = 0.0;
    std::vector<double> psi_clean, psi_adv;
};

TelemetrySnapshot make_snapshot(int iteration, const CnnWeights& w,
                                const Dataset& data, const StepStats& st) {
    TelemetrySnapshot snap;
    snap.iteration = iteration;
    snap.weights = w;
    snap.metrics = feature_metrics(w, data);
    snap.psi_clean = st.psi_clean;
    snap.psi_adv = st.psi_adv;
    snap.objective = st.objective;
    snap.clean_train_err = st.clean_err;
    snap.robust_train_err = st.robust_err;
    return snap;
}

}  // namespace

TrainResult train(const RunConfig& cfg, const Dataset& data) {
    cfg.validate();
    if (static_cast<int>(data.examples.size()) != cfg.N)
        throw ConfigError("dataset size does not match N", "N");
    const int N = cfg.N;
    const double lambda = cfg.lambda;

    TrainResult res;
    res.weights = init_weights(cfg);

    // GTA training examples do not depend on W, so they are cached once.
    res.adv_examples.reserve(N);
    for (const Example& ex : data.examples)
        res.adv_examples.push_back(
            gta(ex, data.config, cfg.attack.gamma, cfg.attack.delta));

    const std::size_t wsize = res.weights.rows.a.size();
    std::vector<Mat> sample_grads(N);

    auto step_stats = [&](const CnnWeights& w) {
        StepStats st;
        st.psi_clean.resize(N);
        st.psi_adv.resize(N);
        std::vector<double> lc(N), la(N);
        std::vector<int> ec(N), ea(N);
        parallel_for(static_cast<std::size_t>(N), [&](std::size_t i) {
            const Example& ex = data.examples[i];
            const double fc = forward(w, ex.patches);
            const double fa = forward(w, res.adv_examples[i]);
            st.psi_clean[i] = negative_sigmoid(ex.label * fc);
            st.psi_adv[i] = negative_sigmoid(ex.label * fa);
            lc[i] = stable_softplus_neg(ex.label * fc);
            la[i] = stable_softplus_neg(ex.label * fa);
            ec[i] = ex.label * fc <= 0.0 ? 1 : 0;
            ea[i] = ex.label * fa <= 0.0 ? 1 : 0;
        });
        double obj = 0.0;
        int nec = 0, nea = 0;
        for (int i = 0; i < N; ++i) {
            obj += (1.0 - lambda) * lc[i] + lambda * la[i];
            nec += ec[i];
            nea += ea[i];
        }
        st.objective = obj / N;
        st.clean_err = static_cast<double>(nec) / N;
        st.robust_err = static_cast<double>(nea) / N;
        return st;
    };

    StepStats st = step_stats(res.weights);
    res.telemetry.push_back(make_snapshot(0, res.weights, data, st));

    for (int t = 0; t < cfg.T; ++t) {
        // Per-sample gradients in parallel, reduced in fixed sample order.
        parallel_for(static_cast<std::size_t>(N), [&](std::size_t i) {
            const Example& ex = data.examples[i];
            Mat g = grad_weights(res.weights, ex.patches, ex.label);
            const Mat ga = grad_weights(res.weights, res.adv_examples[i], ex.label);
            for (std::size_t k = 0; k < wsize; ++k)
                g.a[k] = (1.0 - lambda) * g.a[k] + lambda * ga.a[k];
            sample_grads[i] = std::move(g);
        });
        Mat grad(cfg.m, cfg.data.d);
        for (int i = 0; i < N; ++i)
            for (std::size_t k = 0; k < wsize; ++k) grad.a[k] += sample_grads[i].a[k];
        for (std::size_t k = 0; k < wsize; ++k) {
            grad.a[k] /= N;
            res.weights.rows.a[k] -= cfg.eta * grad.a[k];
        }
        if (!grad.all_finite() || !res.weights.rows.all_finite())
            throw DivergenceError(
                "non-finite gradient or weights at iteration " + std::to_string(t + 1),
                t + 1);

        st = step_stats(res.weights);
        if (!std::isfinite(st.objective))
            throw DivergenceError(
                "non-finite objective at iteration " + std::to_string(t + 1), t + 1);
        const int it = t + 1;
        if (it % cfg.telemetry_every == 0 || it == cfg.T)
            res.telemetry.push_back(make_snapshot(it, res.weights, data, st));
    }
    return res;
}

}  // namespace cgro
