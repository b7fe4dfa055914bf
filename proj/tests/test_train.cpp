#include <doctest.h>

#include <cmath>

#include "cgro/errors.hpp"
#include "cgro/serialization.hpp"
#include "cgro/threading.hpp"
#include "cgro/train.hpp"

using namespace cgro;

namespace {

RunConfig small_run(int d = 8, int P = 2, int N = 4, int m = 3, int T = 5) {
    RunConfig cfg;
    cfg.data.d = d;
    cfg.data.P = P;
    cfg.data.alpha = 1.6;
    cfg.data.sigma = 0.5;
    cfg.data.seed = 31;
    cfg.data.w_star.assign(d, 0.0);
    cfg.data.w_star[0] = 1.0;
    cfg.N = N;
    cfg.m = m;
    cfg.sigma0 = 0.2;
    cfg.eta = 0.05;
    cfg.T = T;
    cfg.lambda = 0.5;
    cfg.telemetry_every = 1;
    cfg.seed = 32;
    cfg.attack.method = AttackMethod::GTA;
    cfg.attack.gamma = 0.8;
    cfg.attack.delta = cfg.attack.gamma * cfg.data.alpha;
    return cfg;
}

}  // namespace

TEST_CASE("train: init weights determinism, scale, and zero case") {
    RunConfig cfg = small_run();
    cfg.m = 100;
    cfg.data.d = 1000;
    cfg.data.w_star.assign(1000, 0.0);
    cfg.data.w_star[0] = 1.0;
    cfg.sigma0 = 0.3;
    const CnnWeights a = init_weights(cfg);
    const CnnWeights b = init_weights(cfg);
    CHECK(a.rows.a == b.rows.a);

    double sum = 0.0, sum2 = 0.0;
    for (double x : a.rows.a) {
        sum += x;
        sum2 += x * x;
    }
    const double n = static_cast<double>(a.rows.a.size());
    const double var = sum2 / n - (sum / n) * (sum / n);
    const double target = cfg.sigma0 * cfg.sigma0;
    CHECK(std::abs(var - target) < 5.0 * target * std::sqrt(2.0 / n));

    cfg.sigma0 = 0.0;
    for (double x : init_weights(cfg).rows.a) CHECK(x == 0.0);
}

TEST_CASE("train: adversarial objective reductions") {
    const RunConfig cfg = small_run();
    const Dataset data = sample_dataset(cfg.data, cfg.N);
    std::vector<Mat> adv;
    for (const Example& ex : data.examples)
        adv.push_back(gta(ex, cfg.data, cfg.attack.gamma, cfg.attack.delta));

    const CnnWeights w0(cfg.m, cfg.data.d);
    CHECK(adversarial_objective(w0, data, adv, 0.7) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    const CnnWeights w = init_weights(cfg);
    double clean_mean = 0.0;
    for (const Example& ex : data.examples)
        clean_mean += logistic_loss(w, ex.patches, ex.label);
    clean_mean /= cfg.N;
    CHECK(adversarial_objective(w, data, adv, 0.0) ==
          doctest::Approx(clean_mean).epsilon(1e-12));

    // Hand composition at lambda = 1/2 on a 2-sample set.
    const Dataset two{data.config, {data.examples[0], data.examples[1]}};
    const std::vector<Mat> adv2{adv[0], adv[1]};
    double hand = 0.0;
    for (int i = 0; i < 2; ++i)
        hand += 0.5 * logistic_loss(w, two.examples[i].patches,
                                    two.examples[i].label) +
                0.5 * logistic_loss(w, adv2[i], two.examples[i].label);
    hand /= 2.0;
    CHECK(adversarial_objective(w, two, adv2, 0.5) ==
          doctest::Approx(hand).epsilon(1e-12));
}

TEST_CASE("train: T = 0 returns the initialization") {
    RunConfig cfg = small_run();
    cfg.T = 0;
    const Dataset data = sample_dataset(cfg.data, cfg.N);
    const TrainResult res = train(cfg, data);
    CHECK(res.weights.rows.a == init_weights(cfg).rows.a);
    CHECK(res.telemetry.size() == 1);
}

TEST_CASE("train: one step equals the hand-composed update") {
    RunConfig cfg = small_run();
    cfg.N = 1;
    cfg.T = 1;
    const Dataset data = sample_dataset(cfg.data, 1);
    const TrainResult res = train(cfg, data);

    const CnnWeights w0 = init_weights(cfg);
    const Mat adv = gta(data.examples[0], cfg.data, cfg.attack.gamma,
                        cfg.attack.delta);
    const Mat gc = grad_weights(w0, data.examples[0].patches,
                                data.examples[0].label);
    const Mat ga = grad_weights(w0, adv, data.examples[0].label);
    for (std::size_t k = 0; k < w0.rows.a.size(); ++k) {
        const double expect =
            w0.rows.a[k] -
            cfg.eta * ((1.0 - cfg.lambda) * gc.a[k] + cfg.lambda * ga.a[k]);
        CHECK(res.weights.rows.a[k] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("train: every logged step satisfies the exact update equation") {
    const RunConfig cfg = small_run();
    const Dataset data = sample_dataset(cfg.data, cfg.N);
    const TrainResult res = train(cfg, data);
    REQUIRE(res.telemetry.size() == static_cast<std::size_t>(cfg.T) + 1);
    for (int t = 0; t < cfg.T; ++t) {
        const CnnWeights& wt = res.telemetry[t].weights;
        Mat grad(cfg.m, cfg.data.d);
        for (int i = 0; i < cfg.N; ++i) {
            const Example& ex = data.examples[i];
            const Mat gc = grad_weights(wt, ex.patches, ex.label);
            const Mat ga = grad_weights(wt, res.adv_examples[i], ex.label);
            for (std::size_t k = 0; k < grad.a.size(); ++k)
                grad.a[k] += (1.0 - cfg.lambda) * gc.a[k] + cfg.lambda * ga.a[k];
        }
        double worst = 0.0;
        for (std::size_t k = 0; k < grad.a.size(); ++k) {
            const double next =
                wt.rows.a[k] - cfg.eta * grad.a[k] / cfg.N;
            worst = std::max(worst, std::abs(res.telemetry[t + 1].weights.rows.a[k] -
                                             next));
        }
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("train: divergence raises with the iteration index") {
    RunConfig cfg = small_run();
    cfg.eta = 1e200;
    cfg.sigma0 = 10.0;
    const Dataset data = sample_dataset(cfg.data, cfg.N);
    try {
        train(cfg, data);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.iteration >= 1);
    }
}

TEST_CASE("train: telemetry identical across thread counts") {
    const RunConfig cfg = small_run(8, 3, 6, 3, 8);
    const Dataset data = sample_dataset(cfg.data, cfg.N);
    set_threads(1);
    const TrainResult r1 = train(cfg, data);
    set_threads(3);
    const TrainResult r3 = train(cfg, data);
    set_threads(1);
    CHECK(telemetry_csv(r1.telemetry) == telemetry_csv(r3.telemetry));
    CHECK(r1.weights.rows.a == r3.weights.rows.a);
}
