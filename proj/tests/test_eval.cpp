#include <doctest.h>

#include <cmath>

#include "cgro/errors.hpp"
#include "cgro/eval.hpp"
#include "cgro/train.hpp"

using namespace cgro;

namespace {

DataConfig cfg_axis(double sigma = 0.5) {
    DataConfig cfg;
    cfg.d = 10;
    cfg.P = 3;
    cfg.alpha = 2.0;
    cfg.sigma = sigma;
    cfg.seed = 51;
    cfg.w_star.assign(10, 0.0);
    cfg.w_star[0] = 1.0;
    return cfg;
}

}  // namespace

TEST_CASE("eval: zero weights count ties as errors") {
    const DataConfig cfg = cfg_axis();
    const CnnWeights w(2, cfg.d);
    const RateEstimate r = clean_error(w, cfg, 200, 1);
    CHECK(r.rate == 1.0);
}

TEST_CASE("eval: pure-signal classifier has zero clean error") {
    const DataConfig cfg = cfg_axis(0.0);
    CnnWeights w(1, cfg.d);
    w.rows(0, 0) = 0.7;  // c * w_star with c > 0
    const RateEstimate r = clean_error(w, cfg, 500, 2);
    CHECK(r.rate == 0.0);
}

TEST_CASE("eval: delta = 0 robust error equals clean error on the same seeds") {
    const DataConfig cfg = cfg_axis();
    CnnWeights w(2, cfg.d);
    Rng wr(3);
    for (double& v : w.rows.a) v = 0.3 * wr.normal();
    AttackSpec spec;
    spec.method = AttackMethod::PGD;
    spec.delta = 0.0;
    const RateEstimate c = clean_error(w, cfg, 400, 7);
    const RateEstimate r = robust_error(w, cfg, spec, 400, 7);
    CHECK(c.rate == r.rate);
}

TEST_CASE("eval: gta does not flip a pure-signal classifier") {
    const DataConfig cfg = cfg_axis();
    CnnWeights w(1, cfg.d);
    w.rows(0, 0) = 0.7;
    AttackSpec spec;
    spec.method = AttackMethod::GTA;
    spec.gamma = 0.9;
    spec.delta = spec.gamma * cfg.alpha;
    const RateEstimate r = robust_error(w, cfg, spec, 300, 4);
    // With sigma > 0 noise is orthogonal to w*, so the single-row net only
    // sees the shrunk signal: sign preserved.
    CHECK(r.rate == 0.0);
}

TEST_CASE("eval: robust train error on zero weights is one") {
    const DataConfig cfg = cfg_axis();
    const Dataset data = sample_dataset(cfg, 8);
    std::vector<Mat> adv;
    for (const Example& ex : data.examples)
        adv.push_back(gta(ex, cfg, 0.5, cfg.alpha));
    const CnnWeights w(2, cfg.d);
    CHECK(robust_train_error(w, data, adv) == 1.0);

    adv.pop_back();
    CHECK_THROWS_AS(robust_train_error(w, data, adv), ConfigError);
}

TEST_CASE("eval: paired pgd evaluation never flips incorrect to correct") {
    const DataConfig cfg = cfg_axis();
    CnnWeights w(3, cfg.d);
    Rng wr(5);
    for (double& v : w.rows.a) v = 0.25 * wr.normal();
    AttackSpec spec;
    spec.method = AttackMethod::PGD;
    spec.delta = 0.7;
    spec.steps = 10;
    spec.restarts = 2;
    const std::uint64_t seed = 99;
    for (int i = 0; i < 100; ++i) {
        // Mirror the eval stream derivation so draws are paired.
        Rng rng(derive_stream(seed, "eval.mc", i));
        const Example ex = sample_example(cfg, rng);
        const bool clean_err = ex.label * forward(w, ex.patches) <= 0.0;
        const Mat adv = pgd(w, ex.patches, ex.label, spec,
                            derive_stream(seed, "eval.pgd", i));
        const bool adv_err = ex.label * forward(w, adv) <= 0.0;
        CHECK(!(clean_err && !adv_err));
    }
}

TEST_CASE("eval: stderr halves when the sample count quadruples") {
    const DataConfig cfg = cfg_axis();
    CnnWeights w(2, cfg.d);
    Rng wr(6);
    for (double& v : w.rows.a) v = 0.2 * wr.normal();
    const RateEstimate a = clean_error(w, cfg, 500, 12);
    const RateEstimate b = clean_error(w, cfg, 2000, 12);
    REQUIRE(a.stderr_ > 0.0);
    REQUIRE(b.stderr_ > 0.0);
    CHECK(std::abs(b.stderr_ * 2.0 / a.stderr_ - 1.0) < 0.2);
}
