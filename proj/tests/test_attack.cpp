#include <doctest.h>

#include <cmath>

#include "cgro/attack.hpp"
#include "cgro/data.hpp"
#include "cgro/errors.hpp"
#include "cgro/train.hpp"

using namespace cgro;

namespace {

DataConfig axis_cfg(int d = 10, int P = 3, double alpha = 2.0, double sigma = 0.5) {
    DataConfig cfg;
    cfg.d = d;
    cfg.P = P;
    cfg.alpha = alpha;
    cfg.sigma = sigma;
    cfg.seed = 21;
    cfg.w_star.assign(d, 0.0);
    cfg.w_star[0] = 1.0;
    return cfg;
}

}  // namespace

TEST_CASE("attack: gta with gamma 0 is the identity") {
    const DataConfig cfg = axis_cfg();
    Rng rng(1);
    const Example ex = sample_example(cfg, rng);
    const Mat adv = gta(ex, cfg, 0.0, 1.0);
    CHECK(adv.a == ex.patches.a);
}

TEST_CASE("attack: gta shrinks the signal patch to alpha (1-gamma) y w*") {
    const DataConfig cfg = axis_cfg();
    Rng rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        const Example ex = sample_example(cfg, rng);
        const double gamma = 0.85;
        const Mat adv = gta(ex, cfg, gamma, cfg.alpha);
        double err = 0.0;
        for (int c = 0; c < cfg.d; ++c)
            err = std::max(err, std::abs(adv(ex.signal_index, c) -
                                         cfg.alpha * (1.0 - gamma) * ex.label *
                                             cfg.w_star[c]));
        CHECK(err < 1e-12);
        // Noise patches untouched.
        for (int j = 0; j < cfg.P; ++j) {
            if (j == ex.signal_index) continue;
            for (int c = 0; c < cfg.d; ++c) CHECK(adv(j, c) == ex.patches(j, c));
        }
    }
}

TEST_CASE("attack: gta perturbation norm equals delta under defaults") {
    const RunConfig cfg = default_parameterization(64);
    Rng rng(3);
    const Example ex = sample_example(cfg.data, rng);
    const Mat adv = gta(ex, cfg.data, cfg.attack.gamma, cfg.attack.delta);
    CHECK(perturbation_norm(ex.patches, adv, NormP::L2) ==
          doctest::Approx(cfg.attack.delta).epsilon(1e-9));
}

TEST_CASE("attack: gta composition multiplies the shrink factors") {
    const DataConfig cfg = axis_cfg();
    Rng rng(4);
    Example ex = sample_example(cfg, rng);
    const double g1 = 0.6, g2 = 0.5;
    Example mid = ex;
    mid.patches = gta(ex, cfg, g1, 10.0);
    const Mat adv = gta(mid, cfg, g2, 10.0);
    const double coeff = dot(adv.row(ex.signal_index), cfg.w_star);
    CHECK(coeff ==
          doctest::Approx(cfg.alpha * (1.0 - g1) * (1.0 - g2) * ex.label)
              .epsilon(1e-12));
}

TEST_CASE("attack: gta radius violation is rejected") {
    const DataConfig cfg = axis_cfg();
    Rng rng(5);
    const Example ex = sample_example(cfg, rng);
    CHECK_THROWS_AS(gta(ex, cfg, 0.9, 0.5 * cfg.alpha), ConfigError);
}

TEST_CASE("attack: pgd with delta 0 returns the input") {
    const DataConfig cfg = axis_cfg();
    Rng rng(6);
    const Example ex = sample_example(cfg, rng);
    CnnWeights w(2, cfg.d);
    Rng wr(7);
    for (double& v : w.rows.a) v = 0.3 * wr.normal();
    AttackSpec spec;
    spec.method = AttackMethod::PGD;
    spec.delta = 0.0;
    const Mat adv = pgd(w, ex.patches, ex.label, spec, 1);
    CHECK(adv.a == ex.patches.a);
}

TEST_CASE("attack: pgd never decreases the loss and stays feasible") {
    const DataConfig cfg = axis_cfg();
    Rng rng(8);
    for (const NormP p : {NormP::L2, NormP::LInf}) {
        for (int rep = 0; rep < 10; ++rep) {
            const Example ex = sample_example(cfg, rng);
            CnnWeights w(3, cfg.d);
            Rng wr(100 + rep);
            for (double& v : w.rows.a) v = 0.3 * wr.normal();
            AttackSpec spec;
            spec.method = AttackMethod::PGD;
            spec.norm_p = p;
            spec.delta = p == NormP::L2 ? 0.8 : 0.1;
            spec.steps = 15;
            spec.restarts = 3;
            const Mat adv = pgd(w, ex.patches, ex.label, spec, 500 + rep);
            CHECK(logistic_loss(w, adv, ex.label) >=
                  logistic_loss(w, ex.patches, ex.label) - 1e-12);
            CHECK(perturbation_norm(ex.patches, adv, p) <=
                  spec.delta * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("attack: pgd recorded best is monotone in restarts") {
    const DataConfig cfg = axis_cfg();
    Rng rng(9);
    const Example ex = sample_example(cfg, rng);
    CnnWeights w(2, cfg.d);
    Rng wr(10);
    for (double& v : w.rows.a) v = 0.4 * wr.normal();
    AttackSpec spec;
    spec.method = AttackMethod::PGD;
    spec.delta = 0.6;
    spec.steps = 10;
    double prev = -1.0;
    for (int restarts = 1; restarts <= 5; ++restarts) {
        spec.restarts = restarts;
        const Mat adv = pgd(w, ex.patches, ex.label, spec, 77);
        const double loss = logistic_loss(w, adv, ex.label);
        CHECK(loss >= prev - 1e-15);
        prev = loss;
    }
}

TEST_CASE("attack: pgd reaches the analytic maximizer on a 1-d toy") {
    // One neuron, one patch, one dimension: loss is monotone decreasing in
    // w * x, so the ball-boundary point x - delta * sign(w) is optimal.
    CnnWeights w(1, 1);
    w.rows(0, 0) = 0.9;
    Mat x(1, 1);
    x(0, 0) = 0.7;
    AttackSpec spec;
    spec.method = AttackMethod::PGD;
    spec.norm_p = NormP::L2;
    spec.delta = 0.5;
    spec.steps = 40;
    spec.restarts = 2;
    const Mat adv = pgd(w, x, 1, spec, 3);
    CHECK(std::abs(adv(0, 0) - (0.7 - 0.5)) < 1e-6);
}
