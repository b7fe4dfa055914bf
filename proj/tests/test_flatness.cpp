#include <doctest.h>

#include <cmath>

#include "cgro/flatness.hpp"
#include "cgro/train.hpp"

using namespace cgro;

namespace {

CnnWeights rand_w(int m, int d, std::uint64_t seed, double sc) {
    CnnWeights w(m, d);
    Rng rng(seed);
    for (double& v : w.rows.a) v = sc * rng.normal();
    return w;
}

Mat rand_x(int P, int d, std::uint64_t seed, double sc) {
    Mat x(P, d);
    Rng rng(seed);
    for (double& v : x.a) v = sc * rng.normal();
    return x;
}

}  // namespace

TEST_CASE("flatness: eps = 0 returns the plain gradient norm") {
    const CnnWeights w = rand_w(2, 5, 1, 0.4);
    const Mat x = rand_x(3, 5, 2, 0.8);
    ProbeConfig probe;
    for (const HolderPair pair : {HolderPair::L2_L2, HolderPair::LInf_L1}) {
        const double expect = holder_q_norm(grad_input(w, x, 1), pair);
        const ProbeResult r = max_grad_norm(w, x, 1, 0.0, pair, probe, 3);
        CHECK(r.value == expect);
        CHECK(max_loss_change(w, x, 1, 0.0, pair, probe, 3).value == 0.0);
    }
}

TEST_CASE("flatness: zero weights give zero everywhere") {
    const CnnWeights w(2, 5);
    const Mat x = rand_x(2, 5, 4, 0.5);
    ProbeConfig probe;
    CHECK(max_grad_norm(w, x, 1, 0.5, HolderPair::L2_L2, probe, 5).value == 0.0);
    CHECK(max_loss_change(w, x, 1, 0.5, HolderPair::L2_L2, probe, 5).value == 0.0);
}

TEST_CASE("flatness: ascent direction matches finite differences of the norm") {
    // The analytic direction is H u; check grad of F(xi) = ||grad L(X+xi)||_2
    // against central differences in random directions.
    const CnnWeights w = rand_w(3, 4, 6, 0.5);
    const Mat x = rand_x(2, 4, 7, 0.6);
    const int y = -1;
    Rng rng(8);

    // Build the analytic gradient at a generic offset point.
    Mat at = x;
    for (double& v : at.a) v += 0.05 * rng.normal();

    auto F = [&](const Mat& pt) {
        return holder_q_norm(grad_input(w, pt, y), HolderPair::L2_L2);
    };

    // Analytic: grad F = H * (g / ||g||). Reuse the probe machinery by
    // taking one tiny ascent step and checking the directional derivative
    // along random directions instead: F(at + h e) - F(at - h e) / 2h
    // must equal <gradF, e>. gradF itself is not exposed, so recompute it
    // here from the same closed form the probe uses.
    const Mat g = grad_input(w, at, y);
    const double gn = holder_q_norm(g, HolderPair::L2_L2);
    REQUIRE(gn > 0.0);

    // Hessian-vector product via finite differences of grad_input (an
    // independent route): H u ~ (grad(at + h u) - grad(at - h u)) / 2h.
    Mat u(at.rows, at.cols);
    for (std::size_t i = 0; i < u.a.size(); ++i) u.a[i] = g.a[i] / gn;
    const double h = 1e-6;
    Mat up = at, dn = at;
    for (std::size_t i = 0; i < at.a.size(); ++i) {
        up.a[i] += h * u.a[i];
        dn.a[i] -= h * u.a[i];
    }
    const Mat gu = grad_input(w, up, y);
    const Mat gd = grad_input(w, dn, y);
    Mat hu_fd(at.rows, at.cols);
    for (std::size_t i = 0; i < at.a.size(); ++i)
        hu_fd.a[i] = (gu.a[i] - gd.a[i]) / (2.0 * h);

    // <H u, e> must equal the directional derivative of F along e.
    for (int rep = 0; rep < 5; ++rep) {
        Mat e(at.rows, at.cols);
        double n2 = 0.0;
        for (double& v : e.a) {
            v = rng.normal();
            n2 += v * v;
        }
        for (double& v : e.a) v /= std::sqrt(n2);
        Mat pe = at, me = at;
        const double he = 1e-6;
        for (std::size_t i = 0; i < at.a.size(); ++i) {
            pe.a[i] += he * e.a[i];
            me.a[i] -= he * e.a[i];
        }
        const double dfd = (F(pe) - F(me)) / (2.0 * he);
        double dana = 0.0;
        for (std::size_t i = 0; i < at.a.size(); ++i) dana += hu_fd.a[i] * e.a[i];
        CHECK(dfd == doctest::Approx(dana).epsilon(2e-4));
    }
}

TEST_CASE("flatness: probe matches a dense grid search on a tiny instance") {
    CnnWeights w(1, 2);
    w.rows(0, 0) = 0.8;
    w.rows(0, 1) = -0.5;
    Mat x(1, 2);
    x(0, 0) = 0.6;
    x(0, 1) = 0.3;
    const double eps = 0.25;
    ProbeConfig probe;
    probe.steps = 60;
    probe.restarts = 12;

    double grid_grad = 0.0, grid_loss = 0.0;
    const double base_loss = logistic_loss(w, x, 1);
    const int K = 50;
    for (int i = -K; i <= K; ++i)
        for (int j = -K; j <= K; ++j) {
            Mat pt = x;
            pt(0, 0) += eps * i / K;
            pt(0, 1) += eps * j / K;
            grid_grad = std::max(
                grid_grad, holder_q_norm(grad_input(w, pt, 1), HolderPair::LInf_L1));
            grid_loss = std::max(grid_loss, logistic_loss(w, pt, 1) - base_loss);
        }
    const double got_grad =
        max_grad_norm(w, x, 1, eps, HolderPair::LInf_L1, probe, 9).value;
    const double got_loss =
        max_loss_change(w, x, 1, eps, HolderPair::LInf_L1, probe, 9).value;
    CHECK(std::abs(got_grad - grid_grad) <= 0.02 * std::max(grid_grad, got_grad));
    CHECK(std::abs(got_loss - grid_loss) <= 0.02 * std::max(grid_loss, got_loss));
}

TEST_CASE("flatness: radius monotonicity with argmax seeding") {
    const CnnWeights w = rand_w(2, 6, 11, 0.5);
    const Mat x = rand_x(2, 6, 12, 0.7);
    ProbeConfig probe;
    probe.steps = 20;
    probe.restarts = 4;
    const ProbeResult r1 =
        max_grad_norm(w, x, 1, 0.2, HolderPair::L2_L2, probe, 13);
    const ProbeResult r2 =
        max_grad_norm(w, x, 1, 0.4, HolderPair::L2_L2, probe, 13, {r1.xi});
    CHECK(r2.value >= r1.value - 1e-9);
}

TEST_CASE("flatness: global flatness of zero weights is zero, one-sample case") {
    DataConfig cfg;
    cfg.d = 6;
    cfg.P = 2;
    cfg.alpha = 1.5;
    cfg.sigma = 0.4;
    cfg.seed = 61;
    cfg.w_star.assign(6, 0.0);
    cfg.w_star[0] = 1.0;
    ProbeConfig probe;
    probe.steps = 5;
    probe.restarts = 2;
    const CnnWeights w0(2, 6);
    const MeanEstimate z = global_flatness(w0, cfg, 0.3, 10, HolderPair::L2_L2,
                                           probe, 71);
    CHECK(z.mean == 0.0);

    // n_mc = 1 equals a single probed sample under the documented streams.
    const CnnWeights w = rand_w(2, 6, 14, 0.4);
    const MeanEstimate one =
        global_flatness(w, cfg, 0.3, 1, HolderPair::L2_L2, probe, 72);
    Rng rng(derive_stream(72, "flatness.global", 0));
    const Example ex = sample_example(cfg, rng);
    const double direct =
        max_grad_norm(w, ex.patches, ex.label, 0.3, HolderPair::L2_L2, probe,
                      derive_stream(72, "flatness.global.probe", 0))
            .value;
    CHECK(one.mean == direct);
}

TEST_CASE("flatness: report fields are internally consistent") {
    RunConfig cfg;
    cfg.data.d = 8;
    cfg.data.P = 2;
    cfg.data.alpha = 1.5;
    cfg.data.sigma = 0.4;
    cfg.data.seed = 81;
    cfg.data.w_star.assign(8, 0.0);
    cfg.data.w_star[0] = 1.0;
    cfg.N = 4;
    cfg.m = 2;
    cfg.sigma0 = 0.2;
    cfg.eta = 0.05;
    cfg.T = 2;
    cfg.lambda = 0.5;
    cfg.telemetry_every = 1;
    cfg.seed = 82;
    cfg.attack.gamma = 0.6;
    cfg.attack.delta = cfg.attack.gamma * cfg.data.alpha;

    const Dataset data = sample_dataset(cfg.data, cfg.N);
    const TrainResult res = train(cfg, data);
    ProbeConfig probe;
    probe.steps = 5;
    probe.restarts = 2;
    const FlatnessReport rep =
        flatness_report(res.weights, cfg.T, data, res.adv_examples, cfg, 0.3,
                        HolderPair::L2_L2, probe, 8, 83);
    const double D = static_cast<double>(cfg.data.P) * cfg.data.d;
    CHECK(rep.bound_rhs ==
          doctest::Approx(std::pow(4.0, -1.0 / (D + 2.0)) * rep.global_flat)
              .epsilon(1e-12));
    CHECK(rep.local_flat_train >= 0.0);
    CHECK(rep.loss_change_train >= 0.0);
    CHECK(rep.eps == 0.3);
}
