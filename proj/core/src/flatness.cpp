#include "cgro/flatness.hpp"

#include <algorithm>
#include <cmath>

#include "cgro/errors.hpp"
#include "cgro/threading.hpp"

namespace cgro {
namespace {

double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void project_ball(std::vector<double>& xi, double eps, HolderPair pair) {
    if (pair == HolderPair::LInf_L1) {
        for (double& v : xi) v = std::clamp(v, -eps, eps);
        return;
    }
    double n2 = 0.0;
    for (double v : xi) n2 += v * v;
    const double n = std::sqrt(n2);
    if (n > eps && n > 0.0) {
        const double sc = eps / n;
        for (double& v : xi) v *= sc;
    }
}

Mat shifted(const Mat& base, const std::vector<double>& xi) {
    Mat out = base;
    for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] += xi[i];
    return out;
}

/// Loss gradient in the input plus the pieces needed for one more
/// derivative: s(r,j), psi and psi' at z = y f.
struct GradCache {
    Mat g;      // P x d
    Mat s;      // m x P
    double psi = 0.0;
    double dpsi = 0.0;
    int label = 0;
};

GradCache loss_grad_cache(const CnnWeights& w, const Mat& patches, int label) {
    GradCache c;
    c.label = label;
    const ScoreCache sc = score_cache(w, patches);
    c.s = sc.s;
    const double z = label * sc.f;
    c.psi = negative_sigmoid(z);
    c.dpsi = -c.psi * (1.0 - c.psi);
    c.g = Mat(patches.rows, patches.cols);
    for (int j = 0; j < patches.rows; ++j) {
        auto gj = c.g.row(j);
        for (int r = 0; r < w.m(); ++r) {
            const double s = c.s(r, j);
            axpy(-3.0 * c.psi * label * s * s, w.rows.row(r), gj);
        }
    }
    return c;
}

/// Hessian-vector product (d^2 L / dX^2) u via the closed form
/// (Hu)_j = -9 psi' A sum_r s_{rj}^2 w_r - 6 y psi sum_r s_{rj} p_{rj} w_r
/// with p_{rj} = <w_r, u_j> and A = sum_{r,k} s_{rk}^2 p_{rk}.
Mat hessian_vec(const CnnWeights& w, const GradCache& c, const Mat& u) {
    const int m = w.m();
    const int P = u.rows;
    Mat p(m, P);
    double A = 0.0;
    for (int r = 0; r < m; ++r) {
        const auto wr = w.rows.row(r);
        for (int j = 0; j < P; ++j) {
            const double prj = dot(wr, u.row(j));
            p(r, j) = prj;
            A += c.s(r, j) * c.s(r, j) * prj;
        }
    }
    Mat hu(P, u.cols);
    for (int j = 0; j < P; ++j) {
        auto hj = hu.row(j);
        for (int r = 0; r < m; ++r) {
            const double s = c.s(r, j);
            const double coeff =
                -9.0 * c.dpsi * A * s * s - 6.0 * c.label * c.psi * s * p(r, j);
            axpy(coeff, w.rows.row(r), hj);
        }
    }
    return hu;
}

std::vector<double> random_ball_point(Rng& rng, std::size_t dim, double eps,
                                      HolderPair pair) {
    std::vector<double> xi(dim);
    if (pair == HolderPair::LInf_L1) {
        for (double& v : xi) v = rng.uniform(-eps, eps);
    } else {
        double n2 = 0.0;
        for (double& v : xi) {
            v = rng.normal();
            n2 += v * v;
        }
        const double r = eps * std::pow(rng.uniform01(), 1.0 / dim);
        const double sc = n2 > 0.0 ? r / std::sqrt(n2) : 0.0;
        for (double& v : xi) v *= sc;
    }
    return xi;
}

}  // namespace

double holder_q_norm(const Mat& g, HolderPair pair) {
    if (pair == HolderPair::L2_L2) {
        double n2 = 0.0;
        for (double v : g.a) n2 += v * v;
        return std::sqrt(n2);
    }
    double n1 = 0.0;
    for (double v : g.a) n1 += std::abs(v);
    return n1;
}

ProbeResult max_grad_norm(const CnnWeights& w, const Mat& patches, int label,
                          double eps, HolderPair pair, const ProbeConfig& probe,
                          std::uint64_t seed,
                          const std::vector<std::vector<double>>& extra_starts) {
    const std::size_t dim = patches.a.size();
    ProbeResult best;
    best.xi.assign(dim, 0.0);
    best.value = holder_q_norm(grad_input(w, patches, label), pair);
    if (eps <= 0.0) return best;
    const double step = probe.step_mult * eps / probe.steps;

    auto run_ascent = [&](std::vector<double> xi) {
        project_ball(xi, eps, pair);
        for (int it = 0; it <= probe.steps; ++it) {
            const Mat cur = shifted(patches, xi);
            const GradCache c = loss_grad_cache(w, cur, label);
            const double val = holder_q_norm(c.g, pair);
            if (val > best.value) {
                best.value = val;
                best.xi = xi;
            }
            if (it == probe.steps) break;
            // u = d||.||_q / dg: g/||g|| for q = 2, sign(g) for q = 1
            // (smoothed subgradient: exact zeros contribute nothing).
            Mat u(cur.rows, cur.cols);
            if (pair == HolderPair::L2_L2) {
                const double n = holder_q_norm(c.g, pair);
                if (n == 0.0) break;
                for (std::size_t i = 0; i < dim; ++i) u.a[i] = c.g.a[i] / n;
            } else {
                for (std::size_t i = 0; i < dim; ++i) u.a[i] = sign0(c.g.a[i]);
            }
            const Mat dir = hessian_vec(w, c, u);
            if (pair == HolderPair::LInf_L1) {
                for (std::size_t i = 0; i < dim; ++i)
                    xi[i] += step * sign0(dir.a[i]);
            } else {
                double n2 = 0.0;
                for (double v : dir.a) n2 += v * v;
                const double n = std::sqrt(n2);
                if (n == 0.0) break;
                for (std::size_t i = 0; i < dim; ++i) xi[i] += step * dir.a[i] / n;
            }
            project_ball(xi, eps, pair);
        }
    };

    run_ascent(std::vector<double>(dim, 0.0));
    for (int restart = 1; restart < probe.restarts; ++restart) {
        Rng rng(derive_stream(seed, "flatness.restart", restart));
        run_ascent(random_ball_point(rng, dim, eps, pair));
    }
    for (const auto& start : extra_starts) run_ascent(start);
    return best;
}

ProbeResult max_loss_change(const CnnWeights& w, const Mat& patches, int label,
                            double eps, HolderPair pair, const ProbeConfig& probe,
                            std::uint64_t seed) {
    const std::size_t dim = patches.a.size();
    const double base = logistic_loss(w, patches, label);
    ProbeResult best;
    best.xi.assign(dim, 0.0);
    best.value = 0.0;
    if (eps <= 0.0) return best;
    const double step = probe.step_mult * eps / probe.steps;

    auto run_ascent = [&](std::vector<double> xi) {
        project_ball(xi, eps, pair);
        for (int it = 0; it <= probe.steps; ++it) {
            const Mat cur = shifted(patches, xi);
            const double val = logistic_loss(w, cur, label) - base;
            if (val > best.value) {
                best.value = val;
                best.xi = xi;
            }
            if (it == probe.steps) break;
            const Mat g = grad_input(w, cur, label);
            if (pair == HolderPair::LInf_L1) {
                for (std::size_t i = 0; i < dim; ++i) xi[i] += step * sign0(g.a[i]);
            } else {
                double n2 = 0.0;
                for (double v : g.a) n2 += v * v;
                const double n = std::sqrt(n2);
                if (n == 0.0) break;
                for (std::size_t i = 0; i < dim; ++i) xi[i] += step * g.a[i] / n;
            }
            project_ball(xi, eps, pair);
        }
    };

    run_ascent(std::vector<double>(dim, 0.0));
    for (int restart = 1; restart < probe.restarts; ++restart) {
        Rng rng(derive_stream(seed, "flatness.loss.restart", restart));
        run_ascent(random_ball_point(rng, dim, eps, pair));
    }
    return best;
}

MeanEstimate global_flatness(const CnnWeights& w, const DataConfig& data,
                             double eps, int n_mc, HolderPair pair,
                             const ProbeConfig& probe, std::uint64_t seed) {
    if (n_mc < 1) throw ConfigError("n_mc must be >= 1", "flatness.n_mc");
    std::vector<double> vals(n_mc);
    parallel_for(static_cast<std::size_t>(n_mc), [&](std::size_t i) {
        Rng rng(derive_stream(seed, "flatness.global", i));
        const Example ex = sample_example(data, rng);
        vals[i] = max_grad_norm(w, ex.patches, ex.label, eps, pair, probe,
                                derive_stream(seed, "flatness.global.probe", i))
                      .value;
    });
    MeanEstimate est;
    est.n = n_mc;
    double sum = 0.0, sum2 = 0.0;
    for (double v : vals) {
        sum += v;
        sum2 += v * v;
    }
    est.mean = sum / n_mc;
    const double var = std::max(0.0, sum2 / n_mc - est.mean * est.mean);
    est.stderr_ = std::sqrt(var / n_mc);
    return est;
}

FlatnessReport flatness_report(const CnnWeights& w, int checkpoint_iter,
                               const Dataset& train, const std::vector<Mat>& adv,
                               const RunConfig& cfg, double eps, HolderPair pair,
                               const ProbeConfig& probe, int n_mc,
                               std::uint64_t seed) {
    FlatnessReport rep;
    rep.checkpoint = checkpoint_iter;
    rep.eps = eps;
    rep.pair = pair;
    const int n_train = static_cast<int>(train.examples.size());

    std::vector<double> train_grad(n_train), train_loss(n_train);
    parallel_for(static_cast<std::size_t>(n_train), [&](std::size_t i) {
        const Example& ex = train.examples[i];
        train_grad[i] = max_grad_norm(w, ex.patches, ex.label, eps, pair, probe,
                                      derive_stream(seed, "flatness.train", i))
                            .value;
        train_loss[i] = max_loss_change(w, ex.patches, ex.label, eps, pair, probe,
                                        derive_stream(seed, "flatness.train.loss", i))
                            .value;
    });
    for (int i = 0; i < n_train; ++i) {
        rep.local_flat_train += train_grad[i];
        rep.loss_change_train += train_loss[i];
    }
    rep.local_flat_train /= n_train;
    rep.loss_change_train /= n_train;

    // Fixed fresh test set, shared across checkpoints and radii.
    std::vector<double> test_grad(n_mc), test_loss(n_mc), base_norm(n_mc);
    std::vector<double> adv_obj(n_mc);
    parallel_for(static_cast<std::size_t>(n_mc), [&](std::size_t i) {
        Rng rng(derive_stream(cfg.seed, "flatness.test", i));
        const Example ex = sample_example(train.config, rng);
        test_grad[i] = max_grad_norm(w, ex.patches, ex.label, eps, pair, probe,
                                     derive_stream(seed, "flatness.test.probe", i))
                           .value;
        test_loss[i] = max_loss_change(w, ex.patches, ex.label, eps, pair, probe,
                                       derive_stream(seed, "flatness.test.loss", i))
                           .value;
        base_norm[i] = holder_q_norm(grad_input(w, ex.patches, ex.label), pair);
        const Mat adv_x = gta(ex, train.config, cfg.attack.gamma, cfg.attack.delta);
        adv_obj[i] =
            (1.0 - cfg.lambda) * logistic_loss(w, ex.patches, ex.label) +
            cfg.lambda * logistic_loss(w, adv_x, ex.label);
    });
    for (int i = 0; i < n_mc; ++i) {
        rep.local_flat_test += test_grad[i];
        rep.loss_change_test += test_loss[i];
        rep.lower_quantity += base_norm[i];
    }
    rep.local_flat_test /= n_mc;
    rep.loss_change_test /= n_mc;
    rep.lower_quantity = cfg.attack.delta * rep.lower_quantity / n_mc;

    const MeanEstimate gf =
        global_flatness(w, train.config, eps, n_mc, pair, probe, seed);
    rep.global_flat = gf.mean;
    rep.global_flat_stderr = gf.stderr_;

    double adv_risk = 0.0;
    for (int i = 0; i < n_mc; ++i) adv_risk += adv_obj[i];
    adv_risk /= n_mc;
    rep.gap = adv_risk - adversarial_objective(w, train, adv, cfg.lambda);

    const double D = static_cast<double>(train.config.P) * train.config.d;
    rep.bound_rhs = std::pow(static_cast<double>(n_train), -1.0 / (D + 2.0)) *
                    rep.global_flat;
    return rep;
}

}  // namespace cgro
