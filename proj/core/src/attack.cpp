#include "cgro/attack.hpp"

#include <algorithm>
#include <cmath>

#include "cgro/errors.hpp"

namespace cgro {

void AttackSpec::validate(const DataConfig& data) const {
    if (!(delta > 0.0)) throw ConfigError("attack.delta must be > 0", "attack.delta");
    if (method == AttackMethod::GTA) {
        if (gamma < 0.0 || gamma >= 1.0)
            throw ConfigError("attack.gamma must be in [0, 1)", "attack.gamma");
        if (gamma * data.alpha > delta * (1.0 + 1e-12))
            throw ConfigError("GTA radius violation: gamma * alpha > delta",
                              "attack.gamma");
    } else {
        if (steps < 1) throw ConfigError("attack.steps must be >= 1", "attack.steps");
        if (restarts < 1)
            throw ConfigError("attack.restarts must be >= 1", "attack.restarts");
    }
}

double AttackSpec::pgd_step() const {
    return step_size > 0.0 ? step_size : 2.5 * delta / steps;
}

Mat gta(const Example& x, const DataConfig& data, double gamma, double delta) {
    if (gamma < 0.0 || gamma >= 1.0)
        throw ConfigError("gta gamma must be in [0, 1)", "attack.gamma");
    if (gamma * data.alpha > delta * (1.0 + 1e-12))
        throw ConfigError("GTA radius violation: gamma * alpha > delta",
                          "attack.delta");
    Mat adv = x.patches;
    // Target g(X) = <w*, X[signal]> with ||grad g|| = ||w*|| = 1, so the
    // update only touches the signal patch.
    auto sig = adv.row(x.signal_index);
    const double g = dot(sig, data.w_star);
    axpy(-gamma * g, data.w_star, sig);
    return adv;
}

double perturbation_norm(const Mat& x, const Mat& x_adv, NormP p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.a.size(); ++i) {
        const double diff = x_adv.a[i] - x.a[i];
        if (p == NormP::L2)
            acc += diff * diff;
        else
            acc = std::max(acc, std::abs(diff));
    }
    return p == NormP::L2 ? std::sqrt(acc) : acc;
}

namespace {

void project_ball(std::vector<double>& xi, double delta, NormP p) {
    if (p == NormP::LInf) {
        for (double& v : xi) v = std::clamp(v, -delta, delta);
        return;
    }
    double n2 = 0.0;
    for (double v : xi) n2 += v * v;
    const double n = std::sqrt(n2);
    if (n > delta && n > 0.0) {
        const double sc = delta / n;
        for (double& v : xi) v *= sc;
    }
}

}  // namespace

Mat pgd(const CnnWeights& w, const Mat& patches, int label,
        const AttackSpec& spec, std::uint64_t seed) {
    const std::size_t dim = patches.a.size();
    Mat best = patches;
    double best_loss = logistic_loss(w, patches, label);
    if (spec.delta <= 0.0) return best;
    const double step = spec.pgd_step();

    for (int restart = 0; restart < spec.restarts; ++restart) {
        Rng rng(derive_stream(seed, "attack.pgd.restart", restart));
        std::vector<double> xi(dim, 0.0);
        if (restart > 0) {
            if (spec.norm_p == NormP::LInf) {
                for (double& v : xi) v = rng.uniform(-spec.delta, spec.delta);
            } else {
                // Uniform in the l2 ball: gaussian direction, radius by
                // the usual u^(1/dim) law.
                double n2 = 0.0;
                for (double& v : xi) {
                    v = rng.normal();
                    n2 += v * v;
                }
                const double r =
                    spec.delta * std::pow(rng.uniform01(), 1.0 / dim);
                const double sc = n2 > 0.0 ? r / std::sqrt(n2) : 0.0;
                for (double& v : xi) v *= sc;
            }
        }
        Mat cur = patches;
        for (std::size_t i = 0; i < dim; ++i) cur.a[i] += xi[i];

        for (int it = 0; it < spec.steps; ++it) {
            const double cur_loss = logistic_loss(w, cur, label);
            if (cur_loss > best_loss) {
                best_loss = cur_loss;
                best = cur;
            }
            const Mat g = grad_input(w, cur, label);
            if (spec.norm_p == NormP::LInf) {
                for (std::size_t i = 0; i < dim; ++i) {
                    const double gs = g.a[i];
                    xi[i] += step * (gs > 0.0 ? 1.0 : (gs < 0.0 ? -1.0 : 0.0));
                }
            } else {
                double n2 = 0.0;
                for (double gs : g.a) n2 += gs * gs;
                const double n = std::sqrt(n2);
                if (n == 0.0) break;
                for (std::size_t i = 0; i < dim; ++i) xi[i] += step * g.a[i] / n;
            }
            project_ball(xi, spec.delta, spec.norm_p);
            for (std::size_t i = 0; i < dim; ++i) cur.a[i] = patches.a[i] + xi[i];
        }
        const double final_loss = logistic_loss(w, cur, label);
        if (final_loss > best_loss) {
            best_loss = final_loss;
            best = cur;
        }
    }
    return best;
}

}  // namespace cgro
