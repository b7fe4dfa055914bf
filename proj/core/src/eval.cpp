#include "cgro/eval.hpp"

#include <cmath>

#include "cgro/errors.hpp"
#include "cgro/threading.hpp"

namespace cgro {
namespace {

RateEstimate rate_from_count(int errors, int n) {
    RateEstimate r;
    r.n = n;
    r.rate = static_cast<double>(errors) / n;
    r.stderr_ = std::sqrt(r.rate * (1.0 - r.rate) / n);
    return r;
}

}  // namespace

RateEstimate clean_error(const CnnWeights& w, const DataConfig& data, int n_mc,
                         std::uint64_t seed) {
    if (n_mc < 1) throw ConfigError("n_mc must be >= 1", "eval.n_mc");
    std::vector<int> err(n_mc);
    parallel_for(static_cast<std::size_t>(n_mc), [&](std::size_t i) {
        Rng rng(derive_stream(seed, "eval.mc", i));
        const Example ex = sample_example(data, rng);
        err[i] = ex.label * forward(w, ex.patches) <= 0.0 ? 1 : 0;
    });
    int total = 0;
    for (int e : err) total += e;
    return rate_from_count(total, n_mc);
}

RateEstimate robust_error(const CnnWeights& w, const DataConfig& data,
                          const AttackSpec& attack, int n_mc,
                          std::uint64_t seed) {
    if (n_mc < 1) throw ConfigError("n_mc must be >= 1", "eval.n_mc");
    std::vector<int> err(n_mc);
    parallel_for(static_cast<std::size_t>(n_mc), [&](std::size_t i) {
        Rng rng(derive_stream(seed, "eval.mc", i));
        const Example ex = sample_example(data, rng);
        Mat adv;
        if (attack.delta <= 0.0) {
            adv = ex.patches;
        } else if (attack.method == AttackMethod::GTA) {
            adv = gta(ex, data, attack.gamma, attack.delta);
        } else {
            adv = pgd(w, ex.patches, ex.label, attack,
                      derive_stream(seed, "eval.pgd", i));
        }
        err[i] = ex.label * forward(w, adv) <= 0.0 ? 1 : 0;
    });
    int total = 0;
    for (int e : err) total += e;
    return rate_from_count(total, n_mc);
}

double robust_train_error(const CnnWeights& w, const Dataset& data,
                          const std::vector<Mat>& adv_examples) {
    if (adv_examples.size() != data.examples.size())
        throw ConfigError("adversarial cache size does not match dataset");
    int errors = 0;
    for (std::size_t i = 0; i < data.examples.size(); ++i) {
        const int y = data.examples[i].label;
        if (y * forward(w, adv_examples[i]) <= 0.0) ++errors;
    }
    return static_cast<double>(errors) / static_cast<double>(data.examples.size());
}

ErrorReport error_report(const CnnWeights& w, const Dataset& data,
                         const std::vector<Mat>& adv_examples,
                         const AttackSpec& attack, int n_mc,
                         std::uint64_t seed) {
    ErrorReport rep;
    rep.n_mc = n_mc;
    rep.clean_test = clean_error(w, data.config, n_mc, seed);
    AttackSpec gta_spec = attack;
    gta_spec.method = AttackMethod::GTA;
    rep.robust_test_gta = robust_error(w, data.config, gta_spec, n_mc, seed);
    AttackSpec pgd_spec = attack;
    pgd_spec.method = AttackMethod::PGD;
    rep.robust_test_pgd = robust_error(w, data.config, pgd_spec, n_mc, seed);
    rep.robust_train = robust_train_error(w, data, adv_examples);
    return rep;
}

}  // namespace cgro
