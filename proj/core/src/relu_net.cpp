#include "cgro/relu_net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cgro/errors.hpp"

namespace cgro {

std::vector<double> relu_forward_vec(const ReluNet& net, std::span<const double> x) {
    if (static_cast<int>(x.size()) != net.input_dim)
        throw ConfigError("relu net input dimension mismatch");
    std::vector<double> cur(x.begin(), x.end());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const ReluLayer& layer = net.layers[l];
        if (static_cast<int>(cur.size()) != layer.in)
            throw ConfigError("relu net layer dimension mismatch");
        std::vector<double> next(layer.out);
        for (int r = 0; r < layer.out; ++r) {
            double acc = layer.b[r];
            for (const auto& [c, wt] : layer.w[r]) acc += wt * cur[c];
            next[r] = acc;
        }
        if (l + 1 < net.layers.size())
            for (double& v : next) v = std::max(0.0, v);
        cur = std::move(next);
    }
    return cur;
}

double relu_forward(const ReluNet& net, std::span<const double> x) {
    const auto out = relu_forward_vec(net, x);
    if (out.size() != 1) throw ConfigError("relu net output is not scalar");
    return out[0];
}

std::vector<double> relu_input_gradient(const ReluNet& net,
                                        std::span<const double> x) {
    // Forward pass, keeping each layer's pre-activation.
    std::vector<std::vector<double>> pre(net.layers.size());
    std::vector<double> cur(x.begin(), x.end());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const ReluLayer& layer = net.layers[l];
        std::vector<double> next(layer.out);
        for (int r = 0; r < layer.out; ++r) {
            double acc = layer.b[r];
            for (const auto& [c, wt] : layer.w[r]) acc += wt * cur[c];
            next[r] = acc;
        }
        pre[l] = next;
        if (l + 1 < net.layers.size())
            for (double& v : next) v = std::max(0.0, v);
        cur = std::move(next);
    }
    // Backward pass.
    std::vector<double> grad = {1.0};
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const ReluLayer& layer = net.layers[li];
        if (li + 1 < net.layers.size())
            for (int r = 0; r < layer.out; ++r)
                if (pre[li][r] <= 0.0) grad[r] = 0.0;
        std::vector<double> prev(layer.in, 0.0);
        for (int r = 0; r < layer.out; ++r) {
            if (grad[r] == 0.0) continue;
            for (const auto& [c, wt] : layer.w[r]) prev[c] += wt * grad[r];
        }
        grad = std::move(prev);
    }
    return grad;
}

long param_count(const ReluNet& net) {
    long n = 0;
    for (const ReluLayer& layer : net.layers) {
        for (const auto& row : layer.w) n += static_cast<long>(row.size());
        n += static_cast<long>(layer.b.size());
    }
    return n;
}

ReluNet affine_net(int in, int out,
                   const std::vector<std::vector<std::pair<int, double>>>& w,
                   const std::vector<double>& b) {
    ReluNet net;
    net.input_dim = in;
    ReluLayer layer(in, out);
    layer.w = w;
    layer.b = b;
    net.layers.push_back(std::move(layer));
    return net;
}

namespace {

/// second(first(x)) for two affine layers, dropping exact-zero products.
ReluLayer fuse_affine(const ReluLayer& first, const ReluLayer& second) {
    ReluLayer out(first.in, second.out);
    std::vector<double> acc(first.in);
    for (int r = 0; r < second.out; ++r) {
        std::fill(acc.begin(), acc.end(), 0.0);
        double off = second.b[r];
        for (const auto& [k, wt] : second.w[r]) {
            off += wt * first.b[k];
            for (const auto& [c, v] : first.w[k]) acc[c] += wt * v;
        }
        out.b[r] = off;
        for (int c = 0; c < first.in; ++c)
            if (acc[c] != 0.0) out.add(r, c, acc[c]);
    }
    return out;
}

ReluNet pad_one(const ReluNet& net) {
    ReluNet out = net;
    ReluLayer last = std::move(out.layers.back());
    out.layers.pop_back();
    // Hidden stage [t; -t], then t = rect(t) - rect(-t).
    ReluLayer hidden(last.in, 2 * last.out);
    for (int r = 0; r < last.out; ++r) {
        hidden.w[r] = last.w[r];
        hidden.b[r] = last.b[r];
        hidden.w[last.out + r].reserve(last.w[r].size());
        for (const auto& [c, v] : last.w[r]) hidden.add(last.out + r, c, -v);
        hidden.b[last.out + r] = -last.b[r];
    }
    ReluLayer rebuild(2 * last.out, last.out);
    for (int r = 0; r < last.out; ++r) {
        rebuild.add(r, r, 1.0);
        rebuild.add(r, last.out + r, -1.0);
    }
    out.layers.push_back(std::move(hidden));
    out.layers.push_back(std::move(rebuild));
    return out;
}

}  // namespace

ReluNet pad_to_depth(const ReluNet& net, int depth) {
    ReluNet out = net;
    while (out.depth() < depth) out = pad_one(out);
    return out;
}

ReluNet compose(const ReluNet& a, const ReluNet& b) {
    if (a.output_dim() != b.input_dim)
        throw ConfigError("compose: dimension mismatch");
    ReluNet out;
    out.input_dim = a.input_dim;
    out.layers.assign(a.layers.begin(), a.layers.end() - 1);
    out.layers.push_back(fuse_affine(a.layers.back(), b.layers.front()));
    out.layers.insert(out.layers.end(), b.layers.begin() + 1, b.layers.end());
    return out;
}

ReluNet identity_net(int dim) {
    ReluNet net;
    net.input_dim = dim;
    ReluLayer hidden(dim, 2 * dim);
    for (int c = 0; c < dim; ++c) {
        hidden.add(c, c, 1.0);
        hidden.add(dim + c, c, -1.0);
    }
    ReluLayer rebuild(2 * dim, dim);
    for (int c = 0; c < dim; ++c) {
        rebuild.add(c, c, 1.0);
        rebuild.add(c, dim + c, -1.0);
    }
    net.layers.push_back(std::move(hidden));
    net.layers.push_back(std::move(rebuild));
    return net;
}

ReluNet parallel(const std::vector<ReluNet>& nets,
                 const std::vector<std::vector<int>>& input_cols, int input_dim) {
    if (nets.empty() || nets.size() != input_cols.size())
        throw ConfigError("parallel: empty or mismatched net list");
    int max_depth = 1;
    for (const ReluNet& n : nets) max_depth = std::max(max_depth, n.depth());
    std::vector<ReluNet> padded;
    padded.reserve(nets.size());
    for (const ReluNet& n : nets) padded.push_back(pad_to_depth(n, max_depth));

    ReluNet out;
    out.input_dim = input_dim;
    for (int l = 0; l < max_depth; ++l) {
        int in_total = 0, out_total = 0;
        for (const ReluNet& n : padded) {
            in_total += n.layers[l].in;
            out_total += n.layers[l].out;
        }
        ReluLayer layer(l == 0 ? input_dim : in_total, out_total);
        int row_off = 0, col_off = 0;
        for (std::size_t k = 0; k < padded.size(); ++k) {
            const ReluLayer& sub = padded[k].layers[l];
            for (int r = 0; r < sub.out; ++r) {
                layer.b[row_off + r] = sub.b[r];
                for (const auto& [c, v] : sub.w[r]) {
                    const int col = l == 0 ? input_cols[k][c] : col_off + c;
                    layer.add(row_off + r, col, v);
                }
            }
            row_off += sub.out;
            col_off += sub.in;
        }
        out.layers.push_back(std::move(layer));
    }
    return out;
}

// --- gadgets ---------------------------------------------------------------

ReluNet square_gadget(double eps) {
    if (!(eps > 0.0) || eps >= 1.0)
        throw ConfigError("square_gadget needs 0 < eps < 1");
    const int s = std::max(
        1, static_cast<int>(std::ceil(0.5 * std::log2(1.0 / eps))));

    ReluNet net;
    net.input_dim = 1;
    // Stage 1: rect(x), rect(x - 1/2), rect(x - 1).
    ReluLayer l1(1, 3);
    l1.add(0, 0, 1.0);
    l1.add(1, 0, 1.0);
    l1.b[1] = -0.5;
    l1.add(2, 0, 1.0);
    l1.b[2] = -1.0;
    net.layers.push_back(std::move(l1));

    // From stage-k units compute the tooth t_k = 2a - 4b + 2c and carry
    // y_k = y_{k-1} - t_k / 4^k (y_0 = x = rect(x) on the domain).
    // Stage k+1 units: rect(t_k), rect(t_k - 1/2), rect(t_k - 1), rect(y_k).
    auto tooth = [](ReluLayer& layer, int row, double offset, double scale,
                    int a, int b, int c) {
        layer.add(row, a, 2.0 * scale);
        layer.add(row, b, -4.0 * scale);
        layer.add(row, c, 2.0 * scale);
        layer.b[row] = offset;
    };

    double pow4 = 4.0;
    for (int k = 1; k < s; ++k) {
        const bool from_first = (k == 1);
        const int in_dim = from_first ? 3 : 4;
        ReluLayer lk(in_dim, 4);
        tooth(lk, 0, 0.0, 1.0, 0, 1, 2);
        tooth(lk, 1, -0.5, 1.0, 0, 1, 2);
        tooth(lk, 2, -1.0, 1.0, 0, 1, 2);
        // y_k = y_{k-1} - t_k / 4^k
        if (from_first) {
            // y_1 = x - t_1/4 = 0.5 a + b - 0.5 c with x = rect(x).
            lk.add(3, 0, 1.0 - 2.0 / pow4);
            lk.add(3, 1, 4.0 / pow4);
            lk.add(3, 2, -2.0 / pow4);
        } else {
            lk.add(3, 0, -2.0 / pow4);
            lk.add(3, 1, 4.0 / pow4);
            lk.add(3, 2, -2.0 / pow4);
            lk.add(3, 3, 1.0);
        }
        net.layers.push_back(std::move(lk));
        pow4 *= 4.0;
    }

    // Output affine: y_s = y_{s-1} - t_s / 4^s.
    if (s == 1) {
        ReluLayer out(3, 1);
        out.add(0, 0, 1.0 - 2.0 / 4.0);
        out.add(0, 1, 4.0 / 4.0);
        out.add(0, 2, -2.0 / 4.0);
        net.layers.push_back(std::move(out));
    } else {
        ReluLayer out(4, 1);
        out.add(0, 0, -2.0 / pow4);
        out.add(0, 1, 4.0 / pow4);
        out.add(0, 2, -2.0 / pow4);
        out.add(0, 3, 1.0);
        net.layers.push_back(std::move(out));
    }
    return net;
}

ReluNet product_gadget(double eps, double B) {
    if (!(B >= 1.0)) throw ConfigError("product_gadget needs B >= 1");
    if (!(eps > 0.0)) throw ConfigError("product_gadget needs eps > 0");
    const double eps_sq = std::min(0.5, eps / (6.0 * B * B));
    const ReluNet sq = square_gadget(eps_sq);

    // Pre-affine: [ (x+y)/2B, x/2B, y/2B ].
    const double inv = 1.0 / (2.0 * B);
    const ReluNet pre = affine_net(
        2, 3, {{{0, inv}, {1, inv}}, {{0, inv}}, {{1, inv}}}, {0.0, 0.0, 0.0});
    const ReluNet trio = parallel({sq, sq, sq}, {{0}, {1}, {2}}, 3);
    const double sc = 2.0 * B * B;
    const ReluNet post =
        affine_net(3, 1, {{{0, sc}, {1, -sc}, {2, -sc}}}, {0.0});
    return compose(compose(pre, trio), post);
}

ReluNet sqdist_gadget(std::span<const double> x0, double eps) {
    const int D = static_cast<int>(x0.size());
    if (D < 1) throw ConfigError("sqdist_gadget needs a non-empty center");
    if (!(eps > 0.0)) throw ConfigError("sqdist_gadget needs eps > 0");
    for (double c : x0)
        if (c < 0.0 || c > 1.0)
            throw ConfigError("sqdist_gadget center must lie in [0,1]^D");

    // |x_c - x0_c| = rect(x_c - x0_c) + rect(x0_c - x_c), per coordinate.
    ReluNet abs_net;
    abs_net.input_dim = D;
    ReluLayer arms(D, 2 * D);
    for (int c = 0; c < D; ++c) {
        arms.add(2 * c, c, 1.0);
        arms.b[2 * c] = -x0[c];
        arms.add(2 * c + 1, c, -1.0);
        arms.b[2 * c + 1] = x0[c];
    }
    abs_net.layers.push_back(std::move(arms));
    ReluLayer sum_arms(2 * D, D);
    for (int c = 0; c < D; ++c) {
        sum_arms.add(c, 2 * c, 1.0);
        sum_arms.add(c, 2 * c + 1, 1.0);
    }
    abs_net.layers.push_back(std::move(sum_arms));

    const ReluNet sq = square_gadget(eps / D);
    std::vector<ReluNet> squares(D, sq);
    std::vector<std::vector<int>> cols(D);
    for (int c = 0; c < D; ++c) cols[c] = {c};
    const ReluNet bank = parallel(squares, cols, D);

    std::vector<std::vector<std::pair<int, double>>> ones(1);
    for (int c = 0; c < D; ++c) ones[0].push_back({c, 1.0});
    const ReluNet sum = affine_net(D, 1, ones, {0.0});
    return compose(compose(abs_net, bank), sum);
}

ReluNet soft_indicator(double lo, double hi) {
    if (!(lo < hi)) throw ConfigError("soft_indicator needs lo < hi");
    ReluNet net;
    net.input_dim = 1;
    ReluLayer arms(1, 2);
    arms.add(0, 0, 1.0);
    arms.b[0] = -lo;
    arms.add(1, 0, 1.0);
    arms.b[1] = -hi;
    net.layers.push_back(std::move(arms));
    const double inv = 1.0 / (hi - lo);
    ReluLayer out(2, 1);
    out.add(0, 0, -inv);
    out.add(0, 1, inv);
    out.b[0] = 1.0;
    net.layers.push_back(std::move(out));
    return net;
}

// --- CGRO construction -----------------------------------------------------

double eval_f_s(std::span<const double> x,
                const std::function<double(std::span<const double>)>& clean_fn,
                const std::vector<LabeledPoint>& trainset, double delta) {
    double best_d2 = std::numeric_limits<double>::infinity();
    int best = -1;
    for (std::size_t i = 0; i < trainset.size(); ++i) {
        const auto& pt = trainset[i].first;
        double d2 = 0.0;
        for (std::size_t c = 0; c < pt.size(); ++c) {
            const double diff = x[c] - pt[c];
            d2 += diff * diff;
        }
        if (d2 < best_d2) {
            best_d2 = d2;
            best = static_cast<int>(i);
        }
    }
    if (best >= 0 && best_d2 <= delta * delta)
        return static_cast<double>(trainset[best].second);
    return clean_fn(x);
}

CgroBuild build_cgro_net(const CgroBuildSpec& spec,
                         const std::vector<LabeledPoint>& trainset) {
    const ReluNet& clean = spec.clean_net;
    const int D = clean.input_dim;
    if (clean.output_dim() != 1)
        throw ConfigError("clean_net must have scalar output");
    if (!(spec.delta > 0.0)) throw ConfigError("construct.delta must be > 0",
                                               "construct.delta");
    if (!(spec.eps_sq > 0.0))
        throw ConfigError("construct.eps_sq must be > 0", "construct.eps_sq");
    const int N = static_cast<int>(trainset.size());
    for (const auto& [pt, y] : trainset) {
        if (static_cast<int>(pt.size()) != D)
            throw ConfigError("training point dimension mismatch");
        if (y != 1 && y != -1) throw ConfigError("training labels must be +-1");
        for (double c : pt)
            if (c < 0.0 || c > 1.0)
                throw ConfigError("training points must lie in [0,1]^D");
    }

    CgroBuild build;
    build.min_separation = std::numeric_limits<double>::infinity();
    for (int i = 0; i < N; ++i)
        for (int j = i + 1; j < N; ++j) {
            double d2 = 0.0;
            for (int c = 0; c < D; ++c) {
                const double diff = trainset[i].first[c] - trainset[j].first[c];
                d2 += diff * diff;
            }
            build.min_separation = std::min(build.min_separation, std::sqrt(d2));
        }

    const double d2edge = spec.delta * spec.delta;
    double ramp = spec.ramp_width;
    if (ramp <= 0.0 && N > 1) {
        const double half = build.min_separation / 2.0;
        ramp = (half * half - d2edge) / 2.0;
    }
    if (N <= 1 && ramp <= 0.0) ramp = d2edge;  // any positive ramp works
    if (!(ramp > 0.0) || (N > 1 && spec.eps_sq >= ramp)) {
        // Balls too close for any usable ramp, or the distance gadget is
        // coarser than the transition band.
        std::vector<std::pair<int, int>> pairs;
        for (int i = 0; i < N; ++i)
            for (int j = i + 1; j < N; ++j) {
                double d2 = 0.0;
                for (int c = 0; c < D; ++c) {
                    const double diff = trainset[i].first[c] - trainset[j].first[c];
                    d2 += diff * diff;
                }
                if (std::sqrt(d2) <= 2.0 * spec.delta) pairs.push_back({i, j});
            }
        if (!pairs.empty())
            throw GeometryError("memorization balls overlap", pairs);
        throw ConfigError("eps_sq must be smaller than the indicator ramp",
                          "construct.eps_sq");
    }
    build.ramp = ramp;
    build.lo = d2edge;
    build.hi = d2edge + ramp;

    // Disjointness of the widened balls radius sqrt(hi).
    {
        std::vector<std::pair<int, int>> pairs;
        const double need = 2.0 * std::sqrt(build.hi);
        for (int i = 0; i < N; ++i)
            for (int j = i + 1; j < N; ++j) {
                double d2 = 0.0;
                for (int c = 0; c < D; ++c) {
                    const double diff = trainset[i].first[c] - trainset[j].first[c];
                    d2 += diff * diff;
                }
                if (std::sqrt(d2) <= need) pairs.push_back({i, j});
            }
        if (!pairs.empty())
            throw GeometryError("memorization balls overlap", pairs);
    }

    // Range bound B = 1 + max |clean| over training points plus a coarse
    // deterministic grid of cube corners and midpoints.
    double max_abs = 0.0;
    for (const auto& [pt, y] : trainset)
        max_abs = std::max(max_abs, std::abs(relu_forward(clean, pt)));
    {
        std::vector<double> probe(D, 0.5);
        max_abs = std::max(max_abs, std::abs(relu_forward(clean, probe)));
        std::uint64_t state = 0x9e3779b97f4a7c15ULL;
        for (int g = 0; g < 512; ++g) {
            for (int c = 0; c < D; ++c) {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                probe[c] = (state % 3) * 0.5;  // {0, 0.5, 1}
            }
            max_abs = std::max(max_abs, std::abs(relu_forward(clean, probe)));
        }
    }
    const double B = 1.0 + max_abs;
    build.range_bound = B;

    if (N == 0) {
        build.net = clean;
        return build;
    }

    // Stage A: [clean(X), SQ(X), X carries] with SQ(X) = sum_c q(x_c)
    // through one shared bank of per-coordinate square gadgets.
    const ReluNet sq = square_gadget(spec.eps_sq / D);
    std::vector<ReluNet> bank(D, sq);
    std::vector<std::vector<int>> bank_cols(D);
    for (int c = 0; c < D; ++c) bank_cols[c] = {c};
    std::vector<std::vector<std::pair<int, double>>> ones(1);
    for (int c = 0; c < D; ++c) ones[0].push_back({c, 1.0});
    const ReluNet sq_sum =
        compose(parallel(bank, bank_cols, D), affine_net(D, 1, ones, {0.0}));

    std::vector<int> shared(D);
    std::iota(shared.begin(), shared.end(), 0);
    const ReluNet stage_a =
        parallel({clean, sq_sum, identity_net(D)}, {shared, shared, shared}, D);
    // Stage-A output: col 0 = clean, col 1 = SQ, cols 2..D+1 = X.

    // Stage B: for each i the indicator arms on phi1_i and the clip arms on
    // y_i - clean + B, plus a +/- carry of clean. Emits
    // [clean, a_1, b_1, ..., a_N, b_N] with a_i in [0, 2B], b_i in [0, 1].
    ReluNet stage_b;
    stage_b.input_dim = D + 2;
    ReluLayer hb(D + 2, 4 * N + 2);
    ReluLayer ob(4 * N + 2, 2 * N + 1);
    const double inv_ramp = 1.0 / ramp;
    for (int i = 0; i < N; ++i) {
        const auto& x0 = trainset[i].first;
        double norm2 = 0.0;
        for (double c : x0) norm2 += c * c;
        const int u1 = 4 * i, u2 = 4 * i + 1, w1 = 4 * i + 2, w2 = 4 * i + 3;
        // phi1_i = SQ - 2 <x0, X> + ||x0||^2, thresholded at lo and hi.
        hb.add(u1, 1, 1.0);
        hb.add(u2, 1, 1.0);
        for (int c = 0; c < D; ++c) {
            if (x0[c] != 0.0) {
                hb.add(u1, 2 + c, -2.0 * x0[c]);
                hb.add(u2, 2 + c, -2.0 * x0[c]);
            }
        }
        hb.b[u1] = norm2 - build.lo;
        hb.b[u2] = norm2 - build.hi;
        // clip(y_i - clean + B, 0, 2B) = rect(z) - rect(z - 2B).
        hb.add(w1, 0, -1.0);
        hb.b[w1] = trainset[i].second + B;
        hb.add(w2, 0, -1.0);
        hb.b[w2] = trainset[i].second - B;
        ob.add(1 + 2 * i, w1, 1.0);
        ob.add(1 + 2 * i, w2, -1.0);
        ob.add(2 + 2 * i, u1, -inv_ramp);
        ob.add(2 + 2 * i, u2, inv_ramp);
        ob.b[2 + 2 * i] = 1.0;
    }
    hb.add(4 * N, 0, 1.0);       // rect(clean)
    hb.add(4 * N + 1, 0, -1.0);  // rect(-clean)
    ob.add(0, 4 * N, 1.0);
    ob.add(0, 4 * N + 1, -1.0);
    stage_b.layers.push_back(std::move(hb));
    stage_b.layers.push_back(std::move(ob));

    // Stage C: the memorization term (y_i - clean) * b_i realized as the
    // exact multiplexer min(a_i, 2B b_i) - B b_i with a_i in [0, 2B].
    // Since b_i is exactly 1 inside the ball edge and exactly 0 beyond the
    // ramp, the term equals y_i - clean inside and exactly 0 outside; a
    // product gadget would add an eps error per point and blow the dense
    // serialization up by two orders of magnitude (one gadget per training
    // point), so the exact one-rectifier form is used instead.
    ReluNet stage_c;
    stage_c.input_dim = 2 * N + 1;
    ReluLayer hc(2 * N + 1, 3 * N + 2);
    ReluLayer oc(3 * N + 2, 1);
    hc.add(0, 0, 1.0);   // rect(clean)
    hc.add(1, 0, -1.0);  // rect(-clean)
    oc.add(0, 0, 1.0);
    oc.add(0, 1, -1.0);
    for (int i = 0; i < N; ++i) {
        const int ca = 2 + 3 * i, cb = 3 + 3 * i, mi = 4 + 3 * i;
        hc.add(ca, 1 + 2 * i, 1.0);  // carry a_i (non-negative)
        hc.add(cb, 2 + 2 * i, 1.0);  // carry b_i (non-negative)
        hc.add(mi, 1 + 2 * i, 1.0);  // rect(a_i - 2B b_i)
        hc.add(mi, 2 + 2 * i, -2.0 * B);
        oc.add(0, ca, 1.0);
        oc.add(0, mi, -1.0);
        oc.add(0, cb, -B);
    }
    stage_c.layers.push_back(std::move(hc));
    stage_c.layers.push_back(std::move(oc));

    build.net = compose(compose(stage_a, stage_b), stage_c);
    return build;
}

}  // namespace cgro
