#include "cgro/serialization.hpp"

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cgro/errors.hpp"

namespace cgro {

using nlohmann::json;

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

namespace {

void append_array(std::string& out, const std::vector<double>& xs) {
    out += '[';
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        out += fmt17(xs[i]);
    }
    out += ']';
}

void append_array(std::string& out, std::span<const double> xs) {
    out += '[';
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        out += fmt17(xs[i]);
    }
    out += ']';
}

std::vector<double> doubles_from(const json& arr) {
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& v : arr) out.push_back(v.get<double>());
    return out;
}

}  // namespace

std::string dataset_to_json(const Dataset& data) {
    std::string out = "{\"config\":{";
    out += "\"d\":" + std::to_string(data.config.d);
    out += ",\"P\":" + std::to_string(data.config.P);
    out += ",\"alpha\":" + fmt17(data.config.alpha);
    out += ",\"sigma\":" + fmt17(data.config.sigma);
    out += ",\"w_star\":";
    append_array(out, data.config.w_star);
    out += ",\"seed\":" + std::to_string(data.config.seed);
    out += "},\"examples\":[";
    for (std::size_t i = 0; i < data.examples.size(); ++i) {
        const Example& ex = data.examples[i];
        if (i) out += ',';
        out += "{\"patches\":";
        append_array(out, std::span<const double>(ex.patches.a));
        out += ",\"label\":" + std::to_string(ex.label);
        out += ",\"signal_index\":" + std::to_string(ex.signal_index);
        out += '}';
    }
    out += "]}";
    return out;
}

Dataset dataset_from_json(const std::string& text) {
    const json j = json::parse(text);
    Dataset data;
    const json& c = j.at("config");
    data.config.d = c.at("d").get<int>();
    data.config.P = c.at("P").get<int>();
    data.config.alpha = c.at("alpha").get<double>();
    data.config.sigma = c.at("sigma").get<double>();
    data.config.w_star = doubles_from(c.at("w_star"));
    data.config.seed = c.at("seed").get<std::uint64_t>();
    for (const auto& je : j.at("examples")) {
        Example ex;
        ex.label = je.at("label").get<int>();
        ex.signal_index = je.at("signal_index").get<int>();
        ex.patches = Mat(data.config.P, data.config.d);
        const auto flat = doubles_from(je.at("patches"));
        if (flat.size() != ex.patches.a.size())
            throw ConfigError("dataset patches have wrong length");
        ex.patches.a = flat;
        data.examples.push_back(std::move(ex));
    }
    return data;
}

std::string weights_to_json(const CnnWeights& w) {
    std::string out = "{\"m\":" + std::to_string(w.m());
    out += ",\"d\":" + std::to_string(w.d());
    out += ",\"rows\":";
    append_array(out, std::span<const double>(w.rows.a));
    out += '}';
    return out;
}

CnnWeights weights_from_json(const std::string& text) {
    const json j = json::parse(text);
    CnnWeights w(j.at("m").get<int>(), j.at("d").get<int>());
    const auto flat = doubles_from(j.at("rows"));
    if (flat.size() != w.rows.a.size())
        throw ConfigError("weight rows have wrong length");
    w.rows.a = flat;
    return w;
}

std::string relunet_to_json(const ReluNet& net) {
    std::string out = "{\"input_dim\":" + std::to_string(net.input_dim);
    out += ",\"layers\":[";
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const ReluLayer& layer = net.layers[l];
        if (l) out += ',';
        out += "{\"matrix\":[";
        std::vector<double> dense(layer.in);
        for (int r = 0; r < layer.out; ++r) {
            std::fill(dense.begin(), dense.end(), 0.0);
            for (const auto& [c, v] : layer.w[r]) dense[c] += v;
            for (int c = 0; c < layer.in; ++c) {
                if (r || c) out += ',';
                out += fmt17(dense[c]);
            }
        }
        out += "],\"offset\":";
        append_array(out, layer.b);
        out += '}';
    }
    out += "]}";
    return out;
}

ReluNet relunet_from_json(const std::string& text) {
    const json j = json::parse(text);
    ReluNet net;
    net.input_dim = j.at("input_dim").get<int>();
    int prev = net.input_dim;
    for (const auto& jl : j.at("layers")) {
        const auto offset = doubles_from(jl.at("offset"));
        const auto flat = doubles_from(jl.at("matrix"));
        const int out_dim = static_cast<int>(offset.size());
        if (out_dim == 0 || flat.size() % out_dim != 0)
            throw ConfigError("relu net layer has inconsistent shape");
        const int in_dim = static_cast<int>(flat.size()) / out_dim;
        if (in_dim != prev) throw ConfigError("relu net layer dimensions mismatch");
        ReluLayer layer(in_dim, out_dim);
        layer.b = offset;
        for (int r = 0; r < out_dim; ++r)
            for (int c = 0; c < in_dim; ++c) {
                const double v = flat[static_cast<std::size_t>(r) * in_dim + c];
                if (v != 0.0) layer.add(r, c, v);
            }
        net.layers.push_back(std::move(layer));
        prev = out_dim;
    }
    return net;
}

std::string telemetry_csv(const std::vector<TelemetrySnapshot>& snaps) {
    std::string out = "# format_version=1\n";
    out +=
        "iteration,objective,clean_train_err,robust_train_err,U,max_u,min_u,"
        "mean_V,min_V,max_abs_v\n";
    for (const TelemetrySnapshot& s : snaps) {
        double max_u = 0.0, min_u = 0.0;
        if (!s.metrics.u.empty()) {
            max_u = *std::max_element(s.metrics.u.begin(), s.metrics.u.end());
            min_u = *std::min_element(s.metrics.u.begin(), s.metrics.u.end());
        }
        double mean_v = 0.0, min_v = 0.0;
        if (!s.metrics.V.empty()) {
            for (double v : s.metrics.V) mean_v += v;
            mean_v /= static_cast<double>(s.metrics.V.size());
            min_v = *std::min_element(s.metrics.V.begin(), s.metrics.V.end());
        }
        double max_abs_v = 0.0;
        for (double v : s.metrics.v) max_abs_v = std::max(max_abs_v, std::abs(v));
        out += std::to_string(s.iteration);
        out += ',' + fmt17(s.objective);
        out += ',' + fmt17(s.clean_train_err);
        out += ',' + fmt17(s.robust_train_err);
        out += ',' + fmt17(s.metrics.U);
        out += ',' + fmt17(max_u);
        out += ',' + fmt17(min_u);
        out += ',' + fmt17(mean_v);
        out += ',' + fmt17(min_v);
        out += ',' + fmt17(max_abs_v);
        out += '\n';
    }
    return out;
}

std::string telemetry_sidecar_json(const std::vector<TelemetrySnapshot>& snaps) {
    std::string out = "{\"format_version\":1,\"snapshots\":[";
    for (std::size_t i = 0; i < snaps.size(); ++i) {
        const TelemetrySnapshot& s = snaps[i];
        if (i) out += ',';
        out += "{\"iteration\":" + std::to_string(s.iteration);
        out += ",\"objective\":" + fmt17(s.objective);
        out += ",\"clean_train_err\":" + fmt17(s.clean_train_err);
        out += ",\"robust_train_err\":" + fmt17(s.robust_train_err);
        out += ",\"U\":" + fmt17(s.metrics.U);
        out += ",\"u\":";
        append_array(out, s.metrics.u);
        out += ",\"V\":";
        append_array(out, s.metrics.V);
        out += ",\"v\":";
        append_array(out, s.metrics.v);
        out += ",\"psi_clean\":";
        append_array(out, s.psi_clean);
        out += ",\"psi_adv\":";
        append_array(out, s.psi_adv);
        out += '}';
    }
    out += "]}";
    return out;
}

std::string error_report_to_json(const ErrorReport& rep) {
    std::string out = "{";
    auto rate = [](const RateEstimate& r) {
        return "{\"rate\":" + fmt17(r.rate) + ",\"stderr\":" + fmt17(r.stderr_) +
               ",\"n\":" + std::to_string(r.n) + "}";
    };
    out += "\"clean_test\":" + rate(rep.clean_test);
    out += ",\"robust_test_gta\":" + rate(rep.robust_test_gta);
    out += ",\"robust_test_pgd\":" + rate(rep.robust_test_pgd);
    out += ",\"robust_train\":" + fmt17(rep.robust_train);
    out += ",\"n_mc\":" + std::to_string(rep.n_mc);
    out += "}";
    return out;
}

std::string residual_reports_to_json(const std::vector<ResidualReport>& reps) {
    std::string out = "{\"format_version\":1,\"residuals\":[";
    for (std::size_t i = 0; i < reps.size(); ++i) {
        if (i) out += ',';
        out += "{\"iteration\":" + std::to_string(reps[i].iteration);
        out += ",\"max_signal_residual\":" + fmt17(reps[i].max_signal_residual);
        out += ",\"max_noise_residual\":" + fmt17(reps[i].max_noise_residual);
        out += std::string(",\"pass\":") + (reps[i].pass ? "true" : "false");
        out += '}';
    }
    out += "]}";
    return out;
}

std::string flatness_csv(const std::vector<FlatnessReport>& reps) {
    std::string out = "# format_version=1\n";
    out +=
        "checkpoint,eps,p,q,local_flat_train,local_flat_test,global_flat,"
        "global_flat_stderr,loss_change_train,loss_change_test,gap,bound_rhs,"
        "lower_quantity\n";
    for (const FlatnessReport& r : reps) {
        out += std::to_string(r.checkpoint);
        out += ',' + fmt17(r.eps);
        out += r.pair == HolderPair::L2_L2 ? ",2,2" : ",inf,1";
        out += ',' + fmt17(r.local_flat_train);
        out += ',' + fmt17(r.local_flat_test);
        out += ',' + fmt17(r.global_flat);
        out += ',' + fmt17(r.global_flat_stderr);
        out += ',' + fmt17(r.loss_change_train);
        out += ',' + fmt17(r.loss_change_test);
        out += ',' + fmt17(r.gap);
        out += ',' + fmt17(r.bound_rhs);
        out += ',' + fmt17(r.lower_quantity);
        out += '\n';
    }
    return out;
}

std::string run_config_to_json(const RunConfig& cfg) {
    std::string out = "{\"data\":{";
    out += "\"d\":" + std::to_string(cfg.data.d);
    out += ",\"P\":" + std::to_string(cfg.data.P);
    out += ",\"alpha\":" + fmt17(cfg.data.alpha);
    out += ",\"sigma\":" + fmt17(cfg.data.sigma);
    out += ",\"w_star\":";
    append_array(out, cfg.data.w_star);
    out += ",\"seed\":" + std::to_string(cfg.data.seed);
    out += "},\"N\":" + std::to_string(cfg.N);
    out += ",\"m\":" + std::to_string(cfg.m);
    out += ",\"sigma0\":" + fmt17(cfg.sigma0);
    out += ",\"eta\":" + fmt17(cfg.eta);
    out += ",\"T\":" + std::to_string(cfg.T);
    out += ",\"lambda\":" + fmt17(cfg.lambda);
    out += ",\"attack\":{";
    out += std::string("\"method\":\"") +
           (cfg.attack.method == AttackMethod::GTA ? "GTA" : "PGD") + "\"";
    out += std::string(",\"norm_p\":") +
           (cfg.attack.norm_p == NormP::L2 ? "2" : "\"inf\"");
    out += ",\"delta\":" + fmt17(cfg.attack.delta);
    out += ",\"gamma\":" + fmt17(cfg.attack.gamma);
    out += ",\"steps\":" + std::to_string(cfg.attack.steps);
    out += ",\"restarts\":" + std::to_string(cfg.attack.restarts);
    out += ",\"step_size\":" + fmt17(cfg.attack.step_size);
    out += "},\"telemetry_every\":" + std::to_string(cfg.telemetry_every);
    out += ",\"seed\":" + std::to_string(cfg.seed);
    out += "}";
    return out;
}

// --- SHA-256 (FIPS 180-4), enough for output checksums ----------------------

namespace {

constexpr std::array<std::uint32_t, 64> kSha256K = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1,
    0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3,
    0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
    0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
    0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
    0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
    0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
    0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
    0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};

std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

}  // namespace

std::string sha256_hex(const std::string& bytes) {
    std::array<std::uint32_t, 8> h = {0x6a09e667, 0xbb67ae85, 0x3c6ef372,
                                      0xa54ff53a, 0x510e527f, 0x9b05688c,
                                      0x1f83d9ab, 0x5be0cd19};
    std::string msg = bytes;
    const std::uint64_t bitlen = static_cast<std::uint64_t>(bytes.size()) * 8;
    msg += static_cast<char>(0x80);
    while (msg.size() % 64 != 56) msg += '\0';
    for (int i = 7; i >= 0; --i)
        msg += static_cast<char>((bitlen >> (8 * i)) & 0xff);

    std::array<std::uint32_t, 64> w{};
    for (std::size_t off = 0; off < msg.size(); off += 64) {
        for (int t = 0; t < 16; ++t) {
            w[t] = (static_cast<std::uint8_t>(msg[off + 4 * t]) << 24) |
                   (static_cast<std::uint8_t>(msg[off + 4 * t + 1]) << 16) |
                   (static_cast<std::uint8_t>(msg[off + 4 * t + 2]) << 8) |
                   static_cast<std::uint8_t>(msg[off + 4 * t + 3]);
        }
        for (int t = 16; t < 64; ++t) {
            const std::uint32_t s0 =
                rotr(w[t - 15], 7) ^ rotr(w[t - 15], 18) ^ (w[t - 15] >> 3);
            const std::uint32_t s1 =
                rotr(w[t - 2], 17) ^ rotr(w[t - 2], 19) ^ (w[t - 2] >> 10);
            w[t] = w[t - 16] + s0 + w[t - 7] + s1;
        }
        auto [a, b, c, d, e, f, g, hh] = h;
        for (int t = 0; t < 64; ++t) {
            const std::uint32_t S1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
            const std::uint32_t ch = (e & f) ^ (~e & g);
            const std::uint32_t t1 = hh + S1 + ch + kSha256K[t] + w[t];
            const std::uint32_t S0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
            const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
            const std::uint32_t t2 = S0 + maj;
            hh = g;
            g = f;
            f = e;
            e = d + t1;
            d = c;
            c = b;
            b = a;
            a = t1 + t2;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
        h[5] += f;
        h[6] += g;
        h[7] += hh;
    }
    std::string hex;
    hex.reserve(64);
    for (std::uint32_t word : h) {
        char buf[9];
        std::snprintf(buf, sizeof(buf), "%08x", word);
        hex += buf;
    }
    return hex;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("cannot open " + path, {path});
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace cgro
