#include "cgro/manifest.hpp"

#include <json.hpp>

#include "cgro/errors.hpp"
#include "cgro/serialization.hpp"

namespace cgro {

using nlohmann::json;

namespace {

std::vector<double> parse_w_star(const json& j, int d) {
    if (j.is_string()) {
        if (j.get<std::string>() != "e1")
            throw ConfigError("data.w_star string form must be \"e1\"",
                              "data.w_star");
        std::vector<double> w(d, 0.0);
        if (d > 0) w[0] = 1.0;
        return w;
    }
    std::vector<double> w;
    for (const auto& v : j) w.push_back(v.get<double>());
    return w;
}

AttackSpec parse_attack(const json& j) {
    AttackSpec a;
    if (j.contains("method")) {
        const std::string m = j.at("method").get<std::string>();
        if (m == "GTA")
            a.method = AttackMethod::GTA;
        else if (m == "PGD")
            a.method = AttackMethod::PGD;
        else
            throw ConfigError("attack.method must be GTA or PGD", "attack.method");
    }
    if (j.contains("norm_p")) {
        const json& p = j.at("norm_p");
        if (p.is_string()) {
            if (p.get<std::string>() != "inf")
                throw ConfigError("attack.norm_p must be 2 or \"inf\"",
                                  "attack.norm_p");
            a.norm_p = NormP::LInf;
        } else if (p.get<double>() == 2.0) {
            a.norm_p = NormP::L2;
        } else {
            throw ConfigError("attack.norm_p must be 2 or \"inf\"", "attack.norm_p");
        }
    }
    if (j.contains("delta")) a.delta = j.at("delta").get<double>();
    if (j.contains("gamma")) a.gamma = j.at("gamma").get<double>();
    if (j.contains("steps")) a.steps = j.at("steps").get<int>();
    if (j.contains("restarts")) a.restarts = j.at("restarts").get<int>();
    if (j.contains("step_size")) a.step_size = j.at("step_size").get<double>();
    return a;
}

RunConfig parse_run_config(const json& j) {
    RunConfig cfg;
    const json& jd = j.at("data");
    cfg.data.d = jd.at("d").get<int>();
    cfg.data.P = jd.at("P").get<int>();
    cfg.data.alpha = jd.at("alpha").get<double>();
    cfg.data.sigma = jd.at("sigma").get<double>();
    cfg.data.w_star = jd.contains("w_star")
                          ? parse_w_star(jd.at("w_star"), cfg.data.d)
                          : parse_w_star(json("e1"), cfg.data.d);
    cfg.data.seed = jd.value("seed", std::uint64_t{0});
    cfg.N = j.at("N").get<int>();
    cfg.m = j.at("m").get<int>();
    cfg.sigma0 = j.at("sigma0").get<double>();
    cfg.eta = j.at("eta").get<double>();
    cfg.T = j.at("T").get<int>();
    cfg.lambda = j.at("lambda").get<double>();
    cfg.attack = parse_attack(j.at("attack"));
    cfg.telemetry_every = j.value("telemetry_every", 1);
    cfg.seed = j.value("seed", std::uint64_t{0});
    return cfg;
}

HolderPair parse_pair(const std::string& s) {
    if (s == "l2" || s == "2") return HolderPair::L2_L2;
    if (s == "linf" || s == "inf") return HolderPair::LInf_L1;
    throw ConfigError("flatness.pair must be l2 or linf", "flatness.pair");
}

// Dotted-path override "a.b.c=value"; the value is parsed as JSON when it
// is valid JSON, otherwise taken as a string.
void apply_override(json& root, const std::string& expr) {
    const auto eq = expr.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must look like path.to.field=value: " + expr);
    std::string path = expr.substr(0, eq);
    if (path.rfind("--", 0) == 0) path = path.substr(2);
    const std::string value = expr.substr(eq + 1);
    json* node = &root;
    std::size_t pos = 0;
    while (true) {
        const auto dotpos = path.find('.', pos);
        const std::string key = path.substr(pos, dotpos - pos);
        if (key.empty()) throw ConfigError("bad override path: " + expr);
        if (dotpos == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
            return;
        }
        node = &(*node)[key];
        pos = dotpos + 1;
    }
}

}  // namespace

ExperimentManifest manifest_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
    }
    try {
        ExperimentManifest man;
        man.format_version = j.value("format_version", 0);
        if (man.format_version != 1)
            throw ConfigError("manifest format_version must be 1", "format_version");
        man.run_config = parse_run_config(j.at("run_config"));
        if (j.contains("eval")) man.eval.n_mc = j.at("eval").value("n_mc", 2000);
        if (j.contains("flatness")) {
            const json& jf = j.at("flatness");
            if (jf.contains("eps_list"))
                for (const auto& v : jf.at("eps_list"))
                    man.flatness.eps_list.push_back(v.get<double>());
            if (jf.contains("pair"))
                man.flatness.pair = parse_pair(jf.at("pair").get<std::string>());
            if (jf.contains("probe")) {
                const json& jp = jf.at("probe");
                man.flatness.probe.steps = jp.value("steps", 30);
                man.flatness.probe.restarts = jp.value("restarts", 8);
                man.flatness.probe.step_mult = jp.value("step_mult", 1.5);
            }
            if (jf.contains("checkpoints"))
                for (const auto& v : jf.at("checkpoints"))
                    man.flatness.checkpoints.push_back(v.get<int>());
            man.flatness.n_mc = jf.value("n_mc", 50);
        }
        if (j.contains("construct") && !j.at("construct").is_null()) {
            const json& jc = j.at("construct");
            ConstructSpec cs;
            cs.delta = jc.value("delta", 0.15);
            cs.eps_sq = jc.value("eps_sq", 0.004);
            cs.eps_prod = jc.value("eps_prod", 0.001);
            cs.ramp_width = jc.value("ramp_width", 0.0);
            cs.clean_net_path = jc.value("clean_net_path", std::string{});
            if (jc.contains("task")) {
                const json& jt = jc.at("task");
                cs.task.input_dim = jt.value("input_dim", 20);
                cs.task.n_points = jt.value("n_points", 50);
                cs.task.flip_fraction = jt.value("flip_fraction", 0.4);
                cs.task.seed = jt.value("seed", std::uint64_t{7});
                cs.task.n_probe = jt.value("n_probe", 10000);
            }
            man.construct = cs;
        }
        man.output_dir = j.value("output_dir", std::string{"out"});
        return man;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("manifest field error: ") + e.what());
    }
}

ExperimentManifest load_manifest(const std::string& path,
                                 const std::vector<std::string>& overrides) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
    }
    for (const std::string& o : overrides) apply_override(j, o);
    return manifest_from_json(j.dump());
}

}  // namespace cgro
