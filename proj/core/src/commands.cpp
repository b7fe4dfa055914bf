#include "cgro/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>

#include <json.hpp>

#include "cgro/errors.hpp"
#include "cgro/eval.hpp"
#include "cgro/serialization.hpp"

namespace cgro {

namespace fs = std::filesystem;
using nlohmann::json;

std::string checkpoint_path(const std::string& output_dir, int iteration) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "iter_%06d.json", iteration);
    return (fs::path(output_dir) / "checkpoints" / buf).string();
}

namespace {

std::string artifact(const ExperimentManifest& man, const char* name) {
    return (fs::path(man.output_dir) / name).string();
}

Dataset load_or_generate_dataset(const ExperimentManifest& man) {
    const std::string path = artifact(man, "dataset.json");
    if (fs::exists(path)) return dataset_from_json(read_file(path));
    man.run_config.data.validate();
    return sample_dataset(man.run_config.data, man.run_config.N);
}

}  // namespace

ConstructFixture make_construct_fixture(const ConstructTask& task) {
    const int D = task.input_dim;
    if (D < 2) throw ConfigError("construct.task.input_dim must be >= 2",
                                 "construct.task.input_dim");
    const int half = D / 2;

    // Halfspace score z(x) = mean of the first half of the coordinates
    // minus 1/2, realized exactly as rect(z) - rect(-z).
    ConstructFixture fx;
    fx.clean_net.input_dim = D;
    ReluLayer arms(D, 2);
    for (int c = 0; c < half; ++c) {
        arms.add(0, c, 1.0 / half);
        arms.add(1, c, -1.0 / half);
    }
    arms.b[0] = -0.5;
    arms.b[1] = 0.5;
    fx.clean_net.layers.push_back(std::move(arms));
    ReluLayer out(2, 1);
    out.add(0, 0, 1.0);
    out.add(0, 1, -1.0);
    fx.clean_net.layers.push_back(std::move(out));

    // Well-separated points with a margin band around the halfspace
    // boundary; a fraction of labels is flipped so only memorization can
    // fit them.
    Rng rng(derive_stream(task.seed, "construct.points", 0));
    const double min_sep = 0.8;
    while (static_cast<int>(fx.trainset.size()) < task.n_points) {
        std::vector<double> pt(D);
        for (double& c : pt) c = rng.uniform(0.05, 0.95);
        const double z = relu_forward(fx.clean_net, pt);
        if (std::abs(z) < 0.15) continue;
        bool ok = true;
        for (const auto& [q, y] : fx.trainset) {
            double d2 = 0.0;
            for (int c = 0; c < D; ++c) d2 += (pt[c] - q[c]) * (pt[c] - q[c]);
            if (d2 < min_sep * min_sep) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        int label = z > 0.0 ? 1 : -1;
        if (rng.uniform01() < task.flip_fraction) label = -label;
        fx.trainset.push_back({std::move(pt), label});
    }
    return fx;
}

ConstructVerification verify_cgro_build(const CgroBuild& build,
                                        const CgroBuildSpec& spec,
                                        const std::vector<LabeledPoint>& trainset,
                                        const ConstructTask& task) {
    const int D = spec.clean_net.input_dim;
    const double delta = spec.delta;
    auto clean_fn = [&](std::span<const double> x) {
        return relu_forward(spec.clean_net, x);
    };
    // Points where sign(h) is not pinned down are excluded: the indicator
    // transition annulus around each center, and the clean margin band
    // |clean| < 0.1 for points outside all balls.
    const double annulus_lo = std::sqrt(std::max(0.0, build.lo - 2.0 * spec.eps_sq));
    const double annulus_hi = std::sqrt(build.hi + 2.0 * spec.eps_sq);

    Rng rng(derive_stream(task.seed, "construct.probe", 1));
    int agree = 0, total = 0;
    while (total < task.n_probe) {
        std::vector<double> pt(D);
        const bool shell = (total % 2 == 1) && !trainset.empty();
        if (shell) {
            const auto& center =
                trainset[rng.uniform_index(trainset.size())].first;
            std::vector<double> dir(D);
            double n2 = 0.0;
            for (double& v : dir) {
                v = rng.normal();
                n2 += v * v;
            }
            const bool inner = rng.uniform01() < 0.5;
            const double r = inner ? rng.uniform(0.2 * delta, 0.85 * delta)
                                   : rng.uniform(1.35 * delta, 2.0 * delta);
            const double sc = r / std::sqrt(n2);
            for (int c = 0; c < D; ++c)
                pt[c] = std::clamp(center[c] + sc * dir[c], 0.0, 1.0);
        } else {
            for (double& c : pt) c = rng.uniform(0.05, 0.95);
        }
        // Reject points in any transition annulus or too close to the
        // clean decision boundary while outside all balls.
        double min_dist = std::numeric_limits<double>::infinity();
        for (const auto& [q, y] : trainset) {
            double d2 = 0.0;
            for (int c = 0; c < D; ++c) d2 += (pt[c] - q[c]) * (pt[c] - q[c]);
            min_dist = std::min(min_dist, std::sqrt(d2));
        }
        if (min_dist >= annulus_lo && min_dist <= annulus_hi) continue;
        if (min_dist > annulus_hi && std::abs(clean_fn(pt)) < 0.1) continue;

        const double href = eval_f_s(pt, clean_fn, trainset, delta);
        const double hval = relu_forward(build.net, pt);
        const bool same = (hval > 0.0) == (href > 0.0);
        agree += same ? 1 : 0;
        ++total;
    }

    ConstructVerification ver;
    ver.n_probe = total;
    ver.agreement = static_cast<double>(agree) / total;
    ver.param_total = param_count(build.net);
    ver.clean_params = param_count(spec.clean_net);

    // Robust training error over the memorized balls: the training point
    // itself plus random points within the guaranteed-indicator radius.
    int violations = 0, checked = 0;
    const double safe_r =
        std::sqrt(std::max(0.0, build.lo - 2.0 * spec.eps_sq)) * 0.98;
    Rng brng(derive_stream(task.seed, "construct.ball", 2));
    for (const auto& [q, y] : trainset) {
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> pt(D);
            if (rep == 0) {
                pt = q;
            } else {
                std::vector<double> dir(D);
                double n2 = 0.0;
                for (double& v : dir) {
                    v = brng.normal();
                    n2 += v * v;
                }
                const double r = safe_r * std::pow(brng.uniform01(), 1.0 / D);
                const double sc = r / std::sqrt(n2);
                for (int c = 0; c < D; ++c)
                    pt[c] = std::clamp(q[c] + sc * dir[c], 0.0, 1.0);
            }
            const double hval = relu_forward(build.net, pt);
            if (y * hval <= 0.0) ++violations;
            ++checked;
        }
    }
    ver.robust_train_err =
        checked > 0 ? static_cast<double>(violations) / checked : 0.0;
    return ver;
}

void cmd_gen_data(const ExperimentManifest& man, std::ostream& out) {
    man.run_config.validate();
    const Dataset data = sample_dataset(man.run_config.data, man.run_config.N);
    const std::string text = dataset_to_json(data);
    write_file(artifact(man, "dataset.json"), text);
    out << "dataset.json sha256=" << sha256_hex(text) << "\n";
}

void cmd_train(const ExperimentManifest& man, std::ostream& out) {
    man.run_config.validate();
    const Dataset data = load_or_generate_dataset(man);
    const TrainResult res = train(man.run_config, data);

    write_file(artifact(man, "telemetry.csv"), telemetry_csv(res.telemetry));
    write_file(artifact(man, "telemetry_sidecar.json"),
               telemetry_sidecar_json(res.telemetry));
    for (const TelemetrySnapshot& s : res.telemetry)
        write_file(checkpoint_path(man.output_dir, s.iteration),
                   weights_to_json(s.weights));
    write_file(artifact(man, "weights_final.json"), weights_to_json(res.weights));
    if (!fs::exists(artifact(man, "dataset.json")))
        write_file(artifact(man, "dataset.json"), dataset_to_json(data));

    // Exact-update residuals for every pair of adjacent-iteration
    // snapshots (all pairs when telemetry_every = 1).
    std::vector<ResidualReport> residuals;
    for (std::size_t i = 0; i + 1 < res.telemetry.size(); ++i)
        if (res.telemetry[i + 1].iteration == res.telemetry[i].iteration + 1)
            residuals.push_back(verify_projection_equalities(
                res.telemetry[i], res.telemetry[i + 1], data, man.run_config));
    write_file(artifact(man, "residuals.json"),
               residual_reports_to_json(residuals));

    const ErrorReport rep =
        error_report(res.weights, data, res.adv_examples, man.run_config.attack,
                     man.eval.n_mc, derive_stream(man.run_config.seed, "eval", 0));
    write_file(artifact(man, "error_report.json"), error_report_to_json(rep));

    out << "final objective " << fmt17(res.telemetry.back().objective) << "\n";
    out << "clean_test " << fmt17(rep.clean_test.rate) << " +- "
        << fmt17(rep.clean_test.stderr_) << "\n";
    out << "robust_test_gta " << fmt17(rep.robust_test_gta.rate) << " +- "
        << fmt17(rep.robust_test_gta.stderr_) << "\n";
    out << "robust_test_pgd " << fmt17(rep.robust_test_pgd.rate) << " +- "
        << fmt17(rep.robust_test_pgd.stderr_) << "\n";
    out << "robust_train " << fmt17(rep.robust_train) << "\n";
}

void cmd_flatness(const ExperimentManifest& man, std::ostream& out) {
    man.run_config.validate();
    const std::string dataset_path = artifact(man, "dataset.json");
    if (!fs::exists(dataset_path))
        throw MissingArtifactError("flatness needs the training dataset",
                                   {dataset_path});
    const Dataset data = dataset_from_json(read_file(dataset_path));

    std::vector<int> checkpoints = man.flatness.checkpoints;
    if (checkpoints.empty()) {
        // Default: every stored checkpoint.
        const fs::path dir = fs::path(man.output_dir) / "checkpoints";
        if (fs::exists(dir))
            for (const auto& e : fs::directory_iterator(dir)) {
                const std::string name = e.path().filename().string();
                int it = 0;
                if (std::sscanf(name.c_str(), "iter_%d.json", &it) == 1)
                    checkpoints.push_back(it);
            }
        std::sort(checkpoints.begin(), checkpoints.end());
    }
    if (checkpoints.empty())
        throw MissingCheckpointError("no checkpoints found for flatness");

    std::vector<Mat> adv;
    adv.reserve(data.examples.size());
    for (const Example& ex : data.examples)
        adv.push_back(gta(ex, data.config, man.run_config.attack.gamma,
                          man.run_config.attack.delta));

    std::vector<FlatnessReport> rows;
    for (const int it : checkpoints) {
        const std::string path = checkpoint_path(man.output_dir, it);
        if (!fs::exists(path))
            throw MissingCheckpointError("missing checkpoint " + path);
        const CnnWeights w = weights_from_json(read_file(path));
        for (const double eps : man.flatness.eps_list)
            rows.push_back(flatness_report(
                w, it, data, adv, man.run_config, eps, man.flatness.pair,
                man.flatness.probe, man.flatness.n_mc,
                derive_stream(man.run_config.seed, "flatness", it)));
    }
    write_file(artifact(man, "flatness.csv"), flatness_csv(rows));
    out << "flatness rows " << rows.size() << "\n";
}

void cmd_construct(const ExperimentManifest& man, std::ostream& out) {
    if (!man.construct)
        throw ConfigError("manifest has no construct section", "construct");
    const ConstructSpec& cs = *man.construct;
    ConstructFixture fx = make_construct_fixture(cs.task);
    if (!cs.clean_net_path.empty())
        fx.clean_net = relunet_from_json(read_file(cs.clean_net_path));

    CgroBuildSpec spec;
    spec.delta = cs.delta;
    spec.eps_sq = cs.eps_sq;
    spec.eps_prod = cs.eps_prod;
    spec.ramp_width = cs.ramp_width;
    spec.clean_net = fx.clean_net;

    const CgroBuild build = build_cgro_net(spec, fx.trainset);
    const ConstructVerification ver =
        verify_cgro_build(build, spec, fx.trainset, cs.task);

    write_file(artifact(man, "relunet.json"), relunet_to_json(build.net));
    std::string rep = "{";
    rep += "\"agreement\":" + fmt17(ver.agreement);
    rep += ",\"n_probe\":" + std::to_string(ver.n_probe);
    rep += ",\"robust_train_err\":" + fmt17(ver.robust_train_err);
    rep += ",\"param_total\":" + std::to_string(ver.param_total);
    rep += ",\"clean_params\":" + std::to_string(ver.clean_params);
    rep += ",\"range_bound\":" + fmt17(build.range_bound);
    rep += ",\"lo\":" + fmt17(build.lo);
    rep += ",\"hi\":" + fmt17(build.hi);
    rep += ",\"ramp\":" + fmt17(build.ramp);
    rep += ",\"min_separation\":" + fmt17(build.min_separation);
    rep += ",\"n_train\":" + std::to_string(fx.trainset.size());
    rep += "}";
    write_file(artifact(man, "construct_report.json"), rep);
    out << "agreement " << fmt17(ver.agreement) << " params "
        << ver.param_total << "\n";
}

void cmd_report(const ExperimentManifest& man, std::ostream& out) {
    std::vector<std::string> missing;
    auto need = [&](const char* name) {
        const std::string p = artifact(man, name);
        if (!fs::exists(p)) missing.push_back(p);
        return p;
    };
    const std::string err_path = need("error_report.json");
    const std::string side_path = need("telemetry_sidecar.json");
    const std::string flat_path = need("flatness.csv");
    const std::string resid_path = need("residuals.json");
    if (!missing.empty())
        throw MissingArtifactError("missing artifacts for report", missing);

    const json side = json::parse(read_file(side_path));
    const json& last = side.at("snapshots").back();

    std::string rep = "{\"format_version\":1";
    rep += ",\"error_report\":" + read_file(err_path);
    rep += ",\"final_metrics\":{";
    rep += "\"iteration\":" + last.at("iteration").dump();
    rep += ",\"U\":" + last.at("U").dump();
    rep += ",\"u\":" + last.at("u").dump();
    rep += ",\"V\":" + last.at("V").dump();
    rep += ",\"objective\":" + last.at("objective").dump();
    rep += "}";
    rep += ",\"residual_checks\":" + read_file(resid_path);
    // flatness.csv embedded as parsed rows for plotting front-ends.
    const std::string flat = read_file(flat_path);
    json rows = json::array();
    std::size_t pos = 0;
    int line_no = 0;
    std::vector<std::string> header;
    while (pos < flat.size()) {
        auto end = flat.find('\n', pos);
        if (end == std::string::npos) end = flat.size();
        const std::string line = flat.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::size_t c = 0;
        while (c <= line.size()) {
            auto comma = line.find(',', c);
            if (comma == std::string::npos) comma = line.size();
            cells.push_back(line.substr(c, comma - c));
            c = comma + 1;
        }
        if (line_no++ == 0) {
            header = cells;
            continue;
        }
        json row;
        for (std::size_t k = 0; k < cells.size() && k < header.size(); ++k) {
            json v = json::parse(cells[k], nullptr, false);
            row[header[k]] = v.is_discarded() ? json(cells[k]) : v;
        }
        rows.push_back(row);
    }
    rep += ",\"flatness\":" + rows.dump();
    rep += "}";
    write_file(artifact(man, "report.json"), rep);
    out << "report.json written\n";
}

int dispatch_command(const std::string& name, const ExperimentManifest& man,
                     std::ostream& out, std::ostream& err) {
    try {
        if (name == "gen-data")
            cmd_gen_data(man, out);
        else if (name == "train")
            cmd_train(man, out);
        else if (name == "flatness")
            cmd_flatness(man, out);
        else if (name == "construct")
            cmd_construct(man, out);
        else if (name == "report")
            cmd_report(man, out);
        else {
            err << "unknown command: " << name << "\n";
            return 2;
        }
        return 0;
    } catch (const ConfigError& e) {
        err << "config error";
        if (!e.field.empty()) err << " [" << e.field << "]";
        err << ": " << e.what() << "\n";
        return 2;
    } catch (const DivergenceError& e) {
        err << "divergence at iteration " << e.iteration << ": " << e.what()
            << "\n";
        return 3;
    } catch (const MissingCheckpointError& e) {
        err << e.what() << "\n";
        return 4;
    } catch (const GeometryError& e) {
        err << e.what() << ":";
        for (const auto& [i, j] : e.pairs) err << " (" << i << "," << j << ")";
        err << "\n";
        return 5;
    } catch (const MissingArtifactError& e) {
        err << e.what() << ":";
        for (const std::string& p : e.missing) err << " " << p;
        err << "\n";
        return 6;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace cgro
