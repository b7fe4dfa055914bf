#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "cgro/commands.hpp"
#include "cgro/errors.hpp"
#include "cgro/manifest.hpp"
#include "cgro/serialization.hpp"
#include "cgro/threading.hpp"

using namespace cgro;
namespace fs = std::filesystem;

namespace {

std::string small_manifest_json(const std::string& outdir, int T = 6,
                                int every = 4) {
    std::ostringstream ss;
    ss << R"({
  "format_version": 1,
  "run_config": {
    "data": {"d": 8, "P": 2, "alpha": 1.5, "sigma": 0.4, "w_star": "e1", "seed": 91},
    "N": 4, "m": 2, "sigma0": 0.2, "eta": 0.05, "T": )"
       << T << R"(, "lambda": 0.5,
    "attack": {"method": "GTA", "norm_p": 2, "delta": 1.2, "gamma": 0.8,
               "steps": 10, "restarts": 2, "step_size": 0},
    "telemetry_every": )"
       << every << R"(, "seed": 92
  },
  "eval": {"n_mc": 50},
  "flatness": {"eps_list": [0.0, 0.2], "pair": "l2",
               "probe": {"steps": 4, "restarts": 2}, "n_mc": 4},
  "construct": {"delta": 0.2, "eps_sq": 0.004, "eps_prod": 0.001,
                "ramp_width": 0.02,
                "task": {"input_dim": 6, "n_points": 4, "flip_fraction": 0.5,
                         "seed": 77, "n_probe": 400}},
  "output_dir": ")"
       << outdir << R"("
})";
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / name;
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

}  // namespace

TEST_CASE("manifest: parse, defaults, and validation") {
    const std::string text = small_manifest_json("/tmp/x");
    const ExperimentManifest man = manifest_from_json(text);
    CHECK(man.format_version == 1);
    CHECK(man.run_config.data.d == 8);
    CHECK(man.run_config.data.w_star[0] == 1.0);
    CHECK(man.run_config.attack.method == AttackMethod::GTA);
    CHECK(man.eval.n_mc == 50);
    CHECK(man.flatness.eps_list.size() == 2);
    CHECK(man.construct.has_value());
    CHECK(man.construct->task.n_points == 4);

    CHECK_THROWS_AS(
        manifest_from_json("{\"format_version\": 2, \"run_config\": {}}"),
        ConfigError);
    CHECK_THROWS_AS(manifest_from_json("not json"), ConfigError);
}

TEST_CASE("manifest: dotted overrides") {
    TempDir dir("cgro_manifest_test");
    const std::string path = (dir.path / "man.json").string();
    write_file(path, small_manifest_json((dir.path / "out").string()));
    const ExperimentManifest man = load_manifest(
        path, {"run_config.eta=0.5", "output_dir=/tmp/elsewhere",
               "flatness.n_mc=9"});
    CHECK(man.run_config.eta == 0.5);
    CHECK(man.output_dir == "/tmp/elsewhere");
    CHECK(man.flatness.n_mc == 9);
}

TEST_CASE("cli: gen-data is deterministic and creates directories") {
    TempDir dir("cgro_gendata_test");
    const std::string outdir = (dir.path / "nested" / "out").string();
    const ExperimentManifest man =
        manifest_from_json(small_manifest_json(outdir));
    std::ostringstream out1, err1;
    CHECK(dispatch_command("gen-data", man, out1, err1) == 0);
    const std::string bytes1 = read_file(outdir + "/dataset.json");
    CHECK(out1.str().find("sha256=") != std::string::npos);
    CHECK(out1.str().find(sha256_hex(bytes1)) != std::string::npos);

    std::ostringstream out2, err2;
    CHECK(dispatch_command("gen-data", man, out2, err2) == 0);
    CHECK(read_file(outdir + "/dataset.json") == bytes1);
    CHECK(out2.str() == out1.str());
}

TEST_CASE("cli: invalid config exits 2 naming the field") {
    TempDir dir("cgro_badcfg_test");
    ExperimentManifest man = manifest_from_json(
        small_manifest_json((dir.path / "out").string()));
    man.run_config.data.d = 1;
    man.run_config.data.w_star = {1.0};
    std::ostringstream out, err;
    CHECK(dispatch_command("gen-data", man, out, err) == 2);
    CHECK(err.str().find("data.d") != std::string::npos);
}

TEST_CASE("cli: train writes artifacts with the counted telemetry rows") {
    TempDir dir("cgro_train_test");
    const std::string outdir = (dir.path / "out").string();
    // T = 10, every = 3: iterations 0, 3, 6, 9, 10 -> floor(T/every) + 2 rows.
    const ExperimentManifest man =
        manifest_from_json(small_manifest_json(outdir, 10, 3));
    std::ostringstream out, err;
    REQUIRE(dispatch_command("train", man, out, err) == 0);

    const std::string csv = read_file(outdir + "/telemetry.csv");
    CHECK(count_lines(csv) == 2 + 10 / 3 + 2);  // comment + header + rows
    CHECK(csv.rfind("# format_version=1\n", 0) == 0);

    CHECK(fs::exists(outdir + "/weights_final.json"));
    CHECK(fs::exists(outdir + "/error_report.json"));
    CHECK(fs::exists(outdir + "/telemetry_sidecar.json"));
    CHECK(fs::exists(checkpoint_path(outdir, 0)));
    CHECK(fs::exists(checkpoint_path(outdir, 10)));

    // Rerun: byte-identical outputs, also under a different thread cap.
    const std::string csv1 = read_file(outdir + "/telemetry.csv");
    const std::string w1 = read_file(outdir + "/weights_final.json");
    set_threads(3);
    std::ostringstream out2, err2;
    REQUIRE(dispatch_command("train", man, out2, err2) == 0);
    set_threads(1);
    CHECK(read_file(outdir + "/telemetry.csv") == csv1);
    CHECK(read_file(outdir + "/weights_final.json") == w1);
}

TEST_CASE("cli: train with T = 0 checkpoints the initialization") {
    TempDir dir("cgro_t0_test");
    const std::string outdir = (dir.path / "out").string();
    const ExperimentManifest man =
        manifest_from_json(small_manifest_json(outdir, 0, 1));
    std::ostringstream out, err;
    REQUIRE(dispatch_command("train", man, out, err) == 0);
    const CnnWeights ck =
        weights_from_json(read_file(checkpoint_path(outdir, 0)));
    const CnnWeights init = init_weights(man.run_config);
    CHECK(ck.rows.a == init.rows.a);
    CHECK(read_file(outdir + "/weights_final.json") ==
          weights_to_json(init));
}

TEST_CASE("cli: flatness requires checkpoints and counts rows") {
    TempDir dir("cgro_flat_test");
    const std::string outdir = (dir.path / "out").string();
    ExperimentManifest man = manifest_from_json(small_manifest_json(outdir, 4, 2));
    std::ostringstream out, err;
    REQUIRE(dispatch_command("train", man, out, err) == 0);

    man.flatness.checkpoints = {0, 4};
    std::ostringstream out2, err2;
    REQUIRE(dispatch_command("flatness", man, out2, err2) == 0);
    const std::string csv = read_file(outdir + "/flatness.csv");
    CHECK(count_lines(csv) == 2 + 2 * 2);  // comment + header + ckpts * eps

    man.flatness.checkpoints = {1};  // never stored at cadence 2
    std::ostringstream out3, err3;
    CHECK(dispatch_command("flatness", man, out3, err3) == 4);
}

TEST_CASE("cli: flatness of a zero-weight checkpoint is a zero row") {
    TempDir dir("cgro_flatzero_test");
    const std::string outdir = (dir.path / "out").string();
    ExperimentManifest man = manifest_from_json(small_manifest_json(outdir, 0, 1));
    man.run_config.sigma0 = 0.0;
    std::ostringstream out, err;
    REQUIRE(dispatch_command("train", man, out, err) == 0);
    man.flatness.checkpoints = {0};
    std::ostringstream out2, err2;
    REQUIRE(dispatch_command("flatness", man, out2, err2) == 0);
    const std::string csv = read_file(outdir + "/flatness.csv");
    // All flatness columns of both rows are exactly zero.
    std::istringstream lines(csv);
    std::string line;
    int data_rows = 0;
    while (std::getline(lines, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("checkpoint", 0) == 0)
            continue;
        ++data_rows;
        // columns 4..9 are the probe values
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        for (int k = 4; k <= 9; ++k) CHECK(std::stod(cells[k]) == 0.0);
    }
    CHECK(data_rows == 2);
}

TEST_CASE("cli: construct and report pipelines") {
    TempDir dir("cgro_pipeline_test");
    const std::string outdir = (dir.path / "out").string();
    ExperimentManifest man = manifest_from_json(small_manifest_json(outdir, 4, 2));
    std::ostringstream out, err;

    // report before anything exists: exit 6 listing the missing pieces
    CHECK(dispatch_command("report", man, out, err) == 6);
    CHECK(err.str().find("error_report.json") != std::string::npos);

    REQUIRE(dispatch_command("train", man, out, err) == 0);
    man.flatness.checkpoints = {0, 4};
    REQUIRE(dispatch_command("flatness", man, out, err) == 0);
    REQUIRE(dispatch_command("construct", man, out, err) == 0);
    CHECK(fs::exists(outdir + "/relunet.json"));
    CHECK(fs::exists(outdir + "/construct_report.json"));

    std::ostringstream rep_out, rep_err;
    REQUIRE(dispatch_command("report", man, rep_out, rep_err) == 0);
    CHECK(fs::exists(outdir + "/report.json"));

    // Geometry violations exit 5: collapse all points onto one another by
    // inflating delta beyond the packing radius.
    man.construct->delta = 2.0;
    man.construct->ramp_width = 0.0;
    std::ostringstream out5, err5;
    CHECK(dispatch_command("construct", man, out5, err5) == 5);
}
