#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cgro/flatness.hpp"
#include "cgro/relu_net.hpp"
#include "cgro/train.hpp"

namespace cgro {

/// Generator of the synthetic memorization task used by the construct
/// command: well-separated points in [0,1]^D labeled by a halfspace
/// clean classifier, with a fraction of labels flipped so that only
/// memorization can fit them.
struct ConstructTask {
    int input_dim = 20;
    int n_points = 50;
    double flip_fraction = 0.4;
    std::uint64_t seed = 7;
    int n_probe = 10000;
};

struct ConstructSpec {
    double delta = 0.15;
    double eps_sq = 0.004;
    double eps_prod = 0.001;
    double ramp_width = 0.0;  // 0 = derived from the data separation
    std::string clean_net_path;  // optional, replaces the halfspace fixture
    ConstructTask task;
};

struct FlatnessSection {
    std::vector<double> eps_list;
    HolderPair pair = HolderPair::L2_L2;
    ProbeConfig probe;
    std::vector<int> checkpoints;  // empty = every telemetry iteration
    int n_mc = 50;
};

struct EvalSection {
    int n_mc = 2000;
};

struct ExperimentManifest {
    int format_version = 1;
    RunConfig run_config;
    EvalSection eval;
    FlatnessSection flatness;
    std::optional<ConstructSpec> construct;
    std::string output_dir = "out";
};

ExperimentManifest manifest_from_json(const std::string& text);

/// Loads a manifest file and applies dotted-path overrides such as
/// "run_config.eta=0.5" on the raw JSON document before parsing.
ExperimentManifest load_manifest(const std::string& path,
                                 const std::vector<std::string>& overrides = {});

}  // namespace cgro
