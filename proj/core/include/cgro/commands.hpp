#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cgro/manifest.hpp"
#include "cgro/relu_net.hpp"

namespace cgro {

/// The synthetic memorization task behind the construct command: a
/// halfspace clean net over the first half of the coordinates, and
/// well-separated points with a fraction of labels flipped against it.
struct ConstructFixture {
    ReluNet clean_net;
    std::vector<LabeledPoint> trainset;
};

ConstructFixture make_construct_fixture(const ConstructTask& task);

struct ConstructVerification {
    double agreement = 0.0;        // sign agreement h vs f_S on probe points
    int n_probe = 0;
    double robust_train_err = 0.0; // violations over memorized-ball probes
    long param_total = 0;
    long clean_params = 0;
};

/// Probes the built net against the exact f_S oracle: half the points
/// come from the task distribution, half from shells around training
/// points avoiding the indicator transition annulus.
ConstructVerification verify_cgro_build(const CgroBuild& build,
                                        const CgroBuildSpec& spec,
                                        const std::vector<LabeledPoint>& trainset,
                                        const ConstructTask& task);

void cmd_gen_data(const ExperimentManifest& man, std::ostream& out);
void cmd_train(const ExperimentManifest& man, std::ostream& out);
void cmd_flatness(const ExperimentManifest& man, std::ostream& out);
void cmd_construct(const ExperimentManifest& man, std::ostream& out);
void cmd_report(const ExperimentManifest& man, std::ostream& out);

/// Runs one subcommand, mapping typed failures to the stable exit codes:
/// 0 ok, 2 config, 3 divergence, 4 missing checkpoint, 5 geometry,
/// 6 missing artifacts.
int dispatch_command(const std::string& name, const ExperimentManifest& man,
                     std::ostream& out, std::ostream& err);

std::string checkpoint_path(const std::string& output_dir, int iteration);

}  // namespace cgro
