#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cgro/commands.hpp"
#include "cgro/errors.hpp"
#include "cgro/threading.hpp"

// Experiment driver. Every subcommand takes a JSON manifest; remaining
// --path.to.field=value arguments override manifest fields before the run.

int main(int argc, char** argv) {
    CLI::App app{"cgro_lab: adversarial-training laboratory on patch data"};
    app.require_subcommand(1);

    std::string manifest_path;
    int threads = 0;
    const char* env_threads = std::getenv("CGRO_LAB_THREADS");

    std::vector<CLI::App*> subs;
    for (const char* name :
         {"gen-data", "train", "flatness", "construct", "report"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--manifest", manifest_path, "experiment manifest JSON")
            ->required();
        sub->add_option("--threads", threads, "worker cap (default 1)");
        sub->allow_extras();
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 2 : 0;
    }

    if (threads <= 0 && env_threads) threads = std::atoi(env_threads);
    cgro::set_threads(threads > 0 ? threads : 1);

    CLI::App* sub = app.get_subcommands().front();
    std::vector<std::string> overrides;
    for (std::string extra : sub->remaining()) {
        if (extra.rfind("--", 0) == 0) extra = extra.substr(2);
        overrides.push_back(extra);
    }

    try {
        const cgro::ExperimentManifest man =
            cgro::load_manifest(manifest_path, overrides);
        return cgro::dispatch_command(sub->get_name(), man, std::cout,
                                      std::cerr);
    } catch (const cgro::ConfigError& e) {
        std::cerr << "config error";
        if (!e.field.empty()) std::cerr << " [" << e.field << "]";
        std::cerr << ": " << e.what() << "\n";
        return 2;
    } catch (const cgro::MissingArtifactError& e) {
        std::cerr << e.what() << "\n";
        return 6;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
