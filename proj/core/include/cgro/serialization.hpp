#pragma once

#include <string>
#include <vector>

#include "cgro/data.hpp"
#include "cgro/eval.hpp"
#include "cgro/flatness.hpp"
#include "cgro/model.hpp"
#include "cgro/relu_net.hpp"
#include "cgro/telemetry.hpp"
#include "cgro/train.hpp"

namespace cgro {

/// %.17g rendering; round-trips IEEE doubles bit-exactly.
std::string fmt17(double x);

std::string dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const std::string& text);

std::string weights_to_json(const CnnWeights& w);
CnnWeights weights_from_json(const std::string& text);

/// Dense serialization: each layer as a row-major matrix plus offsets.
std::string relunet_to_json(const ReluNet& net);
ReluNet relunet_from_json(const std::string& text);

std::string telemetry_csv(const std::vector<TelemetrySnapshot>& snaps);
std::string telemetry_sidecar_json(const std::vector<TelemetrySnapshot>& snaps);

std::string error_report_to_json(const ErrorReport& rep);
std::string residual_reports_to_json(const std::vector<ResidualReport>& reps);
std::string flatness_csv(const std::vector<FlatnessReport>& reps);

std::string run_config_to_json(const RunConfig& cfg);

std::string sha256_hex(const std::string& bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace cgro
