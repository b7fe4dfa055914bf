#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cgro {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what, std::string field = {})
        : std::runtime_error(what), field(std::move(field)) {}
    std::string field;
};

struct DivergenceError : std::runtime_error {
    DivergenceError(const std::string& what, int iteration)
        : std::runtime_error(what), iteration(iteration) {}
    int iteration;
};

struct GeometryError : std::runtime_error {
    GeometryError(const std::string& what, std::vector<std::pair<int, int>> pairs)
        : std::runtime_error(what), pairs(std::move(pairs)) {}
    std::vector<std::pair<int, int>> pairs;
};

struct MissingArtifactError : std::runtime_error {
    MissingArtifactError(const std::string& what, std::vector<std::string> missing)
        : std::runtime_error(what), missing(std::move(missing)) {}
    std::vector<std::string> missing;
};

struct MissingCheckpointError : std::runtime_error {
    explicit MissingCheckpointError(const std::string& what)
        : std::runtime_error(what) {}
};

}  // namespace cgro
