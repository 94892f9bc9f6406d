#pragma once

#include <stdexcept>
#include <string>

namespace tamperlab {

struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

struct InvalidInstanceError : std::invalid_argument {
    explicit InvalidInstanceError(const std::string& msg) : std::invalid_argument(msg) {}
};

struct RejectedPlacementError : std::invalid_argument {
    explicit RejectedPlacementError(const std::string& msg) : std::invalid_argument(msg) {}
};

struct DegenerateOffsetError : std::invalid_argument {
    explicit DegenerateOffsetError(const std::string& msg) : std::invalid_argument(msg) {}
};

struct ExhaustedPoolError : std::runtime_error {
    explicit ExhaustedPoolError(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyGroupError : std::invalid_argument {
    explicit EmptyGroupError(const std::string& msg) : std::invalid_argument(msg) {}
};

struct InvalidQueryError : std::invalid_argument {
    explicit InvalidQueryError(const std::string& msg) : std::invalid_argument(msg) {}
};

struct TrainingDivergedError : std::runtime_error {
    explicit TrainingDivergedError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct MetricError : std::invalid_argument {
    explicit MetricError(const std::string& msg) : std::invalid_argument(msg) {}
};

}  // namespace tamperlab
