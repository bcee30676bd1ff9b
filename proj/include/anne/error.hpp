#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace anne {

enum class ErrorKind {
    // dataset / io
    MalformedHeader,
    SizeMismatch,
    NonFiniteFeature,
    IoFailure,
    ZeroVector,
    // generation
    InvalidSpec,
    MissingTrueLabels,
    InvalidMapping,
    DimensionMismatch,
    InsufficientOodPool,
    // selection
    DegenerateScores,
    EmptyPool,
    EmptyNeighborhood,
    InsufficientSamples,
    NoConvergence,
    NotNormalized,
    EmptySubset,
    LengthMismatch,
    DegenerateLosses,
    // training / eval
    EmptyBatch,
    EmptyCleanSet,
    NonFiniteLoss,
    EmptyTestSet,
    // argument and configuration
    InvalidArgument,
    ConfigError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Single exception type for the library; `kind()` carries the failure class.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what) {
    if (!condition) fail(kind, what);
}

}  // namespace anne
