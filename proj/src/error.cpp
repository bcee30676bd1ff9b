#include "anne/error.hpp"

namespace anne {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::MalformedHeader: return "MalformedHeader";
        case ErrorKind::SizeMismatch: return "SizeMismatch";
        case ErrorKind::NonFiniteFeature: return "NonFiniteFeature";
        case ErrorKind::IoFailure: return "IoFailure";
        case ErrorKind::ZeroVector: return "ZeroVector";
        case ErrorKind::InvalidSpec: return "InvalidSpec";
        case ErrorKind::MissingTrueLabels: return "MissingTrueLabels";
        case ErrorKind::InvalidMapping: return "InvalidMapping";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::InsufficientOodPool: return "InsufficientOodPool";
        case ErrorKind::DegenerateScores: return "DegenerateScores";
        case ErrorKind::EmptyPool: return "EmptyPool";
        case ErrorKind::EmptyNeighborhood: return "EmptyNeighborhood";
        case ErrorKind::InsufficientSamples: return "InsufficientSamples";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::NotNormalized: return "NotNormalized";
        case ErrorKind::EmptySubset: return "EmptySubset";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::DegenerateLosses: return "DegenerateLosses";
        case ErrorKind::EmptyBatch: return "EmptyBatch";
        case ErrorKind::EmptyCleanSet: return "EmptyCleanSet";
        case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorKind::EmptyTestSet: return "EmptyTestSet";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

}  // namespace anne
