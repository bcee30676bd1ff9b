#pragma once

#include "anne/dataset.hpp"

#include <map>
#include <span>
#include <vector>

namespace anne {

struct EigenPair {
    Vector vector;  // unit norm, largest-magnitude component positive
    double value = 0.0;
    std::size_t iterations = 0;
};

inline constexpr std::size_t kPowerIterationLimit = 10000;
inline constexpr double kPowerIterationTolerance = 1e-10;

/// Top eigenpair of the class Gram matrix (1/m) F^T F by power iteration,
/// started from the normalized class mean.
EigenPair class_dominant_eigenvector(const RowMatrix& class_features);

/// Squared inner product of two unit vectors, clamped to [0,1].
double alignment_score(std::span<const double> f, std::span<const double> u);

struct ClassEigenbasis {
    Label label = 0;
    EigenPair pair;
    std::size_t sample_count = 0;
};

struct FineSelection {
    IndexSet clean;
    IndexSet noisy;
    std::vector<Index> members;     // subset members, ascending
    std::vector<double> scores;     // aligned with members; NaN for classes passed through
    std::vector<ClassEigenbasis> bases;
};

/// Eigenvector filter over `subset`. Classes with fewer than two members in
/// the subset pass through as clean.
FineSelection fine_select(std::span<const Index> subset, const Dataset& dataset, double gamma_e);

}  // namespace anne
