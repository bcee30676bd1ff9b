#pragma once

#include "anne/dataset.hpp"

#include <span>
#include <vector>

namespace anne {

/// Threshold search grid: tau in {0, 1/1000, ..., 1}.
inline constexpr int kOtsuGridSteps = 1000;

struct OtsuResult {
    double tau = 0.0;
    double objective = 0.0;  // +inf when both sides have zero spread
};

/// Between-group over within-group spread of `scores` split at `tau`
/// (high side: score >= tau). Returns nullopt when the split is undefined:
/// an empty side, or zero spread with no separation either.
std::optional<double> otsu_objective(std::span<const double> scores, double tau);

/// Grid argmax of the two-group separation objective; ties go to the
/// smaller tau. Throws DegenerateScores when no grid point yields a split.
OtsuResult otsu_threshold(std::span<const double> scores);

/// Confidence split of a training set.
struct ConfidencePartition {
    double tau = 0.0;
    IndexSet hcs;   // max-prob >= tau
    IndexSet lcs1;  // mu_lcs <= max-prob < tau
    IndexSet lcs2;  // max-prob < mu_lcs
    double mu_hcs = 0.0, sigma_hcs = 0.0;
    double mu_lcs = 0.0, sigma_lcs = 0.0;
    double mu_all = 0.0;
    double objective_value = 0.0;
    std::vector<double> max_prob;  // per sample

    std::size_t size() const noexcept { return hcs.size() + lcs1.size() + lcs2.size(); }
    IndexSet lcs() const;  // lcs1 U lcs2, sorted
};

std::vector<double> max_probabilities(const Predictions& preds);

ConfidencePartition split_confidence(const Predictions& preds);

}  // namespace anne
