#pragma once

#include "anne/confidence.hpp"
#include "anne/dataset.hpp"
#include "anne/model.hpp"
#include "anne/pipeline.hpp"

#include <optional>

namespace anne {

/// Clean-detection quality; "clean" (label == truth) is the positive class.
struct SelectionMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t selection_size = 0;
    double clean_rate = 0.0;
    double noisy_precision = 0.0;
    double noisy_recall = 0.0;
};

/// Judged against `result.labels` (post-relabel) when present, else
/// `dataset.noisy_labels`. Empty selections score 0, never 1.
SelectionMetrics selection_metrics(const SelectionResult& result, const Dataset& dataset);

/// Metrics restricted to `members`; nullopt for an empty subset.
std::optional<SelectionMetrics> subset_metrics(const SelectionResult& result, const Dataset& dataset,
                                               std::span<const Index> members);

struct SubsetMetrics {
    std::optional<SelectionMetrics> hcs;
    std::optional<SelectionMetrics> lcs;
};

SubsetMetrics per_subset_metrics(const SelectionResult& result, const ConfidencePartition& partition,
                                 const Dataset& dataset);

/// Share of argmax-correct predictions against `testset.noisy_labels`.
double evaluate_accuracy(const SoftmaxModel& model, const Dataset& testset);

}  // namespace anne
