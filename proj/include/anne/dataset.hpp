#pragma once

#include "anne/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace anne {

/// Labeled embedding dataset. Features are stored as 32-bit floats (the file
/// representation); all arithmetic on them happens in double precision.
///
/// `true_labels`, when present, may hold the value `class_count` to mark an
/// out-of-distribution sample (open-set noise). Such samples are never clean.
struct Dataset {
    std::size_t dim = 0;
    int class_count = 0;
    std::vector<float> features;  // size() * dim, row-major
    std::vector<Label> noisy_labels;
    std::optional<std::vector<Label>> true_labels;
    std::vector<std::uint64_t> sample_ids;

    std::size_t size() const noexcept { return noisy_labels.size(); }
    bool has_true_labels() const noexcept { return true_labels.has_value(); }
    Label ood_label() const noexcept { return static_cast<Label>(class_count); }

    std::span<const float> row(Index i) const { return {features.data() + i * dim, dim}; }
    std::span<float> row(Index i) { return {features.data() + i * dim, dim}; }

    /// Rows in double precision (N x d).
    RowMatrix feature_matrix() const;
    /// Selected rows in double precision, in the order given.
    RowMatrix feature_matrix(std::span<const Index> rows) const;

    /// Throws anne::Error when a type invariant does not hold.
    void validate() const;

    bool operator==(const Dataset&) const = default;
};

/// Model output over a dataset: one probability row per sample.
struct Predictions {
    RowMatrix probs;  // N x C
    int epoch = 0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(probs.rows()); }
    int class_count() const noexcept { return static_cast<int>(probs.cols()); }
    void validate() const;
};

Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

Predictions load_predictions(const std::filesystem::path& path);
void save_predictions(const Predictions& preds, const std::filesystem::path& path);

/// Scales every feature row to unit L2 norm.
Dataset normalize_features(const Dataset& dataset);

/// Copy of the given rows, keeping ids and labels.
Dataset subset(const Dataset& dataset, std::span<const Index> rows);

}  // namespace anne
