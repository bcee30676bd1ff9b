#pragma once

#include "anne/confidence.hpp"
#include "anne/dataset.hpp"

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

namespace anne {

struct AknnConfig {
    std::size_t k_min_lcs1 = 40;
    std::size_t k_min_lcs2 = 80;
    std::size_t k_min_hcs = 5;  // used when AKNN runs over confident samples (ablations)
    double omega_init = 0.99;
    double delta_s = 0.01;
    double omega_floor = -1.0;

    void validate() const;

    /// m-th threshold of the descent, omega_init - m * delta_s, snapped to
    /// 1e-12 so the grid lands on exact decimals (0.0 rather than 1e-16).
    double omega_at(std::size_t m) const;

    /// Largest step index the descent may visit: ceil((init - floor) / delta).
    std::size_t last_step() const;
};

struct Neighborhood {
    std::size_t k = 0;           // |neighbors|
    IndexSet neighbors;          // dataset indices, ascending
    double omega = 0.0;          // final threshold
    std::size_t iterations = 0;  // thresholds evaluated
    bool reached_floor = false;
    std::vector<std::size_t> counts;  // K at each evaluated threshold (only when requested)
};

struct NeighborDiagnostics {
    Index index = 0;
    std::size_t k = 0;
    double omega = 0.0;
    std::size_t iterations = 0;
    Label predicted = -1;
    bool agree = false;
};

struct AknnSelection {
    IndexSet clean;
    IndexSet noisy;
    std::vector<NeighborDiagnostics> diagnostics;  // one per pool member, in pool order

    double mean_k() const;
};

/// <u,v> / (|u||v|), clamped to [-1,1]. Throws ZeroVector.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// Cosine similarities between rows of a feature matrix. Rows are computed on
/// first access and cached; concurrent readers are safe.
class PairwiseSimilarity {
public:
    explicit PairwiseSimilarity(const RowMatrix& features);

    std::size_t size() const noexcept { return static_cast<std::size_t>(unit_.rows()); }
    double operator()(Index i, Index j) const;
    std::span<const double> row(Index i) const;

private:
    RowMatrix unit_;
    mutable std::vector<std::unique_ptr<std::vector<double>>> rows_;
    mutable std::vector<std::once_flag> ready_;
};

/// Threshold descent for one sample given its similarities to every pool
/// member (`sims[p]` pairs with `pool[p]`; `self` is i's position in the pool).
Neighborhood neighborhood_from_row(std::span<const double> sims, std::span<const Index> pool, std::size_t self,
                                   std::size_t k_min, const AknnConfig& config, bool record_counts = false);

/// Adaptive neighborhood of sample i within `pool` (dataset indices).
Neighborhood adaptive_neighborhood(Index i, std::span<const Index> pool, std::size_t k_min, const AknnConfig& config,
                                   const PairwiseSimilarity& sims, bool record_counts = false);

/// Majority class among neighbors; ties go to the larger similarity sum, then
/// to the smaller class id. `labels[k]` pairs with `sims[k]`.
Label knn_vote(std::span<const Label> labels, std::span<const double> sims, int class_count);

/// Streams cosine-similarity rows of `unit_rows` (already unit norm) against
/// all rows, in blocks; `visit(r, row)` sees one full row at a time.
void for_each_similarity_row(const RowMatrix& unit_rows,
                             const std::function<void(std::size_t, std::span<const double>)>& visit);

/// AKNN over an arbitrary pool with a per-member minimum K. Votes use
/// `dataset.noisy_labels`. Pool of one: that sample is noisy with K = 0.
AknnSelection aknn_select_pool(const Dataset& dataset, std::span<const Index> pool, std::span<const std::size_t> k_min,
                               const AknnConfig& config);

/// AKNN over LCS1 U LCS2 with the LCS1/LCS2 minimum K.
AknnSelection aknn_select(const ConfidencePartition& partition, const Dataset& dataset, const AknnConfig& config);

}  // namespace anne
