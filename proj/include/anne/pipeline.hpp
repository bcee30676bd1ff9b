#pragma once

#include "anne/aknn.hpp"
#include "anne/confidence.hpp"
#include "anne/dataset.hpp"
#include "anne/fine.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace anne {

enum class SelectorKind {
    anne,               // FINE on HCS, AKNN on LCS
    fine_only,          // FINE over the whole training set
    aknn_only,          // AKNN over the whole training set
    small_loss_gmm,     // two-component GMM on per-sample loss
    fixed_knn,          // plain KNN with a fixed K
    fine_hcs_fine_lcs,  // placement ablations
    aknn_hcs_aknn_lcs,
    aknn_hcs_fine_lcs,
    passthrough,        // no selection: everything clean, no relabeling
};

struct Selector {
    SelectorKind kind = SelectorKind::anne;
    std::size_t k = 200;  // fixed_knn only

    bool operator==(const Selector&) const = default;
};

/// "anne", "fine_only", ..., "fixed_knn" or "fixed_knn:<K>". The placement
/// name "fine_hcs_aknn_lcs" is accepted as an alias of "anne".
Selector parse_selector(const std::string& name);
std::string to_string(const Selector& selector);

/// The four HCS/LCS placements compared in the placement ablation.
std::array<Selector, 4> placement_variants();

struct PipelineConfig {
    double gamma_r = 0.9;
    double gamma_e = 0.1;
    AknnConfig aknn;
    Selector selector;

    void validate() const;
};

enum class Provenance : std::uint8_t { passthrough, fine, aknn, small_loss, fixed_knn };
std::string to_string(Provenance p);

struct SelectionResult {
    IndexSet clean;
    IndexSet noisy;
    std::vector<Provenance> provenance;  // per sample
    std::vector<Label> labels;           // labels after relabeling, per sample
    std::size_t relabel_count = 0;
    bool degenerate_split = false;       // the confidence split failed; everything passed through
    std::optional<ConfidencePartition> partition;
    std::vector<NeighborDiagnostics> neighbors;  // AKNN diagnostics, any order
    std::vector<double> fine_scores;             // per sample; NaN where FINE did not score

    std::size_t size() const noexcept { return provenance.size(); }
    std::optional<double> mean_k() const;
};

struct RelabelResult {
    Dataset dataset;
    std::size_t relabel_count = 0;  // labels that changed
};

/// Replaces a label by the model's argmax when the max probability exceeds gamma_r.
RelabelResult relabel(const Dataset& dataset, const Predictions& preds, double gamma_r);

/// Relabel, confidence split, FINE on HCS, AKNN on LCS1 U LCS2, union.
SelectionResult anne_select(const Dataset& dataset, const Predictions& preds, const PipelineConfig& config);

/// Runs `config.selector`. `anne_select` is the anne case.
SelectionResult run_selector(const Dataset& dataset, const Predictions& preds, const PipelineConfig& config);

/// Same as run_selector; named for the placement ablations.
SelectionResult ablation_select(const Dataset& dataset, const Predictions& preds, const PipelineConfig& config);

struct GaussianMixture1d {
    std::array<double, 2> weight{};
    std::array<double, 2> mean{};
    std::array<double, 2> variance{};
    double log_likelihood = 0.0;  // mean per sample
    std::size_t iterations = 0;
};

inline constexpr std::size_t kGmmMaxIterations = 500;
inline constexpr double kGmmTolerance = 1e-8;
inline constexpr double kGmmVarianceFloor = 1e-6;

/// EM for a two-component 1-D mixture from the given initial means.
GaussianMixture1d fit_gmm_1d(std::span<const double> values, std::array<double, 2> initial_means);

struct SmallLossSplit {
    IndexSet clean;
    IndexSet noisy;
    GaussianMixture1d mixture;  // fitted on min-max normalized losses
};

SmallLossSplit small_loss_gmm_select(std::span<const double> losses);

struct KnnSplit {
    IndexSet clean;
    IndexSet noisy;
};

/// Clean iff the label matches the vote of the K most similar samples
/// (similarity ties go to the smaller index).
KnnSplit fixed_knn_select(const Dataset& dataset, std::size_t k);

/// Cross-entropy of each sample's label under `preds`.
std::vector<double> per_sample_loss(const Predictions& preds, std::span<const Label> labels);

}  // namespace anne
