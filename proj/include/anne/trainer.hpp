#pragma once

#include "anne/dataset.hpp"
#include "anne/metrics.hpp"
#include "anne/model.hpp"
#include "anne/pipeline.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace anne {

struct TrainConfig {
    std::size_t epochs = 40;
    std::size_t batch_size = 128;
    double learning_rate = 0.02;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double mixup_alpha = 1.0;
    double aug_sigma = 0.1;
    std::size_t warmup_epochs = 10;
    double consistency_weight = 1.0;
    std::size_t projection_dim = 16;
    std::size_t selection_interval = 1;  // epochs between selections after warm-up
    std::uint64_t seed = 0;

    void validate() const;
};

/// Features with per-row target distributions (one-hot or mixed).
struct Batch {
    RowMatrix features;
    RowMatrix targets;
};

struct MixedBatch {
    Batch batch;
    double lambda = 1.0;
    std::vector<std::size_t> partner;
};

/// Mixes each row with a seeded shuffle of the batch using one lambda ~ Beta(alpha, alpha).
MixedBatch mixup_batch(const Batch& batch, double alpha, std::uint64_t seed);
/// Same with lambda and partner permutation given.
MixedBatch mixup_with(const Batch& batch, double lambda, std::span<const std::size_t> partner);

/// Unlabeled samples for the consistency term with the augmentation noise
/// drawn up front: a_k(x) = x + aug_sigma * noise_k.
struct NoisyBatch {
    RowMatrix features;
    RowMatrix noise1;
    RowMatrix noise2;

    Eigen::Index rows() const noexcept { return features.rows(); }
};

NoisyBatch make_noisy_batch(RowMatrix features, std::uint64_t seed);

struct Gradients {
    RowMatrix weights;
    Vector bias;
    RowMatrix projector;
    RowMatrix predictor;
};

struct LossParts {
    double cross_entropy = 0.0;  // mean over the clean batch; 0 when it is empty
    double consistency = 0.0;    // mean negative cosine over the noisy batch; 0 when empty
    double total = 0.0;          // cross_entropy + weight * consistency
};

struct LossAndGrad {
    LossParts loss;
    Gradients grad;
};

/// Value of the training objective. The target branch h2 uses
/// `target_projector` when given (the model's projector otherwise); it
/// receives no gradient.
LossParts loss_value(const SoftmaxModel& model, const Batch& clean, const NoisyBatch& noisy, double consistency_weight,
                     const RowMatrix* target_projector = nullptr);

/// Loss with analytic gradients; h2 is a stopped-gradient target.
LossAndGrad loss_and_grad(const SoftmaxModel& model, const Batch& clean, const NoisyBatch& noisy,
                          double consistency_weight);

/// Class-balanced resampling of `clean` (by `labels`), then sized to
/// |clean| + |noisy|. Returned indices are in random order.
std::vector<Index> oversample(std::span<const Index> clean, std::span<const Index> noisy, std::span<const Label> labels,
                              int class_count, std::uint64_t seed);

struct EpochRecord {
    std::size_t epoch = 0;
    bool warmup = true;
    double test_accuracy = 0.0;
    double cross_entropy = 0.0;
    double consistency = 0.0;
    std::optional<std::size_t> selection_size;
    std::optional<std::size_t> noisy_size;
    std::optional<SelectionMetrics> metrics;
    std::optional<double> mean_k;
    std::optional<double> tau;
    std::optional<std::size_t> hcs_size;
    std::size_t relabel_count = 0;
    bool degenerate_split = false;
};

struct TrainResult {
    SoftmaxModel model;
    std::vector<EpochRecord> history;
    std::optional<SelectionResult> last_selection;
};

/// Warm-up with plain cross-entropy, then per epoch: predict, select,
/// oversample, MixUp, SGD with momentum. Features are normalized first.
TrainResult train_loop(const Dataset& dataset, const Dataset& testset, const PipelineConfig& pipeline,
                       const TrainConfig& config);

}  // namespace anne
