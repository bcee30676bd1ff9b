#pragma once

#include "anne/dataset.hpp"

#include <cstdint>

namespace anne {

/// Linear softmax classifier over fixed features plus the projector and
/// predictor heads of the consistency term. The encoder is the identity.
struct SoftmaxModel {
    RowMatrix weights;    // C x d
    Vector bias;          // C
    RowMatrix projector;  // p x d
    RowMatrix predictor;  // p x p
    double aug_sigma = 0.1;

    int class_count() const noexcept { return static_cast<int>(weights.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(weights.cols()); }
    std::size_t projection_dim() const noexcept { return static_cast<std::size_t>(projector.rows()); }

    /// Small random classifier, random projector, predictor near identity.
    static SoftmaxModel initialize(int class_count, std::size_t dim, std::size_t projection_dim, double aug_sigma,
                                   std::uint64_t seed);

    void validate() const;
    bool operator==(const SoftmaxModel&) const = default;
};

/// Row-wise softmax(W x + b).
RowMatrix softmax_rows(const RowMatrix& logits);
Predictions predict_probs(const SoftmaxModel& model, const RowMatrix& features, int epoch = 0);
Predictions predict_probs(const SoftmaxModel& model, const Dataset& dataset, int epoch = 0);

}  // namespace anne
