#include "anne/model.hpp"

#include "anne/error.hpp"
#include "anne/rng.hpp"

#include <cmath>

namespace anne {

SoftmaxModel SoftmaxModel::initialize(int class_count, std::size_t dim, std::size_t projection_dim, double aug_sigma,
                                      std::uint64_t seed) {
    require(class_count >= 2 && dim >= 1 && projection_dim >= 1, ErrorKind::InvalidArgument, "model shape");
    auto g = stream(seed, {tag::model_init});
    const auto C = static_cast<Eigen::Index>(class_count);
    const auto d = static_cast<Eigen::Index>(dim);
    const auto p = static_cast<Eigen::Index>(projection_dim);
    SoftmaxModel m;
    m.aug_sigma = aug_sigma;
    m.weights.resize(C, d);
    for (Eigen::Index r = 0; r < C; ++r)
        for (Eigen::Index c = 0; c < d; ++c) m.weights(r, c) = 0.01 * standard_normal(g);
    m.bias = Vector::Zero(C);
    m.projector.resize(p, d);
    const double scale = 1.0 / std::sqrt(double(dim));
    for (Eigen::Index r = 0; r < p; ++r)
        for (Eigen::Index c = 0; c < d; ++c) m.projector(r, c) = scale * standard_normal(g);
    m.predictor = RowMatrix::Identity(p, p);
    for (Eigen::Index r = 0; r < p; ++r)
        for (Eigen::Index c = 0; c < p; ++c) m.predictor(r, c) += 0.01 * standard_normal(g);
    return m;
}

void SoftmaxModel::validate() const {
    require(weights.rows() >= 2 && weights.cols() >= 1, ErrorKind::InvalidArgument, "model: bad classifier shape");
    require(bias.size() == weights.rows(), ErrorKind::InvalidArgument, "model: bias length");
    require(projector.rows() >= 1 && projector.cols() == weights.cols(), ErrorKind::InvalidArgument,
            "model: projector shape");
    require(predictor.rows() == projector.rows() && predictor.cols() == projector.rows(), ErrorKind::InvalidArgument,
            "model: predictor shape");
    require(weights.allFinite() && bias.allFinite() && projector.allFinite() && predictor.allFinite() &&
                std::isfinite(aug_sigma) && aug_sigma >= 0.0,
            ErrorKind::InvalidArgument, "model: non-finite parameters");
}

RowMatrix softmax_rows(const RowMatrix& logits) {
    RowMatrix p(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double hi = logits.row(i).maxCoeff();
        p.row(i) = (logits.row(i).array() - hi).exp();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

Predictions predict_probs(const SoftmaxModel& model, const RowMatrix& features, int epoch) {
    require(static_cast<std::size_t>(features.cols()) == model.dim(), ErrorKind::DimensionMismatch,
            "features have " + std::to_string(features.cols()) + " columns, model expects " + std::to_string(model.dim()));
    RowMatrix logits = features * model.weights.transpose();
    logits.rowwise() += model.bias.transpose();
    return Predictions{softmax_rows(logits), epoch};
}

Predictions predict_probs(const SoftmaxModel& model, const Dataset& dataset, int epoch) {
    return predict_probs(model, dataset.feature_matrix(), epoch);
}

}  // namespace anne
