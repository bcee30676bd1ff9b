#include "anne/trainer.hpp"

#include "anne/error.hpp"
#include "anne/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace anne {

void TrainConfig::validate() const {
    require(epochs >= 1, ErrorKind::ConfigError, "train.epochs must be >= 1");
    require(batch_size >= 1, ErrorKind::ConfigError, "train.batch_size must be >= 1");
    require(learning_rate > 0.0, ErrorKind::ConfigError, "train.learning_rate must be > 0");
    require(momentum >= 0.0 && momentum < 1.0, ErrorKind::ConfigError, "train.momentum must be in [0,1)");
    require(weight_decay >= 0.0, ErrorKind::ConfigError, "train.weight_decay must be >= 0");
    require(mixup_alpha > 0.0, ErrorKind::ConfigError, "train.mixup_alpha must be > 0");
    require(aug_sigma >= 0.0, ErrorKind::ConfigError, "train.aug_sigma must be >= 0");
    require(consistency_weight >= 0.0, ErrorKind::ConfigError, "train.consistency_weight must be >= 0");
    require(projection_dim >= 1, ErrorKind::ConfigError, "train.projection_dim must be >= 1");
    require(selection_interval >= 1, ErrorKind::ConfigError, "train.selection_interval must be >= 1");
}

MixedBatch mixup_with(const Batch& batch, double lambda, std::span<const std::size_t> partner) {
    const auto n = static_cast<std::size_t>(batch.features.rows());
    if (n == 0) fail(ErrorKind::EmptyBatch, "mixup of an empty batch");
    require(partner.size() == n, ErrorKind::InvalidArgument, "partner permutation length");
    require(lambda >= 0.0 && lambda <= 1.0, ErrorKind::InvalidArgument, "lambda must be in [0,1]");
    MixedBatch out;
    out.lambda = lambda;
    out.partner.assign(partner.begin(), partner.end());
    out.batch.features.resize(batch.features.rows(), batch.features.cols());
    out.batch.targets.resize(batch.targets.rows(), batch.targets.cols());
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const auto q = static_cast<Eigen::Index>(partner[i]);
        out.batch.features.row(r) = lambda * batch.features.row(r) + (1.0 - lambda) * batch.features.row(q);
        if (batch.targets.cols() > 0)
            out.batch.targets.row(r) = lambda * batch.targets.row(r) + (1.0 - lambda) * batch.targets.row(q);
    }
    return out;
}

MixedBatch mixup_batch(const Batch& batch, double alpha, std::uint64_t seed) {
    if (batch.features.rows() == 0) fail(ErrorKind::EmptyBatch, "mixup of an empty batch");
    require(alpha > 0.0, ErrorKind::InvalidArgument, "mixup alpha must be > 0");
    std::mt19937_64 g(seed);
    const double lambda = beta_sample(g, alpha, alpha);
    std::vector<std::size_t> partner(static_cast<std::size_t>(batch.features.rows()));
    std::iota(partner.begin(), partner.end(), std::size_t{0});
    std::shuffle(partner.begin(), partner.end(), g);
    return mixup_with(batch, lambda, partner);
}

NoisyBatch make_noisy_batch(RowMatrix features, std::uint64_t seed) {
    NoisyBatch b;
    b.noise1.resize(features.rows(), features.cols());
    b.noise2.resize(features.rows(), features.cols());
    SplitMix64 g(seed);
    for (Eigen::Index i = 0; i < features.size(); ++i) b.noise1.data()[i] = standard_normal(g);
    for (Eigen::Index i = 0; i < features.size(); ++i) b.noise2.data()[i] = standard_normal(g);
    b.features = std::move(features);
    return b;
}

namespace {

constexpr double kNormGuard = 1e-12;

RowMatrix log_softmax_rows(const RowMatrix& logits) {
    RowMatrix out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double hi = logits.row(i).maxCoeff();
        const double lse = hi + std::log((logits.row(i).array() - hi).exp().sum());
        out.row(i) = logits.row(i).array() - lse;
    }
    return out;
}

RowMatrix logits_of(const SoftmaxModel& model, const RowMatrix& x) {
    RowMatrix z = x * model.weights.transpose();
    z.rowwise() += model.bias.transpose();
    return z;
}

void check_batches(const SoftmaxModel& model, const Batch& clean, const NoisyBatch& noisy) {
    const auto d = static_cast<Eigen::Index>(model.dim());
    require(clean.features.rows() == 0 || clean.features.cols() == d, ErrorKind::DimensionMismatch, "clean batch dim");
    require(clean.targets.rows() == clean.features.rows() &&
                (clean.features.rows() == 0 || clean.targets.cols() == model.class_count()),
            ErrorKind::DimensionMismatch, "clean batch targets");
    require(noisy.rows() == 0 || (noisy.features.cols() == d && noisy.noise1.rows() == noisy.rows() &&
                                  noisy.noise2.rows() == noisy.rows() && noisy.noise1.cols() == d &&
                                  noisy.noise2.cols() == d),
            ErrorKind::DimensionMismatch, "noisy batch shape");
}

}  // namespace

LossParts loss_value(const SoftmaxModel& model, const Batch& clean, const NoisyBatch& noisy, double consistency_weight,
                     const RowMatrix* target_projector) {
    check_batches(model, clean, noisy);
    LossParts out;
    if (clean.features.rows() > 0) {
        const RowMatrix logp = log_softmax_rows(logits_of(model, clean.features));
        out.cross_entropy = -(clean.targets.array() * logp.array()).sum() / double(clean.features.rows());
    }
    if (noisy.rows() > 0) {
        const RowMatrix& target = target_projector ? *target_projector : model.projector;
        const RowMatrix a1 = noisy.features + model.aug_sigma * noisy.noise1;
        const RowMatrix a2 = noisy.features + model.aug_sigma * noisy.noise2;
        const RowMatrix h1 = a1 * model.projector.transpose() * model.predictor.transpose();
        const RowMatrix h2 = a2 * target.transpose();
        double sum = 0.0;
        for (Eigen::Index i = 0; i < h1.rows(); ++i) {
            const double den = h1.row(i).norm() * h2.row(i).norm();
            if (den > kNormGuard) sum += h1.row(i).dot(h2.row(i)) / den;
        }
        out.consistency = -sum / double(noisy.rows());
    }
    out.total = out.cross_entropy + consistency_weight * out.consistency;
    if (!std::isfinite(out.total)) fail(ErrorKind::NonFiniteLoss, "training loss is not finite");
    return out;
}

LossAndGrad loss_and_grad(const SoftmaxModel& model, const Batch& clean, const NoisyBatch& noisy,
                          double consistency_weight) {
    check_batches(model, clean, noisy);
    LossAndGrad out;
    auto& g = out.grad;
    g.weights = RowMatrix::Zero(model.weights.rows(), model.weights.cols());
    g.bias = Vector::Zero(model.bias.size());
    g.projector = RowMatrix::Zero(model.projector.rows(), model.projector.cols());
    g.predictor = RowMatrix::Zero(model.predictor.rows(), model.predictor.cols());

    if (clean.features.rows() > 0) {
        const double n = double(clean.features.rows());
        const RowMatrix logp = log_softmax_rows(logits_of(model, clean.features));
        out.loss.cross_entropy = -(clean.targets.array() * logp.array()).sum() / n;
        // d/dz of -t.log softmax(z) is softmax(z) * sum(t) - t
        RowMatrix dz = logp.array().exp().matrix();
        for (Eigen::Index i = 0; i < dz.rows(); ++i) dz.row(i) *= clean.targets.row(i).sum();
        dz = (dz - clean.targets) / n;
        g.weights.noalias() = dz.transpose() * clean.features;
        g.bias = dz.colwise().sum().transpose();
    }

    if (noisy.rows() > 0) {
        const double n = double(noisy.rows());
        const RowMatrix a1 = noisy.features + model.aug_sigma * noisy.noise1;
        const RowMatrix a2 = noisy.features + model.aug_sigma * noisy.noise2;
        const RowMatrix z = a1 * model.projector.transpose();      // online projection
        const RowMatrix h1 = z * model.predictor.transpose();
        const RowMatrix h2 = a2 * model.projector.transpose();     // target, no gradient
        RowMatrix dh1 = RowMatrix::Zero(h1.rows(), h1.cols());
        double sum = 0.0;
        for (Eigen::Index i = 0; i < h1.rows(); ++i) {
            const double n1 = h1.row(i).norm(), n2 = h2.row(i).norm();
            if (n1 * n2 <= kNormGuard) continue;
            const double cos = h1.row(i).dot(h2.row(i)) / (n1 * n2);
            sum += cos;
            // loss term is -w/n * cos
            dh1.row(i) = -(consistency_weight / n) * (h2.row(i) / (n1 * n2) - cos * h1.row(i) / (n1 * n1));
        }
        out.loss.consistency = -sum / n;
        g.predictor.noalias() = dh1.transpose() * z;
        const RowMatrix dz = dh1 * model.predictor;
        g.projector.noalias() = dz.transpose() * a1;
    }
    out.loss.total = out.loss.cross_entropy + consistency_weight * out.loss.consistency;
    if (!std::isfinite(out.loss.total)) fail(ErrorKind::NonFiniteLoss, "training loss is not finite");
    return out;
}

std::vector<Index> oversample(std::span<const Index> clean, std::span<const Index> noisy, std::span<const Label> labels,
                              int class_count, std::uint64_t seed) {
    if (clean.empty()) fail(ErrorKind::EmptyCleanSet, "cannot oversample an empty clean set");
    std::mt19937_64 g(seed);
    std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(class_count));
    for (Index i : clean) {
        require(i < labels.size() && labels[i] >= 0 && labels[i] < class_count, ErrorKind::InvalidArgument,
                "oversample: label out of range");
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    std::size_t majority = 0;
    for (const auto& members : by_class) majority = std::max(majority, members.size());

    std::vector<Index> balanced;
    balanced.reserve(majority * by_class.size());
    for (const auto& members : by_class) {
        if (members.empty()) continue;
        balanced.insert(balanced.end(), members.begin(), members.end());
        for (std::size_t k = members.size(); k < majority; ++k) balanced.push_back(members[uniform_below(g, members.size())]);
    }

    const std::size_t target = clean.size() + noisy.size();
    std::vector<Index> out;
    if (target >= balanced.size()) {
        out = balanced;
        for (std::size_t k = balanced.size(); k < target; ++k) out.push_back(balanced[uniform_below(g, balanced.size())]);
    } else {
        std::shuffle(balanced.begin(), balanced.end(), g);
        out.assign(balanced.begin(), balanced.begin() + static_cast<std::ptrdiff_t>(target));
    }
    std::shuffle(out.begin(), out.end(), g);
    return out;
}

namespace {

struct Optimizer {
    Gradients velocity;
    const TrainConfig& config;

    Optimizer(const SoftmaxModel& model, const TrainConfig& cfg) : config(cfg) {
        velocity.weights = RowMatrix::Zero(model.weights.rows(), model.weights.cols());
        velocity.bias = Vector::Zero(model.bias.size());
        velocity.projector = RowMatrix::Zero(model.projector.rows(), model.projector.cols());
        velocity.predictor = RowMatrix::Zero(model.predictor.rows(), model.predictor.cols());
    }

    template <class Param, class Grad, class Vel>
    void step(Param& theta, const Grad& grad, Vel& v) const {
        v = config.momentum * v + grad + config.weight_decay * theta;
        theta -= config.learning_rate * v;
    }

    void apply(SoftmaxModel& model, const Gradients& g) {
        step(model.weights, g.weights, velocity.weights);
        step(model.bias, g.bias, velocity.bias);
        step(model.projector, g.projector, velocity.projector);
        step(model.predictor, g.predictor, velocity.predictor);
    }
};

Batch labeled_batch(const RowMatrix& x, std::span<const Index> rows, std::span<const Label> labels, int class_count) {
    Batch b;
    b.features.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
    b.targets = RowMatrix::Zero(static_cast<Eigen::Index>(rows.size()), class_count);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        b.features.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
        b.targets(static_cast<Eigen::Index>(r), labels[rows[r]]) = 1.0;
    }
    return b;
}

struct EpochLoss {
    double ce = 0.0, cons = 0.0;
    std::size_t batches = 0;
    void add(const LossParts& l) {
        ce += l.cross_entropy;
        cons += l.consistency;
        ++batches;
    }
};

EpochLoss plain_epoch(SoftmaxModel& model, Optimizer& opt, const RowMatrix& x, std::span<const Label> labels,
                      int class_count, const TrainConfig& cfg, std::size_t epoch) {
    std::vector<Index> order(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 g(derive_seed(cfg.seed, {tag::epoch_shuffle, epoch}));
    std::shuffle(order.begin(), order.end(), g);
    EpochLoss loss;
    const NoisyBatch none;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const auto end = std::min(order.size(), start + cfg.batch_size);
        const Batch b = labeled_batch(x, std::span<const Index>(order).subspan(start, end - start), labels, class_count);
        const auto lg = loss_and_grad(model, b, none, cfg.consistency_weight);
        opt.apply(model, lg.grad);
        loss.add(lg.loss);
    }
    return loss;
}

EpochLoss selection_epoch(SoftmaxModel& model, Optimizer& opt, const RowMatrix& x, const SelectionResult& sel,
                          int class_count, const TrainConfig& cfg, std::size_t epoch) {
    const auto resampled =
        oversample(sel.clean, sel.noisy, sel.labels, class_count, derive_seed(cfg.seed, {tag::oversample, epoch}));
    std::vector<Index> noisy(sel.noisy.begin(), sel.noisy.end());
    std::mt19937_64 g(derive_seed(cfg.seed, {tag::epoch_shuffle, epoch}));
    std::shuffle(noisy.begin(), noisy.end(), g);

    EpochLoss loss;
    const std::size_t B = cfg.batch_size;
    std::size_t cursor = 0;
    for (std::size_t start = 0, t = 0; start < resampled.size(); start += B, ++t) {
        const auto end = std::min(resampled.size(), start + B);
        const Batch b =
            labeled_batch(x, std::span<const Index>(resampled).subspan(start, end - start), sel.labels, class_count);
        const MixedBatch mixed = mixup_batch(b, cfg.mixup_alpha, derive_seed(cfg.seed, {tag::mixup, epoch, 2 * t}));

        NoisyBatch nb;
        if (!noisy.empty()) {
            const std::size_t take = std::min(B, noisy.size());
            Batch raw;
            raw.features.resize(static_cast<Eigen::Index>(take), x.cols());
            raw.targets.resize(static_cast<Eigen::Index>(take), 0);
            for (std::size_t r = 0; r < take; ++r, cursor = (cursor + 1) % noisy.size())
                raw.features.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(noisy[cursor]));
            auto mixed_noisy = mixup_batch(raw, cfg.mixup_alpha, derive_seed(cfg.seed, {tag::mixup, epoch, 2 * t + 1}));
            nb = make_noisy_batch(std::move(mixed_noisy.batch.features), derive_seed(cfg.seed, {tag::augment, epoch, t}));
        }
        const auto lg = loss_and_grad(model, mixed.batch, nb, cfg.consistency_weight);
        opt.apply(model, lg.grad);
        loss.add(lg.loss);
    }
    return loss;
}

}  // namespace

TrainResult train_loop(const Dataset& dataset, const Dataset& testset, const PipelineConfig& pipeline,
                       const TrainConfig& config) {
    config.validate();
    pipeline.validate();
    require(dataset.dim == testset.dim, ErrorKind::DimensionMismatch, "train and test dims differ");
    require(dataset.class_count == testset.class_count, ErrorKind::DimensionMismatch,
            "train and test class counts differ");
    if (dataset.size() == 0) fail(ErrorKind::EmptySubset, "training set is empty");

    const Dataset train = normalize_features(dataset);
    const Dataset test = normalize_features(testset);
    const RowMatrix x = train.feature_matrix();
    const int C = train.class_count;

    TrainResult result{SoftmaxModel::initialize(C, train.dim, config.projection_dim, config.aug_sigma, config.seed), {}, {}};
    Optimizer opt(result.model, config);
    const bool selecting = pipeline.selector.kind != SelectorKind::passthrough;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.warmup = epoch < config.warmup_epochs || !selecting;
        EpochLoss loss;
        if (rec.warmup) {
            loss = plain_epoch(result.model, opt, x, train.noisy_labels, C, config, epoch);
        } else {
            if (!result.last_selection || (epoch - config.warmup_epochs) % config.selection_interval == 0) {
                const auto preds = predict_probs(result.model, x, static_cast<int>(epoch));
                result.last_selection = run_selector(train, preds, pipeline);
            }
            const auto& sel = *result.last_selection;
            rec.selection_size = sel.clean.size();
            rec.noisy_size = sel.noisy.size();
            rec.relabel_count = sel.relabel_count;
            rec.degenerate_split = sel.degenerate_split;
            rec.mean_k = sel.mean_k();
            if (sel.partition) {
                rec.tau = sel.partition->tau;
                rec.hcs_size = sel.partition->hcs.size();
            }
            if (train.has_true_labels()) rec.metrics = selection_metrics(sel, train);
            loss = sel.clean.empty() ? plain_epoch(result.model, opt, x, train.noisy_labels, C, config, epoch)
                                     : selection_epoch(result.model, opt, x, sel, C, config, epoch);
        }
        rec.cross_entropy = loss.batches ? loss.ce / double(loss.batches) : 0.0;
        rec.consistency = loss.batches ? loss.cons / double(loss.batches) : 0.0;
        rec.test_accuracy = evaluate_accuracy(result.model, test);
        result.history.push_back(rec);
    }
    return result;
}

}  // namespace anne
