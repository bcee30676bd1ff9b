#include "anne/noisegen.hpp"
#include "anne/trainer.hpp"

#include "helpers.hpp"
#include "oracles.hpp"

#include <map>
#include <numeric>
#include <random>

using namespace anne;

namespace {

Batch one_hot_batch(const RowMatrix& x, const std::vector<Label>& y, int classes) {
    Batch b{x, RowMatrix::Zero(x.rows(), classes)};
    for (std::size_t i = 0; i < y.size(); ++i) b.targets(static_cast<Eigen::Index>(i), y[i]) = 1.0;
    return b;
}

RowMatrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    RowMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

ClusterSpec small_spec(int classes, std::uint64_t seed, std::size_t spc = 100) {
    ClusterSpec s;
    s.class_count = classes;
    s.dim = 8;
    s.samples_per_class = spc;
    s.seed = seed;
    return s;
}

TrainConfig quick(std::size_t epochs, std::uint64_t seed) {
    TrainConfig t;
    t.epochs = epochs;
    t.warmup_epochs = 3;
    t.batch_size = 32;
    t.projection_dim = 4;
    t.seed = seed;
    return t;
}

}  // namespace

TEST_SUITE("trainer") {
    TEST_CASE("mixup with lambda one is the identity") {
        std::mt19937_64 rng(1);
        const Batch b = one_hot_batch(gaussian(5, 3, rng), {0, 1, 2, 1, 0}, 3);
        const std::vector<std::size_t> partner{4, 3, 2, 1, 0};
        const auto m = mixup_with(b, 1.0, partner);
        CHECK(m.batch.features == b.features);
        CHECK(m.batch.targets == b.targets);
    }

    TEST_CASE("mixup at one half averages pairs") {
        RowMatrix x(2, 2);
        x << 1, 0, 0, 1;
        const Batch b = one_hot_batch(x, {0, 1}, 2);
        const std::vector<std::size_t> partner{1, 0};
        const auto m = mixup_with(b, 0.5, partner);
        for (Eigen::Index i = 0; i < 2; ++i)
            for (Eigen::Index k = 0; k < 2; ++k) {
                CHECK(m.batch.features(i, k) == doctest::Approx(0.5));
                CHECK(m.batch.targets(i, k) == doctest::Approx(0.5));
            }
    }

    TEST_CASE("mixed targets stay on the simplex") {
        std::mt19937_64 rng(2);
        std::vector<Label> y(64);
        std::uniform_int_distribution<int> c(0, 4);
        for (auto& v : y) v = c(rng);
        const Batch b = one_hot_batch(gaussian(64, 6, rng), y, 5);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto m = mixup_batch(b, 1.0, seed);
            CHECK(m.lambda >= 0.0);
            CHECK(m.lambda <= 1.0);
            for (Eigen::Index i = 0; i < 64; ++i) {
                CHECK(m.batch.targets.row(i).sum() == doctest::Approx(1.0));
                CHECK(m.batch.targets.row(i).minCoeff() >= 0.0);
            }
            auto sorted = m.partner;
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
        }
        CHECK_ANNE_ERROR(mixup_batch(Batch{}, 1.0, 0), ErrorKind::EmptyBatch);
    }

    TEST_CASE("oversampling a balanced clean set keeps the classes equal") {
        const std::vector<Label> labels{0, 1, 2, 0, 1, 2};
        const std::vector<Index> clean{0, 1, 2, 3, 4, 5};
        const auto out = oversample(clean, {}, labels, 3, 4);
        CHECK(out.size() == 6);
        auto sorted = out;
        std::sort(sorted.begin(), sorted.end());
        CHECK(sorted == clean);
    }

    TEST_CASE("oversampling an imbalanced clean set balances it and matches the requested size") {
        std::vector<Label> labels(200, 0);
        std::vector<Index> clean;
        for (Index i = 0; i < 100; ++i) {
            clean.push_back(i);
            labels[i] = i < 90 ? 0 : 1;
        }
        std::vector<Index> noisy;
        for (Index i = 100; i < 200; ++i) noisy.push_back(i);
        const auto out = oversample(clean, noisy, labels, 2, 11);
        CHECK(out.size() == 200);
        std::size_t minority = 0;
        for (Index i : out) {
            CHECK(i < 100);
            minority += labels[i] == 1;
        }
        const double share = double(minority) / 200.0;
        CHECK(std::abs(share - 0.5) <= oracle::binomial_3sigma(0.5, 200));
        CHECK_ANNE_ERROR(oversample({}, noisy, labels, 2, 1), ErrorKind::EmptyCleanSet);
    }

    TEST_CASE("cross-entropy of a zero model is ln C") {
        auto model = SoftmaxModel::initialize(4, 3, 2, 0.1, 1);
        model.weights.setZero();
        model.bias.setZero();
        std::mt19937_64 rng(3);
        const auto loss = loss_value(model, one_hot_batch(gaussian(6, 3, rng), {0, 1, 2, 3, 0, 1}, 4), NoisyBatch{}, 1.0);
        CHECK(loss.cross_entropy == doctest::Approx(std::log(4.0)));
        CHECK(loss.consistency == 0.0);
    }

    TEST_CASE("identical views with an identity predictor give consistency -1") {
        auto model = SoftmaxModel::initialize(2, 4, 4, 0.0, 2);
        model.predictor = RowMatrix::Identity(4, 4);
        std::mt19937_64 rng(4);
        const auto noisy = make_noisy_batch(gaussian(10, 4, rng), 9);
        const auto loss = loss_value(model, Batch{}, noisy, 0.5);
        CHECK(loss.consistency == doctest::Approx(-1.0));
        CHECK(loss.total == doctest::Approx(-0.5));
    }

    TEST_CASE("analytic gradients match finite differences") {
        const int C = 3;
        const Eigen::Index d = 5, p = 4;
        std::mt19937_64 rng(5);
        auto model = SoftmaxModel::initialize(C, d, p, 0.3, 7);
        model.weights = gaussian(C, d, rng);
        model.bias = gaussian(C, 1, rng).col(0);
        model.predictor = gaussian(p, p, rng);
        const Batch clean = mixup_with(one_hot_batch(gaussian(8, d, rng), {0, 1, 2, 0, 1, 2, 0, 1}, C), 0.7,
                                       std::vector<std::size_t>{3, 2, 1, 0, 7, 6, 5, 4})
                                .batch;
        const auto noisy = make_noisy_batch(gaussian(8, d, rng), 13);
        const double w = 0.8;
        const auto analytic = loss_and_grad(model, clean, noisy, w);
        const RowMatrix target = model.projector;  // stopped-gradient branch

        constexpr double h = 1e-5;
        auto numeric = [&](auto&& param) {
            RowMatrix out(param.rows(), param.cols());
            for (Eigen::Index i = 0; i < param.rows(); ++i)
                for (Eigen::Index j = 0; j < param.cols(); ++j) {
                    const double keep = param(i, j);
                    param(i, j) = keep + h;
                    const double up = loss_value(model, clean, noisy, w, &target).total;
                    param(i, j) = keep - h;
                    const double down = loss_value(model, clean, noisy, w, &target).total;
                    param(i, j) = keep;
                    out(i, j) = (up - down) / (2.0 * h);
                }
            return out;
        };
        auto close = [](const RowMatrix& a, const RowMatrix& b) {
            for (Eigen::Index i = 0; i < a.size(); ++i) {
                const double scale = std::max({std::abs(a.data()[i]), std::abs(b.data()[i]), 1e-3});
                CHECK(std::abs(a.data()[i] - b.data()[i]) / scale <= 1e-4);
            }
        };
        close(analytic.grad.weights, numeric(model.weights));
        RowMatrix bias_col = model.bias;
        RowMatrix nb(C, 1);
        for (Eigen::Index c = 0; c < C; ++c) {
            const double keep = model.bias(c);
            model.bias(c) = keep + h;
            const double up = loss_value(model, clean, noisy, w, &target).total;
            model.bias(c) = keep - h;
            const double down = loss_value(model, clean, noisy, w, &target).total;
            model.bias(c) = keep;
            nb(c, 0) = (up - down) / (2.0 * h);
        }
        close(RowMatrix(analytic.grad.bias), nb);
        close(analytic.grad.projector, numeric(model.projector));
        close(analytic.grad.predictor, numeric(model.predictor));
    }

    TEST_CASE("predicted probabilities") {
        auto model = SoftmaxModel::initialize(2, 2, 2, 0.1, 1);
        model.weights << 1, 0, 0, 1;
        model.bias.setZero();
        RowMatrix x(2, 2);
        x << 0, 0, std::log(3.0), 0;
        const auto p = predict_probs(model, x);
        CHECK(p.probs(0, 0) == doctest::Approx(0.5));
        CHECK(p.probs(1, 0) == doctest::Approx(0.75));
        CHECK(p.probs(1, 1) == doctest::Approx(0.25));
        CHECK_ANNE_ERROR(predict_probs(model, RowMatrix::Zero(1, 3)), ErrorKind::DimensionMismatch);
    }

    TEST_CASE("clean separable data is learned") {
        auto spec = small_spec(2, 21);
        spec.centroid_separation = 12.0;  // Bayes error ~1e-9
        const auto train = generate_clusters(spec);
        auto test_spec = spec;
        test_spec.samples_per_class = 200;
        const auto test = generate_clusters(test_spec, 1'000'000);
        PipelineConfig pipe;
        const auto r = train_loop(train, test, pipe, quick(30, 3));
        CHECK(r.history.size() == 30);
        CHECK(r.history.back().test_accuracy >= 0.99);
        for (std::size_t e = 0; e < 30; ++e) {
            CHECK(r.history[e].epoch == e);
            CHECK(r.history[e].warmup == (e < 3));
        }
        CHECK(r.history.back().selection_size.has_value());
    }

    TEST_CASE("passthrough training equals plain training") {
        const auto spec = small_spec(3, 8, 60);
        const auto train = inject_symmetric(generate_clusters(spec), 0.2, 4);
        const auto test = generate_clusters(spec, 1'000'000);
        PipelineConfig pass;
        pass.selector = parse_selector("passthrough");
        auto cfg = quick(8, 6);
        const auto a = train_loop(train, test, pass, cfg);
        cfg.warmup_epochs = 8;
        const auto b = train_loop(train, test, PipelineConfig{}, cfg);
        CHECK(a.model == b.model);
        for (const auto& rec : a.history) CHECK(rec.warmup);
    }

    TEST_CASE("training is deterministic") {
        const auto spec = small_spec(3, 9, 60);
        const auto train = inject_symmetric(generate_clusters(spec), 0.3, 5);
        const auto test = generate_clusters(spec, 1'000'000);
        const auto a = train_loop(train, test, PipelineConfig{}, quick(6, 1));
        const auto b = train_loop(train, test, PipelineConfig{}, quick(6, 1));
        CHECK(a.model == b.model);
        CHECK(a.last_selection->clean == b.last_selection->clean);
        const auto c = train_loop(train, test, PipelineConfig{}, quick(6, 2));
        CHECK_FALSE(c.model == a.model);
    }

    TEST_CASE("training configuration is validated") {
        TrainConfig t;
        t.epochs = 0;
        CHECK_ANNE_ERROR(t.validate(), ErrorKind::ConfigError);
        t = TrainConfig{};
        t.momentum = 1.0;
        CHECK_ANNE_ERROR(t.validate(), ErrorKind::ConfigError);
    }
}
