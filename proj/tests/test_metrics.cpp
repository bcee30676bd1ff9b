#include "anne/metrics.hpp"
#include "anne/model.hpp"

#include "helpers.hpp"

#include <algorithm>
#include <numeric>
#include <random>

using namespace anne;
using testing::make_dataset;

namespace {

Dataset labeled(std::vector<Label> noisy, std::vector<Label> truth, int classes) {
    std::vector<std::vector<double>> rows(noisy.size(), std::vector<double>{1.0, 0.0});
    return make_dataset(rows, std::move(noisy), classes, std::move(truth));
}

SelectionResult selection(const Dataset& ds, const std::vector<bool>& keep) {
    SelectionResult r;
    for (Index i = 0; i < ds.size(); ++i) (keep[i] ? r.clean : r.noisy).push_back(i);
    r.provenance.assign(ds.size(), Provenance::passthrough);
    r.labels = ds.noisy_labels;
    return r;
}

}  // namespace

TEST_SUITE("metrics") {
    TEST_CASE("selecting exactly the clean samples is perfect") {
        const auto ds = labeled({0, 1, 1, 0, 2}, {0, 1, 0, 0, 1}, 3);
        const auto m = selection_metrics(selection(ds, {true, true, false, true, false}), ds);
        CHECK(m.precision == 1.0);
        CHECK(m.recall == 1.0);
        CHECK(m.f1 == 1.0);
        CHECK(m.noisy_precision == 1.0);
        CHECK(m.noisy_recall == 1.0);
        CHECK(m.selection_size == 3);
    }

    TEST_CASE("keeping everything at 20 percent noise") {
        std::vector<Label> truth(100, 0), noisy(100, 0);
        for (int i = 0; i < 20; ++i) noisy[std::size_t(i)] = 1;
        const auto ds = labeled(noisy, truth, 2);
        const auto m = selection_metrics(selection(ds, std::vector<bool>(100, true)), ds);
        CHECK(m.precision == doctest::Approx(0.8));
        CHECK(m.recall == 1.0);
        CHECK(m.f1 == doctest::Approx(2 * 0.8 / 1.8));
        CHECK(m.clean_rate == doctest::Approx(0.8));
        CHECK(m.noisy_recall == 0.0);
    }

    TEST_CASE("an empty selection scores zero") {
        const auto ds = labeled({0, 1}, {0, 1}, 2);
        const auto m = selection_metrics(selection(ds, {false, false}), ds);
        CHECK(m.precision == 0.0);
        CHECK(m.recall == 0.0);
        CHECK(m.f1 == 0.0);
        CHECK(m.selection_size == 0);
    }

    TEST_CASE("metrics agree with confusion counts") {
        std::mt19937_64 rng(4);
        std::uniform_int_distribution<int> label(0, 3);
        std::bernoulli_distribution coin(0.6);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<Label> noisy(300), truth(300);
            std::vector<bool> keep(300);
            for (std::size_t i = 0; i < 300; ++i) {
                truth[i] = label(rng);
                noisy[i] = coin(rng) ? truth[i] : label(rng);
                keep[i] = coin(rng);
            }
            const auto ds = labeled(noisy, truth, 4);
            double tp = 0, fp = 0, fn = 0, tn = 0;
            for (std::size_t i = 0; i < 300; ++i) {
                const bool clean = noisy[i] == truth[i];
                if (keep[i]) (clean ? tp : fp) += 1;
                else (clean ? fn : tn) += 1;
            }
            const auto m = selection_metrics(selection(ds, keep), ds);
            const double p = tp / (tp + fp), r = tp / (tp + fn);
            CHECK(m.precision == doctest::Approx(p));
            CHECK(m.recall == doctest::Approx(r));
            CHECK(m.f1 == doctest::Approx(2 * p * r / (p + r)));
            CHECK(m.noisy_precision == doctest::Approx(tn / (tn + fn)));
            CHECK(m.noisy_recall == doctest::Approx(tn / (tn + fp)));

            // Relabeling the rows consistently does not change anything.
            std::vector<std::size_t> perm(300);
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            std::vector<Label> pn(300), pt(300);
            std::vector<bool> pk(300);
            for (std::size_t i = 0; i < 300; ++i) {
                pn[i] = noisy[perm[i]];
                pt[i] = truth[perm[i]];
                pk[i] = keep[perm[i]];
            }
            const auto pds = labeled(pn, pt, 4);
            const auto pm = selection_metrics(selection(pds, pk), pds);
            CHECK(pm.f1 == doctest::Approx(m.f1));
            CHECK(pm.selection_size == m.selection_size);
        }
    }

    TEST_CASE("relabeled labels are what gets judged") {
        const auto ds = labeled({0, 0}, {1, 0}, 2);
        auto r = selection(ds, {true, true});
        CHECK(selection_metrics(r, ds).precision == doctest::Approx(0.5));
        r.labels = {1, 0};
        CHECK(selection_metrics(r, ds).precision == 1.0);
    }

    TEST_CASE("metrics need true labels and a covering selection") {
        auto ds = labeled({0, 1}, {0, 1}, 2);
        auto r = selection(ds, {true, false});
        r.noisy.clear();
        CHECK_ANNE_ERROR(selection_metrics(r, ds), ErrorKind::LengthMismatch);
        ds.true_labels.reset();
        CHECK_ANNE_ERROR(selection_metrics(selection(ds, {true, true}), ds), ErrorKind::MissingTrueLabels);
    }

    TEST_CASE("subset metrics are absent for an empty subset") {
        const auto ds = labeled({0, 1, 1}, {0, 1, 0}, 2);
        const auto r = selection(ds, {true, true, true});
        CHECK_FALSE(subset_metrics(r, ds, {}).has_value());
        const std::vector<Index> part{2};
        const auto m = subset_metrics(r, ds, part);
        REQUIRE(m.has_value());
        CHECK(m->precision == 0.0);
        ConfidencePartition cp;
        cp.hcs = {0, 1, 2};
        const auto both = per_subset_metrics(r, cp, ds);
        CHECK(both.hcs.has_value());
        CHECK_FALSE(both.lcs.has_value());
    }

    TEST_CASE("accuracy on a one-sample test set") {
        auto model = SoftmaxModel::initialize(2, 2, 2, 0.1, 1);
        model.weights << 1, 0, 0, 1;
        model.bias.setZero();
        CHECK(evaluate_accuracy(model, make_dataset({{2.0, 1.0}}, {0}, 2)) == 1.0);
        CHECK(evaluate_accuracy(model, make_dataset({{2.0, 1.0}}, {1}, 2)) == 0.0);
        CHECK_ANNE_ERROR(evaluate_accuracy(model, make_dataset({}, {}, 2)), ErrorKind::EmptyTestSet);
        CHECK_ANNE_ERROR(evaluate_accuracy(model, make_dataset({{1.0, 2.0, 3.0}}, {0}, 2)),
                         ErrorKind::DimensionMismatch);
    }

    TEST_CASE("a model that ignores its input scores chance on uniform labels") {
        auto model = SoftmaxModel::initialize(10, 3, 2, 0.1, 1);
        model.weights.setZero();
        model.bias.setZero();
        model.bias(3) = 1.0;
        std::mt19937_64 rng(8);
        std::uniform_int_distribution<int> c(0, 9);
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<std::vector<double>> rows(5000, std::vector<double>(3));
        std::vector<Label> y(5000);
        for (std::size_t i = 0; i < 5000; ++i) {
            for (double& v : rows[i]) v = g(rng);
            y[i] = c(rng);
        }
        const double acc = evaluate_accuracy(model, make_dataset(rows, y, 10));
        CHECK(std::abs(acc - 0.1) <= 3.0 * std::sqrt(0.09 / 5000.0));
    }
}
