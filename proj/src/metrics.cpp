#include "anne/metrics.hpp"

#include "anne/error.hpp"

#include <algorithm>

namespace anne {

namespace {

double ratio(std::size_t num, std::size_t den) { return den == 0 ? 0.0 : double(num) / double(den); }

SelectionMetrics from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
    SelectionMetrics m;
    m.selection_size = tp + fp;
    m.precision = ratio(tp, tp + fp);
    m.recall = ratio(tp, tp + fn);
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    m.clean_rate = m.precision;
    m.noisy_precision = ratio(tn, tn + fn);
    m.noisy_recall = ratio(tn, tn + fp);
    return m;
}

const std::vector<Label>& judged_labels(const SelectionResult& result, const Dataset& dataset) {
    return result.labels.size() == dataset.size() ? result.labels : dataset.noisy_labels;
}

}  // namespace

std::optional<SelectionMetrics> subset_metrics(const SelectionResult& result, const Dataset& dataset,
                                               std::span<const Index> members) {
    if (!dataset.true_labels) fail(ErrorKind::MissingTrueLabels, "selection metrics need true labels");
    require(result.clean.size() + result.noisy.size() == dataset.size(), ErrorKind::LengthMismatch,
            "selection does not cover the dataset");
    if (members.empty()) return std::nullopt;
    const auto& labels = judged_labels(result, dataset);
    const auto& truth = *dataset.true_labels;
    std::vector<char> selected(dataset.size(), 0);
    for (Index i : result.clean) selected[i] = 1;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (Index i : members) {
        const bool clean = labels[i] == truth[i];
        if (selected[i]) {
            (clean ? tp : fp)++;
        } else {
            (clean ? fn : tn)++;
        }
    }
    return from_counts(tp, fp, fn, tn);
}

SelectionMetrics selection_metrics(const SelectionResult& result, const Dataset& dataset) {
    IndexSet all(dataset.size());
    for (Index i = 0; i < all.size(); ++i) all[i] = i;
    if (all.empty()) return {};
    return *subset_metrics(result, dataset, all);
}

SubsetMetrics per_subset_metrics(const SelectionResult& result, const ConfidencePartition& partition,
                                 const Dataset& dataset) {
    return {subset_metrics(result, dataset, partition.hcs), subset_metrics(result, dataset, partition.lcs())};
}

double evaluate_accuracy(const SoftmaxModel& model, const Dataset& testset) {
    if (testset.size() == 0) fail(ErrorKind::EmptyTestSet, "test set is empty");
    require(testset.dim == model.dim(), ErrorKind::DimensionMismatch, "test set dim differs from the model");
    const auto preds = predict_probs(model, testset);
    std::size_t correct = 0;
    for (Index i = 0; i < testset.size(); ++i) {
        Eigen::Index arg = 0;  // maxCoeff keeps the first maximum: smallest class id wins ties
        preds.probs.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
        if (static_cast<Label>(arg) == testset.noisy_labels[i]) ++correct;
    }
    return double(correct) / double(testset.size());
}

}  // namespace anne
