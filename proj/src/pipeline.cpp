#include "anne/pipeline.hpp"

#include "anne/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace anne {

Selector parse_selector(const std::string& name) {
    static const std::pair<const char*, SelectorKind> kNames[] = {
        {"anne", SelectorKind::anne},
        {"fine_hcs_aknn_lcs", SelectorKind::anne},
        {"fine_only", SelectorKind::fine_only},
        {"aknn_only", SelectorKind::aknn_only},
        {"small_loss_gmm", SelectorKind::small_loss_gmm},
        {"fixed_knn", SelectorKind::fixed_knn},
        {"fine_hcs_fine_lcs", SelectorKind::fine_hcs_fine_lcs},
        {"aknn_hcs_aknn_lcs", SelectorKind::aknn_hcs_aknn_lcs},
        {"aknn_hcs_fine_lcs", SelectorKind::aknn_hcs_fine_lcs},
        {"passthrough", SelectorKind::passthrough},
    };
    std::string base = name;
    std::optional<std::size_t> k;
    if (const auto colon = name.find(':'); colon != std::string::npos) {
        base = name.substr(0, colon);
        try {
            std::size_t used = 0;
            const long long v = std::stoll(name.substr(colon + 1), &used);
            if (used != name.size() - colon - 1 || v < 1) throw std::invalid_argument("k");
            k = static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            fail(ErrorKind::ConfigError, "selector: bad K in '" + name + "'");
        }
    }
    for (const auto& [n, kind] : kNames) {
        if (base != n) continue;
        if (k && kind != SelectorKind::fixed_knn) fail(ErrorKind::ConfigError, "selector: only fixed_knn takes K");
        Selector s{kind};
        if (k) s.k = *k;
        return s;
    }
    fail(ErrorKind::ConfigError, "selector: unknown selector '" + name + "'");
}

std::string to_string(const Selector& selector) {
    switch (selector.kind) {
        case SelectorKind::anne: return "anne";
        case SelectorKind::fine_only: return "fine_only";
        case SelectorKind::aknn_only: return "aknn_only";
        case SelectorKind::small_loss_gmm: return "small_loss_gmm";
        case SelectorKind::fixed_knn: return "fixed_knn:" + std::to_string(selector.k);
        case SelectorKind::fine_hcs_fine_lcs: return "fine_hcs_fine_lcs";
        case SelectorKind::aknn_hcs_aknn_lcs: return "aknn_hcs_aknn_lcs";
        case SelectorKind::aknn_hcs_fine_lcs: return "aknn_hcs_fine_lcs";
        case SelectorKind::passthrough: return "passthrough";
    }
    return "anne";
}

std::array<Selector, 4> placement_variants() {
    return {Selector{SelectorKind::fine_hcs_fine_lcs}, Selector{SelectorKind::anne},
            Selector{SelectorKind::aknn_hcs_aknn_lcs}, Selector{SelectorKind::aknn_hcs_fine_lcs}};
}

void PipelineConfig::validate() const {
    require(gamma_r >= 0.0 && gamma_r <= 1.0, ErrorKind::ConfigError, "pipeline.gamma_r must be in [0,1]");
    require(gamma_e >= 0.0 && gamma_e <= 1.0, ErrorKind::ConfigError, "pipeline.gamma_e must be in [0,1]");
    require(selector.kind != SelectorKind::fixed_knn || selector.k >= 1, ErrorKind::ConfigError,
            "pipeline.fixed_k must be >= 1");
    aknn.validate();
}

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::passthrough: return "passthrough";
        case Provenance::fine: return "FINE";
        case Provenance::aknn: return "AKNN";
        case Provenance::small_loss: return "small_loss";
        case Provenance::fixed_knn: return "fixed_knn";
    }
    return "passthrough";
}

std::optional<double> SelectionResult::mean_k() const {
    if (neighbors.empty()) return std::nullopt;
    double sum = 0.0;
    for (const auto& d : neighbors) sum += double(d.k);
    return sum / double(neighbors.size());
}

namespace {

void check_aligned(const Dataset& dataset, const Predictions& preds) {
    require(preds.size() == dataset.size(), ErrorKind::LengthMismatch,
            "predictions have " + std::to_string(preds.size()) + " rows, dataset has " + std::to_string(dataset.size()));
    require(preds.class_count() == dataset.class_count, ErrorKind::LengthMismatch,
            "predictions have " + std::to_string(preds.class_count()) + " classes, dataset has " +
                std::to_string(dataset.class_count));
}

SelectionResult empty_result(const Dataset& ds, std::size_t relabels) {
    SelectionResult r;
    r.provenance.assign(ds.size(), Provenance::passthrough);
    r.labels = ds.noisy_labels;
    r.relabel_count = relabels;
    r.fine_scores.assign(ds.size(), std::numeric_limits<double>::quiet_NaN());
    return r;
}

void pass_all(SelectionResult& r) {
    r.clean.resize(r.size());
    std::iota(r.clean.begin(), r.clean.end(), Index{0});
    r.noisy.clear();
    std::fill(r.provenance.begin(), r.provenance.end(), Provenance::passthrough);
}

void apply_fine(SelectionResult& r, const Dataset& ds, std::span<const Index> subset, double gamma_e) {
    if (subset.empty()) return;
    auto sel = fine_select(subset, ds, gamma_e);
    for (std::size_t p = 0; p < sel.members.size(); ++p) {
        r.provenance[sel.members[p]] = Provenance::fine;
        r.fine_scores[sel.members[p]] = sel.scores[p];
    }
    r.clean.insert(r.clean.end(), sel.clean.begin(), sel.clean.end());
    r.noisy.insert(r.noisy.end(), sel.noisy.begin(), sel.noisy.end());
}

void apply_aknn(SelectionResult& r, const Dataset& ds, std::span<const Index> pool, std::span<const std::size_t> k_min,
                const AknnConfig& config) {
    if (pool.empty()) return;
    auto sel = aknn_select_pool(ds, pool, k_min, config);
    for (Index i : pool) r.provenance[i] = Provenance::aknn;
    r.clean.insert(r.clean.end(), sel.clean.begin(), sel.clean.end());
    r.noisy.insert(r.noisy.end(), sel.noisy.begin(), sel.noisy.end());
    r.neighbors.insert(r.neighbors.end(), sel.diagnostics.begin(), sel.diagnostics.end());
}

void finish(SelectionResult& r) {
    std::sort(r.clean.begin(), r.clean.end());
    std::sort(r.noisy.begin(), r.noisy.end());
    std::sort(r.neighbors.begin(), r.neighbors.end(),
              [](const NeighborDiagnostics& a, const NeighborDiagnostics& b) { return a.index < b.index; });
}

enum class Method { fine, aknn };

SelectionResult select_by_placement(const Dataset& dataset, const Predictions& preds, const PipelineConfig& config,
                                    Method on_hcs, Method on_lcs) {
    auto [ds, relabels] = relabel(dataset, preds, config.gamma_r);
    SelectionResult r = empty_result(ds, relabels);
    // Split on the model's confidence; relabeling only changes labels, not preds.
    try {
        r.partition = split_confidence(preds);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateScores) throw;
        r.degenerate_split = true;
        pass_all(r);
        return r;
    }
    const auto& part = *r.partition;
    if (on_hcs == Method::fine) {
        apply_fine(r, ds, part.hcs, config.gamma_e);
    } else {
        std::vector<std::size_t> k(part.hcs.size(), config.aknn.k_min_hcs);
        apply_aknn(r, ds, part.hcs, k, config.aknn);
    }
    if (on_lcs == Method::fine) {
        apply_fine(r, ds, part.lcs(), config.gamma_e);
    } else if (!part.lcs1.empty() || !part.lcs2.empty()) {
        auto sel = aknn_select(part, ds, config.aknn);
        for (const auto& d : sel.diagnostics) r.provenance[d.index] = Provenance::aknn;
        r.clean.insert(r.clean.end(), sel.clean.begin(), sel.clean.end());
        r.noisy.insert(r.noisy.end(), sel.noisy.begin(), sel.noisy.end());
        r.neighbors.insert(r.neighbors.end(), sel.diagnostics.begin(), sel.diagnostics.end());
    }
    finish(r);
    return r;
}

SelectionResult select_fine_only(const Dataset& dataset, const Predictions& preds, const PipelineConfig& config) {
    auto [ds, relabels] = relabel(dataset, preds, config.gamma_r);
    SelectionResult r = empty_result(ds, relabels);
    IndexSet all(ds.size());
    std::iota(all.begin(), all.end(), Index{0});
    apply_fine(r, ds, all, config.gamma_e);
    finish(r);
    return r;
}

SelectionResult select_aknn_only(const Dataset& dataset, const Predictions& preds, const PipelineConfig& config) {
    auto [ds, relabels] = relabel(dataset, preds, config.gamma_r);
    SelectionResult r = empty_result(ds, relabels);
    try {
        r.partition = split_confidence(preds);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateScores) throw;
        r.degenerate_split = true;
        pass_all(r);
        return r;
    }
    const auto& part = *r.partition;
    IndexSet all(ds.size());
    std::iota(all.begin(), all.end(), Index{0});
    std::vector<std::size_t> k(ds.size(), config.aknn.k_min_hcs);
    for (Index i : part.lcs1) k[i] = config.aknn.k_min_lcs1;
    for (Index i : part.lcs2) k[i] = config.aknn.k_min_lcs2;
    apply_aknn(r, ds, all, k, config.aknn);
    finish(r);
    return r;
}

SelectionResult select_small_loss(const Dataset& dataset, const Predictions& preds, const PipelineConfig& config) {
    auto [ds, relabels] = relabel(dataset, preds, config.gamma_r);
    SelectionResult r = empty_result(ds, relabels);
    const auto losses = per_sample_loss(preds, ds.noisy_labels);
    try {
        auto split = small_loss_gmm_select(losses);
        r.clean = std::move(split.clean);
        r.noisy = std::move(split.noisy);
        std::fill(r.provenance.begin(), r.provenance.end(), Provenance::small_loss);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateLosses) throw;
        r.degenerate_split = true;
        pass_all(r);
    }
    return r;
}

SelectionResult select_fixed_knn(const Dataset& dataset, const Predictions& preds, const PipelineConfig& config) {
    auto [ds, relabels] = relabel(dataset, preds, config.gamma_r);
    SelectionResult r = empty_result(ds, relabels);
    auto split = fixed_knn_select(ds, config.selector.k);
    r.clean = std::move(split.clean);
    r.noisy = std::move(split.noisy);
    std::fill(r.provenance.begin(), r.provenance.end(), Provenance::fixed_knn);
    return r;
}

}  // namespace

RelabelResult relabel(const Dataset& dataset, const Predictions& preds, double gamma_r) {
    check_aligned(dataset, preds);
    RelabelResult out{dataset, 0};
    for (Index i = 0; i < dataset.size(); ++i) {
        Eigen::Index arg = 0;
        const double top = preds.probs.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
        if (top > gamma_r && out.dataset.noisy_labels[i] != static_cast<Label>(arg)) {
            out.dataset.noisy_labels[i] = static_cast<Label>(arg);
            ++out.relabel_count;
        }
    }
    return out;
}

SelectionResult anne_select(const Dataset& dataset, const Predictions& preds, const PipelineConfig& config) {
    config.validate();
    return select_by_placement(dataset, preds, config, Method::fine, Method::aknn);
}

SelectionResult run_selector(const Dataset& dataset, const Predictions& preds, const PipelineConfig& config) {
    config.validate();
    check_aligned(dataset, preds);
    switch (config.selector.kind) {
        case SelectorKind::anne: return anne_select(dataset, preds, config);
        case SelectorKind::fine_only: return select_fine_only(dataset, preds, config);
        case SelectorKind::aknn_only: return select_aknn_only(dataset, preds, config);
        case SelectorKind::small_loss_gmm: return select_small_loss(dataset, preds, config);
        case SelectorKind::fixed_knn: return select_fixed_knn(dataset, preds, config);
        case SelectorKind::fine_hcs_fine_lcs:
            return select_by_placement(dataset, preds, config, Method::fine, Method::fine);
        case SelectorKind::aknn_hcs_aknn_lcs:
            return select_by_placement(dataset, preds, config, Method::aknn, Method::aknn);
        case SelectorKind::aknn_hcs_fine_lcs:
            return select_by_placement(dataset, preds, config, Method::aknn, Method::fine);
        case SelectorKind::passthrough: {
            SelectionResult r = empty_result(dataset, 0);
            pass_all(r);
            return r;
        }
    }
    fail(ErrorKind::ConfigError, "unhandled selector");
}

SelectionResult ablation_select(const Dataset& dataset, const Predictions& preds, const PipelineConfig& config) {
    return run_selector(dataset, preds, config);
}

GaussianMixture1d fit_gmm_1d(std::span<const double> values, std::array<double, 2> initial_means) {
    const auto n = values.size();
    require(n >= 2, ErrorKind::DegenerateLosses, "need at least two values");
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / double(n);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= double(n);
    require(var > 0.0, ErrorKind::DegenerateLosses, "values have zero variance");

    GaussianMixture1d g;
    g.weight = {0.5, 0.5};
    g.mean = initial_means;
    g.variance = {std::max(var, kGmmVarianceFloor), std::max(var, kGmmVarianceFloor)};

    constexpr double kLog2Pi = 1.8378770664093453;
    std::vector<double> resp(n);  // responsibility of component 0
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t it = 1; it <= kGmmMaxIterations; ++it) {
        // E-step (log-sum-exp for stability)
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::array<double, 2> lp{};
            for (int k = 0; k < 2; ++k) {
                const double diff = values[i] - g.mean[k];
                lp[k] = std::log(g.weight[k]) - 0.5 * (kLog2Pi + std::log(g.variance[k]) + diff * diff / g.variance[k]);
            }
            const double hi = std::max(lp[0], lp[1]);
            const double lse = hi + std::log(std::exp(lp[0] - hi) + std::exp(lp[1] - hi));
            resp[i] = std::exp(lp[0] - lse);
            ll += lse;
        }
        ll /= double(n);
        g.log_likelihood = ll;
        g.iterations = it;
        if (it > 1 && ll - prev < kGmmTolerance) break;
        prev = ll;

        // M-step
        std::array<double, 2> nk{}, sum{}, sq{};
        for (std::size_t i = 0; i < n; ++i) {
            const double r0 = resp[i], r1 = 1.0 - resp[i];
            nk[0] += r0;
            nk[1] += r1;
            sum[0] += r0 * values[i];
            sum[1] += r1 * values[i];
        }
        for (int k = 0; k < 2; ++k) {
            if (nk[k] <= 0.0) continue;  // keep the previous parameters for an empty component
            g.mean[k] = sum[k] / nk[k];
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double d0 = values[i] - g.mean[0], d1 = values[i] - g.mean[1];
            sq[0] += resp[i] * d0 * d0;
            sq[1] += (1.0 - resp[i]) * d1 * d1;
        }
        for (int k = 0; k < 2; ++k) {
            if (nk[k] <= 0.0) continue;
            g.variance[k] = std::max(sq[k] / nk[k], kGmmVarianceFloor);
            g.weight[k] = std::clamp(nk[k] / double(n), 1e-12, 1.0);
        }
    }
    return g;
}

SmallLossSplit small_loss_gmm_select(std::span<const double> losses) {
    require(losses.size() >= 2, ErrorKind::DegenerateLosses, "need at least two losses");
    for (double l : losses) require(std::isfinite(l), ErrorKind::DegenerateLosses, "losses must be finite");
    const auto [lo_it, hi_it] = std::minmax_element(losses.begin(), losses.end());
    const double lo = *lo_it, hi = *hi_it;
    require(hi > lo, ErrorKind::DegenerateLosses, "all losses are equal");

    std::vector<double> x(losses.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (losses[i] - lo) / (hi - lo);

    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) {
        const double pos = q * double(sorted.size() - 1);
        const auto a = static_cast<std::size_t>(std::floor(pos));
        const auto b = std::min(a + 1, sorted.size() - 1);
        return sorted[a] + (pos - double(a)) * (sorted[b] - sorted[a]);
    };

    const auto fixed = fit_gmm_1d(x, {0.25, 0.75});
    const auto fromq = fit_gmm_1d(x, {quantile(0.25), quantile(0.75)});
    SmallLossSplit out;
    out.mixture = fromq.log_likelihood > fixed.log_likelihood ? fromq : fixed;
    const auto& g = out.mixture;
    const int low = g.mean[0] <= g.mean[1] ? 0 : 1;

    constexpr double kLog2Pi = 1.8378770664093453;
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::array<double, 2> lp{};
        for (int k = 0; k < 2; ++k) {
            const double diff = x[i] - g.mean[k];
            lp[k] = std::log(g.weight[k]) - 0.5 * (kLog2Pi + std::log(g.variance[k]) + diff * diff / g.variance[k]);
        }
        const double post_low = 1.0 / (1.0 + std::exp(lp[1 - low] - lp[low]));
        (post_low > 0.5 ? out.clean : out.noisy).push_back(i);
    }
    return out;
}

KnnSplit fixed_knn_select(const Dataset& dataset, std::size_t k) {
    const auto n = dataset.size();
    require(k >= 1, ErrorKind::InvalidArgument, "K must be >= 1");
    require(n > k, ErrorKind::InsufficientSamples, "fixed KNN needs N > K");

    RowMatrix unit = dataset.feature_matrix();
    for (Eigen::Index r = 0; r < unit.rows(); ++r) {
        const double norm = unit.row(r).norm();
        if (norm == 0.0) fail(ErrorKind::ZeroVector, "row " + std::to_string(r));
        unit.row(r) /= norm;
    }
    std::vector<char> agree(n, 0);
    for_each_similarity_row(unit, [&](std::size_t i, std::span<const double> sims) {
        std::vector<Index> order;
        order.reserve(n - 1);
        for (Index j = 0; j < n; ++j)
            if (j != i) order.push_back(j);
        auto closer = [&](Index a, Index b) { return sims[a] != sims[b] ? sims[a] > sims[b] : a < b; };
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(), closer);
        order.resize(k);
        std::sort(order.begin(), order.end());
        std::vector<Label> labels(k);
        std::vector<double> nsims(k);
        for (std::size_t q = 0; q < k; ++q) {
            labels[q] = dataset.noisy_labels[order[q]];
            nsims[q] = sims[order[q]];
        }
        agree[i] = knn_vote(labels, nsims, dataset.class_count) == dataset.noisy_labels[i];
    });
    KnnSplit out;
    for (Index i = 0; i < n; ++i) (agree[i] ? out.clean : out.noisy).push_back(i);
    return out;
}

std::vector<double> per_sample_loss(const Predictions& preds, std::span<const Label> labels) {
    require(labels.size() == preds.size(), ErrorKind::LengthMismatch, "labels and predictions differ in length");
    std::vector<double> out(labels.size());
    for (Index i = 0; i < labels.size(); ++i)
        out[i] = -std::log(std::max(preds.probs(static_cast<Eigen::Index>(i), labels[i]), 1e-300));
    return out;
}

}  // namespace anne
