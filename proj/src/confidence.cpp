#include "anne/confidence.hpp"

#include "anne/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace anne {

namespace {

struct Moments {
    double n = 0.0;
    double mean = 0.0;
    double var = 0.0;  // population variance
};

// Sorted scores with prefix sums of (score - global mean) and its square; the
// centering keeps the variance difference well conditioned.
class SortedScores {
public:
    explicit SortedScores(std::span<const double> scores) : sorted_(scores.begin(), scores.end()) {
        std::sort(sorted_.begin(), sorted_.end());
        mean_ = std::accumulate(sorted_.begin(), sorted_.end(), 0.0) / double(sorted_.size());
        s1_.assign(sorted_.size() + 1, 0.0);
        s2_.assign(sorted_.size() + 1, 0.0);
        for (std::size_t k = 0; k < sorted_.size(); ++k) {
            const double c = sorted_[k] - mean_;
            s1_[k + 1] = s1_[k] + c;
            s2_[k + 1] = s2_[k] + c * c;
        }
    }

    double mean() const noexcept { return mean_; }
    std::size_t size() const noexcept { return sorted_.size(); }

    /// Number of scores strictly below tau.
    std::size_t below(double tau) const {
        return static_cast<std::size_t>(std::lower_bound(sorted_.begin(), sorted_.end(), tau) - sorted_.begin());
    }

    Moments range(std::size_t lo, std::size_t hi) const {
        Moments m;
        m.n = double(hi - lo);
        const double c1 = (s1_[hi] - s1_[lo]) / m.n;
        const double c2 = (s2_[hi] - s2_[lo]) / m.n;
        m.mean = mean_ + c1;
        m.var = std::max(0.0, c2 - c1 * c1);
        return m;
    }

private:
    std::vector<double> sorted_;
    std::vector<double> s1_, s2_;
    double mean_ = 0.0;
};

std::optional<double> objective_from(const Moments& low, const Moments& high, double mu) {
    const double between = high.n * (high.mean - mu) * (high.mean - mu) + low.n * (low.mean - mu) * (low.mean - mu);
    const double within = high.n * high.var + low.n * low.var;
    if (within > 0.0) return between / within;
    if (between > 0.0) return std::numeric_limits<double>::infinity();
    return std::nullopt;
}

double grid_tau(int k) { return double(k) / double(kOtsuGridSteps); }

}  // namespace

std::optional<double> otsu_objective(std::span<const double> scores, double tau) {
    if (scores.empty()) return std::nullopt;
    const SortedScores s(scores);
    const auto cut = s.below(tau);
    if (cut == 0 || cut == s.size()) return std::nullopt;
    return objective_from(s.range(0, cut), s.range(cut, s.size()), s.mean());
}

OtsuResult otsu_threshold(std::span<const double> scores) {
    require(scores.size() >= 2, ErrorKind::DegenerateScores, "need at least two scores");
    for (double v : scores)
        require(std::isfinite(v) && v >= 0.0 && v <= 1.0, ErrorKind::InvalidArgument, "scores must lie in [0,1]");

    const SortedScores s(scores);
    std::optional<OtsuResult> best;
    for (int k = 0; k <= kOtsuGridSteps; ++k) {
        const double tau = grid_tau(k);
        const auto cut = s.below(tau);
        if (cut == 0 || cut == s.size()) continue;
        const auto value = objective_from(s.range(0, cut), s.range(cut, s.size()), s.mean());
        if (!value) continue;
        if (!best || *value > best->objective) best = OtsuResult{tau, *value};
    }
    if (!best) fail(ErrorKind::DegenerateScores, "no threshold on the grid separates the scores");
    return *best;
}

IndexSet ConfidencePartition::lcs() const {
    IndexSet out;
    out.reserve(lcs1.size() + lcs2.size());
    std::merge(lcs1.begin(), lcs1.end(), lcs2.begin(), lcs2.end(), std::back_inserter(out));
    return out;
}

std::vector<double> max_probabilities(const Predictions& preds) {
    std::vector<double> out(preds.size());
    for (Index i = 0; i < preds.size(); ++i) out[i] = preds.probs.row(static_cast<Eigen::Index>(i)).maxCoeff();
    return out;
}

ConfidencePartition split_confidence(const Predictions& preds) {
    preds.validate();
    ConfidencePartition part;
    part.max_prob = max_probabilities(preds);
    const auto otsu = otsu_threshold(part.max_prob);
    part.tau = otsu.tau;
    part.objective_value = otsu.objective;

    const auto n = part.max_prob.size();
    IndexSet low;
    double sum_all = 0.0, sum_low = 0.0, sum_high = 0.0;
    for (Index i = 0; i < n; ++i) {
        sum_all += part.max_prob[i];
        if (part.max_prob[i] >= part.tau) {
            part.hcs.push_back(i);
            sum_high += part.max_prob[i];
        } else {
            low.push_back(i);
            sum_low += part.max_prob[i];
        }
    }
    part.mu_all = sum_all / double(n);
    part.mu_hcs = sum_high / double(part.hcs.size());
    part.mu_lcs = sum_low / double(low.size());

    double var_high = 0.0, var_low = 0.0;
    for (Index i : part.hcs) var_high += (part.max_prob[i] - part.mu_hcs) * (part.max_prob[i] - part.mu_hcs);
    for (Index i : low) {
        var_low += (part.max_prob[i] - part.mu_lcs) * (part.max_prob[i] - part.mu_lcs);
        (part.max_prob[i] >= part.mu_lcs ? part.lcs1 : part.lcs2).push_back(i);
    }
    part.sigma_hcs = std::sqrt(var_high / double(part.hcs.size()));
    part.sigma_lcs = std::sqrt(var_low / double(low.size()));
    return part;
}

}  // namespace anne
