#include "anne/confidence.hpp"

#include "helpers.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <random>

using namespace anne;

namespace {

std::vector<double> bimodal_scores(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> low(0.2, 0.05), high(0.85, 0.05);
    std::bernoulli_distribution pick(0.5);
    std::vector<double> s(n);
    for (double& v : s) v = std::clamp(pick(rng) ? high(rng) : low(rng), 0.0, 1.0);
    return s;
}

/// Two-class predictions whose max probability equals the given score (>= 0.5).
Predictions predictions_with_max(const std::vector<double>& max_prob, int classes) {
    Predictions p;
    p.probs.resize(static_cast<Eigen::Index>(max_prob.size()), classes);
    for (std::size_t i = 0; i < max_prob.size(); ++i) {
        const double rest = (1.0 - max_prob[i]) / double(classes - 1);
        for (int c = 0; c < classes; ++c) p.probs(static_cast<Eigen::Index>(i), c) = rest;
        p.probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i % classes)) = max_prob[i];
    }
    return p;
}

void check_partition_invariants(const ConfidencePartition& part, std::size_t n) {
    std::vector<int> seen(n, 0);
    for (auto i : part.hcs) ++seen[i];
    for (auto i : part.lcs1) ++seen[i];
    for (auto i : part.lcs2) ++seen[i];
    for (int s : seen) CHECK(s == 1);
    for (auto i : part.hcs) CHECK(part.max_prob[i] >= part.tau);
    for (auto i : part.lcs1) {
        CHECK(part.max_prob[i] >= part.mu_lcs);
        CHECK(part.max_prob[i] < part.tau);
    }
    for (auto i : part.lcs2) CHECK(part.max_prob[i] < part.mu_lcs);
    double sum = 0.0;
    const auto lcs = part.lcs();
    for (auto i : lcs) sum += part.max_prob[i];
    if (!lcs.empty()) CHECK(std::abs(sum / double(lcs.size()) - part.mu_lcs) <= 1e-9);
}

}  // namespace

TEST_SUITE("confidence") {
    TEST_CASE("perfectly bimodal scores split between the groups") {
        const std::vector<double> s{0.1, 0.1, 0.1, 0.9, 0.9, 0.9};
        const auto r = otsu_threshold(s);
        CHECK(r.tau > 0.1);
        CHECK(r.tau <= 0.9);
        CHECK(r.tau == doctest::Approx(0.101));  // smallest grid tau above the low group
    }

    TEST_CASE("constant scores cannot be split") {
        CHECK_ANNE_ERROR(otsu_threshold(std::vector<double>(10, 0.5)), ErrorKind::DegenerateScores);
        CHECK_ANNE_ERROR(otsu_threshold(std::vector<double>{0.3}), ErrorKind::DegenerateScores);
    }

    TEST_CASE("scores outside the unit interval are rejected") {
        CHECK_THROWS_AS(otsu_threshold(std::vector<double>{0.2, 1.5}), Error);
    }

    TEST_CASE("threshold matches the exhaustive grid oracle") {
        const auto s = bimodal_scores(1000, 42);
        const auto r = otsu_threshold(s);
        const auto scan = oracle::otsu_scan(s);
        REQUIRE(scan.first_best >= 0);
        CHECK(std::abs(r.tau - scan.first_best / 1000.0) <= 0.02);
        CHECK(r.tau == doctest::Approx(scan.first_best / 1000.0));
        CHECK(r.objective == doctest::Approx(scan.best).epsilon(1e-9));
    }

    TEST_CASE("objective at the returned tau is maximal over the grid") {
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<double> s(300);
            for (double& v : s) v = u(rng) * u(rng);
            const auto r = otsu_threshold(s);
            for (int k = 0; k <= 1000; ++k) {
                const auto v = otsu_objective(s, k / 1000.0);
                if (v) CHECK(*v <= r.objective * (1.0 + 1e-12));
            }
        }
    }

    TEST_CASE("threshold is invariant under permutation of the scores") {
        auto s = bimodal_scores(500, 3);
        const auto a = otsu_threshold(s);
        std::reverse(s.begin(), s.end());
        const auto b = otsu_threshold(s);
        std::shuffle(s.begin(), s.end(), std::mt19937_64(1));
        const auto c = otsu_threshold(s);
        CHECK(a.tau == b.tau);
        CHECK(a.tau == c.tau);
    }

    TEST_CASE("one-hot predictions are degenerate") {
        Predictions p;
        p.probs = RowMatrix::Zero(6, 3);
        for (Eigen::Index i = 0; i < 6; ++i) p.probs(i, i % 3) = 1.0;
        CHECK_ANNE_ERROR(split_confidence(p), ErrorKind::DegenerateScores);
    }

    TEST_CASE("bimodal predictions split into the high and low groups") {
        const std::vector<double> s{0.55, 0.55, 0.55, 0.95, 0.95, 0.95};
        const auto part = split_confidence(predictions_with_max(s, 2));
        CHECK(part.hcs == IndexSet{3, 4, 5});
        CHECK(part.lcs() == IndexSet{0, 1, 2});
        check_partition_invariants(part, s.size());
    }

    TEST_CASE("partition membership verified exhaustively") {
        std::vector<double> s = bimodal_scores(1000, 77);
        for (double& v : s) v = 0.1 + 0.9 * v;  // keep the max probability of a 10-class row valid
        const auto part = split_confidence(predictions_with_max(s, 10));
        CHECK(part.size() == 1000);
        check_partition_invariants(part, 1000);
        CHECK_FALSE(part.hcs.empty());
        CHECK_FALSE(part.lcs1.empty());
        CHECK_FALSE(part.lcs2.empty());
        CHECK(part.mu_hcs > part.mu_lcs);
    }

    TEST_CASE("reversing the sample order gives the mirrored partition") {
        std::vector<double> s = bimodal_scores(400, 5);
        for (double& v : s) v = 0.5 + 0.5 * v;
        const auto a = split_confidence(predictions_with_max(s, 2));
        std::vector<double> r(s.rbegin(), s.rend());
        const auto b = split_confidence(predictions_with_max(r, 2));
        CHECK(a.tau == b.tau);
        IndexSet mirrored;
        for (auto i : b.hcs) mirrored.push_back(s.size() - 1 - i);
        std::sort(mirrored.begin(), mirrored.end());
        CHECK(mirrored == a.hcs);
    }
}
