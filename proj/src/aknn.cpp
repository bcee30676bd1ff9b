#include "anne/aknn.hpp"

#include "anne/error.hpp"
#include "anne/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace anne {

void AknnConfig::validate() const {
    require(delta_s > 0.0 && delta_s <= 1.0, ErrorKind::InvalidArgument, "aknn.delta_s must be in (0,1]");
    require(omega_floor < omega_init && omega_init <= 1.0, ErrorKind::InvalidArgument,
            "aknn: need omega_floor < omega_init <= 1");
    require(k_min_lcs1 >= 1 && k_min_lcs2 >= 1 && k_min_hcs >= 1, ErrorKind::InvalidArgument,
            "aknn: k_min values must be >= 1");
}

double AknnConfig::omega_at(std::size_t m) const {
    return std::round((omega_init - double(m) * delta_s) * 1e12) / 1e12;
}

std::size_t AknnConfig::last_step() const {
    return static_cast<std::size_t>(std::ceil((omega_init - omega_floor) / delta_s - 1e-9));
}

double AknnSelection::mean_k() const {
    if (diagnostics.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& d : diagnostics) sum += double(d.k);
    return sum / double(diagnostics.size());
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    require(u.size() == v.size(), ErrorKind::DimensionMismatch, "cosine_similarity: length mismatch");
    double dot = 0.0, uu = 0.0, vv = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        dot += u[k] * v[k];
        uu += u[k] * u[k];
        vv += v[k] * v[k];
    }
    if (uu == 0.0 || vv == 0.0) fail(ErrorKind::ZeroVector, "cosine_similarity of a zero vector");
    return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

PairwiseSimilarity::PairwiseSimilarity(const RowMatrix& features) : unit_(features), ready_(features.rows()) {
    rows_.resize(static_cast<std::size_t>(features.rows()));
    for (Eigen::Index i = 0; i < unit_.rows(); ++i) {
        const double n = unit_.row(i).norm();
        if (n == 0.0) fail(ErrorKind::ZeroVector, "row " + std::to_string(i));
        unit_.row(i) /= n;
    }
}

std::span<const double> PairwiseSimilarity::row(Index i) const {
    require(i < size(), ErrorKind::InvalidArgument, "similarity row out of range");
    std::call_once(ready_[i], [&] {
        auto r = std::make_unique<std::vector<double>>(size());
        Eigen::Map<Vector> out(r->data(), static_cast<Eigen::Index>(size()));
        out.noalias() = unit_ * unit_.row(static_cast<Eigen::Index>(i)).transpose();
        for (double& s : *r) s = std::clamp(s, -1.0, 1.0);
        rows_[i] = std::move(r);
    });
    return *rows_[i];
}

double PairwiseSimilarity::operator()(Index i, Index j) const { return row(i)[j]; }

namespace {

struct Shortlist {
    double kth = 0.0;                     // cap-th largest similarity, self excluded
    std::vector<std::size_t>* candidates = nullptr;  // ascending positions with sims > kth - slack; null = whole row
};

// Finds the cap-th largest of sims (self excluded) and, when cheap, the
// positions that can still end up above the final omega (> kth - slack).
Shortlist shortlist(std::span<const double> sims, std::size_t self, std::size_t cap, double slack) {
    const std::size_t P = sims.size();
    thread_local std::vector<double> buf;
    thread_local std::vector<std::size_t> cand;
    buf.clear();
    constexpr std::size_t kStride = 16;
    if (P >= 32 * cap) {
        // Lower bound for kth from a strided sample, then one filter pass over the row.
        for (std::size_t p = 0; p < P; p += kStride)
            if (p != self) buf.push_back(sims[p]);
        const std::size_t q = std::min(buf.size(), 3 * cap / kStride + 1);
        std::nth_element(buf.begin(), buf.begin() + std::ptrdiff_t(q - 1), buf.end(), std::greater<>());
        const double bound = buf[q - 1];
        const double lo = bound - slack;
        // Branch-free compaction; only the first few slots are ever written.
        if (cand.size() < P) cand.resize(P);
        std::size_t n = 0;
        for (std::size_t p = 0; p < P; ++p) {
            cand[n] = p;
            n += static_cast<std::size_t>(sims[p] > lo);
        }
        cand.resize(n);
        std::erase(cand, self);
        buf.clear();
        for (std::size_t p : cand)
            if (sims[p] >= bound) buf.push_back(sims[p]);
        if (buf.size() >= cap) {
            std::nth_element(buf.begin(), buf.begin() + std::ptrdiff_t(cap - 1), buf.end(), std::greater<>());
            return {buf[cap - 1], &cand};
        }
        buf.clear();
    }
    // Min-heap of the cap largest seen so far.
    std::size_t p = 0;
    for (; buf.size() < cap; ++p)
        if (p != self) buf.push_back(sims[p]);
    std::make_heap(buf.begin(), buf.end(), std::greater<>());
    double low = buf.front();
    for (; p < P; ++p) {
        if (sims[p] > low && p != self) {
            std::pop_heap(buf.begin(), buf.end(), std::greater<>());
            buf.back() = sims[p];
            std::push_heap(buf.begin(), buf.end(), std::greater<>());
            low = buf.front();
        }
    }
    return {low, nullptr};
}

// Descends omega for one row and returns the neighbor positions within the pool, ordered by dataset index.
// nb.neighbors is left empty; callers fill it if they need dataset indices.
std::vector<std::size_t> descend(std::span<const double> sims, std::span<const Index> pool, bool pool_sorted,
                                 std::size_t self, std::size_t k_min, const AknnConfig& config, bool record_counts,
                                 Neighborhood& nb) {
    const std::size_t P = pool.size();
    require(P >= 2, ErrorKind::EmptyPool, "adaptive neighborhood needs a pool of at least two samples");
    require(sims.size() == P && self < P, ErrorKind::InvalidArgument, "similarity row does not match the pool");
    require(k_min >= 1, ErrorKind::InvalidArgument, "k_min must be >= 1");

    const std::size_t cap = std::min(k_min, P - 1);
    const std::size_t last = config.last_step();

    // K(omega) >= cap  <=>  the cap-th largest similarity exceeds omega.
    // The final omega is above kth - delta_s (or the row is taken whole), so the shortlist covers every neighbor.
    const Shortlist shortlisted = shortlist(sims, self, cap, config.delta_s + 1e-9);
    const double kth = shortlisted.kth;

    std::vector<double> sorted;
    if (record_counts) {
        sorted.reserve(P - 1);
        for (std::size_t p = 0; p < P; ++p)
            if (p != self) sorted.push_back(sims[p]);
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
    }

    bool satisfied = false;
    for (std::size_t m = 0; m <= last; ++m) {
        nb.omega = config.omega_at(m);
        ++nb.iterations;
        if (record_counts)
            nb.counts.push_back(static_cast<std::size_t>(
                std::upper_bound(sorted.begin(), sorted.end(), nb.omega, std::greater<>()) - sorted.begin()));
        if (kth > nb.omega) {
            satisfied = true;
            break;
        }
    }
    if (!satisfied) {
        nb.omega = config.omega_at(last + 1);
        nb.reached_floor = true;
    }
    std::vector<std::size_t> positions;
    if (shortlisted.candidates && !nb.reached_floor) {
        for (std::size_t p : *shortlisted.candidates)
            if (sims[p] > nb.omega) positions.push_back(p);
    } else {
        for (std::size_t p = 0; p < P; ++p)
            if (p != self && (nb.reached_floor || sims[p] > nb.omega)) positions.push_back(p);
    }
    if (!pool_sorted)
        std::sort(positions.begin(), positions.end(), [&](std::size_t a, std::size_t b) { return pool[a] < pool[b]; });
    nb.k = positions.size();
    return positions;
}

}  // namespace

Neighborhood neighborhood_from_row(std::span<const double> sims, std::span<const Index> pool, std::size_t self,
                                   std::size_t k_min, const AknnConfig& config, bool record_counts) {
    Neighborhood nb;
    const bool sorted = std::is_sorted(pool.begin(), pool.end());
    const auto positions = descend(sims, pool, sorted, self, k_min, config, record_counts, nb);
    nb.neighbors.reserve(positions.size());
    for (std::size_t p : positions) nb.neighbors.push_back(pool[p]);
    return nb;
}

Neighborhood adaptive_neighborhood(Index i, std::span<const Index> pool, std::size_t k_min, const AknnConfig& config,
                                   const PairwiseSimilarity& sims, bool record_counts) {
    config.validate();
    if (pool.size() < 2) fail(ErrorKind::EmptyPool, "pool has fewer than two samples");
    const auto it = std::find(pool.begin(), pool.end(), i);
    require(it != pool.end(), ErrorKind::InvalidArgument, "sample is not in the pool");
    const auto full = sims.row(i);
    std::vector<double> row(pool.size());
    for (std::size_t p = 0; p < pool.size(); ++p) row[p] = full[pool[p]];
    return neighborhood_from_row(row, pool, static_cast<std::size_t>(it - pool.begin()), k_min, config, record_counts);
}

Label knn_vote(std::span<const Label> labels, std::span<const double> sims, int class_count) {
    if (labels.empty()) fail(ErrorKind::EmptyNeighborhood, "knn_vote over no neighbors");
    require(labels.size() == sims.size(), ErrorKind::InvalidArgument, "knn_vote: labels and sims differ in length");
    std::vector<std::size_t> count(static_cast<std::size_t>(class_count), 0);
    std::vector<double> mass(static_cast<std::size_t>(class_count), 0.0);
    for (std::size_t k = 0; k < labels.size(); ++k) {
        const auto c = static_cast<std::size_t>(labels[k]);
        require(c < count.size(), ErrorKind::InvalidArgument, "knn_vote: label out of range");
        ++count[c];
        mass[c] += sims[k];
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < count.size(); ++c) {
        if (count[c] > count[best] || (count[c] == count[best] && mass[c] > mass[best])) best = c;
    }
    return static_cast<Label>(best);
}

void for_each_similarity_row(const RowMatrix& unit_rows,
                             const std::function<void(std::size_t, std::span<const double>)>& visit) {
    constexpr Eigen::Index kBlock = 64;
    const Eigen::Index n = unit_rows.rows();
    const auto blocks = static_cast<std::size_t>((n + kBlock - 1) / kBlock);
    parallel_for(blocks, [&](std::size_t begin, std::size_t end) {
        RowMatrix block;
        for (std::size_t b = begin; b < end; ++b) {
            const Eigen::Index r0 = static_cast<Eigen::Index>(b) * kBlock;
            const Eigen::Index rows = std::min(kBlock, n - r0);
            block.noalias() = unit_rows.middleRows(r0, rows) * unit_rows.transpose();
            for (Eigen::Index r = 0; r < rows; ++r) {
                double* p = block.row(r).data();
                for (Eigen::Index c = 0; c < n; ++c) p[c] = std::clamp(p[c], -1.0, 1.0);
                visit(static_cast<std::size_t>(r0 + r), std::span<const double>(p, static_cast<std::size_t>(n)));
            }
        }
    });
}

namespace {

RowMatrix unit_rows_of(const Dataset& dataset, std::span<const Index> rows) {
    RowMatrix f = dataset.feature_matrix(rows);
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
        const double n = f.row(r).norm();
        if (n == 0.0) fail(ErrorKind::ZeroVector, "row " + std::to_string(rows[static_cast<std::size_t>(r)]));
        f.row(r) /= n;
    }
    return f;
}

}  // namespace

AknnSelection aknn_select_pool(const Dataset& dataset, std::span<const Index> pool, std::span<const std::size_t> k_min,
                               const AknnConfig& config) {
    config.validate();
    if (pool.empty()) fail(ErrorKind::EmptyPool, "AKNN pool is empty");
    require(k_min.size() == pool.size(), ErrorKind::InvalidArgument, "one k_min per pool member required");

    AknnSelection out;
    out.diagnostics.resize(pool.size());
    if (pool.size() == 1) {
        out.diagnostics[0] = NeighborDiagnostics{pool[0], 0, config.omega_init, 0, -1, false};
        out.noisy.push_back(pool[0]);
        return out;
    }

    const RowMatrix unit = unit_rows_of(dataset, pool);
    const bool pool_sorted = std::is_sorted(pool.begin(), pool.end());
    for_each_similarity_row(unit, [&](std::size_t p, std::span<const double> sims) {
        Neighborhood nb;
        const auto positions = descend(sims, pool, pool_sorted, p, k_min[p], config, false, nb);
        // Vote in ascending dataset-index order so similarity sums do not depend on pool order.
        std::vector<Label> labels(positions.size());
        std::vector<double> neighbor_sims(positions.size());
        for (std::size_t k = 0; k < positions.size(); ++k) {
            labels[k] = dataset.noisy_labels[pool[positions[k]]];
            neighbor_sims[k] = sims[positions[k]];
        }
        const Label predicted = knn_vote(labels, neighbor_sims, dataset.class_count);
        const Index i = pool[p];
        out.diagnostics[p] = NeighborDiagnostics{i, nb.k, nb.omega, nb.iterations, predicted,
                                                 predicted == dataset.noisy_labels[i]};
    });
    for (const auto& d : out.diagnostics) (d.agree ? out.clean : out.noisy).push_back(d.index);
    std::sort(out.clean.begin(), out.clean.end());
    std::sort(out.noisy.begin(), out.noisy.end());
    return out;
}

AknnSelection aknn_select(const ConfidencePartition& partition, const Dataset& dataset, const AknnConfig& config) {
    const IndexSet pool = partition.lcs();
    if (pool.empty()) fail(ErrorKind::EmptyPool, "LCS is empty");
    std::vector<std::size_t> k_min(pool.size());
    for (std::size_t p = 0; p < pool.size(); ++p)
        k_min[p] = std::binary_search(partition.lcs1.begin(), partition.lcs1.end(), pool[p]) ? config.k_min_lcs1
                                                                                             : config.k_min_lcs2;
    return aknn_select_pool(dataset, pool, k_min, config);
}

}  // namespace anne
