#include "anne/fine.hpp"

#include "anne/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace anne {

EigenPair class_dominant_eigenvector(const RowMatrix& class_features) {
    const Eigen::Index m = class_features.rows();
    const Eigen::Index d = class_features.cols();
    require(m >= 2, ErrorKind::InsufficientSamples, "need at least two samples, got " + std::to_string(m));
    require(d >= 1, ErrorKind::InvalidArgument, "zero-dimensional features");

    const Eigen::MatrixXd gram = (class_features.transpose() * class_features) / double(m);

    Vector v = class_features.colwise().mean().transpose();
    if (v.norm() < 1e-12) {
        v = Vector::Zero(d);
        v(0) = 1.0;
    }
    v.normalize();

    EigenPair out;
    bool converged = false;
    for (std::size_t it = 1; it <= kPowerIterationLimit; ++it) {
        Vector next = gram * v;
        const double norm = next.norm();
        if (norm == 0.0) {
            // v lies in the null space: the Gram matrix is zero along it
            out.iterations = it;
            converged = true;
            break;
        }
        next /= norm;
        const double step = (next - v).norm();
        v = std::move(next);
        out.iterations = it;
        if (step < kPowerIterationTolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) fail(ErrorKind::NoConvergence, "power iteration did not settle within the iteration limit");

    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.value = std::max(0.0, v.dot(gram * v));
    out.vector = std::move(v);
    return out;
}

double alignment_score(std::span<const double> f, std::span<const double> u) {
    require(f.size() == u.size(), ErrorKind::DimensionMismatch, "alignment_score: length mismatch");
    double dot = 0.0, ff = 0.0, uu = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
        dot += f[k] * u[k];
        ff += f[k] * f[k];
        uu += u[k] * u[k];
    }
    require(std::abs(std::sqrt(ff) - 1.0) <= 1e-4 && std::abs(std::sqrt(uu) - 1.0) <= 1e-4, ErrorKind::NotNormalized,
            "alignment_score expects unit vectors");
    return std::clamp(dot * dot, 0.0, 1.0);
}

FineSelection fine_select(std::span<const Index> subset, const Dataset& dataset, double gamma_e) {
    if (subset.empty()) fail(ErrorKind::EmptySubset, "FINE subset is empty");
    require(gamma_e >= 0.0 && gamma_e <= 1.0, ErrorKind::InvalidArgument, "gamma_e must be in [0,1]");

    FineSelection out;
    out.members.assign(subset.begin(), subset.end());
    std::sort(out.members.begin(), out.members.end());
    out.scores.assign(out.members.size(), std::numeric_limits<double>::quiet_NaN());

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(dataset.class_count));
    for (std::size_t p = 0; p < out.members.size(); ++p)
        by_class[static_cast<std::size_t>(dataset.noisy_labels[out.members[p]])].push_back(p);

    std::vector<double> f(dataset.dim);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const auto& positions = by_class[c];
        if (positions.empty()) continue;
        if (positions.size() < 2) {
            for (std::size_t p : positions) out.clean.push_back(out.members[p]);
            continue;
        }
        std::vector<Index> rows;
        rows.reserve(positions.size());
        for (std::size_t p : positions) rows.push_back(out.members[p]);
        const RowMatrix feats = dataset.feature_matrix(rows);
        ClassEigenbasis basis{static_cast<Label>(c), class_dominant_eigenvector(feats), rows.size()};
        const std::span<const double> u(basis.pair.vector.data(), dataset.dim);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (std::size_t k = 0; k < dataset.dim; ++k) f[k] = feats(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
            const double score = alignment_score(f, u);
            out.scores[positions[r]] = score;
            (score >= gamma_e ? out.clean : out.noisy).push_back(rows[r]);
        }
        out.bases.push_back(std::move(basis));
    }
    std::sort(out.clean.begin(), out.clean.end());
    std::sort(out.noisy.begin(), out.noisy.end());
    return out;
}

}  // namespace anne
