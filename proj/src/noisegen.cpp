#include "anne/noisegen.hpp"

#include "anne/error.hpp"
#include "anne/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace anne {

void ClusterSpec::validate() const {
    require(class_count >= 2, ErrorKind::InvalidSpec, "class_count must be >= 2");
    require(dim >= 1, ErrorKind::InvalidSpec, "dim must be >= 1");
    require(samples_per_class >= 1, ErrorKind::InvalidSpec, "samples_per_class must be >= 1");
    require(centroid_separation > 0.0, ErrorKind::InvalidSpec, "centroid_separation must be > 0");
    require(intra_class_std >= 0.0, ErrorKind::InvalidSpec, "intra_class_std must be >= 0");
    require(ood_class_count >= 0, ErrorKind::InvalidSpec, "ood_class_count must be >= 0");
}

std::vector<Vector> cluster_centroids(const ClusterSpec& spec) {
    spec.validate();
    const auto count = static_cast<std::size_t>(spec.class_count + spec.ood_class_count);
    const auto d = static_cast<Eigen::Index>(spec.dim);
    auto g = stream(spec.seed, {tag::cluster_centroids});

    std::vector<Vector> dirs;
    dirs.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
        Vector v(d);
        for (Eigen::Index k = 0; k < d; ++k) v(k) = standard_normal(g);
        if (count <= spec.dim) {
            // Gram-Schmidt: orthonormal means, pairwise distance = scale * sqrt(2)
            for (const auto& u : dirs) v -= u.dot(v) * u;
        }
        v.normalize();
        dirs.push_back(std::move(v));
    }

    double scale = 0.0;
    if (count <= spec.dim) {
        scale = spec.centroid_separation / std::sqrt(2.0);
    } else {
        double closest = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < count; ++a)
            for (std::size_t b = a + 1; b < count; ++b) closest = std::min(closest, (dirs[a] - dirs[b]).norm());
        scale = spec.centroid_separation / closest;
    }
    for (auto& v : dirs) v *= scale;
    return dirs;
}

namespace {

Dataset sample_clusters(const ClusterSpec& spec, const std::vector<Vector>& means, std::span<const Label> cluster_of,
                        std::uint64_t id_offset, int class_count, std::uint64_t stream_tag) {
    Dataset ds;
    ds.dim = spec.dim;
    ds.class_count = class_count;
    const auto n = cluster_of.size();
    ds.features.resize(n * spec.dim);
    ds.noisy_labels.assign(cluster_of.begin(), cluster_of.end());
    ds.sample_ids.resize(n);
    for (Index i = 0; i < n; ++i) {
        const auto id = id_offset + i;
        ds.sample_ids[i] = id;
        auto g = stream(spec.seed, {stream_tag, id});
        const Vector& mu = means[static_cast<std::size_t>(cluster_of[i])];
        for (std::size_t k = 0; k < spec.dim; ++k)
            ds.features[i * spec.dim + k] =
                static_cast<float>(mu(static_cast<Eigen::Index>(k)) + spec.intra_class_std * standard_normal(g));
    }
    return ds;
}

}  // namespace

Dataset generate_clusters(const ClusterSpec& spec, std::uint64_t id_offset) {
    const auto means = cluster_centroids(spec);
    std::vector<Label> cluster_of;
    cluster_of.reserve(spec.samples_per_class * static_cast<std::size_t>(spec.class_count));
    for (Label c = 0; c < spec.class_count; ++c) cluster_of.insert(cluster_of.end(), spec.samples_per_class, c);
    Dataset ds = sample_clusters(spec, means, cluster_of, id_offset, spec.class_count, tag::cluster_sample);
    ds.true_labels = ds.noisy_labels;
    return ds;
}

Dataset generate_ood_pool(const ClusterSpec& spec, std::size_t count) {
    require(spec.ood_class_count >= 1, ErrorKind::InvalidSpec, "ood_class_count must be >= 1 for an open-set pool");
    require(count >= 1, ErrorKind::InvalidSpec, "open-set pool size must be >= 1");
    const auto means = cluster_centroids(spec);
    std::vector<Label> cluster_of(count);
    for (Index i = 0; i < count; ++i) cluster_of[i] = spec.class_count + static_cast<Label>(i % spec.ood_class_count);
    Dataset ds = sample_clusters(spec, means, cluster_of, 0, spec.class_count + spec.ood_class_count, tag::ood_pool);
    for (auto& y : ds.noisy_labels) y -= spec.class_count;
    ds.class_count = std::max(2, spec.ood_class_count);
    return ds;
}

std::string to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::symmetric: return "symmetric";
        case NoiseKind::asymmetric: return "asymmetric";
        case NoiseKind::instance_dependent: return "instance_dependent";
        case NoiseKind::openset_combined: return "openset_combined";
    }
    return "symmetric";
}

NoiseKind parse_noise_kind(const std::string& name) {
    if (name == "symmetric") return NoiseKind::symmetric;
    if (name == "asymmetric") return NoiseKind::asymmetric;
    if (name == "instance_dependent") return NoiseKind::instance_dependent;
    if (name == "openset_combined") return NoiseKind::openset_combined;
    fail(ErrorKind::ConfigError, "noise.kind: unknown noise kind '" + name + "'");
}

ClassMapping cyclic_mapping(int class_count) {
    ClassMapping m(static_cast<std::size_t>(class_count));
    for (int c = 0; c < class_count; ++c) m[static_cast<std::size_t>(c)] = static_cast<Label>((c + 1) % class_count);
    return m;
}

void NoiseSpec::validate() const {
    require(eta >= 0.0 && eta < 1.0, ErrorKind::InvalidSpec, "eta must be in [0,1)");
    if (kind == NoiseKind::openset_combined) {
        require(rho >= 0.0 && omega >= 0.0 && omega <= 1.0, ErrorKind::InvalidSpec, "rho/omega out of range");
        require(rho * omega <= 1.0 && rho * (1.0 - omega) <= 1.0, ErrorKind::InvalidSpec,
                "rho*omega and rho*(1-omega) must lie in [0,1]");
    }
}

std::size_t count_for_rate(double rate, std::size_t n) {
    return static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 1e-9));
}

namespace {

const std::vector<Label>& require_true_labels(const Dataset& ds) {
    if (!ds.true_labels) fail(ErrorKind::MissingTrueLabels, "noise injection needs true_labels");
    return *ds.true_labels;
}

/// Orders `candidates` by a per-sample key hashed from (seed, sample id), so
/// the chosen subset does not depend on row order.
std::vector<Index> rank_by_key(const Dataset& ds, std::vector<Index> candidates, std::uint64_t seed) {
    std::vector<std::pair<std::uint64_t, Index>> keyed;
    keyed.reserve(candidates.size());
    for (Index i : candidates) keyed.emplace_back(derive_seed(seed, {tag::noise_select, ds.sample_ids[i]}), i);
    std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return ds.sample_ids[a.second] < ds.sample_ids[b.second];
    });
    for (std::size_t k = 0; k < keyed.size(); ++k) candidates[k] = keyed[k].second;
    return candidates;
}

Label symmetric_target(Label from, int class_count, std::uint64_t seed, std::uint64_t id) {
    auto g = stream(seed, {tag::noise_target, id});
    auto t = static_cast<Label>(uniform_below(g, static_cast<std::uint64_t>(class_count - 1)));
    return t >= from ? t + 1 : t;
}

std::vector<Index> in_distribution(const Dataset& ds) {
    const auto& truth = *ds.true_labels;
    std::vector<Index> out;
    for (Index i = 0; i < ds.size(); ++i)
        if (truth[i] < ds.class_count) out.push_back(i);
    return out;
}

}  // namespace

Dataset inject_symmetric(const Dataset& dataset, double eta, std::uint64_t seed) {
    const auto& truth = require_true_labels(dataset);
    require(eta >= 0.0 && eta < 1.0, ErrorKind::InvalidSpec, "eta must be in [0,1)");
    Dataset out = dataset;
    auto eligible = in_distribution(dataset);
    for (Index i : eligible) out.noisy_labels[i] = truth[i];
    const auto ranked = rank_by_key(dataset, eligible, seed);
    const auto flips = count_for_rate(eta, eligible.size());
    for (std::size_t k = 0; k < flips; ++k) {
        const Index i = ranked[k];
        out.noisy_labels[i] = symmetric_target(truth[i], dataset.class_count, seed, dataset.sample_ids[i]);
    }
    return out;
}

Dataset inject_asymmetric(const Dataset& dataset, double eta, const ClassMapping& mapping, std::uint64_t seed) {
    const auto& truth = require_true_labels(dataset);
    require(eta >= 0.0 && eta < 1.0, ErrorKind::InvalidSpec, "eta must be in [0,1)");
    require(mapping.size() == static_cast<std::size_t>(dataset.class_count), ErrorKind::InvalidMapping,
            "mapping must have one entry per class");
    for (std::size_t c = 0; c < mapping.size(); ++c) {
        if (!mapping[c]) continue;
        require(*mapping[c] >= 0 && *mapping[c] < dataset.class_count, ErrorKind::InvalidMapping,
                "class " + std::to_string(c) + " maps outside the label range");
        if (eta > 0.0)
            require(*mapping[c] != static_cast<Label>(c), ErrorKind::InvalidMapping,
                    "class " + std::to_string(c) + " maps to itself");
    }
    Dataset out = dataset;
    std::vector<Index> eligible;
    for (Index i : in_distribution(dataset)) {
        out.noisy_labels[i] = truth[i];
        if (mapping[static_cast<std::size_t>(truth[i])]) eligible.push_back(i);
    }
    const auto ranked = rank_by_key(dataset, eligible, seed);
    const auto flips = count_for_rate(eta, eligible.size());
    for (std::size_t k = 0; k < flips; ++k) {
        const Index i = ranked[k];
        out.noisy_labels[i] = *mapping[static_cast<std::size_t>(truth[i])];
    }
    return out;
}

Dataset inject_instance_dependent(const Dataset& dataset, double eta, std::uint64_t seed) {
    const auto& truth = require_true_labels(dataset);
    require(eta >= 0.0 && eta < 1.0, ErrorKind::InvalidSpec, "eta must be in [0,1)");
    const int C = dataset.class_count;
    const auto d = static_cast<Eigen::Index>(dataset.dim);

    std::vector<Vector> centroid(static_cast<std::size_t>(C), Vector::Zero(d));
    std::vector<std::size_t> members(static_cast<std::size_t>(C), 0);
    for (Index i = 0; i < dataset.size(); ++i) {
        if (truth[i] >= C) continue;
        auto r = dataset.row(i);
        auto& mu = centroid[static_cast<std::size_t>(truth[i])];
        for (Eigen::Index k = 0; k < d; ++k) mu(k) += r[static_cast<std::size_t>(k)];
        ++members[static_cast<std::size_t>(truth[i])];
    }
    for (int c = 0; c < C; ++c)
        if (members[static_cast<std::size_t>(c)] > 0) centroid[static_cast<std::size_t>(c)] /= double(members[static_cast<std::size_t>(c)]);

    Dataset out = dataset;
    const double sd = eta / 4.0;
    for (Index i : in_distribution(dataset)) {
        const Label y = truth[i];
        out.noisy_labels[i] = y;
        if (eta == 0.0) continue;
        auto g = stream(seed, {tag::noise_rate, dataset.sample_ids[i]});
        double q = 0.0;
        do {
            q = eta + sd * standard_normal(g);
        } while (q < 0.0 || q >= 1.0);
        if (uniform01(g) >= q) continue;

        Vector x(d);
        auto r = dataset.row(i);
        for (Eigen::Index k = 0; k < d; ++k) x(k) = r[static_cast<std::size_t>(k)];
        Label best = -1;
        double best_dist = std::numeric_limits<double>::infinity();
        for (Label c = 0; c < C; ++c) {
            if (c == y || members[static_cast<std::size_t>(c)] == 0) continue;
            const double dist = (x - centroid[static_cast<std::size_t>(c)]).squaredNorm();
            if (dist < best_dist) {
                best_dist = dist;
                best = c;
            }
        }
        if (best >= 0) out.noisy_labels[i] = best;
    }
    return out;
}

Dataset inject_openset(const Dataset& dataset, const Dataset& ood_pool, double rho, double omega, std::uint64_t seed) {
    const auto& truth = require_true_labels(dataset);
    require(ood_pool.dim == dataset.dim, ErrorKind::DimensionMismatch,
            "open-set pool dim " + std::to_string(ood_pool.dim) + " != dataset dim " + std::to_string(dataset.dim));
    require(rho >= 0.0 && omega >= 0.0 && omega <= 1.0 && rho * omega <= 1.0 && rho * (1.0 - omega) <= 1.0,
            ErrorKind::InvalidSpec, "rho/omega out of range");

    auto eligible = in_distribution(dataset);
    const auto closed = count_for_rate(rho * omega, eligible.size());
    const auto open = count_for_rate(rho * (1.0 - omega), eligible.size());
    require(closed + open <= eligible.size(), ErrorKind::InvalidSpec, "rho selects more samples than available");
    require(open <= ood_pool.size(), ErrorKind::InsufficientOodPool,
            "need " + std::to_string(open) + " open-set rows, pool has " + std::to_string(ood_pool.size()));

    Dataset out = dataset;
    for (Index i : eligible) out.noisy_labels[i] = truth[i];
    const auto ranked = rank_by_key(dataset, eligible, seed);
    for (std::size_t k = 0; k < closed; ++k) {
        const Index i = ranked[k];
        out.noisy_labels[i] = symmetric_target(truth[i], dataset.class_count, seed, dataset.sample_ids[i]);
    }

    std::vector<Index> pool_rows(ood_pool.size());
    std::iota(pool_rows.begin(), pool_rows.end(), Index{0});
    std::mt19937_64 shuffler(derive_seed(seed, {tag::ood_rows}));
    std::shuffle(pool_rows.begin(), pool_rows.end(), shuffler);
    for (std::size_t k = 0; k < open; ++k) {
        const Index i = ranked[closed + k];
        auto src = ood_pool.row(pool_rows[k]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
        auto g = stream(seed, {tag::ood_rows, dataset.sample_ids[i]});
        out.noisy_labels[i] = static_cast<Label>(uniform_below(g, static_cast<std::uint64_t>(dataset.class_count)));
        (*out.true_labels)[i] = dataset.ood_label();
    }
    return out;
}

Dataset apply_noise(const Dataset& dataset, const NoiseSpec& spec, const Dataset* ood_pool) {
    spec.validate();
    switch (spec.kind) {
        case NoiseKind::symmetric: return inject_symmetric(dataset, spec.eta, spec.seed);
        case NoiseKind::asymmetric:
            return inject_asymmetric(dataset, spec.eta, spec.mapping ? *spec.mapping : cyclic_mapping(dataset.class_count),
                                     spec.seed);
        case NoiseKind::instance_dependent: return inject_instance_dependent(dataset, spec.eta, spec.seed);
        case NoiseKind::openset_combined:
            require(ood_pool != nullptr, ErrorKind::InsufficientOodPool, "openset_combined needs an open-set pool");
            return inject_openset(dataset, *ood_pool, spec.rho, spec.omega, spec.seed);
    }
    return dataset;
}

}  // namespace anne
