#pragma once

#include "anne/dataset.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace anne {

/// Isotropic Gaussian class clusters standing in for backbone embeddings.
struct ClusterSpec {
    int class_count = 10;
    std::size_t dim = 32;
    std::size_t samples_per_class = 1000;
    double centroid_separation = 4.0;  // minimum distance between class means
    double intra_class_std = 1.0;      // per-coordinate standard deviation
    int ood_class_count = 0;           // extra clusters used only as an open-set source
    std::uint64_t seed = 0;

    void validate() const;
};

/// Class means (first class_count entries) followed by the open-set means.
/// When everything fits in `dim` the means are equidistant at exactly
/// `centroid_separation`; otherwise they are random directions scaled so the
/// closest pair sits at `centroid_separation`.
std::vector<Vector> cluster_centroids(const ClusterSpec& spec);

/// Clean dataset (true_labels == noisy_labels), samples ordered class by class.
/// Sample ids start at `id_offset`; a held-out split drawn from the same
/// clusters uses a disjoint id range.
Dataset generate_clusters(const ClusterSpec& spec, std::uint64_t id_offset = 0);

/// Id offset used for held-out test splits.
inline constexpr std::uint64_t kTestIdOffset = std::uint64_t{1} << 40;

/// Samples drawn from the open-set clusters; labels index the open-set cluster.
Dataset generate_ood_pool(const ClusterSpec& spec, std::size_t count);

enum class NoiseKind { symmetric, asymmetric, instance_dependent, openset_combined };

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& name);  // throws ConfigError

/// Per-class flip target for asymmetric noise; nullopt leaves a class untouched.
using ClassMapping = std::vector<std::optional<Label>>;

ClassMapping cyclic_mapping(int class_count);

struct NoiseSpec {
    NoiseKind kind = NoiseKind::symmetric;
    double eta = 0.0;
    std::optional<ClassMapping> mapping;  // asymmetric only; default is cyclic
    double rho = 0.0;                     // openset_combined: total noise rate
    double omega = 1.0;                   // openset_combined: closed-set share
    std::uint64_t seed = 0;

    void validate() const;
};

/// Number of samples a rate selects out of `n`: floor(rate * n), robust to
/// products such as 0.6 * 0.5 landing a hair under an integer.
std::size_t count_for_rate(double rate, std::size_t n);

Dataset inject_symmetric(const Dataset& dataset, double eta, std::uint64_t seed);
Dataset inject_asymmetric(const Dataset& dataset, double eta, const ClassMapping& mapping, std::uint64_t seed);
Dataset inject_instance_dependent(const Dataset& dataset, double eta, std::uint64_t seed);
Dataset inject_openset(const Dataset& dataset, const Dataset& ood_pool, double rho, double omega, std::uint64_t seed);

/// Dispatches on `spec.kind`; `ood_pool` is required for openset_combined.
Dataset apply_noise(const Dataset& dataset, const NoiseSpec& spec, const Dataset* ood_pool = nullptr);

}  // namespace anne
