#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace anne {

/// SplitMix64 generator. Cheap to construct, which makes per-sample streams
/// keyed by (seed, sample id) practical.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a root seed and a list of keys
/// (sample id, epoch, batch, purpose tag...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ULL);
    for (std::uint64_t k : keys) h = mix64(h ^ (k + 0x632be59bd9b4e019ULL + (h << 6) + (h >> 2)));
    return h;
}

inline SplitMix64 stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
    return SplitMix64(derive_seed(seed, keys));
}

/// Uniform double in [0, 1) with 53 random bits.
template <class Urbg>
double uniform01(Urbg& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n).
template <class Urbg>
std::uint64_t uniform_below(Urbg& g, std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(g);
}

template <class Urbg>
double standard_normal(Urbg& g) {
    return std::normal_distribution<double>(0.0, 1.0)(g);
}

template <class Urbg>
double beta_sample(Urbg& g, double alpha, double beta) {
    const double x = std::gamma_distribution<double>(alpha, 1.0)(g);
    const double y = std::gamma_distribution<double>(beta, 1.0)(g);
    return x / (x + y);
}

// Stream purpose tags; keep distinct so streams never collide.
namespace tag {
inline constexpr std::uint64_t cluster_centroids = 1;
inline constexpr std::uint64_t cluster_sample = 2;
inline constexpr std::uint64_t noise_select = 3;
inline constexpr std::uint64_t noise_target = 4;
inline constexpr std::uint64_t noise_rate = 5;
inline constexpr std::uint64_t ood_rows = 6;
inline constexpr std::uint64_t model_init = 7;
inline constexpr std::uint64_t epoch_shuffle = 8;
inline constexpr std::uint64_t oversample = 9;
inline constexpr std::uint64_t mixup = 10;
inline constexpr std::uint64_t augment = 11;
inline constexpr std::uint64_t ood_pool = 12;
inline constexpr std::uint64_t test_split = 13;
}  // namespace tag

}  // namespace anne
