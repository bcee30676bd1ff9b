#pragma once

#include "anne/dataset.hpp"
#include "anne/error.hpp"

#include <doctest.h>

#include <filesystem>
#include <unistd.h>
#include <random>
#include <string>
#include <vector>

#define CHECK_ANNE_ERROR(expr, expected_kind)                                                   \
    do {                                                                                        \
        try {                                                                                   \
            (void)(expr);                                                                       \
            FAIL_CHECK("expected " << anne::to_string(expected_kind) << ", nothing was thrown"); \
        } catch (const anne::Error& e_) {                                                       \
            CHECK(anne::to_string(e_.kind()) == anne::to_string(expected_kind));                \
        }                                                                                       \
    } while (0)

namespace testing {

inline anne::Dataset make_dataset(const std::vector<std::vector<double>>& rows, std::vector<anne::Label> labels,
                                  int class_count, std::optional<std::vector<anne::Label>> truth = std::nullopt) {
    anne::Dataset ds;
    ds.dim = rows.empty() ? 0 : rows[0].size();
    ds.class_count = class_count;
    for (const auto& r : rows)
        for (double v : r) ds.features.push_back(static_cast<float>(v));
    ds.noisy_labels = std::move(labels);
    ds.true_labels = std::move(truth);
    for (std::size_t i = 0; i < rows.size(); ++i) ds.sample_ids.push_back(i);
    return ds;
}

/// Points scattered tightly around `center` (per-coordinate jitter `spread`).
inline std::vector<std::vector<double>> blob(const std::vector<double>& center, std::size_t count, double spread,
                                             std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, spread);
    std::vector<std::vector<double>> out(count, center);
    for (auto& r : out)
        for (double& v : r) v += n(rng);
    return out;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& name) {
        path_ = std::filesystem::temp_directory_path() / ("anne-test-" + name + "-" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

}  // namespace testing
