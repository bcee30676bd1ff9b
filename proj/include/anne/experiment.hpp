#pragma once

#include "anne/dataset.hpp"
#include "anne/error.hpp"
#include "anne/noisegen.hpp"
#include "anne/pipeline.hpp"
#include "anne/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace anne {

using json = nlohmann::json;

/// Everything one experiment needs. `seeds` drive data generation, noise and
/// training; the per-component seed fields are overwritten per run.
struct ExperimentConfig {
    std::string name = "custom";
    ClusterSpec cluster;
    std::size_t test_samples_per_class = 200;
    std::size_t ood_pool_size = 5000;  // openset_combined only
    std::optional<std::filesystem::path> train_path;  // use files instead of generating
    std::optional<std::filesystem::path> test_path;
    NoiseSpec noise;
    PipelineConfig pipeline;
    TrainConfig train;
    std::vector<Selector> selectors;  // compare only
    std::vector<std::uint64_t> seeds{1};
    std::filesystem::path out_dir = "out";

    void validate() const;
};

/// Named presets: "bench-sym20", "bench-sym50", "bench-sym80", "bench-sym90",
/// "bench-asym40", "bench-idn20" ... "bench-idn50", "bench-comb-r30-w50",
/// "bench-comb-r30-w100", "bench-comb-r60-w50", "bench-comb-r60-w100".
/// Each preset carries fixed gamma_r / gamma_e values for its noise setting.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

json to_json(const ExperimentConfig& config);
/// Missing fields keep their defaults; a "preset" key selects the base.
/// Throws ConfigError naming the offending field.
ExperimentConfig experiment_from_json(const json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);

json to_json(const SoftmaxModel& model);
SoftmaxModel model_from_json(const json& j);
void save_model(const SoftmaxModel& model, const std::filesystem::path& path);
SoftmaxModel load_model(const std::filesystem::path& path);

json to_json(const SelectionMetrics& m);
json to_json(const EpochRecord& record);
/// Report of a selection: partition sizes, indices, provenance, diagnostics summary.
json selection_report(const SelectionResult& result, const Dataset& dataset, const Selector& selector);

/// Train/test data for one seed: generated (then noised) or loaded from files.
struct ExperimentData {
    Dataset train;
    Dataset test;
};
ExperimentData prepare_data(const ExperimentConfig& config, std::uint64_t seed);

/// Per-component seeds derived from one experiment seed.
ExperimentConfig seeded(const ExperimentConfig& config, std::uint64_t seed);

// Commands. Each writes into config.out_dir (created if missing).

struct GenOutput {
    std::filesystem::path train, test, manifest;
};
GenOutput cmd_gen(const ExperimentConfig& config, std::uint64_t seed);

json cmd_select(const std::filesystem::path& dataset_path, const std::filesystem::path& preds_path,
                const PipelineConfig& pipeline, const std::optional<std::filesystem::path>& report_path);

struct TrainOutput {
    TrainResult result;
    std::filesystem::path model, history, report, predictions;
};
TrainOutput cmd_train(const ExperimentConfig& config, std::uint64_t seed);

json cmd_eval(const std::filesystem::path& model_path, const std::filesystem::path& test_path);

/// One training run summarized for comparison tables.
struct RunSummary {
    Selector selector;
    std::uint64_t seed = 0;
    double test_accuracy = 0.0;
    std::optional<double> clean_f1;        // mean over the last `tail` selection epochs
    std::optional<double> clean_precision;
    std::optional<double> clean_recall;
    std::optional<double> selection_size;
    std::optional<double> mean_k;
};

struct SelectorSummary {
    Selector selector;
    std::vector<RunSummary> runs;  // one per seed, in seed order
    double accuracy_mean = 0.0, accuracy_std = 0.0;
    double f1_mean = 0.0, f1_std = 0.0;
    double selection_size_mean = 0.0, selection_size_std = 0.0;
    double mean_rank = 0.0;  // by test accuracy, 1 = best, ties share the average rank
};

struct ComparisonTable {
    std::vector<SelectorSummary> rows;
    std::vector<std::uint64_t> seeds;
};

inline constexpr std::size_t kSummaryTailEpochs = 10;

RunSummary summarize_run(const Selector& selector, std::uint64_t seed, const TrainResult& result,
                         std::size_t tail = kSummaryTailEpochs);

/// Trains every selector on every seed (shared data per seed) and aggregates.
ComparisonTable run_comparison(const ExperimentConfig& config);

/// Writes compare.csv and compare.json into config.out_dir.
ComparisonTable cmd_compare(const ExperimentConfig& config);

json to_json(const ComparisonTable& table);
std::string to_csv(const ComparisonTable& table);

/// Process exit code for a library error (documented in the README).
int exit_code_for(ErrorKind kind);

}  // namespace anne
