#include "anne/experiment.hpp"

#include "anne/error.hpp"
#include "anne/metrics.hpp"
#include "anne/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace anne {

namespace fs = std::filesystem;

namespace {

// Reads `j[key]` into `out` when present. Type errors name the dotted field.
template <class T>
void read_field(const json& j, const std::string& section, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        fail(ErrorKind::ConfigError, section + "." + key + ": wrong type");
    }
}

void reject_unknown(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) fail(ErrorKind::ConfigError, section + ": expected an object");
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!keys.count(k)) fail(ErrorKind::ConfigError, section + "." + k + ": unknown field");
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::IoFailure, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");
    out << text;
    if (!out) fail(ErrorKind::IoFailure, "write error on " + path.string());
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

json matrix_json(const RowMatrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

RowMatrix matrix_from_json(const json& j, const char* field) {
    try {
        const auto rows = j.get<std::vector<std::vector<double>>>();
        if (rows.empty()) fail(ErrorKind::ConfigError, std::string("model.") + field + ": empty");
        RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != rows[0].size()) fail(ErrorKind::ConfigError, std::string("model.") + field + ": ragged");
            for (std::size_t c = 0; c < rows[r].size(); ++c)
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
        return m;
    } catch (const json::exception&) {
        fail(ErrorKind::ConfigError, std::string("model.") + field + ": expected a matrix");
    }
}

struct Stats {
    double mean = 0.0, std = 0.0;
};

// Sample standard deviation (n - 1); zero for a single value.
Stats stats_of(const std::vector<double>& v) {
    Stats s;
    if (v.empty()) return s;
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    if (v.size() > 1) {
        double sq = 0.0;
        for (double x : v) sq += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(sq / double(v.size() - 1));
    }
    return s;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void ExperimentConfig::validate() const {
    if (!train_path) cluster.validate();
    require(train_path.has_value() == test_path.has_value(), ErrorKind::ConfigError,
            "dataset.train_path and dataset.test_path must be given together");
    require(test_samples_per_class >= 1, ErrorKind::ConfigError, "dataset.test_samples_per_class must be >= 1");
    require(!seeds.empty(), ErrorKind::ConfigError, "seeds: at least one seed required");
    noise.validate();
    if (noise.kind == NoiseKind::openset_combined && !train_path)
        require(cluster.ood_class_count >= 1, ErrorKind::ConfigError,
                "dataset.ood_class_count must be >= 1 for openset_combined noise");
    pipeline.validate();
    train.validate();
}

std::vector<std::string> preset_names() {
    return {"bench-sym20",        "bench-sym50",         "bench-sym80",        "bench-sym90",
            "bench-asym40",       "bench-idn20",         "bench-idn30",        "bench-idn40",
            "bench-idn50",        "bench-comb-r30-w50",  "bench-comb-r30-w100", "bench-comb-r60-w50",
            "bench-comb-r60-w100"};
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig c;
    c.name = name;
    c.out_dir = fs::path("out") / name;
    auto thresholds = [&](double gamma_r, double gamma_e) {
        c.pipeline.gamma_r = gamma_r;
        c.pipeline.gamma_e = gamma_e;
    };
    if (name == "bench-sym20" || name == "bench-sym50" || name == "bench-sym80" || name == "bench-sym90") {
        const int rate = std::stoi(name.substr(9));
        c.noise.kind = NoiseKind::symmetric;
        c.noise.eta = rate / 100.0;
        if (rate == 20 || rate == 50) thresholds(0.9, 0.1);
        if (rate == 80) thresholds(0.8, 0.3);
        if (rate == 90) thresholds(0.8, 0.7);
    } else if (name == "bench-asym40") {
        c.noise.kind = NoiseKind::asymmetric;
        c.noise.eta = 0.4;
        thresholds(0.8, 0.1);
    } else if (name == "bench-idn20" || name == "bench-idn30" || name == "bench-idn40" || name == "bench-idn50") {
        c.noise.kind = NoiseKind::instance_dependent;
        c.noise.eta = std::stoi(name.substr(9)) / 100.0;
        thresholds(0.8, 0.1);
    } else if (name.rfind("bench-comb-r", 0) == 0) {
        const auto w = name.find("-w");
        if (w == std::string::npos) fail(ErrorKind::ConfigError, "preset: unknown preset '" + name + "'");
        const int rho = std::stoi(name.substr(12, w - 12));
        const int omega = std::stoi(name.substr(w + 2));
        if (!((rho == 30 || rho == 60) && (omega == 50 || omega == 100)))
            fail(ErrorKind::ConfigError, "preset: unknown preset '" + name + "'");
        c.noise.kind = NoiseKind::openset_combined;
        c.noise.rho = rho / 100.0;
        c.noise.omega = omega / 100.0;
        c.cluster.ood_class_count = 5;
        thresholds(0.9, 0.1);
    } else {
        fail(ErrorKind::ConfigError, "preset: unknown preset '" + name + "'");
    }
    return c;
}

json to_json(const ExperimentConfig& c) {
    json mapping = nullptr;
    if (c.noise.mapping) {
        mapping = json::array();
        for (const auto& m : *c.noise.mapping) mapping.push_back(m ? json(*m) : json(nullptr));
    }
    json selectors = json::array();
    for (const auto& s : c.selectors) selectors.push_back(to_string(s));
    json dataset = {{"class_count", c.cluster.class_count},
                    {"dim", c.cluster.dim},
                    {"samples_per_class", c.cluster.samples_per_class},
                    {"centroid_separation", c.cluster.centroid_separation},
                    {"intra_class_std", c.cluster.intra_class_std},
                    {"ood_class_count", c.cluster.ood_class_count},
                    {"test_samples_per_class", c.test_samples_per_class},
                    {"ood_pool_size", c.ood_pool_size}};
    if (c.train_path) dataset["train_path"] = c.train_path->string();
    if (c.test_path) dataset["test_path"] = c.test_path->string();
    const auto& a = c.pipeline.aknn;
    const auto& t = c.train;
    return {{"name", c.name},
            {"dataset", dataset},
            {"noise",
             {{"kind", to_string(c.noise.kind)},
              {"eta", c.noise.eta},
              {"mapping", mapping},
              {"rho", c.noise.rho},
              {"omega", c.noise.omega}}},
            {"pipeline",
             {{"gamma_r", c.pipeline.gamma_r},
              {"gamma_e", c.pipeline.gamma_e},
              {"selector", to_string(Selector{c.pipeline.selector.kind})},
              {"fixed_k", c.pipeline.selector.k},
              {"aknn",
               {{"k_min_lcs1", a.k_min_lcs1},
                {"k_min_lcs2", a.k_min_lcs2},
                {"k_min_hcs", a.k_min_hcs},
                {"omega_init", a.omega_init},
                {"delta_s", a.delta_s},
                {"omega_floor", a.omega_floor}}}}},
            {"train",
             {{"epochs", t.epochs},
              {"batch_size", t.batch_size},
              {"learning_rate", t.learning_rate},
              {"momentum", t.momentum},
              {"weight_decay", t.weight_decay},
              {"mixup_alpha", t.mixup_alpha},
              {"aug_sigma", t.aug_sigma},
              {"warmup_epochs", t.warmup_epochs},
              {"consistency_weight", t.consistency_weight},
              {"projection_dim", t.projection_dim},
              {"selection_interval", t.selection_interval}}},
            {"selectors", selectors},
            {"seeds", c.seeds},
            {"out_dir", c.out_dir.string()}};
}

ExperimentConfig experiment_from_json(const json& j) {
    reject_unknown(j, "config", {"preset", "name", "dataset", "noise", "pipeline", "train", "selectors", "seeds", "out_dir"});
    ExperimentConfig c;
    if (j.contains("preset")) {
        std::string name;
        read_field(j, "config", "preset", name);
        c = preset(name);
    }
    read_field(j, "config", "name", c.name);
    if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        reject_unknown(d, "dataset",
                       {"class_count", "dim", "samples_per_class", "centroid_separation", "intra_class_std",
                        "ood_class_count", "test_samples_per_class", "ood_pool_size", "train_path", "test_path"});
        read_field(d, "dataset", "class_count", c.cluster.class_count);
        read_field(d, "dataset", "dim", c.cluster.dim);
        read_field(d, "dataset", "samples_per_class", c.cluster.samples_per_class);
        read_field(d, "dataset", "centroid_separation", c.cluster.centroid_separation);
        read_field(d, "dataset", "intra_class_std", c.cluster.intra_class_std);
        read_field(d, "dataset", "ood_class_count", c.cluster.ood_class_count);
        read_field(d, "dataset", "test_samples_per_class", c.test_samples_per_class);
        read_field(d, "dataset", "ood_pool_size", c.ood_pool_size);
        std::string p;
        if (d.contains("train_path")) {
            read_field(d, "dataset", "train_path", p);
            c.train_path = p;
        }
        if (d.contains("test_path")) {
            read_field(d, "dataset", "test_path", p);
            c.test_path = p;
        }
    }
    if (j.contains("noise")) {
        const auto& n = j["noise"];
        reject_unknown(n, "noise", {"kind", "eta", "mapping", "rho", "omega"});
        if (n.contains("kind")) {
            std::string kind;
            read_field(n, "noise", "kind", kind);
            c.noise.kind = parse_noise_kind(kind);
        }
        read_field(n, "noise", "eta", c.noise.eta);
        read_field(n, "noise", "rho", c.noise.rho);
        read_field(n, "noise", "omega", c.noise.omega);
        if (n.contains("mapping") && !n["mapping"].is_null()) {
            if (!n["mapping"].is_array()) fail(ErrorKind::ConfigError, "noise.mapping: expected an array");
            ClassMapping m;
            for (const auto& v : n["mapping"]) {
                if (v.is_null()) {
                    m.emplace_back();
                } else if (v.is_number_integer()) {
                    m.emplace_back(v.get<Label>());
                } else {
                    fail(ErrorKind::ConfigError, "noise.mapping: entries must be integers or null");
                }
            }
            c.noise.mapping = std::move(m);
        }
    }
    if (j.contains("pipeline")) {
        const auto& p = j["pipeline"];
        reject_unknown(p, "pipeline", {"gamma_r", "gamma_e", "selector", "fixed_k", "aknn"});
        read_field(p, "pipeline", "gamma_r", c.pipeline.gamma_r);
        read_field(p, "pipeline", "gamma_e", c.pipeline.gamma_e);
        if (p.contains("selector")) {
            std::string s;
            read_field(p, "pipeline", "selector", s);
            const auto k = c.pipeline.selector.k;
            c.pipeline.selector = parse_selector(s);
            if (s.find(':') == std::string::npos) c.pipeline.selector.k = k;
        }
        read_field(p, "pipeline", "fixed_k", c.pipeline.selector.k);
        if (p.contains("aknn")) {
            const auto& a = p["aknn"];
            reject_unknown(a, "pipeline.aknn",
                           {"k_min_lcs1", "k_min_lcs2", "k_min_hcs", "omega_init", "delta_s", "omega_floor"});
            read_field(a, "pipeline.aknn", "k_min_lcs1", c.pipeline.aknn.k_min_lcs1);
            read_field(a, "pipeline.aknn", "k_min_lcs2", c.pipeline.aknn.k_min_lcs2);
            read_field(a, "pipeline.aknn", "k_min_hcs", c.pipeline.aknn.k_min_hcs);
            read_field(a, "pipeline.aknn", "omega_init", c.pipeline.aknn.omega_init);
            read_field(a, "pipeline.aknn", "delta_s", c.pipeline.aknn.delta_s);
            read_field(a, "pipeline.aknn", "omega_floor", c.pipeline.aknn.omega_floor);
        }
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        reject_unknown(t, "train",
                       {"epochs", "batch_size", "learning_rate", "momentum", "weight_decay", "mixup_alpha", "aug_sigma",
                        "warmup_epochs", "consistency_weight", "projection_dim", "selection_interval"});
        read_field(t, "train", "epochs", c.train.epochs);
        read_field(t, "train", "batch_size", c.train.batch_size);
        read_field(t, "train", "learning_rate", c.train.learning_rate);
        read_field(t, "train", "momentum", c.train.momentum);
        read_field(t, "train", "weight_decay", c.train.weight_decay);
        read_field(t, "train", "mixup_alpha", c.train.mixup_alpha);
        read_field(t, "train", "aug_sigma", c.train.aug_sigma);
        read_field(t, "train", "warmup_epochs", c.train.warmup_epochs);
        read_field(t, "train", "consistency_weight", c.train.consistency_weight);
        read_field(t, "train", "projection_dim", c.train.projection_dim);
        read_field(t, "train", "selection_interval", c.train.selection_interval);
    }
    if (j.contains("selectors")) {
        if (!j["selectors"].is_array()) fail(ErrorKind::ConfigError, "selectors: expected an array");
        c.selectors.clear();
        for (const auto& s : j["selectors"]) {
            if (!s.is_string()) fail(ErrorKind::ConfigError, "selectors: entries must be strings");
            c.selectors.push_back(parse_selector(s.get<std::string>()));
        }
    }
    read_field(j, "config", "seeds", c.seeds);
    if (j.contains("out_dir")) {
        std::string o;
        read_field(j, "config", "out_dir", o);
        c.out_dir = o;
    }
    c.validate();
    return c;
}

ExperimentConfig load_experiment(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        fail(ErrorKind::ConfigError, path.string() + ": " + e.what());
    }
    return experiment_from_json(j);
}

json to_json(const SoftmaxModel& m) {
    return {{"weights", matrix_json(m.weights)},
            {"bias", std::vector<double>(m.bias.data(), m.bias.data() + m.bias.size())},
            {"projector", matrix_json(m.projector)},
            {"predictor", matrix_json(m.predictor)},
            {"aug_sigma", m.aug_sigma}};
}

SoftmaxModel model_from_json(const json& j) {
    reject_unknown(j, "model", {"weights", "bias", "projector", "predictor", "aug_sigma"});
    for (const char* k : {"weights", "bias", "projector", "predictor", "aug_sigma"})
        if (!j.contains(k)) fail(ErrorKind::ConfigError, std::string("model.") + k + ": missing");
    SoftmaxModel m;
    m.weights = matrix_from_json(j["weights"], "weights");
    std::vector<double> bias;
    read_field(j, "model", "bias", bias);
    m.bias = Eigen::Map<const Vector>(bias.data(), static_cast<Eigen::Index>(bias.size()));
    m.projector = matrix_from_json(j["projector"], "projector");
    m.predictor = matrix_from_json(j["predictor"], "predictor");
    read_field(j, "model", "aug_sigma", m.aug_sigma);
    try {
        m.validate();
    } catch (const Error& e) {
        fail(ErrorKind::ConfigError, std::string("model: ") + e.what());
    }
    return m;
}

void save_model(const SoftmaxModel& model, const fs::path& path) { write_text(path, to_json(model).dump() + "\n"); }

SoftmaxModel load_model(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        fail(ErrorKind::MalformedHeader, path.string() + ": " + e.what());
    }
    return model_from_json(j);
}

json to_json(const SelectionMetrics& m) {
    return {{"precision", m.precision},         {"recall", m.recall},
            {"f1", m.f1},                       {"selection_size", m.selection_size},
            {"clean_rate", m.clean_rate},       {"noisy_precision", m.noisy_precision},
            {"noisy_recall", m.noisy_recall}};
}

json to_json(const EpochRecord& r) {
    json j = {{"epoch", r.epoch},
              {"phase", r.warmup ? "warmup" : "select"},
              {"test_accuracy", r.test_accuracy},
              {"cross_entropy", r.cross_entropy},
              {"consistency", r.consistency},
              {"relabel_count", r.relabel_count},
              {"degenerate_split", r.degenerate_split}};
    j["selection_size"] = r.selection_size ? json(*r.selection_size) : json(nullptr);
    j["noisy_size"] = r.noisy_size ? json(*r.noisy_size) : json(nullptr);
    j["hcs_size"] = r.hcs_size ? json(*r.hcs_size) : json(nullptr);
    j["tau"] = optional_json(r.tau);
    j["mean_k"] = optional_json(r.mean_k);
    j["metrics"] = r.metrics ? to_json(*r.metrics) : json(nullptr);
    return j;
}

json selection_report(const SelectionResult& result, const Dataset& dataset, const Selector& selector) {
    json provenance = json::array();
    std::map<std::string, std::size_t> provenance_counts;
    for (auto p : result.provenance) {
        provenance.push_back(to_string(p));
        ++provenance_counts[to_string(p)];
    }
    json report = {{"selector", to_string(selector)},
                   {"n", result.size()},
                   {"clean_count", result.clean.size()},
                   {"noisy_count", result.noisy.size()},
                   {"relabel_count", result.relabel_count},
                   {"degenerate_split", result.degenerate_split},
                   {"clean", result.clean},
                   {"noisy", result.noisy},
                   {"provenance", provenance},
                   {"provenance_counts", provenance_counts}};
    if (result.partition) {
        const auto& p = *result.partition;
        report["partition"] = {{"tau", p.tau},
                               {"hcs", p.hcs.size()},
                               {"lcs1", p.lcs1.size()},
                               {"lcs2", p.lcs2.size()},
                               {"mu_hcs", p.mu_hcs},
                               {"sigma_hcs", p.sigma_hcs},
                               {"mu_lcs", p.mu_lcs},
                               {"sigma_lcs", p.sigma_lcs},
                               {"mu_all", p.mu_all},
                               {"objective", std::isfinite(p.objective_value) ? json(p.objective_value) : json("inf")}};
    } else {
        report["partition"] = nullptr;
    }
    json diag = {{"mean_k", optional_json(result.mean_k())}};
    std::vector<double> scores;
    for (double s : result.fine_scores)
        if (std::isfinite(s)) scores.push_back(s);
    if (!scores.empty()) {
        const auto st = stats_of(scores);
        diag["fine_score_mean"] = st.mean;
        diag["fine_score_min"] = *std::min_element(scores.begin(), scores.end());
        diag["fine_score_max"] = *std::max_element(scores.begin(), scores.end());
    }
    report["diagnostics"] = diag;
    if (dataset.has_true_labels()) {
        report["metrics"] = to_json(selection_metrics(result, dataset));
        if (result.partition) {
            const auto sub = per_subset_metrics(result, *result.partition, dataset);
            report["metrics_hcs"] = sub.hcs ? to_json(*sub.hcs) : json(nullptr);
            report["metrics_lcs"] = sub.lcs ? to_json(*sub.lcs) : json(nullptr);
        }
    }
    return report;
}

ExperimentConfig seeded(const ExperimentConfig& config, std::uint64_t seed) {
    ExperimentConfig c = config;
    c.cluster.seed = seed;
    c.noise.seed = derive_seed(seed, {tag::noise_select, 0xA});
    c.train.seed = derive_seed(seed, {tag::model_init, 0xB});
    return c;
}

ExperimentData prepare_data(const ExperimentConfig& config, std::uint64_t seed) {
    const ExperimentConfig c = seeded(config, seed);
    if (c.train_path) return {load_dataset(*c.train_path), load_dataset(*c.test_path)};
    const Dataset clean = generate_clusters(c.cluster);
    ClusterSpec test_spec = c.cluster;
    test_spec.samples_per_class = c.test_samples_per_class;
    Dataset test = generate_clusters(test_spec, kTestIdOffset);
    std::optional<Dataset> pool;
    if (c.noise.kind == NoiseKind::openset_combined) pool = generate_ood_pool(c.cluster, c.ood_pool_size);
    return {apply_noise(clean, c.noise, pool ? &*pool : nullptr), std::move(test)};
}

GenOutput cmd_gen(const ExperimentConfig& config, std::uint64_t seed) {
    config.validate();
    ensure_dir(config.out_dir);
    const auto data = prepare_data(config, seed);
    GenOutput out{config.out_dir / "train.anne1", config.out_dir / "test.anne1", config.out_dir / "manifest.json"};
    save_dataset(data.train, out.train);
    save_dataset(data.test, out.test);
    std::size_t corrupted = 0;
    if (data.train.true_labels)
        for (Index i = 0; i < data.train.size(); ++i) corrupted += data.train.noisy_labels[i] != (*data.train.true_labels)[i];
    const json manifest = {{"config", to_json(config)},
                           {"seed", seed},
                           {"train", out.train.filename().string()},
                           {"test", out.test.filename().string()},
                           {"n_train", data.train.size()},
                           {"n_test", data.test.size()},
                           {"observed_noise_rate", data.train.size() ? double(corrupted) / double(data.train.size()) : 0.0}};
    write_text(out.manifest, manifest.dump(2) + "\n");
    return out;
}

json cmd_select(const fs::path& dataset_path, const fs::path& preds_path, const PipelineConfig& pipeline,
                const std::optional<fs::path>& report_path) {
    const Dataset ds = normalize_features(load_dataset(dataset_path));
    const Predictions preds = load_predictions(preds_path);
    const auto result = run_selector(ds, preds, pipeline);
    json report = selection_report(result, ds, pipeline.selector);
    if (report_path) write_text(*report_path, report.dump(2) + "\n");
    return report;
}

TrainOutput cmd_train(const ExperimentConfig& config, std::uint64_t seed) {
    config.validate();
    ensure_dir(config.out_dir);
    const auto data = prepare_data(config, seed);
    const auto c = seeded(config, seed);
    TrainOutput out{train_loop(data.train, data.test, c.pipeline, c.train), config.out_dir / "model.json",
                    config.out_dir / "history.jsonl", config.out_dir / "report.json",
                    config.out_dir / "predictions.anne1p"};
    save_model(out.result.model, out.model);
    std::string lines;
    for (const auto& rec : out.result.history) lines += to_json(rec).dump() + "\n";
    write_text(out.history, lines);

    const Dataset train = normalize_features(data.train);
    save_predictions(predict_probs(out.result.model, train, static_cast<int>(c.train.epochs)), out.predictions);

    const auto summary = summarize_run(c.pipeline.selector, seed, out.result);
    json report = {{"config", to_json(config)},
                   {"seed", seed},
                   {"final_test_accuracy", out.result.history.back().test_accuracy},
                   {"clean_f1_tail_mean", optional_json(summary.clean_f1)},
                   {"selection_size_tail_mean", optional_json(summary.selection_size)},
                   {"mean_k_tail_mean", optional_json(summary.mean_k)}};
    if (out.result.last_selection) {
        json sel = selection_report(*out.result.last_selection, train, c.pipeline.selector);
        sel.erase("clean");
        sel.erase("noisy");
        sel.erase("provenance");
        report["last_selection"] = sel;
    }
    write_text(out.report, report.dump(2) + "\n");
    return out;
}

json cmd_eval(const fs::path& model_path, const fs::path& test_path) {
    const auto model = load_model(model_path);
    const auto test = normalize_features(load_dataset(test_path));
    return {{"accuracy", evaluate_accuracy(model, test)}, {"n", test.size()}};
}

RunSummary summarize_run(const Selector& selector, std::uint64_t seed, const TrainResult& result, std::size_t tail) {
    RunSummary s{selector, seed, result.history.empty() ? 0.0 : result.history.back().test_accuracy, {}, {}, {}, {}, {}};
    std::vector<const EpochRecord*> sel;
    for (const auto& r : result.history)
        if (!r.warmup) sel.push_back(&r);
    if (sel.size() > tail) sel.erase(sel.begin(), sel.end() - static_cast<std::ptrdiff_t>(tail));
    std::vector<double> f1, prec, rec, size, k;
    for (const auto* r : sel) {
        if (r->metrics) {
            f1.push_back(r->metrics->f1);
            prec.push_back(r->metrics->precision);
            rec.push_back(r->metrics->recall);
        }
        if (r->selection_size) size.push_back(double(*r->selection_size));
        if (r->mean_k) k.push_back(*r->mean_k);
    }
    auto mean = [](const std::vector<double>& v) -> std::optional<double> {
        if (v.empty()) return std::nullopt;
        return stats_of(v).mean;
    };
    s.clean_f1 = mean(f1);
    s.clean_precision = mean(prec);
    s.clean_recall = mean(rec);
    s.selection_size = mean(size);
    s.mean_k = mean(k);
    return s;
}

ComparisonTable run_comparison(const ExperimentConfig& config) {
    config.validate();
    require(!config.selectors.empty(), ErrorKind::ConfigError, "selectors: at least one selector required");
    ComparisonTable table;
    table.seeds = config.seeds;
    for (const auto& s : config.selectors) table.rows.push_back(SelectorSummary{s, {}, 0, 0, 0, 0, 0, 0, 0});

    for (std::uint64_t seed : config.seeds) {
        const auto data = prepare_data(config, seed);
        const auto c = seeded(config, seed);
        for (auto& row : table.rows) {
            PipelineConfig p = c.pipeline;
            p.selector = row.selector;
            row.runs.push_back(summarize_run(row.selector, seed, train_loop(data.train, data.test, p, c.train)));
        }
    }

    std::vector<double> rank_sum(table.rows.size(), 0.0);
    for (std::size_t s = 0; s < table.seeds.size(); ++s) {
        for (std::size_t a = 0; a < table.rows.size(); ++a) {
            const double acc = table.rows[a].runs[s].test_accuracy;
            std::size_t better = 0, equal = 0;
            for (std::size_t b = 0; b < table.rows.size(); ++b) {
                const double other = table.rows[b].runs[s].test_accuracy;
                better += other > acc;
                equal += other == acc;
            }
            rank_sum[a] += double(better) + (double(equal) + 1.0) / 2.0;
        }
    }
    for (std::size_t a = 0; a < table.rows.size(); ++a) {
        auto& row = table.rows[a];
        std::vector<double> acc, f1, size;
        for (const auto& r : row.runs) {
            acc.push_back(r.test_accuracy);
            f1.push_back(r.clean_f1.value_or(0.0));
            size.push_back(r.selection_size.value_or(0.0));
        }
        const auto sa = stats_of(acc), sf = stats_of(f1), ss = stats_of(size);
        row.accuracy_mean = sa.mean;
        row.accuracy_std = sa.std;
        row.f1_mean = sf.mean;
        row.f1_std = sf.std;
        row.selection_size_mean = ss.mean;
        row.selection_size_std = ss.std;
        row.mean_rank = rank_sum[a] / double(table.seeds.size());
    }
    return table;
}

json to_json(const ComparisonTable& table) {
    json rows = json::array();
    for (const auto& row : table.rows) {
        json runs = json::array();
        for (const auto& r : row.runs)
            runs.push_back({{"seed", r.seed},
                            {"test_accuracy", r.test_accuracy},
                            {"clean_f1", optional_json(r.clean_f1)},
                            {"clean_precision", optional_json(r.clean_precision)},
                            {"clean_recall", optional_json(r.clean_recall)},
                            {"selection_size", optional_json(r.selection_size)},
                            {"mean_k", optional_json(r.mean_k)}});
        rows.push_back({{"selector", to_string(row.selector)},
                        {"accuracy_mean", row.accuracy_mean},
                        {"accuracy_std", row.accuracy_std},
                        {"f1_mean", row.f1_mean},
                        {"f1_std", row.f1_std},
                        {"selection_size_mean", row.selection_size_mean},
                        {"selection_size_std", row.selection_size_std},
                        {"mean_rank", row.mean_rank},
                        {"runs", runs}});
    }
    return {{"seeds", table.seeds}, {"rows", rows}};
}

std::string to_csv(const ComparisonTable& table) {
    std::ostringstream out;
    out.precision(6);
    out << std::fixed;
    out << "selector,accuracy_mean,accuracy_std,f1_mean,f1_std,selection_size_mean,selection_size_std,mean_rank\n";
    for (const auto& r : table.rows)
        out << to_string(r.selector) << ',' << r.accuracy_mean << ',' << r.accuracy_std << ',' << r.f1_mean << ','
            << r.f1_std << ',' << r.selection_size_mean << ',' << r.selection_size_std << ',' << r.mean_rank << '\n';
    return out.str();
}

ComparisonTable cmd_compare(const ExperimentConfig& config) {
    auto table = run_comparison(config);
    ensure_dir(config.out_dir);
    write_text(config.out_dir / "compare.json", to_json(table).dump(2) + "\n");
    write_text(config.out_dir / "compare.csv", to_csv(table));
    return table;
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ConfigError:
        case ErrorKind::InvalidSpec:
        case ErrorKind::InvalidMapping:
        case ErrorKind::InvalidArgument:
            return 2;
        case ErrorKind::IoFailure:
        case ErrorKind::MalformedHeader:
        case ErrorKind::SizeMismatch:
        case ErrorKind::NonFiniteFeature:
            return 3;
        case ErrorKind::LengthMismatch:
        case ErrorKind::DimensionMismatch:
        case ErrorKind::MissingTrueLabels:
        case ErrorKind::InsufficientOodPool:
            return 4;
        default:
            return 5;
    }
}

}  // namespace anne
