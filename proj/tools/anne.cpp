// Command-line front end: gen, select, train, eval, compare.
#include "anne/error.hpp"
#include "anne/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>

namespace {

struct Common {
    std::string config;
    std::string preset;
    std::string out;
    std::string selector;
    std::optional<std::size_t> k;
    std::optional<std::size_t> epochs;
};

anne::ExperimentConfig resolve(const Common& o) {
    anne::ExperimentConfig c;
    if (!o.config.empty() && !o.preset.empty())
        anne::fail(anne::ErrorKind::ConfigError, "--config and --preset are mutually exclusive");
    if (!o.config.empty()) c = anne::load_experiment(o.config);
    else if (!o.preset.empty()) c = anne::preset(o.preset);
    if (!o.out.empty()) c.out_dir = o.out;
    if (!o.selector.empty()) c.pipeline.selector = anne::parse_selector(o.selector);
    if (o.k) c.pipeline.selector.k = *o.k;
    if (o.epochs) c.train.epochs = *o.epochs;
    c.validate();
    return c;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            seeds.push_back(std::stoull(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            anne::fail(anne::ErrorKind::ConfigError, "--seeds: not an integer: '" + item + "'");
        }
    }
    return seeds;
}

void add_common(CLI::App* cmd, Common& o) {
    cmd->add_option("--config", o.config, "experiment JSON file");
    cmd->add_option("--preset", o.preset, "named benchmark preset");
    cmd->add_option("--out", o.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Noisy-label sample selection and robust training"};
    app.require_subcommand(1);

    Common gen_opts;
    std::uint64_t gen_seed = 1;
    auto* gen = app.add_subcommand("gen", "generate a noisy train split and a clean test split");
    add_common(gen, gen_opts);
    gen->add_option("--seed", gen_seed, "experiment seed");

    std::string sel_dataset, sel_preds, sel_config, sel_selector = "anne", sel_out;
    std::optional<std::size_t> sel_k;
    std::optional<double> sel_gamma_r, sel_gamma_e;
    auto* sel = app.add_subcommand("select", "split a dataset into clean and noisy given predictions");
    sel->add_option("--dataset", sel_dataset, "ANNE1 dataset")->required();
    sel->add_option("--preds", sel_preds, "ANNE1P predictions")->required();
    sel->add_option("--config", sel_config, "experiment JSON (pipeline section is used)");
    sel->add_option("--selector", sel_selector, "selector name, e.g. anne or fixed_knn:200");
    sel->add_option("--K", sel_k, "neighborhood size for fixed_knn");
    sel->add_option("--gamma-r", sel_gamma_r, "relabel threshold");
    sel->add_option("--gamma-e", sel_gamma_e, "eigenvector alignment threshold");
    sel->add_option("--out", sel_out, "write the report to this file");

    Common train_opts;
    std::uint64_t train_seed = 1;
    auto* train = app.add_subcommand("train", "train a model with per-epoch sample selection");
    add_common(train, train_opts);
    train->add_option("--seed", train_seed, "experiment seed");
    train->add_option("--selector", train_opts.selector, "selector name");
    train->add_option("--K", train_opts.k, "neighborhood size for fixed_knn");
    train->add_option("--epochs", train_opts.epochs, "override the epoch count");

    std::string eval_model, eval_test;
    auto* eval = app.add_subcommand("eval", "test accuracy of a saved model");
    eval->add_option("--model", eval_model, "model JSON")->required();
    eval->add_option("--test", eval_test, "ANNE1 test split")->required();

    Common cmp_opts;
    std::string cmp_seeds, cmp_selectors;
    auto* cmp = app.add_subcommand("compare", "train several selectors over several seeds");
    add_common(cmp, cmp_opts);
    cmp->add_option("--seeds", cmp_seeds, "comma-separated seeds");
    cmp->add_option("--selectors", cmp_selectors, "comma-separated selector names");
    cmp->add_option("--epochs", cmp_opts.epochs, "override the epoch count");

    app.add_subcommand("presets", "list preset names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*gen) {
            const auto out = anne::cmd_gen(resolve(gen_opts), gen_seed);
            std::cout << anne::json{{"train", out.train.string()},
                                    {"test", out.test.string()},
                                    {"manifest", out.manifest.string()}}.dump(2)
                      << "\n";
        } else if (*sel) {
            anne::PipelineConfig p;
            if (!sel_config.empty()) p = anne::load_experiment(sel_config).pipeline;
            if (!sel_config.empty() && sel->count("--selector") == 0) sel_selector = anne::to_string(p.selector);
            p.selector = anne::parse_selector(sel_selector);
            if (sel_k) p.selector.k = *sel_k;
            if (sel_gamma_r) p.gamma_r = *sel_gamma_r;
            if (sel_gamma_e) p.gamma_e = *sel_gamma_e;
            p.validate();
            std::optional<std::filesystem::path> report;
            if (!sel_out.empty()) report = sel_out;
            auto j = anne::cmd_select(sel_dataset, sel_preds, p, report);
            j.erase("clean");
            j.erase("noisy");
            j.erase("provenance");
            std::cout << j.dump(2) << "\n";
        } else if (*train) {
            const auto out = anne::cmd_train(resolve(train_opts), train_seed);
            std::cout << anne::json{{"final_test_accuracy", out.result.history.back().test_accuracy},
                                    {"model", out.model.string()},
                                    {"history", out.history.string()},
                                    {"report", out.report.string()},
                                    {"predictions", out.predictions.string()}}.dump(2)
                      << "\n";
        } else if (*eval) {
            std::cout << anne::cmd_eval(eval_model, eval_test).dump(2) << "\n";
        } else if (*cmp) {
            auto c = resolve(cmp_opts);
            if (!cmp_seeds.empty()) c.seeds = parse_seeds(cmp_seeds);
            if (!cmp_selectors.empty()) {
                c.selectors.clear();
                std::stringstream ss(cmp_selectors);
                std::string item;
                while (std::getline(ss, item, ',')) c.selectors.push_back(anne::parse_selector(item));
            }
            if (c.selectors.empty()) c.selectors = {anne::parse_selector("anne"), anne::parse_selector("passthrough")};
            std::cout << anne::to_csv(anne::cmd_compare(c));
        } else {
            for (const auto& n : anne::preset_names()) std::cout << n << "\n";
        }
    } catch (const anne::Error& e) {
        std::cerr << "error (" << anne::to_string(e.kind()) << "): " << e.what() << "\n";
        return anne::exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    }
    return 0;
}
