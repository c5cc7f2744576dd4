#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hfnt/dataset.hpp"
#include "hfnt/runner.hpp"

namespace {

unsigned thread_cap() {
    if (const char* env = std::getenv("NT_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return 0; // hardware concurrency
}

// --config file first, then flags on top
hfnt::RunConfig base_config(const std::string& config_path) {
    if (config_path.empty()) return {};
    return hfnt::RunConfig::from_json(hfnt::detail::read_json(config_path));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Evolutionary neural-tree engine: multiobjective structure search, "
                 "differential-evolution tuning, and weighted ensembles"};
    app.require_subcommand(1);

    std::string config_path, dataset, task, cv, out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> bag_size, batches, lags, horizon;
    bool single_objective = false, stratified = false;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file (flags override it)");
        cmd->add_option("--dataset", dataset, "CSV input path");
        cmd->add_option("--task", task, "classification|regression|timeseries");
        cmd->add_option("--cv", cv, "CV protocol: kfold:K, 5x2, or holdout:F");
        cmd->add_option("--seed", seed, "master seed (64-bit)");
        cmd->add_option("--out", out_dir, "artifact output directory");
        cmd->add_option("--batches", batches, "independent batches (seed + batch index)");
    };

    auto* train = app.add_subcommand("train", "structure search + parameter tuning per CV fold");
    add_common(train);
    train->add_flag("--single-objective", single_objective,
                    "rank by approximation error only");
    train->add_flag("--stratified", stratified, "stratify classification folds");
    train->add_option("--lags", lags, "time-series embedding order d");
    train->add_option("--horizon", horizon, "time-series prediction horizon");

    auto* ensemble = app.add_subcommand("ensemble",
                                        "build weighted ensembles from stored populations");
    add_common(ensemble);
    ensemble->add_option("--bag-size", bag_size, "models per ensemble bag");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "aggregate a run directory into tables");
    report->add_option("--out", report_dir, "artifact directory to aggregate")->required();

    std::string gen_out = "mgs.csv";
    std::size_t gen_n = 1000;
    std::uint64_t gen_seed = 0;
    auto* gen = app.add_subcommand("gen-data", "generate a Mackey-Glass benchmark series");
    gen->add_option("--n", gen_n, "number of samples");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const auto series = hfnt::mackey_glass(gen_n, gen_seed);
            hfnt::write_series_csv(gen_out, series);
            return 0;
        }
        if (report->parsed()) {
            hfnt::run_report(report_dir);
            return 0;
        }

        hfnt::RunConfig cfg = base_config(config_path);
        cfg.threads = thread_cap();
        if (!dataset.empty()) cfg.dataset_path = dataset;
        if (!task.empty()) cfg.task = hfnt::task_from_string(task);
        if (!cv.empty()) cfg.cv = hfnt::CvSpec::parse(cv);
        if (seed) cfg.seed = *seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (batches) cfg.batches = *batches;

        if (train->parsed()) {
            if (single_objective) cfg.single_objective = true;
            if (stratified) cfg.stratified = true;
            if (lags) cfg.lags = static_cast<int>(*lags);
            if (horizon) cfg.horizon = static_cast<int>(*horizon);
            hfnt::run_train(cfg);
            return 0;
        }
        if (ensemble->parsed()) {
            if (bag_size) cfg.bag_size = *bag_size;
            if (cfg.out_dir.empty())
                throw std::invalid_argument("ensemble: --out (artifact directory) required");
            hfnt::run_ensemble(cfg);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
