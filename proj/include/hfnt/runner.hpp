#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hfnt/dataset.hpp"
#include "hfnt/de.hpp"
#include "hfnt/ensemble.hpp"
#include "hfnt/metrics.hpp"
#include "hfnt/mogp.hpp"
#include "hfnt/rng.hpp"
#include "hfnt/splits.hpp"
#include "hfnt/tree_json.hpp"

namespace hfnt {

struct CvSpec {
    SplitPlan::Kind kind = SplitPlan::Kind::kfold;
    int k = 10;
    double holdout_fraction = 0.5;

    // "kfold:K", "5x2", or "holdout:F"
    static CvSpec parse(const std::string& s) {
        CvSpec cv;
        if (s == "5x2") {
            cv.kind = SplitPlan::Kind::five_by_two;
            return cv;
        }
        const auto colon = s.find(':');
        const std::string head = s.substr(0, colon);
        const std::string arg = colon == std::string::npos ? "" : s.substr(colon + 1);
        if (head == "kfold") {
            cv.kind = SplitPlan::Kind::kfold;
            cv.k = arg.empty() ? 10 : std::stoi(arg);
        } else if (head == "holdout") {
            cv.kind = SplitPlan::Kind::holdout;
            cv.holdout_fraction = arg.empty() ? 0.5 : std::stod(arg);
        } else {
            throw std::invalid_argument("unknown CV protocol: " + s);
        }
        return cv;
    }

    std::string str() const {
        switch (kind) {
        case SplitPlan::Kind::kfold: return "kfold:" + std::to_string(k);
        case SplitPlan::Kind::five_by_two: return "5x2";
        case SplitPlan::Kind::holdout: {
            std::ostringstream os;
            os << "holdout:" << holdout_fraction;
            return os.str();
        }
        }
        return "?";
    }
};

// Full experiment configuration. Defaults: pop 30, pool 15, pm 0.3 /
// pc 0.7, depth 4, arity 5, 3 repetitions x 30 structure iterations x 1000
// tuning iterations, DE pop 50 with cr 0.9 and F 0.7.
struct RunConfig {
    std::size_t pop_size = 30;
    double mating_fraction = 0.5;
    double pm = 0.3;
    double pc = 0.7;
    int tree_depth = 4;
    int tree_arity = 5;
    double leaf_prob = 0.5;
    std::vector<int> activations = {1, 2, 3, 4, 5, 6, 7};

    std::size_t general_repetitions = 3;   // i_g
    std::size_t structure_iterations = 30; // i_s
    std::size_t parameter_iterations = 1000; // i_p
    std::size_t tune_top_q = 1; // front-1 members tuned per repetition

    std::size_t de_pop = 50;
    double de_cr = 0.9;
    double de_F = 0.7;
    bool de_trace = false; // per-generation tuning trace in the artifacts

    std::string dataset_path;
    TaskKind task = TaskKind::classification;
    int target_column = -1;    // -1 = last column
    std::string header = "auto"; // auto | yes | no
    char delimiter = ',';
    int lags = 4;              // time series embedding
    int horizon = 1;
    CvSpec cv;
    bool stratified = false;

    std::size_t batches = 1;
    std::uint64_t seed = 0;
    std::string out_dir;
    bool single_objective = false;

    std::size_t bag_size = 10;
    std::size_t ensemble_de_pop = 100;
    std::uint64_t ensemble_de_evaluations = 300000;
    double msf_fraction = 0.7;
    double mif_fraction = 0.1;

    unsigned threads = 0; // 0 = hardware concurrency; NT_THREADS caps it

    MogpConfig mogp_config() const {
        MogpConfig cfg;
        cfg.pop_size = pop_size;
        cfg.mating_fraction = mating_fraction;
        cfg.pm = pm;
        cfg.pc = pc;
        cfg.iterations = structure_iterations;
        cfg.limits.max_depth = tree_depth;
        cfg.limits.max_arity = tree_arity;
        cfg.limits.leaf_prob = leaf_prob;
        cfg.limits.activations = activations;
        return cfg;
    }

    // Closed-form objective-evaluation budget of one training run:
    // pop + i_g * ((pop + pool) * i_s + q * de_pop * i_p)
    std::uint64_t expected_evaluations() const {
        const std::uint64_t pool = mogp_config().pool_size();
        return pop_size +
               general_repetitions *
                   ((pop_size + pool) * structure_iterations +
                    tune_top_q * de_pop * parameter_iterations);
    }

    void validate() const {
        mogp_config().validate();
        if (parameter_iterations < 1)
            throw std::invalid_argument("RunConfig: parameter_iterations must be >= 1");
        if (tune_top_q < 1)
            throw std::invalid_argument("RunConfig: tune_top_q must be >= 1");
        if (dataset_path.empty())
            throw std::invalid_argument("RunConfig: dataset path required");
        if (out_dir.empty())
            throw std::invalid_argument("RunConfig: output directory required");
        if (task == TaskKind::timeseries && lags < 1)
            throw std::invalid_argument("RunConfig: time series need lags >= 1");
    }

    nlohmann::json to_json() const {
        return {{"pop_size", pop_size},
                {"mating_fraction", mating_fraction},
                {"pm", pm},
                {"pc", pc},
                {"tree_depth", tree_depth},
                {"tree_arity", tree_arity},
                {"leaf_prob", leaf_prob},
                {"activations", activations},
                {"general_repetitions", general_repetitions},
                {"structure_iterations", structure_iterations},
                {"parameter_iterations", parameter_iterations},
                {"tune_top_q", tune_top_q},
                {"de_pop", de_pop},
                {"de_cr", de_cr},
                {"de_F", de_F},
                {"de_trace", de_trace},
                {"dataset_path", dataset_path},
                {"task", to_string(task)},
                {"target_column", target_column},
                {"header", header},
                {"delimiter", std::string(1, delimiter)},
                {"lags", lags},
                {"horizon", horizon},
                {"cv", cv.str()},
                {"stratified", stratified},
                {"batches", batches},
                {"seed", seed},
                {"out_dir", out_dir},
                {"single_objective", single_objective},
                {"bag_size", bag_size},
                {"ensemble_de_pop", ensemble_de_pop},
                {"ensemble_de_evaluations", ensemble_de_evaluations},
                {"msf_fraction", msf_fraction},
                {"mif_fraction", mif_fraction}};
    }

    static RunConfig from_json(const nlohmann::json& j) {
        RunConfig c;
        const auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("pop_size", c.pop_size);
        get("mating_fraction", c.mating_fraction);
        get("pm", c.pm);
        get("pc", c.pc);
        get("tree_depth", c.tree_depth);
        get("tree_arity", c.tree_arity);
        get("leaf_prob", c.leaf_prob);
        get("activations", c.activations);
        get("general_repetitions", c.general_repetitions);
        get("structure_iterations", c.structure_iterations);
        get("parameter_iterations", c.parameter_iterations);
        get("tune_top_q", c.tune_top_q);
        get("de_pop", c.de_pop);
        get("de_cr", c.de_cr);
        get("de_F", c.de_F);
        get("de_trace", c.de_trace);
        get("dataset_path", c.dataset_path);
        if (j.contains("task")) c.task = task_from_string(j.at("task").get<std::string>());
        get("target_column", c.target_column);
        get("header", c.header);
        if (j.contains("delimiter")) {
            const auto d = j.at("delimiter").get<std::string>();
            if (d.size() != 1) throw std::invalid_argument("delimiter must be one character");
            c.delimiter = d[0];
        }
        get("lags", c.lags);
        get("horizon", c.horizon);
        if (j.contains("cv")) c.cv = CvSpec::parse(j.at("cv").get<std::string>());
        get("stratified", c.stratified);
        get("batches", c.batches);
        get("seed", c.seed);
        get("out_dir", c.out_dir);
        get("single_objective", c.single_objective);
        get("bag_size", c.bag_size);
        get("ensemble_de_pop", c.ensemble_de_pop);
        get("ensemble_de_evaluations", c.ensemble_de_evaluations);
        get("msf_fraction", c.msf_fraction);
        get("mif_fraction", c.mif_fraction);
        return c;
    }
};

namespace detail {

inline nlohmann::json eval_to_json(const EvalResult& r) {
    nlohmann::json j{{"mse", r.mse}, {"rmse", r.rmse}, {"half_mse", r.half_mse}};
    if (r.correlation) j["correlation"] = *r.correlation;
    else j["correlation"] = nullptr; // undefined flag, never NaN
    if (r.accuracy) {
        j["accuracy"] = *r.accuracy;
        j["confusion"] = {{"tp", r.confusion.tp},
                          {"tn", r.confusion.tn},
                          {"fp", r.confusion.fp},
                          {"fn", r.confusion.fn}};
    }
    return j;
}

inline EvalResult eval_from_json(const nlohmann::json& j) {
    EvalResult r;
    r.mse = j.at("mse").get<double>();
    r.rmse = j.at("rmse").get<double>();
    r.half_mse = j.at("half_mse").get<double>();
    if (j.contains("correlation") && !j.at("correlation").is_null())
        r.correlation = j.at("correlation").get<double>();
    if (j.contains("accuracy")) {
        r.accuracy = j.at("accuracy").get<double>();
        const auto& c = j.at("confusion");
        r.confusion = {c.at("tp").get<long>(), c.at("tn").get<long>(),
                       c.at("fp").get<long>(), c.at("fn").get<long>()};
    }
    return r;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + p.string());
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("corrupt artifact " + p.string() + ": " + e.what());
    }
    return j;
}

// Runs jobs 0..n-1 on up to `threads` workers. Jobs own disjoint outputs, so
// scheduling cannot affect results.
inline void parallel_runs(std::size_t n, unsigned threads,
                          const std::function<void(std::size_t)>& job) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> workers;
    for (unsigned t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& w : workers) w.join();
    if (error) std::rethrow_exception(error);
}

inline std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

} // namespace detail

// Reads a univariate series: one numeric value per row (an optional header
// row is skipped).
inline std::vector<double> load_series(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    std::vector<double> series;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto v = detail::parse_number(line);
        if (!v) {
            if (row == 1) continue; // header
            throw ParseError("row " + std::to_string(row) + ": not a number: '" + line + "'",
                             row, 0);
        }
        series.push_back(*v);
    }
    if (series.empty()) throw std::runtime_error("empty series file: " + path.string());
    return series;
}

inline void write_series_csv(const std::filesystem::path& path,
                             std::span<const double> series) {
    std::string text = "value\n";
    for (double v : series) {
        text += detail::format_double(v);
        text += '\n';
    }
    detail::write_text(path, text);
}

// Loads and scales the dataset a RunConfig points at; time series are
// lag-embedded first.
inline Dataset load_run_dataset(const RunConfig& cfg) {
    if (cfg.task == TaskKind::timeseries) {
        const auto series = load_series(cfg.dataset_path);
        return scale(lag_embed(series, static_cast<std::size_t>(cfg.lags),
                               static_cast<std::size_t>(cfg.horizon)));
    }
    CsvSchema schema;
    schema.task = cfg.task;
    schema.delimiter = cfg.delimiter;
    // peek at the width for the default target column and header detection
    std::ifstream in(cfg.dataset_path);
    if (!in) throw std::runtime_error("cannot open file: " + cfg.dataset_path);
    std::string first_line;
    if (!std::getline(in, first_line))
        throw std::runtime_error("empty file: " + cfg.dataset_path);
    in.close();
    const auto cells = detail::split_record(first_line, cfg.delimiter);
    schema.target_column = cfg.target_column >= 0 ? cfg.target_column
                                                  : static_cast<int>(cells.size()) - 1;
    if (cfg.header == "yes") {
        schema.has_header = true;
    } else if (cfg.header == "no") {
        schema.has_header = false;
    } else {
        // header row iff any non-target cell fails to parse as a number
        schema.has_header = false;
        for (std::size_t j = 0; j < cells.size(); ++j) {
            if (j == static_cast<std::size_t>(schema.target_column)) continue;
            if (!detail::parse_number(cells[j])) {
                schema.has_header = true;
                break;
            }
        }
    }
    return scale(load_csv(cfg.dataset_path, schema));
}

struct FoldOutcome {
    EvalResult train;
    EvalResult test;
    std::uint64_t evaluations = 0;
    std::size_t model_size = 0;
    std::size_t model_features = 0;
    double population_diversity = 0.0; // distinct/size over the final population
};

struct TrainSummary {
    std::vector<std::vector<FoldOutcome>> batches; // [batch][fold]
};

namespace detail {

inline nlohmann::json population_to_json(const RankedPopulation& pop) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : pop.members) {
        arr.push_back({{"tree", tree_to_json(m.tree)},
                       {"objectives",
                        {{"error", m.objectives.error},
                         {"size", m.objectives.size},
                         {"neg_diversity", m.objectives.neg_diversity}}},
                       {"rank", m.rank}});
    }
    return arr;
}

inline RankedPopulation population_from_json(const nlohmann::json& arr,
                                             const GrowthLimits& limits) {
    RankedPopulation pop;
    for (const auto& j : arr) {
        RankedMember m;
        m.tree = tree_from_json(j.at("tree"));
        if (!check_limits(m.tree, limits))
            throw std::runtime_error("population dump holds a tree violating the limits");
        const auto& o = j.at("objectives");
        m.objectives.error = o.at("error").get<double>();
        m.objectives.size = o.at("size").get<double>();
        m.objectives.neg_diversity = o.at("neg_diversity").get<double>();
        m.rank = j.at("rank").get<std::size_t>();
        pop.members.push_back(std::move(m));
    }
    return pop;
}

inline std::string generation_logs_jsonl(const std::vector<GenerationLog>& logs) {
    std::string out;
    for (const auto& g : logs) {
        nlohmann::json j{{"generation", g.generation},
                         {"min_error", g.min_error},
                         {"mean_error", g.mean_error},
                         {"mean_size", g.mean_size},
                         {"front1_size", g.front1_size},
                         {"mean_diversity_index", g.mean_diversity_index}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

// One full structure-search + parameter-tuning pipeline on a training split.
struct PipelineResult {
    RankedPopulation population;
    std::size_t best_index = 0;
    std::uint64_t evaluations = 0;
    std::vector<GenerationLog> logs;
    std::vector<DeTraceEntry> tune_trace;
};

inline PipelineResult run_pipeline(const Dataset& train, const RunConfig& cfg,
                                   std::uint64_t batch_seed, std::uint64_t fold,
                                   std::uint64_t class_id = 0) {
    MogpConfig mogp = cfg.mogp_config();
    Rng structure = Rng::stream(batch_seed, "structure", fold, class_id);
    Rng tuner = Rng::stream(batch_seed, "tuner", fold, class_id);

    Evolution engine(train, mogp, structure, cfg.single_objective);
    engine.initialize();

    std::uint64_t de_evaluations = 0;
    std::vector<DeTraceEntry> tune_traces;
    for (std::size_t rep = 0; rep < cfg.general_repetitions; ++rep) {
        engine.run(cfg.structure_iterations);

        // tune the lowest-error front-1 member(s) and reinject them
        auto& pop = engine.population();
        std::vector<std::size_t> front1;
        for (std::size_t i = 0; i < pop.members.size(); ++i)
            if (pop.members[i].rank == 1) front1.push_back(i);
        std::stable_sort(front1.begin(), front1.end(), [&](std::size_t a, std::size_t b) {
            return pop.members[a].objectives.error < pop.members[b].objectives.error;
        });
        // when front 1 holds fewer members than requested, wrap around so the
        // configured budget is still spent and the accounting stays closed-form
        for (std::size_t t = 0; t < cfg.tune_top_q; ++t) {
            const std::size_t idx = front1[t % front1.size()];
            DeConfig de;
            de.pop_size = cfg.de_pop;
            de.cr = cfg.de_cr;
            de.F = cfg.de_F;
            de.max_evaluations = cfg.de_pop * cfg.parameter_iterations;
            TuneResult tuned =
                tune_tree(pop.members[idx].tree, train, de, mogp.limits, tuner, cfg.de_trace);
            de_evaluations += tuned.evaluations;
            tune_traces.insert(tune_traces.end(), tuned.trace.begin(), tuned.trace.end());
            engine.replace_member(idx, std::move(tuned.tree), tuned.train_mse);
        }
    }

    PipelineResult result;
    result.population = engine.population();
    result.best_index = result.population.best_error_index();
    result.evaluations = engine.evaluations() + de_evaluations;
    result.logs = engine.logs();
    result.tune_trace = std::move(tune_traces);
    return result;
}

inline std::vector<double> model_outputs(const NeuralTree& tree, const Dataset& ds) {
    std::vector<double> out(ds.rows());
    for (std::size_t i = 0; i < ds.rows(); ++i) out[i] = eval_tree(tree, ds.row(i));
    return out;
}

inline EvalResult evaluate_model(const NeuralTree& tree, const Dataset& ds) {
    const auto outputs = model_outputs(tree, ds);
    if (ds.task == TaskKind::classification)
        return evaluate_binary(ds.targets, outputs);
    std::vector<double> desired(ds.rows());
    std::vector<double> predicted(ds.rows());
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        desired[i] = descale_output(ds.targets[i], ds);
        predicted[i] = descale_output(outputs[i], ds);
    }
    return evaluate_regression(desired, predicted);
}

// Multi-class model: one tree per class, argmax decision.
inline EvalResult evaluate_multiclass(const std::vector<NeuralTree>& class_trees,
                                      const Dataset& ds) {
    EvalResult r;
    const std::size_t rows = ds.rows();
    const std::size_t n_classes = class_trees.size();
    std::vector<double> outputs(n_classes);
    std::size_t correct = 0;
    double sq = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t c = 0; c < n_classes; ++c)
            outputs[c] = eval_tree(class_trees[c], ds.row(i));
        const int pred = classify_multiclass(outputs);
        const int truth = static_cast<int>(ds.targets[i]);
        if (pred == truth) ++correct;
        for (std::size_t c = 0; c < n_classes; ++c) {
            const double want = (static_cast<int>(c) == truth) ? 1.0 : 0.0;
            const double e = want - outputs[c];
            sq += e * e;
        }
    }
    r.mse = sq / static_cast<double>(rows * n_classes);
    r.rmse = std::sqrt(r.mse);
    r.half_mse = 0.5 * r.mse;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(rows);
    return r;
}

} // namespace detail

// Trains per the general strategy: per batch and CV fold, alternate i_g
// rounds of structure search and DE parameter tuning, then evaluate the best
// tuned model on the fold's test split. Artifacts land under cfg.out_dir.
inline TrainSummary run_train(const RunConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    const Dataset ds = load_run_dataset(cfg);
    const bool multiclass = ds.task == TaskKind::classification && ds.n_classes > 2;

    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    detail::write_text(out / "config.json", cfg.to_json().dump(2) + "\n");

    TrainSummary summary;
    summary.batches.resize(cfg.batches);

    // splits first (cheap and sequential), then every (batch, fold) job in
    // one flat parallel pass
    std::vector<SplitPlan> splits(cfg.batches);
    std::vector<std::pair<std::size_t, int>> jobs;
    for (std::size_t batch = 0; batch < cfg.batches; ++batch) {
        const std::uint64_t batch_seed = cfg.seed + batch;
        const fs::path batch_dir = out / ("batch_" + std::to_string(batch));
        fs::create_directories(batch_dir);

        SplitPlan split;
        switch (cfg.cv.kind) {
        case SplitPlan::Kind::kfold:
            split = make_kfold(ds, cfg.cv.k, batch_seed, cfg.stratified);
            break;
        case SplitPlan::Kind::five_by_two:
            split = make_five_by_two(ds, batch_seed);
            break;
        case SplitPlan::Kind::holdout:
            if (ds.task != TaskKind::timeseries && cfg.stratified)
                throw std::invalid_argument("holdout split cannot be stratified");
            split = make_holdout(ds, cfg.cv.holdout_fraction);
            break;
        }
        detail::write_text(batch_dir / "split.json", split.to_json().dump(2) + "\n");
        summary.batches[batch].resize(split.runs());
        for (int f = 0; f < split.runs(); ++f) jobs.emplace_back(batch, f);
        splits[batch] = std::move(split);
    }

    detail::parallel_runs(jobs.size(), cfg.threads, [&](std::size_t job) {
        const auto [batch, run] = jobs[job];
        const std::uint64_t batch_seed = cfg.seed + batch;
        const SplitPlan& split = splits[batch];
        const fs::path batch_dir = out / ("batch_" + std::to_string(batch));
        {
            const std::size_t f = static_cast<std::size_t>(run);
            const Dataset train = subset(ds, split.train_indices(run));
            const Dataset test = subset(ds, split.test_indices(run));
            const fs::path fold_dir = batch_dir / ("fold_" + std::to_string(run));
            fs::create_directories(fold_dir);

            FoldOutcome outcome;
            nlohmann::json model_doc;
            std::string logs_text;

            if (!multiclass) {
                auto r = detail::run_pipeline(train, cfg, batch_seed, f);
                const auto& best = r.population.members[r.best_index];
                outcome.train = detail::evaluate_model(best.tree, train);
                outcome.test = detail::evaluate_model(best.tree, test);
                outcome.evaluations = r.evaluations;
                outcome.model_size = tree_size(best.tree);
                outcome.model_features = used_features(best.tree).size();
                std::vector<NeuralTree> trees;
                for (const auto& m : r.population.members) trees.push_back(m.tree);
                outcome.population_diversity = bag_diversity(trees);
                model_doc = {{"task", to_string(ds.task)}, {"tree", tree_to_json(best.tree)}};
                logs_text = detail::generation_logs_jsonl(r.logs);
                detail::write_text(fold_dir / "population.json",
                                   detail::population_to_json(r.population).dump() + "\n");
                if (cfg.de_trace) {
                    std::string trace_text;
                    for (const auto& e : r.tune_trace) {
                        trace_text += nlohmann::json{{"generation", e.generation},
                                                     {"best_fitness", e.best_fitness},
                                                     {"evaluations", e.evaluations}}
                                          .dump();
                        trace_text += '\n';
                    }
                    detail::write_text(fold_dir / "tuning.jsonl", trace_text);
                }
            } else {
                // one-hot decomposition: an independent pipeline per class
                std::vector<NeuralTree> class_trees;
                nlohmann::json class_docs = nlohmann::json::array();
                for (int c = 0; c < ds.n_classes; ++c) {
                    const Dataset train_c = one_hot(train, c);
                    auto r = detail::run_pipeline(train_c, cfg, batch_seed, f,
                                                  static_cast<std::uint64_t>(c));
                    outcome.evaluations += r.evaluations;
                    class_trees.push_back(r.population.members[r.best_index].tree);
                    class_docs.push_back(tree_to_json(class_trees.back()));
                    detail::write_text(fold_dir / ("population_class" + std::to_string(c) +
                                                   ".json"),
                                       detail::population_to_json(r.population).dump() + "\n");
                    logs_text += detail::generation_logs_jsonl(r.logs);
                }
                outcome.train = detail::evaluate_multiclass(class_trees, train);
                outcome.test = detail::evaluate_multiclass(class_trees, test);
                for (const auto& t : class_trees) {
                    outcome.model_size += tree_size(t);
                    outcome.model_features += used_features(t).size();
                }
                outcome.population_diversity = 1.0;
                model_doc = {{"task", to_string(ds.task)}, {"class_trees", class_docs}};
            }

            const std::uint64_t expected =
                cfg.expected_evaluations() * (multiclass ? ds.n_classes : 1);
            if (outcome.evaluations != expected)
                throw std::logic_error("evaluation budget mismatch: spent " +
                                       std::to_string(outcome.evaluations) + ", expected " +
                                       std::to_string(expected));

            detail::write_text(fold_dir / "generations.jsonl", logs_text);
            detail::write_text(fold_dir / "model.json", model_doc.dump(2) + "\n");
            nlohmann::json eval_doc{{"train", detail::eval_to_json(outcome.train)},
                                    {"test", detail::eval_to_json(outcome.test)},
                                    {"evaluations", outcome.evaluations},
                                    {"expected_evaluations", expected},
                                    {"tree_size", outcome.model_size},
                                    {"selected_features", outcome.model_features},
                                    {"population_diversity", outcome.population_diversity}};
            detail::write_text(fold_dir / "eval.json", eval_doc.dump(2) + "\n");
            summary.batches[batch][f] = outcome;
        }
    });

    // aggregate summary: per batch plus overall means
    nlohmann::json jbatches = nlohmann::json::array();
    for (std::size_t b = 0; b < summary.batches.size(); ++b) {
        nlohmann::json folds = nlohmann::json::array();
        for (const auto& f : summary.batches[b]) {
            folds.push_back({{"train", detail::eval_to_json(f.train)},
                             {"test", detail::eval_to_json(f.test)},
                             {"evaluations", f.evaluations},
                             {"tree_size", f.model_size},
                             {"selected_features", f.model_features},
                             {"population_diversity", f.population_diversity}});
        }
        jbatches.push_back({{"batch", b}, {"folds", std::move(folds)}});
    }
    detail::write_text(out / "summary.json",
                       nlohmann::json{{"batches", std::move(jbatches)}}.dump(2) + "\n");
    return summary;
}

struct EnsembleOutcome {
    double fit_error = 0.0;          // on the fitting (training) split
    double best_single_error = 0.0;  // best vertex on the fitting split
    EvalResult test;
    double diversity = 0.0;
    FeatureReport features;
};

// Builds one ensemble per (batch, fold) from the stored final populations:
// select bag_size diverse low-error candidates, fit weights by DE on the
// fold's training data, evaluate on the fold's test data.
inline std::vector<std::vector<EnsembleOutcome>> run_ensemble(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    const fs::path out(cfg.out_dir);
    if (!fs::exists(out / "config.json"))
        throw std::runtime_error("no training artifacts under " + cfg.out_dir +
                                 " (run train first)");
    const RunConfig trained =
        RunConfig::from_json(detail::read_json(out / "config.json"));
    const Dataset ds = load_run_dataset(trained);
    if (ds.task == TaskKind::classification && ds.n_classes > 2)
        throw std::runtime_error("ensembles support binary classification, regression, and "
                                 "time series");
    const GrowthLimits limits = trained.mogp_config().limits;

    std::vector<std::vector<EnsembleOutcome>> all;
    for (std::size_t batch = 0; batch < trained.batches; ++batch) {
        const fs::path batch_dir = out / ("batch_" + std::to_string(batch));
        const SplitPlan split = SplitPlan::from_json(detail::read_json(batch_dir / "split.json"));
        const int folds = split.runs();
        std::vector<EnsembleOutcome> batch_out(folds);

        detail::parallel_runs(static_cast<std::size_t>(folds), cfg.threads, [&](std::size_t f) {
            const int run = static_cast<int>(f);
            const fs::path fold_dir = batch_dir / ("fold_" + std::to_string(run));
            const auto pop = detail::population_from_json(
                detail::read_json(fold_dir / "population.json"), limits);

            const Dataset train = subset(ds, split.train_indices(run));
            const Dataset test = subset(ds, split.test_indices(run));

            EnsembleBag bag;
            bag.task = ds.task;
            bag.models = select_candidates(pop, std::min(cfg.bag_size, pop.members.size()));
            bag.weights.assign(bag.models.size(), 1.0 / static_cast<double>(bag.models.size()));
            bag.diversity = bag_diversity(bag.models);

            FitWeightsConfig fw;
            fw.de_pop = cfg.ensemble_de_pop;
            fw.de_evaluations = cfg.ensemble_de_evaluations;
            fw.cr = cfg.de_cr;
            fw.F = cfg.de_F;
            Rng rng = Rng::stream(trained.seed + batch, "ensemble", f);
            const EnsembleBag fitted = fit_weights(bag, train, fw, rng);

            EnsembleOutcome outcome;
            outcome.fit_error = ensemble_error(fitted, train);
            outcome.best_single_error = std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < fitted.models.size(); ++t) {
                EnsembleBag single = fitted;
                std::fill(single.weights.begin(), single.weights.end(), 0.0);
                single.weights[t] = 1.0;
                outcome.best_single_error =
                    std::min(outcome.best_single_error, ensemble_error(single, train));
            }
            outcome.diversity = fitted.diversity;
            outcome.features = feature_report(fitted, ds.cols(),
                                              {cfg.msf_fraction, cfg.mif_fraction});

            // test-split evaluation through the task's combination rule
            if (ds.task == TaskKind::classification) {
                Confusion conf;
                std::size_t correct = 0;
                for (std::size_t i = 0; i < test.rows(); ++i) {
                    const int pred = vote(fitted, test.row(i), std::max(ds.n_classes, 2));
                    const int truth = static_cast<int>(test.targets[i]);
                    if (pred == truth) ++correct;
                    if (truth == 1)
                        (pred == 1 ? conf.tp : conf.fn)++;
                    else
                        (pred == 0 ? conf.tn : conf.fp)++;
                }
                outcome.test.accuracy =
                    static_cast<double>(correct) / static_cast<double>(test.rows());
                outcome.test.confusion = conf;
                const double wrong =
                    1.0 - *outcome.test.accuracy;
                outcome.test.mse = wrong; // misclassification rate
                outcome.test.rmse = std::sqrt(wrong);
                outcome.test.half_mse = 0.5 * wrong;
            } else {
                std::vector<double> desired(test.rows()), predicted(test.rows());
                for (std::size_t i = 0; i < test.rows(); ++i) {
                    desired[i] = descale_output(test.targets[i], test);
                    predicted[i] = mean_combine(fitted, test.row(i), test);
                }
                outcome.test = evaluate_regression(desired, predicted);
            }

            // artifacts
            nlohmann::json jmodels = nlohmann::json::array();
            for (const auto& t : fitted.models) jmodels.push_back(tree_to_json(t));
            nlohmann::json jbag{{"models", std::move(jmodels)},
                                {"weights", fitted.weights},
                                {"task_kind", to_string(fitted.task)},
                                {"diversity", fitted.diversity}};
            detail::write_text(fold_dir / "ensemble.json", jbag.dump() + "\n");

            std::string feat_csv = "feature,count\n";
            for (std::size_t j = 0; j < outcome.features.per_feature_counts.size(); ++j)
                feat_csv += std::to_string(j) + "," +
                            std::to_string(outcome.features.per_feature_counts[j]) + "\n";
            detail::write_text(fold_dir / "feature_report.csv", feat_csv);
            nlohmann::json jfeat{{"tsf", outcome.features.tsf},
                                 {"msf", outcome.features.msf},
                                 {"mif", outcome.features.mif},
                                 {"unused", outcome.features.unused}};
            detail::write_text(fold_dir / "feature_report.json", jfeat.dump(2) + "\n");

            nlohmann::json jeval{{"fit_error", outcome.fit_error},
                                 {"best_single_error", outcome.best_single_error},
                                 {"fitted_on", "fold_train"},
                                 {"diversity", outcome.diversity},
                                 {"test", detail::eval_to_json(outcome.test)}};
            detail::write_text(fold_dir / "ensemble_eval.json", jeval.dump(2) + "\n");
            batch_out[f] = std::move(outcome);
        });
        all.push_back(std::move(batch_out));
    }

    nlohmann::json jb = nlohmann::json::array();
    for (std::size_t b = 0; b < all.size(); ++b) {
        nlohmann::json jf = nlohmann::json::array();
        for (const auto& o : all[b])
            jf.push_back({{"fit_error", o.fit_error},
                          {"best_single_error", o.best_single_error},
                          {"diversity", o.diversity},
                          {"tsf", o.features.tsf},
                          {"test", detail::eval_to_json(o.test)}});
        jb.push_back({{"batch", b}, {"folds", std::move(jf)}});
    }
    detail::write_text(out / "ensemble_summary.json",
                       nlohmann::json{{"fitted_on", "fold_train"}, {"batches", std::move(jb)}}
                               .dump(2) +
                           "\n");
    return all;
}

// Aggregates a run directory into best/mean tables plus plot data: the final
// populations' (error, size, diversity index) triples and the per-generation
// optimization trajectories.
inline void run_report(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path out(dir);
    const auto summary = detail::read_json(out / "summary.json");
    const RunConfig cfg = RunConfig::from_json(detail::read_json(out / "config.json"));

    const bool classification = cfg.task == TaskKind::classification;
    const char* metric_name = classification ? "accuracy" : "mse";
    std::string table = "batch,folds,best_train,best_test,mean_train,mean_test,"
                        "mean_tree_size,mean_selected_features,mean_population_diversity\n";
    const auto metric = [&](const nlohmann::json& e) {
        return classification ? e.at("accuracy").get<double>() : e.at("mse").get<double>();
    };
    for (const auto& jb : summary.at("batches")) {
        const auto& folds = jb.at("folds");
        double best_train = 0, best_test = 0, sum_train = 0, sum_test = 0;
        double sum_size = 0, sum_feat = 0, sum_div = 0;
        bool first = true;
        for (const auto& jf : folds) {
            const double tr = metric(jf.at("train"));
            const double te = metric(jf.at("test"));
            const bool better = first || (classification ? te > best_test : te < best_test);
            if (better) {
                best_train = tr;
                best_test = te;
            }
            first = false;
            sum_train += tr;
            sum_test += te;
            sum_size += jf.at("tree_size").get<double>();
            sum_feat += jf.at("selected_features").get<double>();
            sum_div += jf.at("population_diversity").get<double>();
        }
        const double n = static_cast<double>(folds.size());
        table += std::to_string(jb.at("batch").get<std::size_t>()) + "," +
                 std::to_string(folds.size()) + "," + detail::format_double(best_train) + "," +
                 detail::format_double(best_test) + "," + detail::format_double(sum_train / n) +
                 "," + detail::format_double(sum_test / n) + "," +
                 detail::format_double(sum_size / n) + "," +
                 detail::format_double(sum_feat / n) + "," +
                 detail::format_double(sum_div / n) + "\n";
    }
    detail::write_text(out / ("report_" + std::string(metric_name) + ".csv"), table);

    // Pareto plot data from every stored final population
    std::string pareto = "batch,fold,error,size,diversity_index\n";
    std::string traj = "batch,fold,mode,generation,min_error,mean_size\n";
    const std::string mode = cfg.single_objective ? "single" : "multi";
    for (std::size_t b = 0; b < cfg.batches; ++b) {
        const fs::path batch_dir = out / ("batch_" + std::to_string(b));
        if (!fs::exists(batch_dir)) continue;
        for (int f = 0;; ++f) {
            const fs::path fold_dir = batch_dir / ("fold_" + std::to_string(f));
            if (!fs::exists(fold_dir)) break;
            const fs::path pop_path = fold_dir / "population.json";
            if (fs::exists(pop_path)) {
                for (const auto& jm : detail::read_json(pop_path)) {
                    const auto& o = jm.at("objectives");
                    pareto += std::to_string(b) + "," + std::to_string(f) + "," +
                              detail::format_double(o.at("error").get<double>()) + "," +
                              detail::format_double(o.at("size").get<double>()) + "," +
                              detail::format_double(-o.at("neg_diversity").get<double>()) +
                              "\n";
                }
            }
            std::ifstream logs(fold_dir / "generations.jsonl");
            std::string line;
            while (logs && std::getline(logs, line)) {
                if (line.empty()) continue;
                const auto jg = nlohmann::json::parse(line);
                traj += std::to_string(b) + "," + std::to_string(f) + "," + mode + "," +
                        std::to_string(jg.at("generation").get<std::size_t>()) + "," +
                        detail::format_double(jg.at("min_error").get<double>()) + "," +
                        detail::format_double(jg.at("mean_size").get<double>()) + "\n";
            }
        }
    }
    detail::write_text(out / "pareto_points.csv", pareto);
    detail::write_text(out / "trajectories.csv", traj);
}

} // namespace hfnt
