#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "hfnt/dataset.hpp"
#include "hfnt/metrics.hpp"
#include "hfnt/rng.hpp"
#include "hfnt/tree.hpp"

namespace hfnt {

// DE/rand-to-best/1/bin over a bounded box.
struct DeConfig {
    std::size_t pop_size = 50;
    double cr = 0.9;
    double F = 0.7;
    std::uint64_t max_evaluations = 0; // 0 = no evaluation cap
    std::size_t max_generations = 0;   // 0 = no generation cap
    std::optional<double> target_fitness; // early stop when best <= target
    std::vector<double> lower;
    std::vector<double> upper;

    void validate() const {
        if (pop_size < 4)
            throw std::invalid_argument("DeConfig: population must hold at least 4 vectors");
        if (!(cr >= 0.0 && cr <= 1.0))
            throw std::invalid_argument("DeConfig: cr outside [0,1]");
        if (!(F >= 0.0 && F <= 2.0))
            throw std::invalid_argument("DeConfig: F outside [0,2]");
        if (lower.size() != upper.size() || lower.empty())
            throw std::invalid_argument("DeConfig: bad bounds");
        for (std::size_t j = 0; j < lower.size(); ++j)
            if (!(lower[j] < upper[j]))
                throw std::invalid_argument("DeConfig: lower must be < upper per dimension");
        if (max_evaluations != 0 && max_evaluations < pop_size)
            throw std::invalid_argument("DeConfig: evaluation budget below one population");
    }
};

struct DeTraceEntry {
    std::size_t generation = 0;
    double best_fitness = 0.0;
    std::uint64_t evaluations = 0;
};

struct DeResult {
    std::vector<double> best;
    double best_fitness = std::numeric_limits<double>::infinity();
    std::uint64_t evaluations = 0;
    std::size_t generations = 0;
    std::vector<DeTraceEntry> trace;
};

struct DeState {
    std::vector<std::vector<double>> vectors;
    std::vector<double> fitness;
    std::size_t best_index = 0;

    void refresh_best() {
        best_index = 0;
        for (std::size_t i = 1; i < fitness.size(); ++i)
            if (fitness[i] < fitness[best_index]) best_index = i;
    }
};

namespace detail {

inline double de_fitness(double v) {
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

} // namespace detail

// Builds the trial vector for target i: three mutually distinct random
// members (all different from i), one forced crossover index, per-dimension
// binomial mixing, then clamping into the box.
inline std::vector<double> de_trial(const DeState& state, std::size_t i, const DeConfig& cfg,
                                    Rng& rng) {
    const std::size_t pop = state.vectors.size();
    const std::size_t n = state.vectors[i].size();
    std::size_t r0, r1, r2;
    do { r0 = rng.uniform_index(pop); } while (r0 == i);
    do { r1 = rng.uniform_index(pop); } while (r1 == i || r1 == r0);
    do { r2 = rng.uniform_index(pop); } while (r2 == i || r2 == r0 || r2 == r1);

    const auto& v0 = state.vectors[r0];
    const auto& v1 = state.vectors[r1];
    const auto& v2 = state.vectors[r2];
    const auto& best = state.vectors[state.best_index];

    const std::size_t k = rng.uniform_index(n);
    std::vector<double> trial(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double u = rng.uniform01();
        double x = (u < cfg.cr || j == k)
                       ? v0[j] + cfg.F * (best[j] - v0[j]) + cfg.F * (v1[j] - v2[j])
                       : v0[j];
        trial[j] = std::clamp(x, cfg.lower[j], cfg.upper[j]);
    }
    return trial;
}

// Greedy one-to-one replacement: the trial survives only with strictly
// better fitness. Non-finite objective values never win.
inline bool de_select(double trial_fitness, double current_fitness) {
    return detail::de_fitness(trial_fitness) < detail::de_fitness(current_fitness);
}

// Minimizes objective over the box. Optional initial members overwrite the
// head of the random initial population (clamped to bounds).
inline DeResult de_optimize(const std::function<double(std::span<const double>)>& objective,
                            const DeConfig& cfg, Rng& rng,
                            std::span<const std::vector<double>> initial_members = {},
                            bool keep_trace = false) {
    cfg.validate();
    const std::size_t n = cfg.lower.size();

    DeState state;
    state.vectors.assign(cfg.pop_size, std::vector<double>(n));
    for (auto& v : state.vectors)
        for (std::size_t j = 0; j < n; ++j) v[j] = rng.uniform(cfg.lower[j], cfg.upper[j]);
    for (std::size_t m = 0; m < initial_members.size() && m < cfg.pop_size; ++m) {
        if (initial_members[m].size() != n)
            throw std::invalid_argument("de_optimize: initial member dimension mismatch");
        for (std::size_t j = 0; j < n; ++j)
            state.vectors[m][j] = std::clamp(initial_members[m][j], cfg.lower[j], cfg.upper[j]);
    }

    DeResult result;
    state.fitness.resize(cfg.pop_size);
    for (std::size_t i = 0; i < cfg.pop_size; ++i)
        state.fitness[i] = detail::de_fitness(objective(state.vectors[i]));
    result.evaluations = cfg.pop_size;
    state.refresh_best();

    const auto budget_allows = [&](std::uint64_t next) {
        return cfg.max_evaluations == 0 || result.evaluations + next <= cfg.max_evaluations;
    };
    const auto reached_target = [&] {
        return cfg.target_fitness && state.fitness[state.best_index] <= *cfg.target_fitness;
    };

    if (keep_trace)
        result.trace.push_back({0, state.fitness[state.best_index], result.evaluations});

    while ((cfg.max_generations == 0 || result.generations < cfg.max_generations) &&
           budget_allows(cfg.pop_size) && !reached_target()) {
        // trials are built first so the random stream is consumed in member
        // order regardless of how evaluations are scheduled
        std::vector<std::vector<double>> trials(cfg.pop_size);
        for (std::size_t i = 0; i < cfg.pop_size; ++i)
            trials[i] = de_trial(state, i, cfg, rng);
        for (std::size_t i = 0; i < cfg.pop_size; ++i) {
            const double f = detail::de_fitness(objective(trials[i]));
            if (de_select(f, state.fitness[i])) {
                state.vectors[i] = std::move(trials[i]);
                state.fitness[i] = f;
            }
        }
        result.evaluations += cfg.pop_size;
        ++result.generations;
        state.refresh_best();
        if (keep_trace)
            result.trace.push_back(
                {result.generations, state.fitness[state.best_index], result.evaluations});
    }

    result.best = state.vectors[state.best_index];
    result.best_fitness = state.fitness[state.best_index];
    return result;
}

struct TuneResult {
    NeuralTree tree;
    double train_mse = 0.0;
    std::uint64_t evaluations = 0;
    std::vector<DeTraceEntry> trace;
};

// Single-objective parameter tuning of one tree: DE over the tree's flat
// parameter vector against training MSE. The tree's own encoding joins the
// initial population, so the result never regresses.
inline TuneResult tune_tree(const NeuralTree& tree, const Dataset& train, DeConfig cfg,
                            const GrowthLimits& limits, Rng& rng, bool keep_trace = false) {
    if (train.rows() == 0)
        throw std::invalid_argument("tune_tree: empty training split");
    param_bounds(tree, limits, cfg.lower, cfg.upper);

    std::vector<double> outputs(train.rows());
    const auto objective = [&](std::span<const double> v) {
        const NeuralTree candidate = decode_params(tree, v);
        for (std::size_t i = 0; i < train.rows(); ++i)
            outputs[i] = eval_tree(candidate, train.row(i));
        return mse(train.targets, outputs);
    };

    const std::vector<std::vector<double>> init = {encode_params(tree).values};
    DeResult r = de_optimize(objective, cfg, rng, init, keep_trace);
    return {decode_params(tree, r.best), r.best_fitness, r.evaluations, std::move(r.trace)};
}

} // namespace hfnt
