#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "hfnt/dataset.hpp"
#include "hfnt/de.hpp"
#include "hfnt/metrics.hpp"
#include "hfnt/mogp.hpp"
#include "hfnt/rng.hpp"
#include "hfnt/tree.hpp"

namespace hfnt {

// A bag of trees selected from a final population, with one normalized
// combination weight per model.
struct EnsembleBag {
    std::vector<NeuralTree> models;
    std::vector<double> weights;
    TaskKind task = TaskKind::regression;
    double diversity = 0.0; // distinct(M) / size(M)
};

struct FeatureReport {
    std::vector<std::size_t> per_feature_counts; // models using each feature
    std::size_t tsf = 0;                         // features used at least once
    std::vector<int> msf;                        // most frequently selected
    std::vector<int> mif;                        // least frequently selected (but used)
    std::vector<int> unused;
};

// Number of structural equivalence classes under the four-part signature.
inline std::size_t distinct_count(std::span<const NeuralTree> models) {
    if (models.empty())
        throw std::invalid_argument("distinct_count: empty model list");
    std::set<TreeSignature> classes;
    for (const auto& m : models) classes.insert(signature(m));
    return classes.size();
}

inline double bag_diversity(std::span<const NeuralTree> models) {
    return static_cast<double>(distinct_count(models)) / static_cast<double>(models.size());
}

// Greedy candidate pick: sweep fronts in rank order, ascending error inside a
// front, taking only novel signatures; remaining slots are filled with the
// lowest-error leftovers.
inline std::vector<NeuralTree> select_candidates(const RankedPopulation& pop, std::size_t m) {
    const std::size_t n = pop.members.size();
    if (m == 0 || m > n)
        throw std::invalid_argument("select_candidates: bag size out of range");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (pop.members[a].rank != pop.members[b].rank)
            return pop.members[a].rank < pop.members[b].rank;
        return pop.members[a].objectives.error < pop.members[b].objectives.error;
    });

    std::vector<NeuralTree> picked;
    std::vector<bool> taken(n, false);
    std::set<TreeSignature> seen;
    for (std::size_t idx : order) {
        if (picked.size() == m) break;
        auto sig = signature(pop.members[idx].tree);
        if (seen.insert(std::move(sig)).second) {
            picked.push_back(pop.members[idx].tree);
            taken[idx] = true;
        }
    }
    if (picked.size() < m) {
        // fall back to lowest-error leftovers regardless of novelty
        std::vector<std::size_t> rest(n);
        std::iota(rest.begin(), rest.end(), 0);
        std::stable_sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) {
            return pop.members[a].objectives.error < pop.members[b].objectives.error;
        });
        for (std::size_t idx : rest) {
            if (picked.size() == m) break;
            if (!taken[idx]) {
                picked.push_back(pop.members[idx].tree);
                taken[idx] = true;
            }
        }
    }
    return picked;
}

inline std::vector<double> normalize_weights(std::span<const double> raw) {
    std::vector<double> w(raw.begin(), raw.end());
    double sum = 0.0;
    for (double v : w) sum += v;
    if (sum <= 0.0) {
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
        return w;
    }
    for (double& v : w) v /= sum;
    return w;
}

// Weighted majority vote over hard class votes; ties go to the lowest id.
inline int weighted_vote(std::span<const int> votes, std::span<const double> weights,
                         int n_classes) {
    std::vector<double> mass(static_cast<std::size_t>(n_classes), 0.0);
    for (std::size_t t = 0; t < votes.size(); ++t)
        mass[static_cast<std::size_t>(votes[t])] += weights[t];
    int best = 0;
    for (int j = 1; j < n_classes; ++j)
        if (mass[static_cast<std::size_t>(j)] > mass[static_cast<std::size_t>(best)]) best = j;
    return best;
}

// Classification combination: each tree casts a hard binary vote.
inline int vote(const EnsembleBag& bag, std::span<const double> row, int n_classes) {
    std::vector<int> votes(bag.models.size());
    for (std::size_t t = 0; t < bag.models.size(); ++t)
        votes[t] = classify_binary(eval_tree(bag.models[t], row));
    return weighted_vote(votes, bag.weights, n_classes);
}

// Regression/time-series combination: weighted arithmetic mean of the
// descaled model outputs.
inline double mean_combine(const EnsembleBag& bag, std::span<const double> row,
                           const Dataset& ds) {
    double y = 0.0;
    for (std::size_t t = 0; t < bag.models.size(); ++t)
        y += bag.weights[t] * descale_output(eval_tree(bag.models[t], row), ds);
    return y;
}

namespace detail {

// Per-model predictions precomputed once so weight search is cheap:
// hard votes for classification, descaled outputs otherwise.
struct EnsemblePredictions {
    std::vector<std::vector<int>> votes;      // [model][row]
    std::vector<std::vector<double>> outputs; // [model][row]
    std::vector<double> desired;              // descaled targets / label ids
    TaskKind task = TaskKind::regression;
    int n_classes = 2;

    static EnsemblePredictions make(std::span<const NeuralTree> models, const Dataset& ds) {
        EnsemblePredictions p;
        p.task = ds.task;
        p.n_classes = std::max(ds.n_classes, 2);
        const std::size_t rows = ds.rows();
        if (ds.task == TaskKind::classification) {
            p.votes.assign(models.size(), std::vector<int>(rows));
            for (std::size_t t = 0; t < models.size(); ++t)
                for (std::size_t i = 0; i < rows; ++i)
                    p.votes[t][i] = classify_binary(eval_tree(models[t], ds.row(i)));
            p.desired = ds.targets;
        } else {
            p.outputs.assign(models.size(), std::vector<double>(rows));
            for (std::size_t t = 0; t < models.size(); ++t)
                for (std::size_t i = 0; i < rows; ++i)
                    p.outputs[t][i] = descale_output(eval_tree(models[t], ds.row(i)), ds);
            p.desired.resize(rows);
            for (std::size_t i = 0; i < rows; ++i)
                p.desired[i] = descale_output(ds.targets[i], ds);
        }
        return p;
    }

    // misclassification rate or MSE under normalized weights
    double error(std::span<const double> raw_weights) const {
        const auto w = normalize_weights(raw_weights);
        const std::size_t rows = desired.size();
        if (task == TaskKind::classification) {
            std::vector<int> row_votes(votes.size());
            std::size_t wrong = 0;
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t t = 0; t < votes.size(); ++t) row_votes[t] = votes[t][i];
                if (weighted_vote(row_votes, w, n_classes) != static_cast<int>(desired[i]))
                    ++wrong;
            }
            return static_cast<double>(wrong) / static_cast<double>(rows);
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
            double y = 0.0;
            for (std::size_t t = 0; t < outputs.size(); ++t) y += w[t] * outputs[t][i];
            const double e = desired[i] - y;
            acc += e * e;
        }
        return acc / static_cast<double>(rows);
    }
};

} // namespace detail

// Ensemble error on a split under the bag's weights, computed through the
// same path the weight fitter optimizes.
inline double ensemble_error(const EnsembleBag& bag, const Dataset& ds) {
    const auto preds = detail::EnsemblePredictions::make(bag.models, ds);
    return preds.error(bag.weights);
}

struct FitWeightsConfig {
    std::size_t de_pop = 100;
    std::uint64_t de_evaluations = 300000;
    double cr = 0.9;
    double F = 0.7;
};

// DE search for combination weights in [0,1]^m minimizing the bag's error on
// the fitting split. The unit vertex vectors and the uniform vector join the
// initial population, so the fitted bag never underperforms its best single
// member on that split.
inline EnsembleBag fit_weights(const EnsembleBag& bag, const Dataset& fit_split,
                               const FitWeightsConfig& cfg, Rng& rng) {
    if (bag.models.empty())
        throw std::invalid_argument("fit_weights: empty bag");
    if (fit_split.rows() == 0)
        throw std::invalid_argument("fit_weights: empty fitting split");

    const std::size_t m = bag.models.size();
    const auto preds = detail::EnsemblePredictions::make(bag.models, fit_split);

    DeConfig de;
    de.pop_size = cfg.de_pop;
    de.cr = cfg.cr;
    de.F = cfg.F;
    de.max_evaluations = cfg.de_evaluations;
    de.lower.assign(m, 0.0);
    de.upper.assign(m, 1.0);

    if (m + 1 > de.pop_size)
        throw std::invalid_argument("fit_weights: DE population too small for vertex seeding");
    std::vector<std::vector<double>> seeds;
    for (std::size_t t = 0; t < m; ++t) {
        std::vector<double> vertex(m, 0.0);
        vertex[t] = 1.0;
        seeds.push_back(std::move(vertex));
    }
    seeds.emplace_back(m, 1.0 / static_cast<double>(m));

    const auto objective = [&](std::span<const double> w) { return preds.error(w); };
    const DeResult r = de_optimize(objective, de, rng, seeds);

    EnsembleBag fitted = bag;
    fitted.weights = normalize_weights(r.best);
    fitted.diversity = bag_diversity(fitted.models);
    return fitted;
}

struct FeatureReportConfig {
    double msf_fraction = 0.7; // selected by at least this share of models
    double mif_fraction = 0.1; // selected by at most this share (but used)
};

inline FeatureReport feature_report(const EnsembleBag& bag, std::size_t total_features,
                                    const FeatureReportConfig& cfg = {}) {
    if (bag.models.empty())
        throw std::invalid_argument("feature_report: empty bag");
    FeatureReport rep;
    rep.per_feature_counts.assign(total_features, 0);
    for (const auto& model : bag.models)
        for (int f : used_features(model))
            if (static_cast<std::size_t>(f) < total_features)
                ++rep.per_feature_counts[static_cast<std::size_t>(f)];

    const double n = static_cast<double>(bag.models.size());
    const auto msf_min = static_cast<std::size_t>(std::ceil(cfg.msf_fraction * n));
    const auto mif_max = static_cast<std::size_t>(std::floor(cfg.mif_fraction * n));
    for (std::size_t f = 0; f < total_features; ++f) {
        const std::size_t c = rep.per_feature_counts[f];
        if (c == 0) {
            rep.unused.push_back(static_cast<int>(f));
            continue;
        }
        ++rep.tsf;
        if (c >= msf_min) rep.msf.push_back(static_cast<int>(f));
        if (c <= mif_max) rep.mif.push_back(static_cast<int>(f));
    }
    return rep;
}

} // namespace hfnt
