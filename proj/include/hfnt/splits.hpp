#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hfnt/dataset.hpp"
#include "hfnt/rng.hpp"

namespace hfnt {

// Cross-validation plan over sample indices. Per-sample assignment ids:
//   kfold       fold id of the sample's test fold
//   five_by_two 5-bit mask, bit r set when the sample is in set B of repetition r
//   holdout     0 = train (leading rows), 1 = test; temporal order preserved
struct SplitPlan {
    enum class Kind { kfold, five_by_two, holdout };

    Kind kind = Kind::kfold;
    int k = 0;
    double fraction = 0.5;
    std::uint64_t seed = 0;
    std::vector<std::uint32_t> assignments;

    int runs() const {
        switch (kind) {
        case Kind::kfold: return k;
        case Kind::five_by_two: return 10;
        case Kind::holdout: return 1;
        }
        return 0;
    }

    bool is_test(std::size_t sample, int run) const {
        switch (kind) {
        case Kind::kfold:
            return assignments[sample] == static_cast<std::uint32_t>(run);
        case Kind::five_by_two: {
            // run = 2*rep + orientation; orientation 0 tests B, 1 tests A
            const int rep = run / 2;
            const bool in_b = (assignments[sample] >> rep) & 1u;
            return (run % 2 == 0) ? in_b : !in_b;
        }
        case Kind::holdout:
            return assignments[sample] == 1;
        }
        return false;
    }

    std::vector<std::size_t> test_indices(int run) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (is_test(i, run)) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> train_indices(int run) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (!is_test(i, run)) out.push_back(i);
        return out;
    }

    nlohmann::json to_json() const {
        std::string name = kind == Kind::kfold ? "kfold"
                         : kind == Kind::five_by_two ? "five_by_two"
                                                     : "holdout";
        return {{"kind", name},
                {"k", k},
                {"fraction", fraction},
                {"seed", seed},
                {"fold_assignments", assignments}};
    }

    static SplitPlan from_json(const nlohmann::json& j) {
        SplitPlan p;
        const std::string name = j.at("kind").get<std::string>();
        if (name == "kfold") p.kind = Kind::kfold;
        else if (name == "five_by_two") p.kind = Kind::five_by_two;
        else if (name == "holdout") p.kind = Kind::holdout;
        else throw std::invalid_argument("unknown split kind: " + name);
        p.k = j.at("k").get<int>();
        p.fraction = j.at("fraction").get<double>();
        p.seed = j.at("seed").get<std::uint64_t>();
        p.assignments = j.at("fold_assignments").get<std::vector<std::uint32_t>>();
        return p;
    }
};

namespace detail {

inline void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
}

} // namespace detail

// Partitions samples into k test folds whose sizes differ by at most one.
// Optional stratification keeps per-class proportions across folds.
inline SplitPlan make_kfold(const Dataset& ds, int k, std::uint64_t seed,
                            bool stratified = false) {
    const std::size_t n = ds.rows();
    if (k < 2)
        throw std::invalid_argument("make_kfold: k must be at least 2");
    if (static_cast<std::size_t>(k) > n)
        throw std::invalid_argument("make_kfold: k exceeds sample count");

    SplitPlan plan;
    plan.kind = SplitPlan::Kind::kfold;
    plan.k = k;
    plan.seed = seed;
    plan.assignments.assign(n, 0);

    Rng rng = Rng::stream(seed, "splits.kfold");
    if (stratified && ds.task == TaskKind::classification) {
        // deal each class round-robin starting after the previous class's tail
        std::uint32_t next = 0;
        for (int c = 0; c < ds.n_classes; ++c) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < n; ++i)
                if (static_cast<int>(ds.targets[i]) == c) members.push_back(i);
            detail::shuffle_indices(members, rng);
            for (std::size_t i = 0; i < members.size(); ++i)
                plan.assignments[members[i]] = (next + i) % k;
            next = (next + static_cast<std::uint32_t>(members.size())) % k;
        }
    } else {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        detail::shuffle_indices(idx, rng);
        // first n%k folds take one extra sample
        const std::size_t base = n / static_cast<std::size_t>(k);
        const std::size_t extra = n % static_cast<std::size_t>(k);
        std::size_t pos = 0;
        for (int f = 0; f < k; ++f) {
            const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
            for (std::size_t i = 0; i < size; ++i)
                plan.assignments[idx[pos++]] = static_cast<std::uint32_t>(f);
        }
    }
    return plan;
}

// Five independent random halvings into equal sets A and B; within each
// repetition the halves swap train/test roles. Odd counts put the extra
// sample in A.
inline SplitPlan make_five_by_two(const Dataset& ds, std::uint64_t seed) {
    const std::size_t n = ds.rows();
    if (n < 2)
        throw std::invalid_argument("make_five_by_two: need at least 2 samples");

    SplitPlan plan;
    plan.kind = SplitPlan::Kind::five_by_two;
    plan.seed = seed;
    plan.assignments.assign(n, 0);

    const std::size_t size_a = (n + 1) / 2;
    for (int rep = 0; rep < 5; ++rep) {
        Rng rng = Rng::stream(seed, "splits.5x2", static_cast<std::uint64_t>(rep));
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        detail::shuffle_indices(idx, rng);
        for (std::size_t i = size_a; i < n; ++i)
            plan.assignments[idx[i]] |= (1u << rep);
    }
    return plan;
}

// Leading rows train, trailing rows test, order preserved (time series).
inline SplitPlan make_holdout(const Dataset& ds, double train_fraction) {
    const std::size_t n = ds.rows();
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("make_holdout: fraction must be in (0,1)");
    const std::size_t n_train =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train == n)
        throw std::invalid_argument("make_holdout: degenerate split");

    SplitPlan plan;
    plan.kind = SplitPlan::Kind::holdout;
    plan.fraction = train_fraction;
    plan.assignments.assign(n, 0);
    for (std::size_t i = n_train; i < n; ++i) plan.assignments[i] = 1;
    return plan;
}

} // namespace hfnt
