#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "hfnt/mogp.hpp"

using namespace hfnt;

namespace {

TreeNode leaf(int f) {
    TreeNode n;
    n.feature = f;
    return n;
}

TreeNode pair_node(int kind, int f0, int f1) {
    TreeNode n;
    n.activation = kind;
    n.weights = {1.0, 1.0};
    n.children = {leaf(f0), leaf(f1)};
    return n;
}

Dataset toy_regression(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Dataset ds;
    ds.n_cols = cols;
    ds.task = TaskKind::regression;
    Rng rng(seed);
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            const double v = rng.uniform(0, 1);
            ds.features.push_back(v);
            s += v;
        }
        ds.targets.push_back(s / static_cast<double>(cols));
    }
    return ds;
}

RankedPopulation two_member_pop(std::size_t rank_a, double crowd_a, std::size_t rank_b,
                                double crowd_b) {
    RankedPopulation pop;
    RankedMember a, b;
    a.tree = NeuralTree{pair_node(2, 0, 1)};
    b.tree = NeuralTree{pair_node(3, 0, 1)};
    a.rank = rank_a;
    a.crowding = crowd_a;
    b.rank = rank_b;
    b.crowding = crowd_b;
    pop.members = {a, b};
    return pop;
}

} // namespace

TEST_CASE("config validation") {
    MogpConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.pool_size() == 15);

    MogpConfig small = cfg;
    small.pop_size = 20;
    CHECK_THROWS_AS(small.validate(), std::invalid_argument);

    MogpConfig bad = cfg;
    bad.pm = 0.4; // pc stays 0.7
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("binary tournament prefers rank then crowding") {
    constexpr double inf = std::numeric_limits<double>::infinity();
    Rng rng(3);
    {
        // rank-1 member wins every mixed draw; only (b,b) draws return b,
        // so b wins about a quarter of tournaments
        const auto pop = two_member_pop(1, 0.0, 2, inf);
        int wins0 = 0;
        for (int i = 0; i < 2000; ++i)
            if (binary_tournament(pop, rng) == 0) ++wins0;
        CHECK(wins0 > 1400);
        CHECK(wins0 < 1600);
    }
    {
        const auto pop = two_member_pop(1, inf, 1, 0.4);
        int wins0 = 0;
        for (int i = 0; i < 2000; ++i)
            if (binary_tournament(pop, rng) == 0) ++wins0;
        CHECK(wins0 > 1400); // crowding tie-break
    }
}

TEST_CASE("binary tournament coin flip on exact ties") {
    const auto pop = two_member_pop(1, 0.5, 1, 0.5);
    Rng rng(11);
    const int n = 10000;
    int wins0 = 0;
    for (int i = 0; i < n; ++i)
        if (binary_tournament(pop, rng) == 0) ++wins0;
    const double sd = std::sqrt(n * 0.25);
    CHECK(std::fabs(wins0 - n / 2.0) <= 5.0 * sd);
}

TEST_CASE("crossover swaps leaves between minimal trees") {
    GrowthLimits lim;
    const NeuralTree t1{pair_node(2, 1, 1)};
    const NeuralTree t2{pair_node(3, 2, 2)};
    Rng rng(5);
    const auto [c1, c2] = crossover_at(t1, t2, 1, 1, 4, lim, rng);
    CHECK(used_features(c1) == std::vector<int>{1, 2});
    CHECK(used_features(c2) == std::vector<int>{1, 2});
    // activation kinds travel with the subtree roots untouched here
    CHECK(c1.root.activation == 2);
    CHECK(c2.root.activation == 3);
}

TEST_CASE("crossover with identical parents at identical positions is identity") {
    GrowthLimits lim;
    Rng grow(9);
    const NeuralTree t = random_tree(5, lim, grow);
    const std::size_t n = node_count(t.root);
    Rng rng(6);
    for (std::size_t pos = 1; pos < n; ++pos) {
        const auto [c1, c2] = crossover_at(t, t, pos, pos, 5, lim, rng);
        CHECK(c1 == t);
        CHECK(c2 == t);
    }
}

TEST_CASE("crossover children stay legal over 1000 random pairs") {
    GrowthLimits lim;
    Rng grow(77);
    Rng rng(78);
    for (int i = 0; i < 1000; ++i) {
        const NeuralTree p1 = random_tree(6, lim, grow);
        const NeuralTree p2 = random_tree(6, lim, grow);
        const auto [c1, c2] = crossover(p1, p2, 6, lim, rng);
        CHECK(check_limits(c1, lim));
        CHECK(check_limits(c2, lim));
        // parents untouched
        CHECK(check_limits(p1, lim));
    }
}

TEST_CASE("mutation operator 2 redraws every terminal, internals untouched") {
    GrowthLimits lim;
    const NeuralTree t{pair_node(2, 0, 1)};
    Rng rng(31);
    const NeuralTree m = mutate_with(t, MutationOp::replace_all_terminals, 50, lim, rng);
    CHECK(m.root.activation == 2);
    CHECK(m.root.weights == t.root.weights);
    REQUIRE(m.root.children.size() == 2);
    CHECK(m.root.children[0].is_leaf());
    CHECK(m.root.children[1].is_leaf());
}

TEST_CASE("mutation draws the four operators uniformly") {
    GrowthLimits lim;
    Rng grow(41);
    const NeuralTree t = random_tree(6, lim, grow);
    Rng rng(42);
    const int n = 10000;
    std::vector<int> counts(4, 0);
    for (int i = 0; i < n; ++i) {
        MutationOp op;
        (void)mutate(t, 6, lim, rng, &op);
        ++counts[static_cast<int>(op)];
    }
    const double expect = n / 4.0;
    const double sd = std::sqrt(n * 0.25 * 0.75);
    for (int counted : counts) CHECK(std::fabs(counted - expect) <= 5.0 * sd);
}

TEST_CASE("mutation operators 3 and 4 change the structure") {
    GrowthLimits lim;
    Rng grow(51);
    Rng rng(52);
    for (int i = 0; i < 300; ++i) {
        const NeuralTree t = random_tree(5, lim, grow);
        const NeuralTree m3 =
            mutate_with(t, MutationOp::replace_node_with_subtree, 5, lim, rng);
        CHECK(m3 != t);
        CHECK(check_limits(m3, lim));
        const NeuralTree m4 =
            mutate_with(t, MutationOp::replace_terminal_with_node, 5, lim, rng);
        CHECK(check_limits(m4, lim));
        // when a shallow terminal exists, op 4 grafts a computational node
        bool has_shallow_leaf = false;
        std::vector<const TreeNode*> stack{&t.root};
        std::vector<int> depth{0};
        while (!stack.empty()) {
            const TreeNode* n = stack.back();
            const int d = depth.back();
            stack.pop_back();
            depth.pop_back();
            if (n->is_leaf() && d <= lim.max_depth - 1) has_shallow_leaf = true;
            for (const auto& c : n->children) {
                stack.push_back(&c);
                depth.push_back(d + 1);
            }
        }
        if (has_shallow_leaf) CHECK(node_count(m4.root) > node_count(t.root));
    }
}

TEST_CASE("mutated trees stay legal across all operators") {
    GrowthLimits lim;
    Rng grow(61);
    Rng rng(62);
    for (int i = 0; i < 500; ++i) {
        const NeuralTree t = random_tree(4, lim, grow);
        const NeuralTree m = mutate(t, 4, lim, rng);
        CHECK(check_limits(m, lim));
    }
}

TEST_CASE("zero generations returns the ranked initial population") {
    const Dataset train = toy_regression(20, 3, 1);
    MogpConfig cfg;
    cfg.pop_size = 24;
    Evolution e(train, cfg, Rng(5));
    e.initialize();
    CHECK(e.population().members.size() == 24);
    CHECK(e.evaluations() == 24);
    for (const auto& m : e.population().members) {
        CHECK(m.rank >= 1);
        CHECK(std::isfinite(m.objectives.error));
    }
}

TEST_CASE("evolve keeps the population size and the evaluation count exact") {
    const Dataset train = toy_regression(16, 3, 2);
    MogpConfig cfg;
    cfg.pop_size = 22;
    cfg.iterations = 7;
    Evolution e(train, cfg, Rng(9));
    e.initialize();
    for (int g = 0; g < 7; ++g) {
        e.run(1);
        CHECK(e.population().members.size() == 22);
        for (const auto& m : e.population().members) {
            CHECK(check_limits(m.tree, cfg.limits));
            CHECK(m.objectives.neg_diversity >= -7.0);
            CHECK(m.objectives.neg_diversity <= -1.0);
            CHECK(std::isfinite(m.objectives.error));
        }
    }
    CHECK(e.evaluations() == 22 + 7 * (22 + cfg.pool_size()));
}

TEST_CASE("min error over the population is non-increasing across generations") {
    const Dataset train = toy_regression(24, 4, 3);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        MogpConfig cfg;
        cfg.pop_size = 24;
        cfg.iterations = 12;
        const RankedPopulation pop = evolve(train, cfg, Rng(seed));
        CHECK(pop.members.size() == 24);
    }
    // trajectory check via per-generation logs
    MogpConfig cfg;
    cfg.pop_size = 24;
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        Evolution e(train, cfg, Rng(seed));
        e.initialize();
        double prev = e.population().members[e.population().best_error_index()].objectives.error;
        e.run(12);
        for (const auto& log : e.logs()) {
            CHECK(log.min_error <= prev + 1e-15);
            prev = log.min_error;
        }
    }
}

TEST_CASE("rank-1 minima of error and size are non-increasing") {
    const Dataset train = toy_regression(20, 3, 4);
    MogpConfig cfg;
    cfg.pop_size = 26;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Evolution e(train, cfg, Rng(seed));
        e.initialize();
        const auto front_minima = [&] {
            double err = std::numeric_limits<double>::infinity();
            double size = std::numeric_limits<double>::infinity();
            for (const auto& m : e.population().members) {
                if (m.rank != 1) continue;
                err = std::min(err, m.objectives.error);
                size = std::min(size, m.objectives.size);
            }
            return std::pair{err, size};
        };
        auto [pe, ps] = front_minima();
        for (int g = 0; g < 15; ++g) {
            e.run(1);
            const auto [ce, cs] = front_minima();
            CHECK(ce <= pe + 1e-15);
            CHECK(cs <= ps + 1e-15);
            pe = ce;
            ps = cs;
        }
    }
}

TEST_CASE("single-objective ranking degenerates to an error sort") {
    const Dataset train = toy_regression(18, 3, 5);
    MogpConfig cfg;
    cfg.pop_size = 21;
    cfg.iterations = 5;
    Evolution e(train, cfg, Rng(7), true);
    e.initialize();
    std::vector<std::pair<double, std::size_t>> by_rank;
    for (const auto& m : e.population().members)
        by_rank.emplace_back(m.objectives.error, m.rank);
    std::sort(by_rank.begin(), by_rank.end());
    for (std::size_t i = 0; i < by_rank.size(); ++i) CHECK(by_rank[i].second == i + 1);

    // min error still non-increasing under elitism
    double prev = by_rank.front().first;
    e.run(10);
    for (const auto& log : e.logs()) {
        CHECK(log.min_error <= prev + 1e-15);
        prev = log.min_error;
    }
}

TEST_CASE("single-objective runs grow larger trees than multiobjective") {
    const auto series = mackey_glass(220, 5);
    const Dataset train = scale(lag_embed(series, 4, 1));
    double mean_single = 0.0, mean_multi = 0.0;
    const int runs = 4;
    for (std::uint64_t seed = 0; seed < runs; ++seed) {
        MogpConfig cfg;
        cfg.pop_size = 24;
        cfg.iterations = 12;
        const auto mo = evolve(train, cfg, Rng(seed));
        const auto so = evolve_single_objective(train, cfg, Rng(seed));
        for (const auto& m : mo.members) mean_multi += m.objectives.size;
        for (const auto& m : so.members) mean_single += m.objectives.size;
    }
    CHECK(mean_single > mean_multi);
}

TEST_CASE("mating pool without replacement still evolves correctly") {
    const Dataset train = toy_regression(18, 3, 8);
    MogpConfig cfg;
    cfg.pop_size = 22;
    cfg.pool_with_replacement = false;
    CHECK_NOTHROW(cfg.validate());
    Evolution e(train, cfg, Rng(3));
    e.initialize();
    e.run(5);
    CHECK(e.population().members.size() == 22);
    CHECK(e.evaluations() == 22 + 5 * (22 + cfg.pool_size()));

    MogpConfig bad = cfg;
    bad.mating_fraction = 1.0;
    CHECK_NOTHROW(bad.validate()); // pool == pop is the limit
}

TEST_CASE("replace_member reinjects a tuned tree and re-ranks") {
    const Dataset train = toy_regression(20, 3, 6);
    MogpConfig cfg;
    cfg.pop_size = 22;
    Evolution e(train, cfg, Rng(13));
    e.initialize();
    e.run(3);
    const std::size_t idx = e.population().best_error_index();
    NeuralTree tuned = e.population().members[idx].tree;
    const double real_error = e.tree_error(tuned);
    e.replace_member(idx, tuned, real_error);
    CHECK(e.population().members[idx].objectives.error == real_error);
    CHECK(e.population().members[idx].rank == 1);
}
