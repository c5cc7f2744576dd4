#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "hfnt/dataset.hpp"
#include "hfnt/metrics.hpp"
#include "hfnt/pareto.hpp"
#include "hfnt/rng.hpp"
#include "hfnt/tree.hpp"

namespace hfnt {

struct MogpConfig {
    std::size_t pop_size = 30;
    double mating_fraction = 0.5; // pool = round(pop_size * r)
    double pm = 0.3;
    double pc = 0.7;
    std::size_t iterations = 30;
    GrowthLimits limits;
    bool pool_with_replacement = true;

    std::size_t pool_size() const {
        return static_cast<std::size_t>(std::llround(
            static_cast<double>(pop_size) * mating_fraction));
    }

    void validate() const {
        if (pop_size <= 20)
            throw std::invalid_argument("MogpConfig: population must exceed 20");
        if (std::fabs(pc - (1.0 - pm)) > 1e-12)
            throw std::invalid_argument("MogpConfig: pc must equal 1 - pm");
        if (!(mating_fraction > 0.0 && mating_fraction <= 1.0))
            throw std::invalid_argument("MogpConfig: mating fraction outside (0,1]");
        if (pool_size() < 2)
            throw std::invalid_argument("MogpConfig: mating pool too small");
        if (!pool_with_replacement && pool_size() > pop_size)
            throw std::invalid_argument(
                "MogpConfig: without replacement the pool cannot exceed the population");
    }
};

struct RankedMember {
    NeuralTree tree;
    ObjectiveTriple objectives;
    std::size_t rank = 0;     // 1-based front index
    double crowding = 0.0;
};

struct RankedPopulation {
    std::vector<RankedMember> members;

    std::vector<std::vector<std::size_t>> fronts() const {
        std::vector<ObjectiveTriple> obj;
        obj.reserve(members.size());
        for (const auto& m : members) obj.push_back(m.objectives);
        return nondominated_sort(obj);
    }

    // index of the lowest-error member (always on front 1)
    std::size_t best_error_index() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < members.size(); ++i)
            if (members[i].objectives.error < members[best].objectives.error) best = i;
        return best;
    }
};

struct GenerationLog {
    std::size_t generation = 0;
    double min_error = 0.0;
    double mean_error = 0.0;
    double mean_size = 0.0;
    std::size_t front1_size = 0;
    double mean_diversity_index = 0.0;
};

// Binary tournament on (rank, crowding): lower rank wins, larger crowding
// breaks rank ties, a fair coin breaks exact ties.
inline std::size_t binary_tournament(const RankedPopulation& pop, Rng& rng) {
    const std::size_t a = rng.uniform_index(pop.members.size());
    const std::size_t b = rng.uniform_index(pop.members.size());
    const auto& ma = pop.members[a];
    const auto& mb = pop.members[b];
    if (ma.rank != mb.rank) return ma.rank < mb.rank ? a : b;
    if (ma.crowding != mb.crowding) return ma.crowding > mb.crowding ? a : b;
    return rng.bernoulli(0.5) ? a : b;
}

namespace detail {

inline void collect_nodes(TreeNode& n, std::vector<TreeNode*>& out) {
    out.push_back(&n);
    for (auto& c : n.children) collect_nodes(c, out);
}

// Preorder node pointers; index 0 is the root.
inline std::vector<TreeNode*> node_pointers(NeuralTree& t) {
    std::vector<TreeNode*> out;
    collect_nodes(t.root, out);
    return out;
}

// Converts internal nodes deeper than the depth limit into random leaves.
inline void repair_depth(TreeNode& n, int depth, int n_features, const GrowthLimits& lim,
                         Rng& rng) {
    if (!n.is_leaf() && depth >= lim.max_depth) {
        n = random_leaf(n_features, rng);
        return;
    }
    for (auto& c : n.children) repair_depth(c, depth + 1, n_features, lim, rng);
}

} // namespace detail

// Swaps the subtrees rooted at non-root preorder positions i1 (in t1) and i2
// (in t2), then repairs any depth overflow. Parents are left untouched.
inline std::pair<NeuralTree, NeuralTree> crossover_at(const NeuralTree& t1,
                                                      const NeuralTree& t2, std::size_t i1,
                                                      std::size_t i2, int n_features,
                                                      const GrowthLimits& lim, Rng& rng) {
    NeuralTree c1 = t1;
    NeuralTree c2 = t2;
    auto nodes1 = detail::node_pointers(c1);
    auto nodes2 = detail::node_pointers(c2);
    if (i1 == 0 || i1 >= nodes1.size() || i2 == 0 || i2 >= nodes2.size())
        throw std::invalid_argument("crossover_at: bad non-root position");
    std::swap(*nodes1[i1], *nodes2[i2]);
    detail::repair_depth(c1.root, 0, n_features, lim, rng);
    detail::repair_depth(c2.root, 0, n_features, lim, rng);
    return {std::move(c1), std::move(c2)};
}

// Uniformly chosen non-root subtrees of the two parents are exchanged,
// including node activations, weights, and inputs.
inline std::pair<NeuralTree, NeuralTree> crossover(const NeuralTree& t1, const NeuralTree& t2,
                                                   int n_features, const GrowthLimits& lim,
                                                   Rng& rng) {
    const std::size_t n1 = node_count(t1.root);
    const std::size_t n2 = node_count(t2.root);
    const std::size_t i1 = 1 + rng.uniform_index(n1 - 1);
    const std::size_t i2 = 1 + rng.uniform_index(n2 - 1);
    return crossover_at(t1, t2, i1, i2, n_features, lim, rng);
}

enum class MutationOp {
    replace_one_terminal = 0,
    replace_all_terminals = 1,
    replace_node_with_subtree = 2,
    replace_terminal_with_node = 3,
};

namespace detail {

inline void node_depths(const TreeNode& n, int depth, std::vector<int>& out) {
    out.push_back(depth);
    for (const auto& c : n.children) node_depths(c, depth + 1, out);
}

inline std::vector<std::size_t> terminal_positions(const std::vector<TreeNode*>& nodes,
                                                   const std::vector<int>& depths,
                                                   int max_depth_allowed) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i]->is_leaf() && depths[i] <= max_depth_allowed) out.push_back(i);
    return out;
}

} // namespace detail

// Applies one specific mutation operator. Operators 3 and 4 grow fresh
// computational material and target positions with room below the depth
// limit; 4 falls back to a terminal replacement when every leaf sits at the
// bottom layer.
inline NeuralTree mutate_with(const NeuralTree& t, MutationOp op, int n_features,
                              const GrowthLimits& lim, Rng& rng) {
    NeuralTree out = t;
    auto nodes = detail::node_pointers(out);
    std::vector<int> depths;
    detail::node_depths(out.root, 0, depths);

    switch (op) {
    case MutationOp::replace_one_terminal: {
        auto leaves = detail::terminal_positions(nodes, depths, lim.max_depth);
        TreeNode* target = nodes[leaves[rng.uniform_index(leaves.size())]];
        *target = random_leaf(n_features, rng);
        break;
    }
    case MutationOp::replace_all_terminals: {
        for (TreeNode* n : nodes)
            if (n->is_leaf()) *n = random_leaf(n_features, rng);
        break;
    }
    case MutationOp::replace_node_with_subtree: {
        std::vector<std::size_t> eligible;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (depths[i] <= lim.max_depth - 1) eligible.push_back(i);
        const std::size_t pick = eligible[rng.uniform_index(eligible.size())];
        *nodes[pick] = random_subtree(depths[pick], n_features, lim, rng);
        break;
    }
    case MutationOp::replace_terminal_with_node: {
        auto leaves = detail::terminal_positions(nodes, depths, lim.max_depth - 1);
        if (leaves.empty()) {
            // every terminal sits at the bottom layer; a computational node
            // cannot fit there
            auto any_leaf = detail::terminal_positions(nodes, depths, lim.max_depth);
            TreeNode* target = nodes[any_leaf[rng.uniform_index(any_leaf.size())]];
            *target = random_leaf(n_features, rng);
            break;
        }
        const std::size_t pick = leaves[rng.uniform_index(leaves.size())];
        TreeNode node;
        node.activation = lim.activations[rng.uniform_index(lim.activations.size())];
        if (activation_uses_a(node.activation)) node.a = rng.uniform(lim.arg_lo, lim.arg_hi);
        if (activation_uses_b(node.activation)) node.b = rng.uniform(lim.arg_lo, lim.arg_hi);
        const std::size_t arity =
            2 + rng.uniform_index(static_cast<std::size_t>(lim.max_arity - 1));
        for (std::size_t i = 0; i < arity; ++i) {
            node.weights.push_back(rng.uniform(lim.weight_lo, lim.weight_hi));
            node.children.push_back(random_leaf(n_features, rng));
        }
        *nodes[pick] = std::move(node);
        break;
    }
    }
    return out;
}

// One of the four mutation operators, chosen uniformly.
inline NeuralTree mutate(const NeuralTree& t, int n_features, const GrowthLimits& lim,
                         Rng& rng, MutationOp* applied = nullptr) {
    const auto op = static_cast<MutationOp>(rng.uniform_index(4));
    if (applied) *applied = op;
    return mutate_with(t, op, n_features, lim, rng);
}

// NSGA-II-driven evolution of a neural tree population against a training
// split. The population persists across calls to run(), so alternating
// structure-search and parameter-tuning rounds share one evaluation budget.
class Evolution {
public:
    Evolution(const Dataset& train, MogpConfig cfg, Rng rng, bool single_objective = false)
        : train_(&train), cfg_(std::move(cfg)), rng_(rng), single_objective_(single_objective) {
        cfg_.validate();
        if (train.rows() == 0)
            throw std::invalid_argument("Evolution: empty training split");
        outputs_.resize(train.rows());
    }

    void initialize() {
        pop_.members.clear();
        pop_.members.reserve(cfg_.pop_size);
        const int d = static_cast<int>(train_->cols());
        for (std::size_t i = 0; i < cfg_.pop_size; ++i) {
            RankedMember m;
            m.tree = random_tree(d, cfg_.limits, rng_);
            pop_.members.push_back(std::move(m));
        }
        evaluate(pop_.members);
        rank(pop_.members);
    }

    // Runs Algorithm-1 generations: tournament selection into a mating pool,
    // crossover/mutation offspring, recombination R = P + Q, nondominated
    // sorting, and elitist truncation back to pop_size.
    void run(std::size_t generations) {
        const int d = static_cast<int>(train_->cols());
        for (std::size_t g = 0; g < generations; ++g) {
            const std::size_t pool_n = cfg_.pool_size();
            std::vector<std::size_t> pool;
            pool.reserve(pool_n);
            std::vector<bool> in_pool(pop_.members.size(), false);
            while (pool.size() < pool_n) {
                const std::size_t winner = binary_tournament(pop_, rng_);
                if (!cfg_.pool_with_replacement) {
                    if (in_pool[winner]) continue;
                    in_pool[winner] = true;
                }
                pool.push_back(winner);
            }

            std::vector<RankedMember> offspring;
            offspring.reserve(pool_n);
            while (offspring.size() < pool_n) {
                std::size_t pa = rng_.uniform_index(pool.size());
                std::size_t pb = rng_.uniform_index(pool.size());
                while (pool.size() > 1 && pb == pa) pb = rng_.uniform_index(pool.size());
                const NeuralTree& p1 = pop_.members[pool[pa]].tree;
                const NeuralTree& p2 = pop_.members[pool[pb]].tree;

                NeuralTree c1, c2;
                if (rng_.bernoulli(cfg_.pc)) {
                    std::tie(c1, c2) = crossover(p1, p2, d, cfg_.limits, rng_);
                } else {
                    c1 = p1;
                    c2 = p2;
                }
                if (rng_.bernoulli(cfg_.pm)) c1 = mutate(c1, d, cfg_.limits, rng_);
                if (rng_.bernoulli(cfg_.pm)) c2 = mutate(c2, d, cfg_.limits, rng_);

                offspring.push_back({std::move(c1), {}, 0, 0.0});
                if (offspring.size() < pool_n)
                    offspring.push_back({std::move(c2), {}, 0, 0.0});
            }

            // R = P + Q, evaluated in full each generation
            std::vector<RankedMember> combined = std::move(pop_.members);
            for (auto& m : offspring) combined.push_back(std::move(m));
            evaluate(combined);
            rank(combined);
            truncate(combined);
            log_generation(++generation_);
        }
    }

    const RankedPopulation& population() const { return pop_; }
    RankedPopulation& population() { return pop_; }

    std::uint64_t evaluations() const { return evaluations_; }
    const std::vector<GenerationLog>& logs() const { return logs_; }

    // Swaps in a tuned tree whose training error is already known (the
    // tuner's objective matches evaluate()'s error bit for bit).
    void replace_member(std::size_t index, NeuralTree tree, double known_error) {
        auto& m = pop_.members.at(index);
        m.tree = std::move(tree);
        m.objectives.error = known_error;
        m.objectives.size = static_cast<double>(tree_size(m.tree));
        m.objectives.neg_diversity = -static_cast<double>(diversity_index(m.tree));
        rank(pop_.members);
    }

    double tree_error(const NeuralTree& t) {
        for (std::size_t i = 0; i < train_->rows(); ++i)
            outputs_[i] = eval_tree(t, train_->row(i));
        return mse(train_->targets, outputs_);
    }

private:
    void evaluate(std::vector<RankedMember>& members) {
        for (auto& m : members) {
            m.objectives.error = tree_error(m.tree);
            m.objectives.size = static_cast<double>(tree_size(m.tree));
            m.objectives.neg_diversity = -static_cast<double>(diversity_index(m.tree));
        }
        evaluations_ += members.size();
    }

    void rank(std::vector<RankedMember>& members) {
        if (single_objective_) {
            // scalar fitness: rank by error alone, no crowding
            std::vector<std::size_t> order(members.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return members[a].objectives.error < members[b].objectives.error;
            });
            for (std::size_t pos = 0; pos < order.size(); ++pos) {
                members[order[pos]].rank = pos + 1;
                members[order[pos]].crowding = 0.0;
            }
            return;
        }
        std::vector<ObjectiveTriple> obj;
        obj.reserve(members.size());
        for (const auto& m : members) obj.push_back(m.objectives);
        const auto fronts = nondominated_sort(obj);
        for (std::size_t f = 0; f < fronts.size(); ++f) {
            std::vector<ObjectiveTriple> front_obj;
            front_obj.reserve(fronts[f].size());
            for (std::size_t idx : fronts[f]) front_obj.push_back(obj[idx]);
            const auto dist = crowding_distance(front_obj);
            for (std::size_t i = 0; i < fronts[f].size(); ++i) {
                members[fronts[f][i]].rank = f + 1;
                members[fronts[f][i]].crowding = dist[i];
            }
        }
    }

    // Keeps the pop_size best by (rank, crowding); exact ties at the cut are
    // broken by a seeded uniform draw.
    void truncate(std::vector<RankedMember>& combined) {
        std::vector<std::uint64_t> tie(combined.size());
        for (auto& t : tie) t = rng_.next_u64();
        std::vector<std::size_t> order(combined.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (combined[a].rank != combined[b].rank) return combined[a].rank < combined[b].rank;
            if (combined[a].crowding != combined[b].crowding)
                return combined[a].crowding > combined[b].crowding;
            return tie[a] < tie[b];
        });
        std::vector<RankedMember> kept;
        kept.reserve(cfg_.pop_size);
        for (std::size_t i = 0; i < cfg_.pop_size; ++i)
            kept.push_back(std::move(combined[order[i]]));
        pop_.members = std::move(kept);
        rank(pop_.members);
    }

    void log_generation(std::size_t generation) {
        GenerationLog log;
        log.generation = generation;
        double min_e = pop_.members[0].objectives.error;
        double sum_e = 0.0, sum_s = 0.0, sum_d = 0.0;
        std::size_t front1 = 0;
        for (const auto& m : pop_.members) {
            min_e = std::min(min_e, m.objectives.error);
            sum_e += m.objectives.error;
            sum_s += m.objectives.size;
            sum_d += -m.objectives.neg_diversity;
            if (m.rank == 1) ++front1;
        }
        const double n = static_cast<double>(pop_.members.size());
        log.min_error = min_e;
        log.mean_error = sum_e / n;
        log.mean_size = sum_s / n;
        log.front1_size = front1;
        log.mean_diversity_index = sum_d / n;
        logs_.push_back(log);
    }

    const Dataset* train_;
    MogpConfig cfg_;
    Rng rng_;
    bool single_objective_;
    RankedPopulation pop_;
    std::vector<double> outputs_;
    std::uint64_t evaluations_ = 0;
    std::size_t generation_ = 0;
    std::vector<GenerationLog> logs_;
};

// One-shot structure search: initialize, run the configured iterations,
// return the final ranked population.
inline RankedPopulation evolve(const Dataset& train, const MogpConfig& cfg, Rng rng) {
    Evolution e(train, cfg, rng);
    e.initialize();
    e.run(cfg.iterations);
    return e.population();
}

// Same loop with scalar fitness (error only); kept for comparing the
// single- and multi-objective optimization courses.
inline RankedPopulation evolve_single_objective(const Dataset& train, const MogpConfig& cfg,
                                                Rng rng) {
    Evolution e(train, cfg, rng, true);
    e.initialize();
    e.run(cfg.iterations);
    return e.population();
}

} // namespace hfnt
