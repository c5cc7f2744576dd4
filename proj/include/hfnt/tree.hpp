#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "hfnt/rng.hpp"

namespace hfnt {

inline constexpr int kActivationCount = 7;

// Which adjustable arguments an activation kind consumes.
inline bool activation_uses_a(int k) { return k == 1 || k == 4 || k == 5 || k == 6 || k == 7; }
inline bool activation_uses_b(int k) { return k == 1 || k == 4 || k == 5; }

namespace detail {

inline double clamp_exp(double e) { return std::clamp(e, -60.0, 60.0); }

// Sign-preserving guard against zero denominators.
inline double safe_den(double d) {
    constexpr double eps = 1e-9;
    if (d > -eps && d < eps) return d < 0.0 ? -eps : eps;
    return d;
}

} // namespace detail

// phi_k(a, b, x) for the seven node activation kinds:
//   1 Gaussian            exp(-(x-a)^2 / b^2)
//   2 tangent-hyperbolic  tanh(x)
//   3 Fermi               1 / (1 + e^-x)
//   4 linear Fermi        a / (1 + e^-x) + b
//   5 linear tanh         a tanh(x) + b
//   6 bipolar sigmoid     (1 - e^-2xa) / (a (1 + e^-2xa))
//   7 unipolar sigmoid    2|a| / (1 + e^-2|a|x)
inline double activate(int k, double a, double b, double x) {
    using detail::clamp_exp;
    using detail::safe_den;
    switch (k) {
    case 1: {
        const double z = x - a;
        return std::exp(clamp_exp(-(z * z) / safe_den(b * b)));
    }
    case 2:
        return std::tanh(x);
    case 3:
        return 1.0 / (1.0 + std::exp(clamp_exp(-x)));
    case 4:
        return a / (1.0 + std::exp(clamp_exp(-x))) + b;
    case 5:
        return a * std::tanh(x) + b;
    case 6: {
        const double e = std::exp(clamp_exp(-2.0 * x * a));
        return (1.0 - e) / safe_den(a * (1.0 + e));
    }
    case 7: {
        const double am = std::fabs(a);
        return 2.0 * am / (1.0 + std::exp(clamp_exp(-2.0 * am * x)));
    }
    default:
        throw std::invalid_argument("activate: kind out of range");
    }
}

// One node of a neural tree. A leaf reads an input feature; an internal node
// applies its activation to the weighted sum of its children's outputs.
struct TreeNode {
    int activation = 0; // 0 marks a leaf
    int feature = -1;
    double a = 0.0;
    double b = 0.0;
    std::vector<double> weights;  // one per child
    std::vector<TreeNode> children;

    bool is_leaf() const { return children.empty(); }

    bool operator==(const TreeNode&) const = default;
};

// Rooted tree whose root is always a computational node.
struct NeuralTree {
    TreeNode root;

    bool operator==(const NeuralTree&) const = default;
};

struct GrowthLimits {
    int max_depth = 4;      // max edges from root to any node
    int max_arity = 5;      // children per computational node, lower bound 2
    double leaf_prob = 0.5; // chance of a leaf below the root during growth
    std::vector<int> activations = {1, 2, 3, 4, 5, 6, 7};
    double weight_lo = -1.0, weight_hi = 1.0;
    double arg_lo = 0.0, arg_hi = 1.0;
};

inline double eval_node(const TreeNode& node, std::span<const double> row) {
    if (node.is_leaf()) {
        if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= row.size())
            throw std::out_of_range("eval_node: feature index " +
                                    std::to_string(node.feature) + " out of range");
        return row[static_cast<std::size_t>(node.feature)];
    }
    double o = 0.0;
    for (std::size_t i = 0; i < node.children.size(); ++i)
        o += node.weights[i] * eval_node(node.children[i], row);
    return activate(node.activation, node.a, node.b, o);
}

inline double eval_tree(const NeuralTree& tree, std::span<const double> row) {
    return eval_node(tree.root, row);
}

inline std::size_t node_count(const TreeNode& node) {
    std::size_t n = 1;
    for (const auto& c : node.children) n += node_count(c);
    return n;
}

// Node count excluding the root.
inline std::size_t tree_size(const NeuralTree& tree) { return node_count(tree.root) - 1; }

inline int tree_depth_of(const TreeNode& node) {
    int d = 0;
    for (const auto& c : node.children) d = std::max(d, 1 + tree_depth_of(c));
    return d;
}

// Longest root-to-node path in edges.
inline int tree_depth(const NeuralTree& tree) { return tree_depth_of(tree.root); }

namespace detail {

inline void collect_kinds(const TreeNode& n, std::vector<int>& kinds) {
    if (!n.is_leaf()) {
        kinds.push_back(n.activation);
        for (const auto& c : n.children) collect_kinds(c, kinds);
    }
}

inline void collect_features(const TreeNode& n, std::vector<int>& feats) {
    if (n.is_leaf()) feats.push_back(n.feature);
    for (const auto& c : n.children) collect_features(c, feats);
}

inline void sort_unique(std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

} // namespace detail

// Number of distinct activation kinds in the tree, root included.
inline int diversity_index(const NeuralTree& tree) {
    std::vector<int> kinds;
    detail::collect_kinds(tree.root, kinds);
    detail::sort_unique(kinds);
    return static_cast<int>(kinds.size());
}

// Sorted distinct leaf feature indices.
inline std::vector<int> used_features(const NeuralTree& tree) {
    std::vector<int> feats;
    detail::collect_features(tree.root, feats);
    detail::sort_unique(feats);
    return feats;
}

// Structural identity key: two trees are considered the same model when all
// four of these match (size, node-type counts, feature set, activation set).
struct TreeSignature {
    std::size_t size = 0;
    std::size_t computational_nodes = 0;
    std::size_t leaves = 0;
    std::vector<int> features;
    std::vector<int> kinds;

    bool operator==(const TreeSignature&) const = default;
    auto operator<=>(const TreeSignature&) const = default;
};

inline TreeSignature signature(const NeuralTree& tree) {
    TreeSignature s;
    s.size = tree_size(tree);
    std::vector<int> kinds;
    detail::collect_kinds(tree.root, kinds);
    s.computational_nodes = kinds.size();
    s.leaves = node_count(tree.root) - kinds.size();
    detail::sort_unique(kinds);
    s.kinds = std::move(kinds);
    s.features = used_features(tree);
    return s;
}

inline bool tree_equal_signature(const NeuralTree& t1, const NeuralTree& t2) {
    return signature(t1) == signature(t2);
}

// Flat parameter encoding: depth-first, left-to-right; per internal node its
// child weights, then its active arguments (a, then b when the kind has one).
struct ParamVector {
    std::vector<double> values;
};

namespace detail {

inline void encode_node(const TreeNode& n, std::vector<double>& out) {
    if (n.is_leaf()) return;
    out.insert(out.end(), n.weights.begin(), n.weights.end());
    if (activation_uses_a(n.activation)) out.push_back(n.a);
    if (activation_uses_b(n.activation)) out.push_back(n.b);
    for (const auto& c : n.children) encode_node(c, out);
}

inline double take_slot(std::span<const double> v, std::size_t& pos) {
    if (pos >= v.size())
        throw std::invalid_argument("decode_params: parameter vector too short");
    return v[pos++];
}

inline void decode_node(TreeNode& n, std::span<const double> v, std::size_t& pos) {
    if (n.is_leaf()) return;
    for (double& w : n.weights) w = take_slot(v, pos);
    if (activation_uses_a(n.activation)) n.a = take_slot(v, pos);
    if (activation_uses_b(n.activation)) n.b = take_slot(v, pos);
    for (auto& c : n.children) decode_node(c, v, pos);
}

inline void bounds_node(const TreeNode& n, const GrowthLimits& lim,
                        std::vector<double>& lo, std::vector<double>& hi) {
    if (n.is_leaf()) return;
    for (std::size_t i = 0; i < n.weights.size(); ++i) {
        lo.push_back(lim.weight_lo);
        hi.push_back(lim.weight_hi);
    }
    const int extra = (activation_uses_a(n.activation) ? 1 : 0) +
                      (activation_uses_b(n.activation) ? 1 : 0);
    for (int i = 0; i < extra; ++i) {
        lo.push_back(lim.arg_lo);
        hi.push_back(lim.arg_hi);
    }
    for (const auto& c : n.children) bounds_node(c, lim, lo, hi);
}

} // namespace detail

inline ParamVector encode_params(const NeuralTree& tree) {
    ParamVector v;
    detail::encode_node(tree.root, v.values);
    return v;
}

inline std::size_t param_count(const NeuralTree& tree) {
    return encode_params(tree).values.size();
}

inline NeuralTree decode_params(const NeuralTree& tree, std::span<const double> values) {
    NeuralTree out = tree;
    std::size_t pos = 0;
    detail::decode_node(out.root, values, pos);
    if (pos != values.size())
        throw std::invalid_argument("decode_params: expected " + std::to_string(pos) +
                                    " values, got " + std::to_string(values.size()));
    return out;
}

// Per-slot search box matching the encode order.
inline void param_bounds(const NeuralTree& tree, const GrowthLimits& lim,
                         std::vector<double>& lo, std::vector<double>& hi) {
    lo.clear();
    hi.clear();
    detail::bounds_node(tree.root, lim, lo, hi);
}

inline TreeNode random_leaf(int n_features, Rng& rng) {
    TreeNode leaf;
    leaf.feature = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n_features)));
    return leaf;
}

namespace detail {

inline TreeNode grow_node(int depth, int n_features, const GrowthLimits& lim, Rng& rng,
                          bool force_internal) {
    const bool must_leaf = depth >= lim.max_depth;
    if (!force_internal && (must_leaf || rng.bernoulli(lim.leaf_prob)))
        return random_leaf(n_features, rng);
    if (must_leaf) return random_leaf(n_features, rng);

    TreeNode node;
    const std::size_t arity =
        2 + rng.uniform_index(static_cast<std::size_t>(lim.max_arity - 1));
    node.activation = lim.activations[rng.uniform_index(lim.activations.size())];
    if (activation_uses_a(node.activation)) node.a = rng.uniform(lim.arg_lo, lim.arg_hi);
    if (activation_uses_b(node.activation)) node.b = rng.uniform(lim.arg_lo, lim.arg_hi);
    node.children.reserve(arity);
    node.weights.reserve(arity);
    for (std::size_t i = 0; i < arity; ++i) {
        node.weights.push_back(rng.uniform(lim.weight_lo, lim.weight_hi));
        node.children.push_back(grow_node(depth + 1, n_features, lim, rng, false));
    }
    return node;
}

} // namespace detail

// Random subtree whose root is a computational node, rooted at `depth`.
// Requires depth <= max_depth - 1 so its children fit.
inline TreeNode random_subtree(int depth, int n_features, const GrowthLimits& lim, Rng& rng) {
    if (depth > lim.max_depth - 1)
        throw std::invalid_argument("random_subtree: no room below max depth");
    return detail::grow_node(depth, n_features, lim, rng, true);
}

inline NeuralTree random_tree(int n_features, const GrowthLimits& lim, Rng& rng) {
    if (n_features < 1)
        throw std::invalid_argument("random_tree: need at least one feature");
    if (lim.max_depth < 1)
        throw std::invalid_argument("random_tree: max_depth must be at least 1");
    if (lim.max_arity < 2)
        throw std::invalid_argument("random_tree: max_arity must be at least 2");
    return NeuralTree{random_subtree(0, n_features, lim, rng)};
}

// Structural and range validation against the configured limits.
inline bool check_limits_node(const TreeNode& n, int depth, const GrowthLimits& lim) {
    if (depth > lim.max_depth) return false;
    if (n.is_leaf())
        return n.feature >= 0 && n.weights.empty();
    if (n.activation < 1 || n.activation > kActivationCount) return false;
    if (n.children.size() < 2 ||
        n.children.size() > static_cast<std::size_t>(lim.max_arity))
        return false;
    if (n.weights.size() != n.children.size()) return false;
    for (double w : n.weights)
        if (w < lim.weight_lo || w > lim.weight_hi) return false;
    if (activation_uses_a(n.activation) && (n.a < lim.arg_lo || n.a > lim.arg_hi))
        return false;
    if (activation_uses_b(n.activation) && (n.b < lim.arg_lo || n.b > lim.arg_hi))
        return false;
    for (const auto& c : n.children)
        if (!check_limits_node(c, depth + 1, lim)) return false;
    return true;
}

inline bool check_limits(const NeuralTree& t, const GrowthLimits& lim) {
    return !t.root.is_leaf() && check_limits_node(t.root, 0, lim);
}

} // namespace hfnt
