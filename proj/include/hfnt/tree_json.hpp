#pragma once

#include <json.hpp>

#include "hfnt/tree.hpp"

namespace hfnt {

// Tree documents: a leaf is {"feature": j}; an internal node is
// {"kind": k, "a": .., "b": .., "weights": [..], "children": [..]} where
// "a"/"b" appear only for kinds that use them. Doubles round-trip losslessly.
inline nlohmann::json node_to_json(const TreeNode& n) {
    if (n.is_leaf()) return {{"feature", n.feature}};
    nlohmann::json j;
    j["kind"] = n.activation;
    if (activation_uses_a(n.activation)) j["a"] = n.a;
    if (activation_uses_b(n.activation)) j["b"] = n.b;
    j["weights"] = n.weights;
    nlohmann::json kids = nlohmann::json::array();
    for (const auto& c : n.children) kids.push_back(node_to_json(c));
    j["children"] = std::move(kids);
    return j;
}

inline TreeNode node_from_json(const nlohmann::json& j) {
    TreeNode n;
    if (j.contains("feature")) {
        n.feature = j.at("feature").get<int>();
        if (n.feature < 0) throw std::invalid_argument("tree document: negative feature index");
        return n;
    }
    n.activation = j.at("kind").get<int>();
    if (n.activation < 1 || n.activation > kActivationCount)
        throw std::invalid_argument("tree document: activation kind out of range");
    if (activation_uses_a(n.activation)) n.a = j.at("a").get<double>();
    if (activation_uses_b(n.activation)) n.b = j.at("b").get<double>();
    n.weights = j.at("weights").get<std::vector<double>>();
    for (const auto& c : j.at("children")) n.children.push_back(node_from_json(c));
    if (n.children.size() < 2 || n.weights.size() != n.children.size())
        throw std::invalid_argument("tree document: bad arity or weight count");
    return n;
}

inline nlohmann::json tree_to_json(const NeuralTree& t) { return node_to_json(t.root); }

inline NeuralTree tree_from_json(const nlohmann::json& j) {
    NeuralTree t{node_from_json(j)};
    if (t.root.is_leaf())
        throw std::invalid_argument("tree document: root must be a computational node");
    return t;
}

} // namespace hfnt
