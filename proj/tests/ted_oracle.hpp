#pragma once

// Naive forest edit distance by the textbook recursion on rightmost roots.
// Exponential; only for trees of a handful of nodes.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "tabtag/metrics.hpp"

namespace testutil {

struct NaiveTree {
    std::string label;
    std::vector<NaiveTree> children;
};

using NaiveForest = std::vector<NaiveTree>;

inline NaiveTree to_naive(const tabtag::TableTree& t, int node) {
    NaiveTree n{t.nodes[static_cast<size_t>(node)].label, {}};
    for (const int c : t.nodes[static_cast<size_t>(node)].children) n.children.push_back(to_naive(t, c));
    return n;
}

inline int forest_size(const NaiveForest& f) {
    int n = 0;
    for (const auto& t : f) n += 1 + forest_size(t.children);
    return n;
}

inline int naive_forest_distance(const NaiveForest& f, const NaiveForest& g) {
    if (f.empty()) return forest_size(g);
    if (g.empty()) return forest_size(f);
    const NaiveTree& v = f.back();
    const NaiveTree& w = g.back();

    NaiveForest f_minus_v(f.begin(), f.end() - 1);
    f_minus_v.insert(f_minus_v.end(), v.children.begin(), v.children.end());
    NaiveForest g_minus_w(g.begin(), g.end() - 1);
    g_minus_w.insert(g_minus_w.end(), w.children.begin(), w.children.end());
    const NaiveForest f_rest(f.begin(), f.end() - 1);
    const NaiveForest g_rest(g.begin(), g.end() - 1);

    const int del = naive_forest_distance(f_minus_v, g) + 1;
    const int ins = naive_forest_distance(f, g_minus_w) + 1;
    const int match = naive_forest_distance(v.children, w.children) + naive_forest_distance(f_rest, g_rest) +
                      (v.label == w.label ? 0 : 1);
    return std::min({del, ins, match});
}

inline int naive_tree_distance(const tabtag::TableTree& a, const tabtag::TableTree& b) {
    NaiveForest f, g;
    if (a.root >= 0) f.push_back(to_naive(a, a.root));
    if (b.root >= 0) g.push_back(to_naive(b, b.root));
    return naive_forest_distance(f, g);
}

// Random ordered tree of exactly `n` nodes with labels from a small alphabet.
inline int add_random_subtree(tabtag::TableTree& t, int n, std::mt19937_64& rng) {
    std::vector<int> children;
    int left = n - 1;
    while (left > 0) {
        const int k = std::uniform_int_distribution<int>(1, left)(rng);
        children.push_back(add_random_subtree(t, k, rng));
        left -= k;
    }
    static const char* labels[] = {"a", "b", "c"};
    return t.add(labels[std::uniform_int_distribution<int>(0, 2)(rng)], std::move(children));
}

inline tabtag::TableTree random_tree(std::mt19937_64& rng, int max_nodes = 7) {
    tabtag::TableTree t;
    add_random_subtree(t, std::uniform_int_distribution<int>(1, max_nodes)(rng), rng);
    return t;
}

}  // namespace testutil
