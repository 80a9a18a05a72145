#pragma once

// Exhaustive searches used as test oracles.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tsr/matching.hpp"
#include "tsr/metrics.hpp"

namespace tsr::oracle {

struct Best {
  int count = -1;
  double cost = 0.0;
};

// Exhaustive partial assignments: most finite pairs first, then lowest total cost.
inline void enumerate(const CostMatrix& c, std::size_t row, std::vector<bool>& used, int count, double cost, Best& best) {
  if (row == c.rows()) {
    if (count > best.count || (count == best.count && cost < best.cost - 1e-12)) best = {count, cost};
    return;
  }
  enumerate(c, row + 1, used, count, cost, best);
  for (std::size_t j = 0; j < c.cols(); ++j) {
    if (used[j] || !std::isfinite(c(row, j))) continue;
    used[j] = true;
    enumerate(c, row + 1, used, count + 1, cost + c(row, j), best);
    used[j] = false;
  }
}

inline Best brute_force(const CostMatrix& c) {
  std::vector<bool> used(c.cols(), false);
  Best best;
  enumerate(c, 0, used, 0, 0.0, best);
  return best;
}


// --- brute-force tree edit distance over all order- and ancestry-preserving mappings ---

struct Flat {
  std::vector<std::string> label;  // preorder
  std::vector<int> parent;
};

inline void flatten(const TreeNode& n, int parent, Flat& f) {
  f.label.push_back(n.label);
  f.parent.push_back(parent);
  int me = static_cast<int>(f.label.size()) - 1;
  for (const auto& c : n.children) flatten(c, me, f);
}

inline bool is_ancestor(const Flat& f, int a, int d) {
  for (int p = f.parent[static_cast<std::size_t>(d)]; p >= 0; p = f.parent[static_cast<std::size_t>(p)])
    if (p == a) return true;
  return false;
}

inline double brute_ted(const TreeNode* a, const TreeNode* b) {
  Flat A, B;
  if (a) flatten(*a, -1, A);
  if (b) flatten(*b, -1, B);
  const int n = static_cast<int>(A.label.size()), m = static_cast<int>(B.label.size());
  double best = n + m;
  std::vector<std::pair<int, int>> mapping;
  std::function<void(int, int)> rec = [&](int i0, int j0) {
    double cost = n + m - 2.0 * static_cast<double>(mapping.size());
    for (auto [i, j] : mapping) cost += A.label[static_cast<std::size_t>(i)] == B.label[static_cast<std::size_t>(j)] ? 0 : 1;
    best = std::min(best, cost);
    for (int i = i0; i < n; ++i) {
      for (int j = j0; j < m; ++j) {
        bool ok = true;
        for (auto [pi, pj] : mapping) {
          if (is_ancestor(A, pi, i) != is_ancestor(B, pj, j)) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
        mapping.emplace_back(i, j);
        rec(i + 1, j + 1);
        mapping.pop_back();
      }
    }
  };
  rec(0, 0);
  return best;
}

inline TreeNode random_tree(std::mt19937& rng, int nodes) {
  std::vector<TreeNode*> all;
  TreeNode root{std::string(1, static_cast<char>('a' + rng() % 3)), {}};
  root.children.reserve(8);
  all.push_back(&root);
  for (int k = 1; k < nodes; ++k) {
    TreeNode* p = all[rng() % all.size()];
    p->children.push_back({std::string(1, static_cast<char>('a' + rng() % 3)), {}});
    p->children.back().children.reserve(8);
    all.push_back(&p->children.back());
  }
  return root;
}

}  // namespace tsr::oracle
