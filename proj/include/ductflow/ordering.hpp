#ifndef DUCTFLOW_ORDERING_HPP
#define DUCTFLOW_ORDERING_HPP

#include "ductflow/sparse.hpp"

#include <algorithm>
#include <set>
#include <utility>
#include <vector>

namespace ductflow {

/// Symmetric permutation: perm maps new index -> old index.
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<Index> perm) : perm_(std::move(perm)) {
    inv_.assign(perm_.size(), -1);
    for (Index k = 0; k < size(); ++k) {
      const Index old = perm_[k];
      if (old < 0 || old >= size() || inv_[old] != -1)
        throw std::invalid_argument("Permutation: not a bijection");
      inv_[old] = k;
    }
  }

  static Permutation identity(Index n) {
    std::vector<Index> p(n);
    for (Index i = 0; i < n; ++i) p[i] = i;
    return Permutation(std::move(p));
  }

  Index size() const { return static_cast<Index>(perm_.size()); }
  Index old_of(Index new_idx) const { return perm_[new_idx]; }
  Index new_of(Index old_idx) const { return inv_[old_idx]; }
  const std::vector<Index>& perm() const { return perm_; }
  const std::vector<Index>& inverse() const { return inv_; }

 private:
  std::vector<Index> perm_;
  std::vector<Index> inv_;
};

namespace detail {

// Quotient-graph minimum degree on an undirected adjacency. Eliminated nodes
// become elements; the degree of a variable is its exact external degree
// |Reach(v)|. Ties break toward the lowest node id.
class MinDegreeSolver {
 public:
  MinDegreeSolver(const std::vector<Index>& ptr, const std::vector<Index>& idx, Index n)
      : n_(n), adj_vars_(n), adj_elems_(n), elem_vars_(n), mark_(n, 0), stamp_(0) {
    for (Index v = 0; v < n_; ++v) {
      for (Index t = ptr[v]; t < ptr[v + 1]; ++t) {
        const Index u = idx[t];
        if (u != v) adj_vars_[v].push_back(u);
      }
      std::sort(adj_vars_[v].begin(), adj_vars_[v].end());
      adj_vars_[v].erase(std::unique(adj_vars_[v].begin(), adj_vars_[v].end()),
                         adj_vars_[v].end());
    }
  }

  std::vector<Index> order() {
    std::vector<Index> degree(n_);
    std::set<std::pair<Index, Index>> queue;  // (degree, id), lowest id wins ties
    for (Index v = 0; v < n_; ++v) {
      degree[v] = static_cast<Index>(adj_vars_[v].size());
      queue.insert({degree[v], v});
    }
    std::vector<Index> result;
    result.reserve(n_);
    std::vector<char> eliminated(n_, 0);

    while (!queue.empty()) {
      const Index v = queue.begin()->second;
      queue.erase(queue.begin());
      eliminated[v] = 1;
      result.push_back(v);

      // Le = Reach(v): the variables of the element created by eliminating v.
      const std::vector<Index> le = reach(v, eliminated);

      elem_vars_[v] = le;
      for (const Index e : adj_elems_[v]) elem_vars_[e].clear();  // absorbed

      for (const Index u : le) {
        // Drop absorbed elements, attach the new one.
        auto& es = adj_elems_[u];
        es.erase(std::remove_if(es.begin(), es.end(),
                                [&](Index e) { return elem_vars_[e].empty(); }),
                 es.end());
        es.push_back(v);
        // Prune variable adjacency covered by the new element.
        ++stamp_;
        for (const Index w : le) mark_[w] = stamp_;
        mark_[v] = stamp_;
        auto& vs = adj_vars_[u];
        vs.erase(std::remove_if(vs.begin(), vs.end(),
                                [&](Index w) { return mark_[w] == stamp_; }),
                 vs.end());
      }
      for (const Index u : le) {
        const Index d = static_cast<Index>(reach(u, eliminated).size());
        queue.erase({degree[u], u});
        degree[u] = d;
        queue.insert({d, u});
      }
    }
    return result;
  }

 private:
  std::vector<Index> reach(Index v, const std::vector<char>& eliminated) {
    ++stamp_;
    mark_[v] = stamp_;
    std::vector<Index> out;
    for (const Index u : adj_vars_[v])
      if (!eliminated[u] && mark_[u] != stamp_) {
        mark_[u] = stamp_;
        out.push_back(u);
      }
    for (const Index e : adj_elems_[v])
      for (const Index u : elem_vars_[e])
        if (!eliminated[u] && mark_[u] != stamp_) {
          mark_[u] = stamp_;
          out.push_back(u);
        }
    std::sort(out.begin(), out.end());
    return out;
  }

  Index n_;
  std::vector<std::vector<Index>> adj_vars_;
  std::vector<std::vector<Index>> adj_elems_;
  std::vector<std::vector<Index>> elem_vars_;
  std::vector<Index> mark_;
  Index stamp_;
};

}  // namespace detail

/// Minimum-degree ordering of a symmetric adjacency pattern (values ignored).
/// Pass the output of symmetrized_pattern() for unsymmetric matrices.
template <typename Scalar>
Permutation min_degree(const CsrMatrix<Scalar>& pattern) {
  if (pattern.rows() != pattern.cols())
    throw std::invalid_argument("min_degree: pattern is not square");
  detail::MinDegreeSolver md(pattern.row_ptr(), pattern.col_idx(), pattern.rows());
  return Permutation(md.order());
}

namespace detail {

struct NdGraph {
  const std::vector<Index>* ptr;
  const std::vector<Index>* idx;
};

// Breadth-first level sets from `root` over the nodes with alive == pass.
// Returns levels as concatenated node lists plus offsets.
inline void bfs_levels(const NdGraph& g, Index root, const std::vector<Index>& alive,
                       Index pass, std::vector<Index>& nodes, std::vector<Index>& offsets,
                       std::vector<Index>& level_of) {
  nodes.clear();
  offsets.assign(1, 0);
  nodes.push_back(root);
  level_of[root] = 0;
  std::size_t level_begin = 0;
  while (level_begin < nodes.size()) {
    const std::size_t level_end = nodes.size();
    offsets.push_back(static_cast<Index>(level_end));
    for (std::size_t q = level_begin; q < level_end; ++q) {
      const Index v = nodes[q];
      for (Index t = (*g.ptr)[v]; t < (*g.ptr)[v + 1]; ++t) {
        const Index u = (*g.idx)[t];
        if (u != v && alive[u] == pass && level_of[u] == -1) {
          level_of[u] = static_cast<Index>(offsets.size()) - 1;
          nodes.push_back(u);
        }
      }
    }
    level_begin = level_end;
  }
  // offsets currently holds ends of each level; prepend implicit 0 done above.
}

class NestedDissection {
 public:
  NestedDissection(const std::vector<Index>& ptr, const std::vector<Index>& idx, Index n,
                   Index leaf_size)
      : g_{&ptr, &idx}, n_(n), leaf_size_(leaf_size), alive_(n, 0), level_of_(n, -1),
        pass_(0) {}

  std::vector<Index> order() {
    std::vector<Index> all(n_);
    for (Index i = 0; i < n_; ++i) all[i] = i;
    result_.reserve(n_);
    dissect(all);
    return std::move(result_);
  }

 private:
  void dissect(const std::vector<Index>& nodes) {
    if (nodes.empty()) return;
    ++pass_;
    for (const Index v : nodes) alive_[v] = pass_;

    // Peel connected components; recurse into each in order of lowest id.
    std::vector<Index> comp;
    std::vector<char> seen_local;
    std::vector<std::vector<Index>> components;
    const Index pass_here = pass_;
    for (const Index start : nodes) {
      if (level_of_[start] != -2 && alive_[start] == pass_here) {
        comp.clear();
        comp.push_back(start);
        level_of_[start] = -2;
        for (std::size_t q = 0; q < comp.size(); ++q) {
          const Index v = comp[q];
          for (Index t = (*g_.ptr)[v]; t < (*g_.ptr)[v + 1]; ++t) {
            const Index u = (*g_.idx)[t];
            if (u != v && alive_[u] == pass_here && level_of_[u] != -2) {
              level_of_[u] = -2;
              comp.push_back(u);
            }
          }
        }
        components.push_back(comp);
      }
    }
    for (const auto& c : components) {
      for (const Index v : c) level_of_[v] = -1;
    }
    if (components.size() > 1) {
      for (const auto& c : components) {
        ++pass_;
        for (const Index v : c) alive_[v] = pass_;
        dissect_connected(c);
      }
      return;
    }
    dissect_connected(nodes);
  }

  void dissect_connected(const std::vector<Index>& nodes) {
    const Index nc = static_cast<Index>(nodes.size());
    if (nc <= leaf_size_) {
      order_leaf(nodes);
      return;
    }
    const Index pass_here = alive_[nodes.front()];

    // Pseudo-peripheral start: BFS from the lowest id, restart from the
    // farthest node of the last level.
    Index root = *std::min_element(nodes.begin(), nodes.end());
    std::vector<Index> lv_nodes, lv_off;
    bfs_levels(g_, root, alive_, pass_here, lv_nodes, lv_off, level_of_);
    Index far = lv_nodes.back();
    for (std::size_t q = lv_nodes.size(); q-- > 0;) {
      if (level_of_[lv_nodes[q]] != level_of_[lv_nodes.back()]) break;
      far = std::min(far, lv_nodes[q]);
    }
    for (const Index v : lv_nodes) level_of_[v] = -1;
    bfs_levels(g_, far, alive_, pass_here, lv_nodes, lv_off, level_of_);

    const Index n_levels = static_cast<Index>(lv_off.size()) - 1;
    if (n_levels < 3 || static_cast<Index>(lv_nodes.size()) < nc) {
      // No usable level structure (clique-like, or numerical safety).
      for (const Index v : lv_nodes) level_of_[v] = -1;
      order_leaf(nodes);
      return;
    }

    // Pick the separator level: smallest level among splits keeping both
    // halves at >= 25% of the remainder; fall back to the most balanced cut.
    Index best = -1;
    Index best_size = 0, best_balance = -1;
    for (Index l = 1; l + 1 < n_levels; ++l) {
      const Index sep_size = lv_off[l + 1] - lv_off[l];
      const Index a = lv_off[l];
      const Index b = nc - lv_off[l + 1];
      const Index bal = std::min(a, b);
      const bool feasible = 4 * bal >= nc - sep_size;
      if (best == -1) {
        best = l;
        best_size = sep_size;
        best_balance = bal;
        continue;
      }
      const bool best_feasible = 4 * best_balance >= nc - best_size;
      bool better;
      if (feasible != best_feasible) {
        better = feasible;
      } else if (feasible) {
        better = sep_size < best_size || (sep_size == best_size && bal > best_balance);
      } else {
        better = bal > best_balance;
      }
      if (better) {
        best = l;
        best_size = sep_size;
        best_balance = bal;
      }
    }

    std::vector<Index> part_a(lv_nodes.begin(), lv_nodes.begin() + lv_off[best]);
    std::vector<Index> part_b(lv_nodes.begin() + lv_off[best + 1], lv_nodes.end());
    std::vector<Index> sep;
    for (Index q = lv_off[best]; q < lv_off[best + 1]; ++q) {
      const Index v = lv_nodes[q];
      bool touches_b = false;
      for (Index t = (*g_.ptr)[v]; t < (*g_.ptr)[v + 1] && !touches_b; ++t) {
        const Index u = (*g_.idx)[t];
        touches_b = u != v && alive_[u] == pass_here && level_of_[u] == best + 1;
      }
      (touches_b ? sep : part_a).push_back(v);
    }
    for (const Index v : lv_nodes) level_of_[v] = -1;
    std::sort(part_a.begin(), part_a.end());
    std::sort(part_b.begin(), part_b.end());
    std::sort(sep.begin(), sep.end());

    dissect(part_a);
    dissect(part_b);
    result_.insert(result_.end(), sep.begin(), sep.end());  // separator numbered last
  }

  void order_leaf(const std::vector<Index>& nodes) {
    // Minimum degree on the induced subgraph.
    std::vector<Index> sorted(nodes);
    std::sort(sorted.begin(), sorted.end());
    std::vector<Index> local_of(n_, -1);
    for (Index l = 0; l < static_cast<Index>(sorted.size()); ++l) local_of[sorted[l]] = l;
    TripletBuffer<double> buf;
    for (const Index v : sorted)
      for (Index t = (*g_.ptr)[v]; t < (*g_.ptr)[v + 1]; ++t) {
        const Index u = (*g_.idx)[t];
        if (local_of[u] >= 0) buf.add(local_of[v], local_of[u], 1.0);
      }
    const auto sub = from_triplets(buf, static_cast<Index>(sorted.size()),
                                   static_cast<Index>(sorted.size()));
    const Permutation p = min_degree(sub);
    for (Index k = 0; k < p.size(); ++k) result_.push_back(sorted[p.old_of(k)]);
    for (const Index v : sorted) local_of[v] = -1;
  }

  NdGraph g_;
  Index n_;
  Index leaf_size_;
  std::vector<Index> alive_;
  std::vector<Index> level_of_;
  Index pass_;
  std::vector<Index> result_;
};

}  // namespace detail

/// Nested-dissection ordering: recursive BFS level-set bisection from a
/// pseudo-peripheral node, separators numbered last, minimum degree on leaves
/// below `leaf_size` nodes.
template <typename Scalar>
Permutation nested_dissection(const CsrMatrix<Scalar>& pattern, Index leaf_size = 32) {
  if (pattern.rows() != pattern.cols())
    throw std::invalid_argument("nested_dissection: pattern is not square");
  detail::NestedDissection nd(pattern.row_ptr(), pattern.col_idx(), pattern.rows(),
                              leaf_size);
  return Permutation(nd.order());
}

}  // namespace ductflow

#endif
