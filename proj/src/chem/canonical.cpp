#include "retrologic/chem/canonical.hpp"

#include <algorithm>
#include <numeric>

#include "retrologic/chem/smiles.hpp"
#include "retrologic/error.hpp"

namespace retrologic {

namespace {

class Labeler {
 public:
  explicit Labeler(const ColoredGraph& g)
      : graph_(g), n_(static_cast<int>(g.node_colors.size())), adj_(g.node_colors.size()) {
    for (const auto& e : g.edges) {
      adj_[static_cast<std::size_t>(e.a)].push_back({e.b, e.color});
      adj_[static_cast<std::size_t>(e.b)].push_back({e.a, e.color});
    }
  }

  std::vector<int> run() {
    if (n_ == 0) return {};
    std::vector<int> prefix;
    search(to_ranks(graph_.node_colors), prefix);
    return best_colors_;
  }

 private:
  // Replaces values by "number of entries with a strictly smaller value".
  static std::vector<int> to_ranks(const std::vector<int>& values) {
    std::vector<int> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      out[i] = static_cast<int>(
          std::lower_bound(sorted.begin(), sorted.end(), values[i]) - sorted.begin());
    }
    return out;
  }

  static int distinct(const std::vector<int>& colors) {
    std::vector<int> s = colors;
    std::sort(s.begin(), s.end());
    return static_cast<int>(std::unique(s.begin(), s.end()) - s.begin());
  }

  std::vector<int> refine(std::vector<int> colors) const {
    int cells = distinct(colors);
    std::vector<std::vector<int>> sig(static_cast<std::size_t>(n_));
    std::vector<int> order(static_cast<std::size_t>(n_));
    while (cells < n_) {
      for (int v = 0; v < n_; ++v) {
        auto& s = sig[static_cast<std::size_t>(v)];
        s.clear();
        s.push_back(colors[static_cast<std::size_t>(v)]);
        std::vector<std::pair<int, int>> nbrs;
        for (const auto& [u, c] : adj_[static_cast<std::size_t>(v)]) {
          nbrs.push_back({c, colors[static_cast<std::size_t>(u)]});
        }
        std::sort(nbrs.begin(), nbrs.end());
        for (const auto& [c, k] : nbrs) {
          s.push_back(c);
          s.push_back(k);
        }
      }
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int x, int y) {
        return sig[static_cast<std::size_t>(x)] < sig[static_cast<std::size_t>(y)];
      });
      std::vector<int> next(static_cast<std::size_t>(n_));
      for (int i = 0; i < n_; ++i) {
        const int v = order[static_cast<std::size_t>(i)];
        if (i > 0 && sig[static_cast<std::size_t>(v)] ==
                         sig[static_cast<std::size_t>(order[static_cast<std::size_t>(i - 1)])]) {
          next[static_cast<std::size_t>(v)] =
              next[static_cast<std::size_t>(order[static_cast<std::size_t>(i - 1)])];
        } else {
          next[static_cast<std::size_t>(v)] = i;
        }
      }
      const int next_cells = distinct(next);
      colors = std::move(next);
      if (next_cells == cells) break;
      cells = next_cells;
    }
    return colors;
  }

  std::vector<int> certificate(const std::vector<int>& colors) const {
    std::vector<int> at(static_cast<std::size_t>(n_));
    for (int v = 0; v < n_; ++v) at[static_cast<std::size_t>(colors[static_cast<std::size_t>(v)])] = v;
    std::vector<int> cert;
    cert.reserve(static_cast<std::size_t>(n_) + 3 * graph_.edges.size());
    for (int p = 0; p < n_; ++p) {
      cert.push_back(graph_.node_colors[static_cast<std::size_t>(at[static_cast<std::size_t>(p)])]);
    }
    std::vector<std::array<int, 3>> edges;
    edges.reserve(graph_.edges.size());
    for (const auto& e : graph_.edges) {
      int x = colors[static_cast<std::size_t>(e.a)];
      int y = colors[static_cast<std::size_t>(e.b)];
      if (x > y) std::swap(x, y);
      edges.push_back({x, y, e.color});
    }
    std::sort(edges.begin(), edges.end());
    for (const auto& e : edges) cert.insert(cert.end(), e.begin(), e.end());
    return cert;
  }

  int find(std::vector<int>& parent, int x) const {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }

  bool equivalent_to_explored(int w, const std::vector<int>& explored,
                              const std::vector<int>& prefix) {
    if (explored.empty() || automorphisms_.empty()) return false;
    std::vector<int> parent(static_cast<std::size_t>(n_));
    std::iota(parent.begin(), parent.end(), 0);
    for (const auto& sigma : automorphisms_) {
      const bool fixes_prefix = std::all_of(prefix.begin(), prefix.end(), [&](int v) {
        return sigma[static_cast<std::size_t>(v)] == v;
      });
      if (!fixes_prefix) continue;
      for (int v = 0; v < n_; ++v) {
        const int a = find(parent, v);
        const int b = find(parent, sigma[static_cast<std::size_t>(v)]);
        if (a != b) parent[static_cast<std::size_t>(a)] = b;
      }
    }
    const int root = find(parent, w);
    return std::any_of(explored.begin(), explored.end(),
                       [&](int x) { return find(parent, x) == root; });
  }

  void search(std::vector<int> colors, std::vector<int>& prefix) {
    colors = refine(std::move(colors));
    // Locate the first non-singleton cell (smallest color value).
    std::vector<int> count(static_cast<std::size_t>(n_), 0);
    for (int c : colors) ++count[static_cast<std::size_t>(c)];
    int target = -1;
    for (int c = 0; c < n_; ++c) {
      if (count[static_cast<std::size_t>(c)] > 1) {
        target = c;
        break;
      }
    }
    if (target < 0) {
      leaf(colors);
      return;
    }
    std::vector<int> members;
    for (int v = 0; v < n_; ++v) {
      if (colors[static_cast<std::size_t>(v)] == target) members.push_back(v);
    }
    std::vector<int> explored;
    for (int w : members) {
      if (equivalent_to_explored(w, explored, prefix)) continue;
      std::vector<int> next = colors;
      for (int m : members) {
        if (m != w) next[static_cast<std::size_t>(m)] = target + 1;
      }
      prefix.push_back(w);
      search(std::move(next), prefix);
      prefix.pop_back();
      explored.push_back(w);
    }
  }

  void leaf(const std::vector<int>& colors) {
    auto cert = certificate(colors);
    if (best_cert_.empty() || cert < best_cert_) {
      best_cert_ = std::move(cert);
      best_colors_ = colors;
      return;
    }
    if (cert == best_cert_) {
      std::vector<int> best_at(static_cast<std::size_t>(n_));
      for (int v = 0; v < n_; ++v) {
        best_at[static_cast<std::size_t>(best_colors_[static_cast<std::size_t>(v)])] = v;
      }
      std::vector<int> sigma(static_cast<std::size_t>(n_));
      for (int v = 0; v < n_; ++v) {
        sigma[static_cast<std::size_t>(v)] =
            best_at[static_cast<std::size_t>(colors[static_cast<std::size_t>(v)])];
      }
      automorphisms_.push_back(std::move(sigma));
    }
  }

  const ColoredGraph& graph_;
  int n_;
  std::vector<std::vector<std::pair<int, int>>> adj_;
  std::vector<int> best_cert_;
  std::vector<int> best_colors_;
  std::vector<std::vector<int>> automorphisms_;
};

}  // namespace

std::vector<int> canonical_ranks(const ColoredGraph& graph) {
  return Labeler(graph).run();
}

std::vector<int> atom_invariant(const MolGraph& mol, int atom) {
  const Atom& a = mol.atom(atom);
  std::vector<int> inv = {static_cast<int>(a.element), a.formal_charge, a.aromatic ? 1 : 0,
                          a.explicit_h, mol.degree(atom)};
  std::vector<int> orders;
  for (const auto& nb : mol.neighbors(atom)) {
    orders.push_back(static_cast<int>(mol.bond(nb.bond).order));
  }
  std::sort(orders.begin(), orders.end());
  inv.insert(inv.end(), orders.begin(), orders.end());
  return inv;
}

std::vector<int> canonical_atom_ranks(const MolGraph& mol) {
  const auto n = mol.atom_count();
  std::vector<std::vector<int>> inv(n);
  for (std::size_t i = 0; i < n; ++i) inv[i] = atom_invariant(mol, static_cast<int>(i));
  std::vector<std::vector<int>> sorted = inv;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  ColoredGraph g;
  g.node_colors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.node_colors[i] = static_cast<int>(
        std::lower_bound(sorted.begin(), sorted.end(), inv[i]) - sorted.begin());
  }
  for (const auto& b : mol.bonds()) {
    g.edges.push_back({b.a, b.b, static_cast<int>(b.order)});
  }
  return canonical_ranks(g);
}

CanonicalKey canonical_key(const MolGraph& mol) {
  return CanonicalKey(write_molecule(mol));
}

namespace {

bool same_atom_label(const Atom& x, const Atom& y) {
  return x.element == y.element && x.formal_charge == y.formal_charge &&
         x.aromatic == y.aromatic && x.explicit_h == y.explicit_h;
}

class IsoSearch {
 public:
  IsoSearch(const MolGraph& a, const MolGraph& b) : a_(a), b_(b) {}

  bool run() {
    const auto n = a_.atom_count();
    if (n != b_.atom_count() || a_.bond_count() != b_.bond_count()) return false;
    if (n == 0) return true;
    // Visit order: BFS per component so each atom after the first in a
    // component has an already-mapped neighbor.
    std::vector<char> seen(n, 0);
    for (std::size_t s = 0; s < n; ++s) {
      if (seen[s]) continue;
      seen[s] = 1;
      std::size_t head = order_.size();
      order_.push_back(static_cast<int>(s));
      while (head < order_.size()) {
        const int v = order_[head++];
        for (const auto& nb : a_.neighbors(v)) {
          if (!seen[static_cast<std::size_t>(nb.atom)]) {
            seen[static_cast<std::size_t>(nb.atom)] = 1;
            order_.push_back(nb.atom);
          }
        }
      }
    }
    map_.assign(n, -1);
    used_.assign(n, 0);
    return extend(0);
  }

 private:
  bool feasible(int va, int vb) const {
    if (used_[static_cast<std::size_t>(vb)]) return false;
    if (!same_atom_label(a_.atom(va), b_.atom(vb))) return false;
    if (a_.degree(va) != b_.degree(vb)) return false;
    for (const auto& nb : a_.neighbors(va)) {
      const int mapped = map_[static_cast<std::size_t>(nb.atom)];
      if (mapped < 0) continue;
      const int bond = b_.bond_between(vb, mapped);
      if (bond < 0 || b_.bond(bond).order != a_.bond(nb.bond).order) return false;
    }
    return true;
  }

  bool extend(std::size_t depth) {
    if (depth == order_.size()) return true;
    const int va = order_[depth];
    for (std::size_t vb = 0; vb < b_.atom_count(); ++vb) {
      if (!feasible(va, static_cast<int>(vb))) continue;
      map_[static_cast<std::size_t>(va)] = static_cast<int>(vb);
      used_[vb] = 1;
      if (extend(depth + 1)) return true;
      map_[static_cast<std::size_t>(va)] = -1;
      used_[vb] = 0;
    }
    return false;
  }

  const MolGraph& a_;
  const MolGraph& b_;
  std::vector<int> order_;
  std::vector<int> map_;
  std::vector<char> used_;
};

}  // namespace

bool graph_isomorphic(const MolGraph& a, const MolGraph& b, std::size_t max_atoms) {
  if (a.atom_count() > max_atoms || b.atom_count() > max_atoms) {
    throw SizeLimitError("graph_isomorphic: graph exceeds " + std::to_string(max_atoms) +
                         " atoms");
  }
  return IsoSearch(a, b).run();
}

}  // namespace retrologic
