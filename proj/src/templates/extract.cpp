#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <tuple>

#include "retrologic/error.hpp"
#include "retrologic/templates/retro_template.hpp"

namespace retrologic {

namespace {

struct AtomRef {
  int mol;
  int atom;
};

constexpr int kLeaving = -1;

// Sorted (neighbor label, bond order) pairs; neighbors that are not product
// atoms collapse to kLeaving.
std::vector<std::pair<int, int>> signature(const MolGraph& mol, int atom,
                                           const std::set<int>& product_labels) {
  std::vector<std::pair<int, int>> sig;
  for (const auto& nb : mol.neighbors(atom)) {
    const auto& l = mol.atom(nb.atom).map_label;
    const int key = l && product_labels.contains(*l) ? *l : kLeaving;
    sig.push_back({key, static_cast<int>(mol.bond(nb.bond).order)});
  }
  std::sort(sig.begin(), sig.end());
  return sig;
}

PatternNode node_from(const Atom& a, bool fix_h, std::optional<int> label) {
  PatternNode n;
  n.element = a.element;
  n.aromatic = a.aromatic;
  n.charge = a.formal_charge;
  if (fix_h) n.hcount = a.explicit_h;
  n.map_label = label;
  return n;
}

// Induced pattern on `atoms` (indices into mol), in the given order.
PatternGraph induced(const MolGraph& mol, const std::vector<int>& atoms,
                     const std::function<PatternNode(int)>& make_node) {
  std::map<int, int> pos;
  std::vector<PatternNode> nodes;
  for (int a : atoms) {
    pos[a] = static_cast<int>(nodes.size());
    nodes.push_back(make_node(a));
  }
  std::vector<PatternEdge> edges;
  for (const auto& b : mol.bonds()) {
    const auto ia = pos.find(b.a);
    const auto ib = pos.find(b.b);
    if (ia != pos.end() && ib != pos.end()) edges.push_back({ia->second, ib->second, b.order});
  }
  return PatternGraph(std::move(nodes), std::move(edges));
}

}  // namespace

RetroTemplate extract_template(const ReactionRecord& rxn, int radius) {
  if (radius < 0) throw std::invalid_argument("negative extraction radius");
  validate_mapping(rxn);
  const MolGraph& prod = rxn.product;

  std::set<int> product_labels;
  for (const auto& a : prod.atoms()) product_labels.insert(*a.map_label);

  std::map<int, AtomRef> reactant_atom;
  std::vector<char> keep_mol(rxn.reactants.size(), 0);
  for (std::size_t m = 0; m < rxn.reactants.size(); ++m) {
    const auto& mol = rxn.reactants[m];
    for (std::size_t i = 0; i < mol.atom_count(); ++i) {
      const auto& l = mol.atom(static_cast<int>(i)).map_label;
      if (l && product_labels.contains(*l)) {
        reactant_atom[*l] = {static_cast<int>(m), static_cast<int>(i)};
        keep_mol[m] = 1;
      }
    }
  }

  // Reaction center on the product side.
  std::vector<char> center(prod.atom_count(), 0);
  bool any = false;
  for (std::size_t i = 0; i < prod.atom_count(); ++i) {
    const int pi = static_cast<int>(i);
    const Atom& pa = prod.atom(pi);
    const AtomRef ref = reactant_atom.at(*pa.map_label);
    const MolGraph& rmol = rxn.reactants[static_cast<std::size_t>(ref.mol)];
    const Atom& ra = rmol.atom(ref.atom);
    if (ra.element != pa.element) {
      throw DataError("map label " + std::to_string(*pa.map_label) + " changes element");
    }
    const bool changed = ra.formal_charge != pa.formal_charge || ra.explicit_h != pa.explicit_h ||
                         ra.aromatic != pa.aromatic ||
                         signature(prod, pi, product_labels) !=
                             signature(rmol, ref.atom, product_labels);
    if (changed) {
      center[i] = 1;
      any = true;
    }
  }
  if (!any) throw DataError("empty reaction center: product equals its reactants");

  // Grow by `radius` bond hops.
  std::vector<int> dist(prod.atom_count(), -1);
  std::vector<int> frontier;
  for (std::size_t i = 0; i < prod.atom_count(); ++i) {
    if (center[i]) {
      dist[i] = 0;
      frontier.push_back(static_cast<int>(i));
    }
  }
  for (int hop = 0; hop < radius; ++hop) {
    std::vector<int> next;
    for (int v : frontier) {
      for (const auto& nb : prod.neighbors(v)) {
        if (dist[static_cast<std::size_t>(nb.atom)] < 0) {
          dist[static_cast<std::size_t>(nb.atom)] = hop + 1;
          next.push_back(nb.atom);
        }
      }
    }
    frontier = std::move(next);
  }
  std::vector<int> selected;
  std::set<int> selected_labels, center_labels;
  for (std::size_t i = 0; i < prod.atom_count(); ++i) {
    if (dist[i] < 0) continue;
    selected.push_back(static_cast<int>(i));
    selected_labels.insert(*prod.atom(static_cast<int>(i)).map_label);
    if (center[i]) center_labels.insert(*prod.atom(static_cast<int>(i)).map_label);
  }

  auto product_pattern = induced(prod, selected, [&](int a) {
    const Atom& atom = prod.atom(a);
    return node_from(atom, center[static_cast<std::size_t>(a)] != 0, atom.map_label);
  });
  if (!product_pattern.connected()) {
    throw DataError("reaction center spans several fragments of the product pattern");
  }

  std::vector<PatternGraph> reactant_patterns;
  for (std::size_t m = 0; m < rxn.reactants.size(); ++m) {
    if (!keep_mol[m]) continue;
    const auto& mol = rxn.reactants[m];
    auto is_leaving = [&](int a) {
      const auto& l = mol.atom(a).map_label;
      return !l || !product_labels.contains(*l);
    };
    std::vector<char> take(mol.atom_count(), 0);
    std::vector<int> stack;
    for (std::size_t i = 0; i < mol.atom_count(); ++i) {
      const auto& l = mol.atom(static_cast<int>(i)).map_label;
      if (l && selected_labels.contains(*l)) {
        take[i] = 1;
        if (center_labels.contains(*l)) stack.push_back(static_cast<int>(i));
      }
    }
    // Leaving atoms reachable from the center through other leaving atoms.
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (const auto& nb : mol.neighbors(v)) {
        if (!take[static_cast<std::size_t>(nb.atom)] && is_leaving(nb.atom)) {
          take[static_cast<std::size_t>(nb.atom)] = 1;
          stack.push_back(nb.atom);
        }
      }
    }
    std::vector<int> atoms;
    for (std::size_t i = 0; i < mol.atom_count(); ++i) {
      if (take[i]) atoms.push_back(static_cast<int>(i));
    }
    if (atoms.empty()) {
      throw DataError("reactant " + std::to_string(m) + " has no atom inside the template");
    }
    auto pattern = induced(mol, atoms, [&](int a) {
      const Atom& atom = mol.atom(a);
      if (is_leaving(a)) return node_from(atom, true, std::nullopt);
      return node_from(atom, center_labels.contains(*atom.map_label), atom.map_label);
    });
    if (!pattern.connected()) {
      throw DataError("reactant " + std::to_string(m) + " pattern spans several fragments");
    }
    reactant_patterns.push_back(std::move(pattern));
  }
  return make_template(std::move(product_pattern), std::move(reactant_patterns),
                       rxn.reaction_class);
}

}  // namespace retrologic
