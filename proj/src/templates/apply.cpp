#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

#include "retrologic/error.hpp"
#include "retrologic/match/matcher.hpp"
#include "retrologic/templates/retro_template.hpp"

namespace retrologic {

ReactantSet make_reactant_set(std::vector<MolGraph> molecules) {
  std::vector<std::pair<CanonicalKey, MolGraph>> keyed;
  for (auto& m : molecules) {
    auto stripped = m.without_map_labels();
    auto key = canonical_key(stripped);
    keyed.emplace_back(std::move(key), std::move(stripped));
  }
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& x, const auto& y) { return x.first < y.first; });
  ReactantSet out;
  for (auto& [k, m] : keyed) {
    out.keys.push_back(std::move(k));
    out.molecules.push_back(std::move(m));
  }
  return out;
}

std::vector<ReactantSet> dedup_reactant_sets(std::vector<ReactantSet> sets) {
  std::set<std::vector<CanonicalKey>> seen;
  std::vector<ReactantSet> out;
  for (auto& s : sets) {
    if (seen.insert(s.keys).second) out.push_back(std::move(s));
  }
  return out;
}

namespace {

struct Owner {
  int reactant = -1;
  int atom = -1;
};

// One rewrite for one match; nullopt when the match gives an inconsistent
// result.
std::optional<ReactantSet> rewrite(const RetroTemplate& t, const MolGraph& product,
                                   const MatchMap& match) {
  const auto& op = t.product_pattern;
  const auto n = product.atom_count();
  std::vector<Owner> owner(n);
  std::vector<char> matched(n, 0), deleted(n, 0);
  std::vector<int> label_atom;  // map label -> product atom
  for (std::size_t j = 0; j < op.node_count(); ++j) {
    const int a = match.assignment[j];
    matched[static_cast<std::size_t>(a)] = 1;
    const auto& l = op.node(static_cast<int>(j)).map_label;
    if (!l) {
      deleted[static_cast<std::size_t>(a)] = 1;
      continue;
    }
    if (label_atom.size() <= static_cast<std::size_t>(*l)) label_atom.resize(static_cast<std::size_t>(*l) + 1, -1);
    label_atom[static_cast<std::size_t>(*l)] = a;
  }
  std::vector<char> pattern_bond(product.bond_count(), 0);
  for (const auto& e : op.edges()) {
    const int b = product.bond_between(match.assignment[static_cast<std::size_t>(e.a)],
                                       match.assignment[static_cast<std::size_t>(e.b)]);
    pattern_bond[static_cast<std::size_t>(b)] = 1;
  }

  std::vector<MolGraph::Builder> builders(t.n_reactants());
  try {
    for (std::size_t r = 0; r < t.n_reactants(); ++r) {
      const auto& rp = t.reactant_patterns[r];
      auto& b = builders[r];
      std::vector<int> local(rp.node_count());
      for (std::size_t i = 0; i < rp.node_count(); ++i) {
        const auto& node = rp.node(static_cast<int>(i));
        Atom atom;
        if (node.map_label) {
          const int pa = label_atom[static_cast<std::size_t>(*node.map_label)];
          const Atom& src = product.atom(pa);
          atom.element = node.element.value_or(src.element);
          atom.aromatic = node.aromatic.value_or(src.aromatic);
          atom.formal_charge = node.charge.value_or(src.formal_charge);
          atom.explicit_h = node.hcount.value_or(src.explicit_h);
          local[i] = b.add_atom(atom);
          owner[static_cast<std::size_t>(pa)] = {static_cast<int>(r), local[i]};
        } else {
          atom.element = *node.element;
          atom.aromatic = node.aromatic.value_or(false);
          atom.formal_charge = node.charge.value_or(0);
          atom.explicit_h = node.hcount.value_or(0);
          local[i] = b.add_atom(atom);
        }
      }
      for (const auto& e : rp.edges()) {
        BondOrder order = BondOrder::Single;
        if (e.order) {
          order = *e.order;
        } else {
          const auto& la = rp.node(e.a).map_label;
          const auto& lb = rp.node(e.b).map_label;
          if (la && lb) {
            const int pb = product.bond_between(label_atom[static_cast<std::size_t>(*la)],
                                                label_atom[static_cast<std::size_t>(*lb)]);
            if (pb >= 0) order = product.bond(pb).order;
          }
        }
        b.add_bond(local[static_cast<std::size_t>(e.a)], local[static_cast<std::size_t>(e.b)], order);
      }
    }

    // Product bonds between matched atoms that the product pattern does not
    // mention survive unless they would join two reactants.
    for (std::size_t bi = 0; bi < product.bond_count(); ++bi) {
      const auto& bond = product.bond(static_cast<int>(bi));
      const auto a = static_cast<std::size_t>(bond.a);
      const auto c = static_cast<std::size_t>(bond.b);
      if (!matched[a] || !matched[c] || pattern_bond[bi] || deleted[a] || deleted[c]) continue;
      if (owner[a].reactant != owner[c].reactant) return std::nullopt;
      auto& b = builders[static_cast<std::size_t>(owner[a].reactant)];
      if (!b.has_bond(owner[a].atom, owner[c].atom)) b.add_bond(owner[a].atom, owner[c].atom, bond.order);
    }

    // Unmatched product atoms follow the one reactant their component is
    // attached to.
    std::vector<char> seen(n, 0);
    for (std::size_t start = 0; start < n; ++start) {
      if (matched[start] || seen[start]) continue;
      std::vector<int> comp;
      std::set<int> anchors;
      std::vector<int> stack = {static_cast<int>(start)};
      seen[start] = 1;
      while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        comp.push_back(v);
        for (const auto& nb : product.neighbors(v)) {
          const auto u = static_cast<std::size_t>(nb.atom);
          if (matched[u]) {
            if (!deleted[u]) anchors.insert(owner[u].reactant);
          } else if (!seen[u]) {
            seen[u] = 1;
            stack.push_back(nb.atom);
          }
        }
      }
      if (anchors.size() != 1) return std::nullopt;
      const int r = *anchors.begin();
      auto& b = builders[static_cast<std::size_t>(r)];
      for (int v : comp) {
        Atom atom = product.atom(v);
        atom.map_label.reset();
        owner[static_cast<std::size_t>(v)] = {r, b.add_atom(atom)};
      }
      for (int v : comp) {
        for (const auto& nb : product.neighbors(v)) {
          const auto u = static_cast<std::size_t>(nb.atom);
          if (deleted[u]) continue;
          // Each bond inside the component is added once, from its lower end.
          if (!matched[u] && nb.atom < v) continue;
          b.add_bond(owner[static_cast<std::size_t>(v)].atom, owner[u].atom,
                     product.bond(nb.bond).order);
        }
      }
    }

    std::vector<MolGraph> mols;
    for (auto& b : builders) {
      auto m = std::move(b).build();
      if (m.component_count() != 1) return std::nullopt;
      mols.push_back(std::move(m));
    }
    return make_reactant_set(std::move(mols));
  } catch (const std::invalid_argument&) {
    // Rewrites that violate graph validity (e.g. aromatic bond on an aliphatic
    // atom) are not reactant sets.
    return std::nullopt;
  }
}

}  // namespace

std::vector<ReactantSet> apply_template(const RetroTemplate& t, const MolGraph& product) {
  std::vector<ReactantSet> out;
  std::set<std::vector<CanonicalKey>> seen;
  for (const auto& match : find_matches(t.product_pattern, product)) {
    auto result = rewrite(t, product, match);
    if (result && seen.insert(result->keys).second) out.push_back(std::move(*result));
  }
  return out;
}

bool phi_match_template(const MolGraph& product, const RetroTemplate& t,
                        const TemplateTable& known) {
  return known.contains(t.template_key) && contains(t.product_pattern, product);
}

bool phi_match_reactants(const MolGraph&, const RetroTemplate& t,
                         const std::vector<MolGraph>& reactants) {
  const auto k = t.n_reactants();
  if (k > 5) throw SizeLimitError("template arity " + std::to_string(k) + " exceeds 5");
  if (reactants.size() != k) return false;
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    bool ok = true;
    for (std::size_t i = 0; i < k && ok; ++i) {
      ok = contains(t.reactant_patterns[i], reactants[static_cast<std::size_t>(perm[i])]);
    }
    if (ok) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

}  // namespace retrologic
