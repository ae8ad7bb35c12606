#include "retrologic/chem/mol_graph.hpp"

#include <algorithm>
#include <stdexcept>

namespace retrologic {

namespace {

constexpr std::array<std::string_view, kNumElements> kSymbols = {
    "C", "N", "O", "S", "P", "F", "Cl", "Br", "I", "B", "Si", "X"};

void check_atom(const Atom& atom) {
  if (atom.formal_charge < -4 || atom.formal_charge > 4) {
    throw std::invalid_argument("formal charge out of range [-4,4]");
  }
  if (atom.explicit_h < 0) {
    throw std::invalid_argument("negative hydrogen count");
  }
  if (atom.map_label && *atom.map_label <= 0) {
    throw std::invalid_argument("map label must be positive");
  }
}

void check_bond(const std::vector<Atom>& atoms, const Bond& bond) {
  const auto n = static_cast<int>(atoms.size());
  if (bond.a < 0 || bond.b < 0 || bond.a >= n || bond.b >= n) {
    throw std::invalid_argument("bond endpoint out of range");
  }
  if (bond.a == bond.b) {
    throw std::invalid_argument("self-loop bond");
  }
  if (bond.order == BondOrder::Aromatic &&
      !(atoms[static_cast<std::size_t>(bond.a)].aromatic &&
        atoms[static_cast<std::size_t>(bond.b)].aromatic)) {
    throw std::invalid_argument("aromatic bond between non-aromatic atoms");
  }
}

}  // namespace

std::string_view element_symbol(Element e) {
  return kSymbols[static_cast<std::size_t>(e)];
}

Element element_from_symbol(std::string_view symbol) {
  for (std::size_t i = 0; i + 1 < kSymbols.size(); ++i) {
    if (kSymbols[i] == symbol) return static_cast<Element>(i);
  }
  return Element::Other;
}

char bond_symbol(BondOrder order) {
  switch (order) {
    case BondOrder::Single: return '-';
    case BondOrder::Double: return '=';
    case BondOrder::Triple: return '#';
    case BondOrder::Aromatic: return ':';
  }
  return '?';
}

int MolGraph::Builder::add_atom(const Atom& atom) {
  check_atom(atom);
  atoms_.push_back(atom);
  return static_cast<int>(atoms_.size()) - 1;
}

bool MolGraph::Builder::has_bond(int a, int b) const {
  return std::any_of(bonds_.begin(), bonds_.end(), [&](const Bond& x) {
    return (x.a == a && x.b == b) || (x.a == b && x.b == a);
  });
}

int MolGraph::Builder::add_bond(int a, int b, BondOrder order) {
  Bond bond{a, b, order};
  check_bond(atoms_, bond);
  if (has_bond(a, b)) throw std::invalid_argument("duplicate bond");
  bonds_.push_back(bond);
  return static_cast<int>(bonds_.size()) - 1;
}

MolGraph MolGraph::Builder::build() && {
  MolGraph g;
  g.atoms_ = std::move(atoms_);
  g.bonds_ = std::move(bonds_);
  g.index();
  return g;
}

MolGraph::MolGraph(std::vector<Atom> atoms, std::vector<Bond> bonds)
    : atoms_(std::move(atoms)), bonds_(std::move(bonds)) {
  for (const auto& a : atoms_) check_atom(a);
  for (const auto& b : bonds_) check_bond(atoms_, b);
  index();
  for (std::size_t i = 0; i < bonds_.size(); ++i) {
    if (bond_between(bonds_[i].a, bonds_[i].b) != static_cast<int>(i)) {
      throw std::invalid_argument("duplicate bond");
    }
  }
}

void MolGraph::index() {
  adjacency_.assign(atoms_.size(), {});
  for (std::size_t i = 0; i < bonds_.size(); ++i) {
    const auto& b = bonds_[i];
    adjacency_[static_cast<std::size_t>(b.a)].push_back({b.b, static_cast<int>(i)});
    adjacency_[static_cast<std::size_t>(b.b)].push_back({b.a, static_cast<int>(i)});
  }
}

int MolGraph::bond_between(int a, int b) const {
  for (const auto& nb : neighbors(a)) {
    if (nb.atom == b) return nb.bond;
  }
  return -1;
}

MolGraph MolGraph::without_map_labels() const {
  MolGraph g = *this;
  for (auto& a : g.atoms_) a.map_label.reset();
  return g;
}

MolGraph MolGraph::permuted(const std::vector<int>& order) const {
  if (order.size() != atoms_.size()) {
    throw std::invalid_argument("permutation size mismatch");
  }
  std::vector<int> position(atoms_.size(), -1);
  std::vector<Atom> atoms;
  atoms.reserve(atoms_.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int src = order[i];
    if (src < 0 || static_cast<std::size_t>(src) >= atoms_.size() ||
        position[static_cast<std::size_t>(src)] != -1) {
      throw std::invalid_argument("not a permutation");
    }
    position[static_cast<std::size_t>(src)] = static_cast<int>(i);
    atoms.push_back(atoms_[static_cast<std::size_t>(src)]);
  }
  std::vector<Bond> bonds;
  bonds.reserve(bonds_.size());
  for (const auto& b : bonds_) {
    bonds.push_back({position[static_cast<std::size_t>(b.a)],
                     position[static_cast<std::size_t>(b.b)], b.order});
  }
  return MolGraph(std::move(atoms), std::move(bonds));
}

int MolGraph::component_count() const {
  std::vector<char> seen(atoms_.size(), 0);
  int count = 0;
  std::vector<int> stack;
  for (std::size_t s = 0; s < atoms_.size(); ++s) {
    if (seen[s]) continue;
    ++count;
    seen[s] = 1;
    stack.push_back(static_cast<int>(s));
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (const auto& nb : neighbors(v)) {
        if (!seen[static_cast<std::size_t>(nb.atom)]) {
          seen[static_cast<std::size_t>(nb.atom)] = 1;
          stack.push_back(nb.atom);
        }
      }
    }
  }
  return count;
}

bool MolGraph::adjacency_consistent() const {
  MolGraph fresh;
  fresh.atoms_ = atoms_;
  fresh.bonds_ = bonds_;
  fresh.index();
  if (fresh.adjacency_.size() != adjacency_.size()) return false;
  for (std::size_t i = 0; i < adjacency_.size(); ++i) {
    auto key = [](const Neighbor& n) { return std::pair{n.atom, n.bond}; };
    std::vector<std::pair<int, int>> x, y;
    for (const auto& n : adjacency_[i]) x.push_back(key(n));
    for (const auto& n : fresh.adjacency_[i]) y.push_back(key(n));
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    if (x != y) return false;
  }
  return true;
}

}  // namespace retrologic
