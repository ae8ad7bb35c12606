#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace retrologic {

/// Closed element vocabulary. Anything not listed parses to `Other`.
enum class Element : std::uint8_t { C, N, O, S, P, F, Cl, Br, I, B, Si, Other };

inline constexpr std::size_t kNumElements = 12;

std::string_view element_symbol(Element e);

/// Maps a capitalized symbol ("C", "Cl", "Na") to the vocabulary.
/// Unknown symbols map to `Element::Other`.
Element element_from_symbol(std::string_view symbol);

enum class BondOrder : std::uint8_t { Single, Double, Triple, Aromatic };

inline constexpr std::size_t kNumBondOrders = 4;

char bond_symbol(BondOrder order);

struct Atom {
  Element element = Element::C;
  int formal_charge = 0;  // [-4, 4]
  bool aromatic = false;
  int explicit_h = 0;
  std::optional<int> map_label;  // positive when present

  friend bool operator==(const Atom&, const Atom&) = default;
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;

  int other(int atom) const { return atom == a ? b : a; }

  friend bool operator==(const Bond&, const Bond&) = default;
};

/// An undirected molecular graph. Immutable once built through
/// MolGraph::Builder or the parser; the adjacency index is derived from the
/// bond list and kept consistent by construction.
class MolGraph {
 public:
  struct Neighbor {
    int atom;
    int bond;
  };

  class Builder {
   public:
    int add_atom(const Atom& atom);
    /// Throws std::invalid_argument on self-loops, duplicate bonds, bad
    /// indices, or an aromatic bond touching a non-aromatic atom.
    int add_bond(int a, int b, BondOrder order);
    bool has_bond(int a, int b) const;
    std::size_t atom_count() const { return atoms_.size(); }
    Atom& atom(int i) { return atoms_.at(static_cast<std::size_t>(i)); }
    MolGraph build() &&;

   private:
    std::vector<Atom> atoms_;
    std::vector<Bond> bonds_;
  };

  MolGraph() = default;

  /// Validating constructor; same checks as the builder.
  MolGraph(std::vector<Atom> atoms, std::vector<Bond> bonds);

  std::size_t atom_count() const { return atoms_.size(); }
  std::size_t bond_count() const { return bonds_.size(); }
  bool empty() const { return atoms_.empty(); }

  const Atom& atom(int i) const { return atoms_[static_cast<std::size_t>(i)]; }
  const Bond& bond(int i) const { return bonds_[static_cast<std::size_t>(i)]; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  const std::vector<Neighbor>& neighbors(int i) const {
    return adjacency_[static_cast<std::size_t>(i)];
  }
  int degree(int i) const { return static_cast<int>(neighbors(i).size()); }

  /// Index of the bond joining a and b, or -1.
  int bond_between(int a, int b) const;

  /// Copy with every map label removed.
  MolGraph without_map_labels() const;

  /// Copy with atoms reordered: atom i of the result is atom order[i] of this.
  MolGraph permuted(const std::vector<int>& order) const;

  /// Number of connected components (0 for the empty graph).
  int component_count() const;

  /// Rebuilds adjacency from the bond list and compares with the stored
  /// index.
  bool adjacency_consistent() const;

  friend bool operator==(const MolGraph& x, const MolGraph& y) {
    return x.atoms_ == y.atoms_ && x.bonds_ == y.bonds_;
  }

 private:
  void index();

  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

}  // namespace retrologic
