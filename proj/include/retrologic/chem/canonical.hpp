#pragma once

#include <compare>
#include <string>
#include <vector>

#include "retrologic/chem/mol_graph.hpp"

namespace retrologic {

/// Vertex- and edge-colored graph handed to the canonical labeler. Colors are
/// plain integers whose order must itself be isomorphism-invariant (callers
/// derive them by sorting intrinsic label tuples).
struct ColoredGraph {
  struct Edge {
    int a;
    int b;
    int color;
  };
  std::vector<int> node_colors;
  std::vector<Edge> edges;
};

/// Canonical labeling by partition refinement plus individualization. The
/// initial partition is by node color; cells are refined on the multiset of
/// (edge color, neighbor cell). When refinement stalls, each vertex of the
/// first non-singleton cell is individualized in turn and the search recurses;
/// the leaf with the lexicographically smallest certificate wins. Branches
/// equivalent under automorphisms already discovered are pruned.
///
/// Returns rank[v] = canonical position of vertex v.
std::vector<int> canonical_ranks(const ColoredGraph& graph);

/// Initial-partition invariant of an atom: element, charge, aromaticity,
/// explicit H count, degree and sorted incident bond orders. Map labels are
/// not part of it.
std::vector<int> atom_invariant(const MolGraph& mol, int atom);

/// Canonical ranks of a molecule's atoms (map labels ignored).
std::vector<int> canonical_atom_ranks(const MolGraph& mol);

/// Byte string identifying a molecule up to isomorphism (map labels ignored).
/// Equal keys iff the molecules are isomorphic.
class CanonicalKey {
 public:
  CanonicalKey() = default;
  explicit CanonicalKey(std::string bytes) : bytes_(std::move(bytes)) {}

  const std::string& bytes() const { return bytes_; }

  friend auto operator<=>(const CanonicalKey&, const CanonicalKey&) = default;
  friend bool operator==(const CanonicalKey&, const CanonicalKey&) = default;

 private:
  std::string bytes_;
};

CanonicalKey canonical_key(const MolGraph& mol);

/// Exhaustive label-respecting isomorphism test used as an oracle. Throws
/// SizeLimitError when either graph has more than `max_atoms` atoms.
bool graph_isomorphic(const MolGraph& a, const MolGraph& b, std::size_t max_atoms = 24);

}  // namespace retrologic
