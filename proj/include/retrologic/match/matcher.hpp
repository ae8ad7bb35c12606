#pragma once

#include <vector>

#include "retrologic/chem/mol_graph.hpp"
#include "retrologic/match/pattern.hpp"

namespace retrologic {

/// assignment[i] = molecule atom matched by pattern node i.
struct MatchMap {
  std::vector<int> assignment;

  friend auto operator<=>(const MatchMap&, const MatchMap&) = default;
};

/// All injective embeddings of `p` into `m`, automorphic images included,
/// sorted lexicographically by assignment vector. Molecule atoms may carry
/// properties the pattern does not mention (extra degree, charge when the
/// pattern leaves it open).
std::vector<MatchMap> find_matches(const PatternGraph& p, const MolGraph& m);

/// True iff at least one embedding exists; stops at the first one.
bool contains(const PatternGraph& p, const MolGraph& m);

}  // namespace retrologic
