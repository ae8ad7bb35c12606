#pragma once

// Tokenizer/parser core shared by the molecule and pattern grammars, plus the
// DFS string emitter used by both writers. See docs/grammar.md.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "retrologic/chem/mol_graph.hpp"

namespace retrologic::notation {

enum class Dialect { Molecule, Pattern };

struct ParsedAtom {
  std::optional<Element> element;  // nullopt: wildcard
  std::optional<bool> aromatic;
  std::optional<int> charge;
  std::optional<int> hcount;
  std::optional<int> map_label;
  bool bracket = false;
  std::size_t offset = 0;
};

struct ParsedBond {
  int a = 0;
  int b = 0;
  // Written symbol; nullopt means no symbol was written.
  std::optional<char> symbol;
  std::size_t offset = 0;
};

struct ParsedGraph {
  std::vector<ParsedAtom> atoms;
  std::vector<ParsedBond> bonds;
};

/// Parses one connected fragment. Throws ParseError / UnsupportedFeature.
ParsedGraph parse(std::string_view text, Dialect dialect);

/// Order implied by an omitted bond symbol between two atoms.
inline BondOrder implicit_order(bool a_aromatic, bool b_aromatic) {
  return a_aromatic && b_aromatic ? BondOrder::Aromatic : BondOrder::Single;
}

struct EmitEdge {
  int a;
  int b;
};

/// Writes a graph as a line-notation string by depth-first traversal.
/// Each component starts at its lowest-ranked node; neighbors are visited in
/// rank order; ring-closure digits are allocated lowest-free-first.
/// Components are joined with '.'.
std::string emit(std::size_t node_count, const std::vector<EmitEdge>& edges,
                 const std::vector<int>& rank,
                 const std::function<std::string(int)>& node_text,
                 const std::function<std::string(int)>& edge_text);

}  // namespace retrologic::notation
