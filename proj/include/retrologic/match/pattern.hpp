#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "retrologic/chem/canonical.hpp"
#include "retrologic/chem/mol_graph.hpp"

namespace retrologic {

/// Conjunctive node constraints. An unset field places no constraint.
struct PatternNode {
  std::optional<Element> element;  // nullopt: wildcard
  std::optional<int> charge;
  std::optional<bool> aromatic;
  std::optional<int> hcount;
  std::optional<int> map_label;

  bool wildcard() const { return !element.has_value(); }
  bool accepts(const Atom& atom) const;

  friend bool operator==(const PatternNode&, const PatternNode&) = default;
};

struct PatternEdge {
  int a = 0;
  int b = 0;
  std::optional<BondOrder> order;  // nullopt: any order

  bool accepts(BondOrder o) const { return !order || *order == o; }

  friend bool operator==(const PatternEdge&, const PatternEdge&) = default;
};

/// A subgraph pattern: a reaction-center fragment or one reactant-side
/// fragment of a template. Patterns built by the parser or by template
/// extraction are connected.
class PatternGraph {
 public:
  PatternGraph() = default;
  /// Throws std::invalid_argument on self-loops, duplicate edges, bad indices.
  PatternGraph(std::vector<PatternNode> nodes, std::vector<PatternEdge> edges);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool empty() const { return nodes_.empty(); }
  const PatternNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const PatternEdge& edge(int i) const { return edges_[static_cast<std::size_t>(i)]; }
  const std::vector<PatternNode>& nodes() const { return nodes_; }
  const std::vector<PatternEdge>& edges() const { return edges_; }
  const std::vector<MolGraph::Neighbor>& neighbors(int i) const {
    return adjacency_[static_cast<std::size_t>(i)];
  }
  int degree(int i) const { return static_cast<int>(neighbors(i).size()); }
  int edge_between(int a, int b) const;
  bool connected() const;

  /// Node index carrying `label`, or -1.
  int node_with_label(int label) const;

  PatternGraph without_map_labels() const;

  friend bool operator==(const PatternGraph& x, const PatternGraph& y) {
    return x.nodes_ == y.nodes_ && x.edges_ == y.edges_;
  }

 private:
  std::vector<PatternNode> nodes_;
  std::vector<PatternEdge> edges_;
  std::vector<std::vector<MolGraph::Neighbor>> adjacency_;
};

/// Parses the pattern dialect: the molecule grammar plus `*` (any element)
/// and `~` (any bond). Unbracketed atoms constrain element and aromaticity
/// only; bracket atoms also constrain H count and charge when written
/// (`H0`, `+0` pin them to zero).
PatternGraph parse_pattern(std::string_view text);

/// Pattern text with the given ranks driving traversal order; `label` returns
/// the map label to print for a node (nullopt for none). Bond symbols are
/// always explicit.
std::string write_pattern(const PatternGraph& p, const std::vector<int>& rank,
                          const std::function<std::optional<int>(int)>& label);

/// Canonical text (map labels written as stored).
std::string write_pattern(const PatternGraph& p);

/// Integer colors for the canonical labeler; map labels excluded.
ColoredGraph colored_graph(const PatternGraph& p);

/// Canonical form ignoring map labels; equal iff the patterns impose
/// isomorphic constraints.
CanonicalKey pattern_key(const PatternGraph& p);

}  // namespace retrologic
