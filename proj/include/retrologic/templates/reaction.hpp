#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "retrologic/chem/mol_graph.hpp"

namespace retrologic {

/// One atom-mapped reaction with a single product.
struct ReactionRecord {
  std::string record_id;
  MolGraph product;
  std::vector<MolGraph> reactants;
  std::optional<int> reaction_class;  // 1..10 when known
};

/// Molecules of a `reactants>>products` or `reactants>agents>products`
/// string. Agents are parsed and returned separately.
struct ParsedReaction {
  std::vector<MolGraph> reactants;
  std::vector<MolGraph> agents;
  std::vector<MolGraph> products;
};

/// Throws ParseError with offsets relative to the whole reaction string.
ParsedReaction parse_reaction(std::string_view text);

/// Throws DataError when a product atom lacks a map label, a label repeats
/// across the reactant side, or a product label has no reactant atom.
void validate_mapping(const ReactionRecord& rxn);

}  // namespace retrologic
