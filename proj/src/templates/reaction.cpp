#include "retrologic/templates/reaction.hpp"

#include <map>

#include "retrologic/chem/smiles.hpp"
#include "retrologic/error.hpp"

namespace retrologic {

namespace {

std::vector<MolGraph> parse_side(std::string_view text, std::size_t base, bool allow_empty) {
  std::vector<MolGraph> out;
  if (text.empty()) {
    if (allow_empty) return out;
    throw ParseError("empty reaction side", base);
  }
  std::size_t start = 0;
  while (true) {
    const auto dot = text.find('.', start);
    const auto piece = text.substr(start, dot == std::string_view::npos ? dot : dot - start);
    try {
      out.push_back(parse_molecule(piece));
    } catch (const UnsupportedFeature& e) {
      throw UnsupportedFeature("unsupported feature in molecule", base + start + e.offset());
    } catch (const ParseError& e) {
      std::string msg = e.what();
      msg = msg.substr(0, msg.rfind(" at offset"));
      throw ParseError(msg, base + start + e.offset());
    }
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return out;
}

}  // namespace

ParsedReaction parse_reaction(std::string_view text) {
  const auto first = text.find('>');
  if (first == std::string_view::npos) throw ParseError("missing '>' in reaction", text.size());
  const auto second = text.find('>', first + 1);
  if (second == std::string_view::npos) throw ParseError("missing second '>' in reaction", text.size());
  if (text.find('>', second + 1) != std::string_view::npos) {
    throw ParseError("too many '>' in reaction", text.find('>', second + 1));
  }
  ParsedReaction out;
  out.reactants = parse_side(text.substr(0, first), 0, false);
  out.agents = parse_side(text.substr(first + 1, second - first - 1), first + 1, true);
  out.products = parse_side(text.substr(second + 1), second + 1, false);
  return out;
}

void validate_mapping(const ReactionRecord& rxn) {
  std::map<int, int> reactant_labels;
  for (const auto& mol : rxn.reactants) {
    for (const auto& a : mol.atoms()) {
      if (!a.map_label) continue;
      if (++reactant_labels[*a.map_label] > 1) {
        throw DataError("map label " + std::to_string(*a.map_label) +
                        " repeats on the reactant side");
      }
    }
  }
  for (std::size_t i = 0; i < rxn.product.atom_count(); ++i) {
    const auto& a = rxn.product.atom(static_cast<int>(i));
    if (!a.map_label) {
      throw DataError("unmapped product atom " + std::to_string(i));
    }
    if (!reactant_labels.contains(*a.map_label)) {
      throw DataError("product map label " + std::to_string(*a.map_label) +
                      " has no reactant atom");
    }
  }
}

}  // namespace retrologic
