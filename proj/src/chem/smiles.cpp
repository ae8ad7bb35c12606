#include "retrologic/chem/smiles.hpp"

#include <cctype>
#include <stdexcept>

#include "retrologic/chem/canonical.hpp"
#include "retrologic/chem/line_notation.hpp"
#include "retrologic/error.hpp"

namespace retrologic {

namespace {

BondOrder order_from_symbol(char c) {
  switch (c) {
    case '=': return BondOrder::Double;
    case '#': return BondOrder::Triple;
    case ':': return BondOrder::Aromatic;
    default: return BondOrder::Single;
  }
}

bool organic_subset(Element e, bool aromatic) {
  switch (e) {
    case Element::C: case Element::N: case Element::O:
    case Element::S: case Element::P: case Element::B:
      return true;
    case Element::F: case Element::Cl: case Element::Br: case Element::I:
      return !aromatic;
    default:
      return false;
  }
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(c));
  return out;
}

}  // namespace

MolGraph parse_molecule(std::string_view text) {
  const auto parsed = notation::parse(text, notation::Dialect::Molecule);
  MolGraph::Builder builder;
  for (const auto& pa : parsed.atoms) {
    Atom atom;
    atom.element = *pa.element;
    atom.aromatic = *pa.aromatic;
    atom.formal_charge = *pa.charge;
    atom.explicit_h = *pa.hcount;
    atom.map_label = pa.map_label;
    builder.add_atom(atom);
  }
  for (const auto& pb : parsed.bonds) {
    const auto& a = parsed.atoms[static_cast<std::size_t>(pb.a)];
    const auto& b = parsed.atoms[static_cast<std::size_t>(pb.b)];
    const BondOrder order = pb.symbol ? order_from_symbol(*pb.symbol)
                                      : notation::implicit_order(*a.aromatic, *b.aromatic);
    try {
      builder.add_bond(pb.a, pb.b, order);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), pb.offset);
    }
  }
  return std::move(builder).build();
}

std::string atom_text(const Atom& atom, bool with_map_label) {
  const bool labeled = with_map_label && atom.map_label.has_value();
  const std::string_view sym = element_symbol(atom.element);
  if (organic_subset(atom.element, atom.aromatic) && atom.formal_charge == 0 &&
      atom.explicit_h == 0 && !labeled) {
    return atom.aromatic ? lower(sym) : std::string(sym);
  }
  std::string out = "[";
  out += atom.aromatic ? lower(sym) : std::string(sym);
  if (atom.explicit_h > 0) {
    out += 'H';
    if (atom.explicit_h > 1) out += std::to_string(atom.explicit_h);
  }
  if (atom.formal_charge != 0) {
    out += atom.formal_charge > 0 ? '+' : '-';
    const int magnitude = atom.formal_charge > 0 ? atom.formal_charge : -atom.formal_charge;
    if (magnitude > 1) out += std::to_string(magnitude);
  }
  if (labeled) {
    out += ':';
    out += std::to_string(*atom.map_label);
  }
  out += ']';
  return out;
}

std::string write_molecule(const MolGraph& mol, const WriteOptions& options) {
  if (mol.empty()) return {};
  const auto rank = canonical_atom_ranks(mol);
  std::vector<notation::EmitEdge> edges;
  edges.reserve(mol.bond_count());
  for (const auto& b : mol.bonds()) edges.push_back({b.a, b.b});
  return notation::emit(
      mol.atom_count(), edges, rank,
      [&](int i) { return atom_text(mol.atom(i), options.map_labels); },
      [&](int e) -> std::string {
        const Bond& b = mol.bond(e);
        const bool both_aromatic = mol.atom(b.a).aromatic && mol.atom(b.b).aromatic;
        if (b.order == notation::implicit_order(both_aromatic, both_aromatic)) return {};
        return std::string(1, bond_symbol(b.order));
      });
}

}  // namespace retrologic
