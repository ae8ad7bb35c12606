#pragma once

#include <string>
#include <string_view>

#include "retrologic/chem/mol_graph.hpp"

namespace retrologic {

/// Parses one molecule in the supported line-notation subset (see
/// docs/grammar.md). Throws ParseError with a 0-based byte offset, or
/// UnsupportedFeature for stereo/chirality/isotope markers.
MolGraph parse_molecule(std::string_view text);

struct WriteOptions {
  bool map_labels = false;
};

/// Canonical line notation. With the default options the output is identical
/// for isomorphic inputs. With `map_labels` the atom order is still canonical
/// but labels are written, so the string also reflects the labeling.
std::string write_molecule(const MolGraph& mol, const WriteOptions& options = {});

/// Text of one atom as it appears in written notation.
std::string atom_text(const Atom& atom, bool with_map_label);

}  // namespace retrologic
