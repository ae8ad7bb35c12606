#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "retrologic/chem/canonical.hpp"
#include "retrologic/chem/mol_graph.hpp"
#include "retrologic/match/pattern.hpp"
#include "retrologic/templates/reaction.hpp"

namespace retrologic {

/// A retrosynthesis rule o^T >> r_1^T ... r_N^T. Map labels shared between
/// the product pattern and the reactant patterns give the atom
/// correspondence. Unlabeled reactant nodes are leaving-group atoms created
/// on application; unlabeled product nodes are deleted.
struct RetroTemplate {
  PatternGraph product_pattern;
  std::vector<PatternGraph> reactant_patterns;
  std::optional<int> class_tag;
  /// Canonical text of the rule; also its on-disk form.
  std::string template_key;

  std::size_t n_reactants() const { return reactant_patterns.size(); }
};

/// Builds a template from its parts: validates the label correspondence and
/// computes the canonical key. Throws DataError on an invalid rule.
RetroTemplate make_template(PatternGraph product, std::vector<PatternGraph> reactants,
                            std::optional<int> class_tag = std::nullopt);

/// Parses `product_pattern>>r1.r2...` (no class field). Throws ParseError or
/// DataError.
RetroTemplate parse_template(std::string_view text);

/// `template_key<TAB>class_tag` with an empty class field when unknown.
std::string format_template_line(const RetroTemplate& t);

/// Center atoms are the product atoms whose charge, H count, aromaticity or
/// mapped neighborhood differ between the two sides. The product pattern is
/// the center grown by `radius` bond hops; each reactant pattern holds the
/// same mapped atoms plus every leaving atom connected to the center through
/// unmapped atoms. Reactant molecules that contribute no product atom are
/// treated as reagents and dropped.
///
/// Throws DataError on broken mapping, an empty center, or patterns that
/// would fall apart into several fragments.
RetroTemplate extract_template(const ReactionRecord& rxn, int radius = 1);

/// Reactant-side product of a template application. `keys` is sorted and
/// `molecules[i]` has key `keys[i]`; map labels are stripped.
struct ReactantSet {
  std::vector<MolGraph> molecules;
  std::vector<CanonicalKey> keys;

  friend bool operator==(const ReactantSet& x, const ReactantSet& y) { return x.keys == y.keys; }
};

/// Wraps molecules into a ReactantSet (strips labels, sorts by key).
ReactantSet make_reactant_set(std::vector<MolGraph> molecules);

/// Every distinct reactant set obtained by rewriting `product` with `t`, one
/// per match up to deduplication by key multiset, in order of first
/// appearance over the sorted match list.
std::vector<ReactantSet> apply_template(const RetroTemplate& t, const MolGraph& product);

/// Removes later duplicates (same key multiset), keeping first appearances.
std::vector<ReactantSet> dedup_reactant_sets(std::vector<ReactantSet> sets);

/// Deduplicated template collection indexed by key.
class TemplateTable {
 public:
  /// Inserts unless the key is already present; returns the index either way.
  std::size_t add(RetroTemplate t);

  std::size_t size() const { return templates_.size(); }
  bool empty() const { return templates_.empty(); }
  const RetroTemplate& operator[](std::size_t i) const { return templates_[i]; }
  const std::vector<RetroTemplate>& templates() const { return templates_; }

  /// Index of the template with this key, or nullopt.
  std::optional<std::size_t> find(const std::string& key) const;
  bool contains(const std::string& key) const { return find(key).has_value(); }

  void set_class_tag(std::size_t i, std::optional<int> tag) { templates_[i].class_tag = tag; }

 private:
  std::vector<RetroTemplate> templates_;
  std::map<std::string, std::size_t> index_;
};

/// True iff o^T occurs in O and T is a known template.
bool phi_match_template(const MolGraph& product, const RetroTemplate& t,
                        const TemplateTable& known);

/// True iff |R| = N(T) and some assignment of reactant patterns to
/// molecules has each pattern contained in its molecule. Throws
/// SizeLimitError for N(T) > 5.
bool phi_match_reactants(const MolGraph& product, const RetroTemplate& t,
                         const std::vector<MolGraph>& reactants);

struct TemplateLoadReport {
  TemplateTable table;
  std::size_t parsed = 0;
  std::size_t rejected = 0;
  std::size_t duplicates = 0;
  std::vector<std::string> errors;  // "line N: message", first few only
};

/// Reads one template per line (`key<TAB>class_tag`); blank lines and lines
/// starting with '#' are skipped. Lines outside the dialect are rejected and
/// counted.
TemplateLoadReport load_templates(std::istream& in);

}  // namespace retrologic
