#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "retrologic/templates/reaction.hpp"
#include "retrologic/templates/retro_template.hpp"

namespace retrologic {

struct Dataset {
  std::vector<ReactionRecord> records;
  /// True when at least one record carries a reaction class.
  bool class_labels = false;
};

struct LoadOptions {
  /// Malformed rows are skipped until they exceed this fraction of all rows;
  /// beyond it loading fails with DataError.
  double max_malformed_fraction = 0.1;
};

struct IngestReport {
  std::size_t rows = 0;
  std::size_t records = 0;
  std::size_t multi_product_rows = 0;
  std::size_t broken_maps = 0;
  std::size_t reagents_removed = 0;  // reactant-side molecules sharing no label with the product
  std::vector<std::string> malformed;  // "line N: message"
};

/// Rows are `record_id<TAB>reactants>>products[<TAB>class]`. Blank lines and
/// lines starting with '#' are skipped. A row with k > 1 products becomes k
/// records `<id>_1` .. `<id>_k`. Records whose atom maps fail validation are
/// dropped and counted.
Dataset load_reactions(std::istream& in, IngestReport* report = nullptr,
                       const LoadOptions& options = {});
/// Throws DataError when the file cannot be opened.
Dataset load_reactions_file(const std::string& path, IngestReport* report = nullptr,
                            const LoadOptions& options = {});

std::string to_json(const IngestReport& r);

/// Sorted canonical keys of a record's reactants.
std::vector<CanonicalKey> truth_keys(const ReactionRecord& r);

struct ExtractionReport {
  TemplateTable table;
  /// Per record: key of its extracted template, nullopt when extraction failed.
  std::vector<std::optional<std::string>> record_keys;
  std::size_t failed = 0;
  std::vector<std::string> errors;  // "record_id: message", first few only
};

/// Extracts one template per record. Each template's class tag is the most
/// frequent class among the records producing it (ties: smaller class).
ExtractionReport extract_templates(const Dataset& data, int radius = 1);

/// Writes one `key<TAB>class` line per template.
void write_templates(std::ostream& out, const TemplateTable& table);

}  // namespace retrologic
