#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "retrologic/inference/inference.hpp"
#include "retrologic/model/gln_model.hpp"
#include "retrologic/pipeline/dataset.hpp"

namespace retrologic {

/// Cached supports of one product.
struct CacheEntry {
  std::string record_id;
  MolGraph product;
  /// Matched templates with a non-empty reactant support, ascending.
  std::vector<std::size_t> template_ids;
  std::vector<std::vector<ReactantSet>> candidates;  // parallel to template_ids
  /// Set when the product was excluded (support cap exceeded).
  std::optional<std::string> excluded;
};

struct CacheStore {
  TemplateTable table;
  std::uint64_t table_hash = 0;
  std::vector<CacheEntry> entries;  // dataset order

  const CacheEntry* find(const std::string& record_id) const;
};

struct CacheOptions {
  int threads = 1;
  std::size_t cap = kDefaultSupportCap;
  int radius = 1;
};

struct CacheReport {
  std::size_t products = 0;
  std::size_t excluded = 0;
  /// Records whose own (template, reactant set) pair is missing from the cache.
  std::size_t truth_missing = 0;
  std::vector<std::string> missing_ids;
};

/// FNV-1a (64-bit) over the table's template lines in table order.
std::uint64_t template_table_hash(const TemplateTable& table);

/// Applies every matched template to every product, one worker per product
/// slice; the result does not depend on the thread count.
CacheStore build_caches(const Dataset& data, TemplateTable table, const CacheOptions& options = {},
                        CacheReport* report = nullptr);

/// Line-delimited text (see docs/formats.md).
void save_cache(std::ostream& out, const CacheStore& store);
/// Throws DataError on a malformed file or when the table hash differs from
/// `table` (stale cache).
CacheStore load_cache(std::istream& in, const TemplateTable& table);

/// Replays both match predicates on every cached pair; returns the number of
/// pairs failing either.
std::size_t verify_cache(const CacheStore& store);

/// The restricted supports of one entry, grouped for scoring.
ProductSupport to_support(const CacheStore& store, const CacheEntry& entry,
                          std::size_t cap = kDefaultSupportCap);

/// Examples for every non-excluded record: support from the cache, truth
/// from the record's reactants and its own extracted template.
std::vector<Example> make_examples(const Dataset& data, const CacheStore& store, int radius = 1);

std::string to_json(const CacheReport& r);

}  // namespace retrologic
