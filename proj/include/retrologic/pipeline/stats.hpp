#pragma once

#include <string>

#include "retrologic/pipeline/cache.hpp"

namespace retrologic {

struct CorpusStats {
  bool empty = true;
  std::size_t records = 0;
  /// Fraction of records with some cached reactant set equal to the truth.
  double coverage = 0.0;
  /// Distinct reaction centers among the templates.
  std::size_t unique_centers = 0;
  std::size_t templates = 0;
  double mean_centers_per_product = 0.0;
  double mean_templates_per_product = 0.0;
  double mean_reactants = 0.0;
  std::size_t excluded = 0;
};

/// Records without a usable cache entry count as uncovered and are left out
/// of the per-product means.
CorpusStats corpus_stats(const Dataset& data, const CacheStore& store);

std::string to_json(const CorpusStats& s);

}  // namespace retrologic
