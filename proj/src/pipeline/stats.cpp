#include "retrologic/pipeline/stats.hpp"

#include <nlohmann/json.hpp>
#include <set>
#include <unordered_map>

#include "retrologic/match/pattern.hpp"

namespace retrologic {

CorpusStats corpus_stats(const Dataset& data, const CacheStore& store) {
  CorpusStats s;
  s.templates = store.table.size();
  std::set<CanonicalKey> centers;
  for (const auto& t : store.table.templates()) centers.insert(pattern_key(t.product_pattern));
  s.unique_centers = centers.size();
  s.records = data.records.size();
  if (data.records.empty()) return s;
  s.empty = false;

  std::unordered_map<std::string, const CacheEntry*> by_id;
  for (const auto& e : store.entries) by_id.emplace(e.record_id, &e);
  std::size_t covered = 0;
  std::size_t products = 0;
  double n_centers = 0.0;
  double n_templates = 0.0;
  double n_reactants = 0.0;
  for (const auto& r : data.records) {
    n_reactants += static_cast<double>(r.reactants.size());
    const auto it = by_id.find(r.record_id);
    if (it == by_id.end()) continue;
    const auto& e = *it->second;
    if (e.excluded) {
      ++s.excluded;
      continue;
    }
    ++products;
    std::set<CanonicalKey> own;
    for (auto id : e.template_ids) own.insert(pattern_key(store.table[id].product_pattern));
    n_centers += static_cast<double>(own.size());
    n_templates += static_cast<double>(e.template_ids.size());
    const auto truth = truth_keys(r);
    bool hit = false;
    for (const auto& sets : e.candidates) {
      for (const auto& set : sets) hit = hit || set.keys == truth;
    }
    if (hit) ++covered;
  }
  const auto n = static_cast<double>(data.records.size());
  s.coverage = static_cast<double>(covered) / n;
  s.mean_reactants = n_reactants / n;
  if (products > 0) {
    s.mean_centers_per_product = n_centers / static_cast<double>(products);
    s.mean_templates_per_product = n_templates / static_cast<double>(products);
  }
  return s;
}

std::string to_json(const CorpusStats& s) {
  return nlohmann::json{{"empty", s.empty},
                        {"records", s.records},
                        {"coverage", s.coverage},
                        {"templates", s.templates},
                        {"unique_centers", s.unique_centers},
                        {"mean_centers_per_product", s.mean_centers_per_product},
                        {"mean_templates_per_product", s.mean_templates_per_product},
                        {"mean_reactants", s.mean_reactants},
                        {"excluded", s.excluded}}
      .dump();
}

}  // namespace retrologic
