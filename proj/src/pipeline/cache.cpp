#include "retrologic/pipeline/cache.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "retrologic/chem/smiles.hpp"
#include "retrologic/error.hpp"

namespace retrologic {

namespace {

constexpr const char* kHeader = "#retrologic-cache\t1";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

CacheEntry build_entry(const ReactionRecord& r, const TemplateTable& table, std::size_t cap) {
  CacheEntry e;
  e.record_id = r.record_id;
  e.product = r.product.without_map_labels();
  for (std::size_t id = 0; id < table.size(); ++id) {
    if (!phi_match_template(e.product, table[id], table)) continue;
    auto sets = apply_template(table[id], e.product);
    if (sets.empty()) continue;
    if (sets.size() > cap || e.template_ids.size() + 1 > cap) {
      e.excluded = "support cap " + std::to_string(cap) + " exceeded";
      e.template_ids.clear();
      e.candidates.clear();
      return e;
    }
    e.template_ids.push_back(id);
    e.candidates.push_back(std::move(sets));
  }
  return e;
}

}  // namespace

const CacheEntry* CacheStore::find(const std::string& record_id) const {
  for (const auto& e : entries) {
    if (e.record_id == record_id) return &e;
  }
  return nullptr;
}

std::uint64_t template_table_hash(const TemplateTable& table) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : table.templates()) {
    for (unsigned char c : format_template_line(t) + "\n") {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

CacheStore build_caches(const Dataset& data, TemplateTable table, const CacheOptions& options,
                        CacheReport* report) {
  CacheStore store;
  store.table = std::move(table);
  store.table_hash = template_table_hash(store.table);
  const std::size_t n = data.records.size();
  store.entries.resize(n);

  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, options.threads)),
                                             std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](std::size_t k) {
    try {
      for (std::size_t i = k; i < n; i += workers) {
        store.entries[i] = build_entry(data.records[i], store.table, options.cap);
      }
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < workers; ++k) pool.emplace_back(work, k);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  if (report) {
    *report = {};
    report->products = n;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& e = store.entries[i];
      if (e.excluded) {
        ++report->excluded;
        continue;
      }
      bool found = false;
      try {
        const auto key = extract_template(data.records[i], options.radius).template_key;
        const auto truth = truth_keys(data.records[i]);
        for (std::size_t k = 0; k < e.template_ids.size() && !found; ++k) {
          if (store.table[e.template_ids[k]].template_key != key) continue;
          for (const auto& set : e.candidates[k]) found = found || set.keys == truth;
        }
      } catch (const std::exception&) {
        found = false;
      }
      if (!found) {
        ++report->truth_missing;
        report->missing_ids.push_back(e.record_id);
      }
    }
  }
  return store;
}

void save_cache(std::ostream& out, const CacheStore& store) {
  out << kHeader << '\n';
  out << "H\t" << hex64(store.table_hash) << '\t' << store.table.size() << '\n';
  for (const auto& e : store.entries) {
    out << "P\t" << e.record_id << '\t' << write_molecule(e.product) << '\t'
        << (e.excluded ? "excluded:" + *e.excluded : std::string("ok")) << '\n';
    for (std::size_t k = 0; k < e.template_ids.size(); ++k) {
      const auto id = e.template_ids[k];
      out << "T\t" << id << '\t' << store.table[id].template_key << '\t' << e.candidates[k].size()
          << '\n';
      for (const auto& set : e.candidates[k]) {
        out << 'R';
        for (const auto& m : set.molecules) out << '\t' << write_molecule(m);
        out << '\n';
      }
    }
  }
}

CacheStore load_cache(std::istream& in, const TemplateTable& table) {
  CacheStore store;
  store.table = table;
  store.table_hash = template_table_hash(table);
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) -> DataError {
    return DataError("cache line " + std::to_string(lineno) + ": " + msg);
  };
  if (!std::getline(in, line) || line != kHeader) {
    throw DataError("not a cache file or unsupported cache version");
  }
  ++lineno;
  if (!std::getline(in, line)) throw DataError("cache file is truncated");
  ++lineno;
  const auto head = split(line, '\t');
  if (head.size() != 3 || head[0] != "H") throw fail("expected the table hash line");
  if (head[1] != hex64(store.table_hash) || head[2] != std::to_string(table.size())) {
    throw DataError("cache is stale: built from a different template table");
  }
  CacheEntry* entry = nullptr;
  std::size_t pending = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    try {
      if (cols[0] == "P") {
        if (pending) throw fail("missing reactant lines");
        if (cols.size() != 4) throw fail("bad product line");
        store.entries.emplace_back();
        entry = &store.entries.back();
        entry->record_id = cols[1];
        entry->product = parse_molecule(cols[2]);
        if (cols[3].rfind("excluded:", 0) == 0) {
          entry->excluded = cols[3].substr(9);
        } else if (cols[3] != "ok") {
          throw fail("bad product status");
        }
      } else if (cols[0] == "T") {
        if (!entry || pending || cols.size() != 4) throw fail("bad template line");
        const auto id = static_cast<std::size_t>(std::stoull(cols[1]));
        if (id >= table.size() || table[id].template_key != cols[2]) {
          throw fail("template " + cols[1] + " is not in the table");
        }
        if (!entry->template_ids.empty() && id <= entry->template_ids.back()) {
          throw fail("template ids out of order");
        }
        pending = static_cast<std::size_t>(std::stoull(cols[3]));
        if (pending == 0) throw fail("empty reactant support");
        entry->template_ids.push_back(id);
        entry->candidates.emplace_back();
      } else if (cols[0] == "R") {
        if (!pending || cols.size() < 2) throw fail("unexpected reactant line");
        std::vector<MolGraph> mols;
        for (std::size_t i = 1; i < cols.size(); ++i) mols.push_back(parse_molecule(cols[i]));
        entry->candidates.back().push_back(make_reactant_set(std::move(mols)));
        --pending;
      } else {
        throw fail("unknown record type '" + cols[0] + "'");
      }
    } catch (const ParseError& e) {
      throw fail(e.what());
    } catch (const std::logic_error& e) {
      throw fail(e.what());
    }
  }
  if (pending) throw DataError("cache file is truncated");
  return store;
}

std::size_t verify_cache(const CacheStore& store) {
  std::size_t failures = 0;
  for (const auto& e : store.entries) {
    for (std::size_t k = 0; k < e.template_ids.size(); ++k) {
      const auto& t = store.table[e.template_ids[k]];
      const bool applicable = phi_match_template(e.product, t, store.table);
      for (const auto& set : e.candidates[k]) {
        if (!applicable || !phi_match_reactants(e.product, t, set.molecules)) ++failures;
      }
    }
  }
  return failures;
}

ProductSupport to_support(const CacheStore& store, const CacheEntry& entry, std::size_t cap) {
  return assemble_support(entry.product, store.table, entry.template_ids, entry.candidates, cap);
}

std::vector<Example> make_examples(const Dataset& data, const CacheStore& store, int radius) {
  std::unordered_map<std::string, const CacheEntry*> by_id;
  for (const auto& e : store.entries) by_id.emplace(e.record_id, &e);
  std::vector<Example> out;
  for (const auto& r : data.records) {
    const auto it = by_id.find(r.record_id);
    if (it == by_id.end() || it->second->excluded) continue;
    const auto* entry = it->second;
    std::string key;
    try {
      key = extract_template(r, radius).template_key;
    } catch (const std::exception&) {
      key.clear();
    }
    out.push_back(make_example(r.record_id, to_support(store, *entry), truth_keys(r), key,
                               r.reaction_class));
  }
  return out;
}

std::string to_json(const CacheReport& r) {
  nlohmann::json j = {{"products", r.products},
                      {"excluded", r.excluded},
                      {"truth_missing", r.truth_missing}};
  if (!r.missing_ids.empty()) j["missing_ids"] = r.missing_ids;
  return j.dump();
}

}  // namespace retrologic
