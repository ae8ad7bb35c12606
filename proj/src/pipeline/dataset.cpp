#include "retrologic/pipeline/dataset.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "retrologic/error.hpp"

namespace retrologic {

namespace {

constexpr std::size_t kKeptErrors = 20;

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return cols;
}

std::set<int> labels_of(const MolGraph& m) {
  std::set<int> out;
  for (std::size_t i = 0; i < m.atom_count(); ++i) {
    if (const auto l = m.atom(static_cast<int>(i)).map_label) out.insert(*l);
  }
  return out;
}

bool shares_label(const MolGraph& m, const std::set<int>& labels) {
  for (std::size_t i = 0; i < m.atom_count(); ++i) {
    const auto l = m.atom(static_cast<int>(i)).map_label;
    if (l && labels.count(*l)) return true;
  }
  return false;
}

}  // namespace

Dataset load_reactions(std::istream& in, IngestReport* report, const LoadOptions& options) {
  IngestReport local;
  IngestReport& rep = report ? *report : local;
  rep = {};
  Dataset data;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  auto malformed = [&](const std::string& msg) {
    rep.malformed.push_back("line " + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    ++rep.rows;
    const auto cols = split_tabs(line);
    if (cols.size() < 2 || cols.size() > 3 || cols[0].empty()) {
      malformed("expected 2 or 3 tab-separated columns");
      continue;
    }
    std::optional<int> cls;
    if (cols.size() == 3 && !cols[2].empty()) {
      int v = 0;
      const auto* end = cols[2].data() + cols[2].size();
      const auto [ptr, ec] = std::from_chars(cols[2].data(), end, v);
      if (ec != std::errc() || ptr != end) {
        malformed("class '" + cols[2] + "' is not an integer");
        continue;
      }
      cls = v;
    }
    ParsedReaction parsed;
    try {
      parsed = parse_reaction(cols[1]);
    } catch (const ParseError& e) {
      malformed(e.what());
      continue;
    }
    const bool multi = parsed.products.size() > 1;
    if (multi) ++rep.multi_product_rows;
    for (std::size_t k = 0; k < parsed.products.size(); ++k) {
      ReactionRecord r;
      r.record_id = multi ? cols[0] + "_" + std::to_string(k + 1) : cols[0];
      r.product = parsed.products[k];
      r.reaction_class = cls;
      const auto labels = labels_of(r.product);
      for (const auto& m : parsed.reactants) {
        if (shares_label(m, labels)) {
          r.reactants.push_back(m);
        } else {
          ++rep.reagents_removed;
        }
      }
      try {
        if (r.reactants.empty()) throw DataError("no reactant shares a map label with the product");
        validate_mapping(r);
      } catch (const DataError&) {
        ++rep.broken_maps;
        continue;
      }
      if (!ids.insert(r.record_id).second) {
        malformed("duplicate record id '" + r.record_id + "'");
        continue;
      }
      if (r.reaction_class) data.class_labels = true;
      data.records.push_back(std::move(r));
    }
  }
  rep.records = data.records.size();
  if (rep.rows > 0 && static_cast<double>(rep.malformed.size()) >
                          options.max_malformed_fraction * static_cast<double>(rep.rows)) {
    std::string msg = std::to_string(rep.malformed.size()) + " of " + std::to_string(rep.rows) +
                      " rows are malformed";
    if (!rep.malformed.empty()) msg += "; first: " + rep.malformed.front();
    throw DataError(msg);
  }
  return data;
}

Dataset load_reactions_file(const std::string& path, IngestReport* report, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  return load_reactions(in, report, options);
}

std::string to_json(const IngestReport& r) {
  nlohmann::json j = {{"rows", r.rows},
                      {"records", r.records},
                      {"multi_product_rows", r.multi_product_rows},
                      {"broken_maps", r.broken_maps},
                      {"reagents_removed", r.reagents_removed},
                      {"malformed", r.malformed.size()}};
  std::vector<std::string> first(r.malformed.begin(),
                                 r.malformed.begin() + static_cast<std::ptrdiff_t>(
                                                           std::min(r.malformed.size(), kKeptErrors)));
  if (!first.empty()) j["malformed_lines"] = first;
  return j.dump();
}

std::vector<CanonicalKey> truth_keys(const ReactionRecord& r) {
  return make_reactant_set(r.reactants).keys;
}

ExtractionReport extract_templates(const Dataset& data, int radius) {
  ExtractionReport rep;
  std::vector<std::map<int, std::size_t>> class_votes;
  for (const auto& r : data.records) {
    try {
      auto t = extract_template(r, radius);
      const auto key = t.template_key;
      const auto id = rep.table.add(std::move(t));
      if (id >= class_votes.size()) class_votes.resize(id + 1);
      if (r.reaction_class) ++class_votes[id][*r.reaction_class];
      rep.record_keys.push_back(key);
    } catch (const std::exception& e) {
      ++rep.failed;
      if (rep.errors.size() < kKeptErrors) rep.errors.push_back(r.record_id + ": " + e.what());
      rep.record_keys.push_back(std::nullopt);
    }
  }
  for (std::size_t id = 0; id < class_votes.size(); ++id) {
    std::optional<int> best;
    std::size_t votes = 0;
    for (const auto& [c, n] : class_votes[id]) {
      if (n > votes) {
        best = c;
        votes = n;
      }
    }
    rep.table.set_class_tag(id, best);
  }
  return rep;
}

void write_templates(std::ostream& out, const TemplateTable& table) {
  for (const auto& t : table.templates()) out << format_template_line(t) << '\n';
}

}  // namespace retrologic
