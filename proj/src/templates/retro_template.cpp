#include "retrologic/templates/retro_template.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <tuple>

#include "retrologic/error.hpp"

namespace retrologic {

namespace {

void check_pattern(const PatternGraph& p, const char* what) {
  if (p.empty()) throw DataError(std::string("empty ") + what + " pattern");
  if (!p.connected()) throw DataError(std::string(what) + " pattern is not connected");
}

void validate_parts(const PatternGraph& product, const std::vector<PatternGraph>& reactants) {
  check_pattern(product, "product");
  if (reactants.empty()) throw DataError("template has no reactant pattern");
  std::set<int> product_labels;
  for (const auto& n : product.nodes()) {
    if (n.map_label && !product_labels.insert(*n.map_label).second) {
      throw DataError("map label " + std::to_string(*n.map_label) + " repeats in product pattern");
    }
  }
  std::set<int> reactant_labels;
  for (const auto& r : reactants) {
    check_pattern(r, "reactant");
    for (const auto& n : r.nodes()) {
      if (n.map_label) {
        if (!reactant_labels.insert(*n.map_label).second) {
          throw DataError("map label " + std::to_string(*n.map_label) +
                          " repeats on the reactant side");
        }
        if (!product_labels.contains(*n.map_label)) {
          throw DataError("reactant map label " + std::to_string(*n.map_label) +
                          " missing from product pattern");
        }
      } else if (n.wildcard()) {
        throw DataError("leaving-group node must name its element");
      }
    }
  }
  for (int label : product_labels) {
    if (!reactant_labels.contains(label)) {
      throw DataError("product map label " + std::to_string(label) +
                      " missing from reactant patterns");
    }
  }
}

using NodeTuple = std::tuple<int, int, int, int, int>;

NodeTuple node_tuple(int side, const PatternNode& n) {
  return {side, n.element ? static_cast<int>(*n.element) : -1,
          n.aromatic ? (*n.aromatic ? 1 : 0) : -1, n.charge ? *n.charge : -100,
          n.hcount ? *n.hcount : -1};
}

constexpr int kCorrespondenceColor = 5;

// Canonical text of the whole rule. The product pattern and every reactant
// pattern are written from one canonical labeling of the combined graph
// (pattern edges plus label-correspondence edges), and labels are renumbered
// in order of appearance in the product text.
std::pair<std::string, std::vector<std::string>> canonical_text(
    const PatternGraph& product, const std::vector<PatternGraph>& reactants) {
  std::vector<NodeTuple> tuples;
  std::vector<std::size_t> offset;
  for (const auto& n : product.nodes()) tuples.push_back(node_tuple(0, n));
  for (const auto& r : reactants) {
    offset.push_back(tuples.size());
    for (const auto& n : r.nodes()) tuples.push_back(node_tuple(1, n));
  }
  auto sorted = tuples;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  ColoredGraph g;
  for (const auto& t : tuples) {
    g.node_colors.push_back(
        static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin()));
  }
  auto edge_color = [](const PatternEdge& e) { return e.order ? static_cast<int>(*e.order) : 4; };
  for (const auto& e : product.edges()) g.edges.push_back({e.a, e.b, edge_color(e)});
  std::map<int, int> label_node;
  for (std::size_t i = 0; i < product.node_count(); ++i) {
    if (const auto& l = product.node(static_cast<int>(i)).map_label) label_node[*l] = static_cast<int>(i);
  }
  for (std::size_t r = 0; r < reactants.size(); ++r) {
    const int base = static_cast<int>(offset[r]);
    for (const auto& e : reactants[r].edges()) {
      g.edges.push_back({base + e.a, base + e.b, edge_color(e)});
    }
    for (std::size_t i = 0; i < reactants[r].node_count(); ++i) {
      if (const auto& l = reactants[r].node(static_cast<int>(i)).map_label) {
        g.edges.push_back({label_node.at(*l), base + static_cast<int>(i), kCorrespondenceColor});
      }
    }
  }
  const auto rank = canonical_ranks(g);

  std::map<int, int> renumber;
  std::vector<int> product_rank(rank.begin(), rank.begin() + static_cast<long>(product.node_count()));
  const auto product_text = write_pattern(product, product_rank, [&](int i) -> std::optional<int> {
    const auto& l = product.node(i).map_label;
    if (!l) return std::nullopt;
    const int fresh = static_cast<int>(renumber.size()) + 1;
    return renumber.emplace(*l, fresh).first->second;
  });
  std::vector<std::string> reactant_texts;
  for (std::size_t r = 0; r < reactants.size(); ++r) {
    const auto begin = rank.begin() + static_cast<long>(offset[r]);
    std::vector<int> sub(begin, begin + static_cast<long>(reactants[r].node_count()));
    reactant_texts.push_back(write_pattern(reactants[r], sub, [&](int i) -> std::optional<int> {
      const auto& l = reactants[r].node(i).map_label;
      if (!l) return std::nullopt;
      return renumber.at(*l);
    }));
  }
  std::sort(reactant_texts.begin(), reactant_texts.end());
  return {product_text, reactant_texts};
}

PatternGraph parse_piece(std::string_view text, std::size_t base) {
  try {
    return parse_pattern(text);
  } catch (const UnsupportedFeature& e) {
    throw UnsupportedFeature("unsupported feature in pattern", base + e.offset());
  } catch (const ParseError& e) {
    std::string msg = e.what();
    msg = msg.substr(0, msg.rfind(" at offset"));
    throw ParseError(msg, base + e.offset());
  }
}

}  // namespace

RetroTemplate make_template(PatternGraph product, std::vector<PatternGraph> reactants,
                            std::optional<int> class_tag) {
  validate_parts(product, reactants);
  auto [product_text, reactant_texts] = canonical_text(product, reactants);
  // Store the canonical form itself so that equal keys mean equal members.
  RetroTemplate t;
  t.product_pattern = parse_pattern(product_text);
  for (const auto& r : reactant_texts) t.reactant_patterns.push_back(parse_pattern(r));
  t.class_tag = class_tag;
  t.template_key = product_text + ">>";
  for (std::size_t i = 0; i < reactant_texts.size(); ++i) {
    if (i > 0) t.template_key += '.';
    t.template_key += reactant_texts[i];
  }
  return t;
}

RetroTemplate parse_template(std::string_view text) {
  const auto arrow = text.find(">>");
  if (arrow == std::string_view::npos) throw ParseError("missing '>>' in template", text.size());
  if (text.find('>', arrow + 2) != std::string_view::npos) {
    throw ParseError("unexpected '>' in template", text.find('>', arrow + 2));
  }
  const auto product_text = text.substr(0, arrow);
  if (product_text.find('.') != std::string_view::npos) {
    throw ParseError("product pattern must be a single fragment", product_text.find('.'));
  }
  auto product = parse_piece(product_text, 0);
  std::vector<PatternGraph> reactants;
  std::size_t start = arrow + 2;
  while (true) {
    const auto dot = text.find('.', start);
    const auto piece = text.substr(start, dot == std::string_view::npos ? dot : dot - start);
    reactants.push_back(parse_piece(piece, start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return make_template(std::move(product), std::move(reactants));
}

std::string format_template_line(const RetroTemplate& t) {
  return t.template_key + "\t" + (t.class_tag ? std::to_string(*t.class_tag) : std::string());
}

std::size_t TemplateTable::add(RetroTemplate t) {
  if (const auto it = index_.find(t.template_key); it != index_.end()) return it->second;
  const auto i = templates_.size();
  index_.emplace(t.template_key, i);
  templates_.push_back(std::move(t));
  return i;
}

std::optional<std::size_t> TemplateTable::find(const std::string& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TemplateLoadReport load_templates(std::istream& in) {
  TemplateLoadReport report;
  std::string line;
  std::size_t line_no = 0;
  auto reject = [&](const std::string& msg) {
    ++report.rejected;
    if (report.errors.size() < 20) {
      report.errors.push_back("line " + std::to_string(line_no) + ": " + msg);
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    const std::string_view body = std::string_view(line).substr(0, tab);
    std::optional<int> tag;
    if (tab != std::string::npos && tab + 1 < line.size()) {
      int v = 0;
      const char* first = line.data() + tab + 1;
      const char* last = line.data() + line.size();
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last || v < 1 || v > 10) {
        reject("bad class tag");
        continue;
      }
      tag = v;
    }
    try {
      auto t = parse_template(body);
      t.class_tag = tag;
      ++report.parsed;
      const auto before = report.table.size();
      report.table.add(std::move(t));
      if (report.table.size() == before) ++report.duplicates;
    } catch (const ParseError& e) {
      reject(e.what());
    } catch (const DataError& e) {
      reject(e.what());
    }
  }
  return report;
}

}  // namespace retrologic
