#include "retrologic/match/pattern.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <tuple>

#include "retrologic/chem/line_notation.hpp"
#include "retrologic/error.hpp"

namespace retrologic {

bool PatternNode::accepts(const Atom& atom) const {
  if (element && *element != atom.element) return false;
  if (aromatic && *aromatic != atom.aromatic) return false;
  if (charge && *charge != atom.formal_charge) return false;
  if (hcount && *hcount != atom.explicit_h) return false;
  return true;
}

PatternGraph::PatternGraph(std::vector<PatternNode> nodes, std::vector<PatternEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  adjacency_.assign(nodes_.size(), {});
  const auto n = static_cast<int>(nodes_.size());
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const auto& e = edges_[i];
    if (e.a < 0 || e.b < 0 || e.a >= n || e.b >= n) {
      throw std::invalid_argument("pattern edge endpoint out of range");
    }
    if (e.a == e.b) throw std::invalid_argument("pattern self-loop");
    if (edge_between(e.a, e.b) >= 0) throw std::invalid_argument("duplicate pattern edge");
    adjacency_[static_cast<std::size_t>(e.a)].push_back({e.b, static_cast<int>(i)});
    adjacency_[static_cast<std::size_t>(e.b)].push_back({e.a, static_cast<int>(i)});
  }
}

int PatternGraph::edge_between(int a, int b) const {
  for (const auto& nb : neighbors(a)) {
    if (nb.atom == b) return nb.bond;
  }
  return -1;
}

bool PatternGraph::connected() const {
  if (nodes_.empty()) return true;
  std::vector<char> seen(nodes_.size(), 0);
  std::vector<int> stack = {0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (const auto& nb : neighbors(v)) {
      if (!seen[static_cast<std::size_t>(nb.atom)]) {
        seen[static_cast<std::size_t>(nb.atom)] = 1;
        ++count;
        stack.push_back(nb.atom);
      }
    }
  }
  return count == nodes_.size();
}

int PatternGraph::node_with_label(int label) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].map_label == label) return static_cast<int>(i);
  }
  return -1;
}

PatternGraph PatternGraph::without_map_labels() const {
  auto nodes = nodes_;
  for (auto& n : nodes) n.map_label.reset();
  return PatternGraph(std::move(nodes), edges_);
}

PatternGraph parse_pattern(std::string_view text) {
  const auto parsed = notation::parse(text, notation::Dialect::Pattern);
  std::vector<PatternNode> nodes;
  nodes.reserve(parsed.atoms.size());
  for (const auto& pa : parsed.atoms) {
    PatternNode node;
    node.element = pa.element;
    node.aromatic = pa.aromatic;
    node.charge = pa.charge;
    node.hcount = pa.hcount;
    node.map_label = pa.map_label;
    nodes.push_back(node);
  }
  std::vector<PatternEdge> edges;
  for (const auto& pb : parsed.bonds) {
    PatternEdge e{pb.a, pb.b, BondOrder::Single};
    if (pb.symbol) {
      switch (*pb.symbol) {
        case '=': e.order = BondOrder::Double; break;
        case '#': e.order = BondOrder::Triple; break;
        case ':': e.order = BondOrder::Aromatic; break;
        case '~': e.order.reset(); break;
        default: e.order = BondOrder::Single; break;
      }
    } else {
      const bool a = nodes[static_cast<std::size_t>(pb.a)].aromatic.value_or(false);
      const bool b = nodes[static_cast<std::size_t>(pb.b)].aromatic.value_or(false);
      e.order = notation::implicit_order(a, b);
    }
    edges.push_back(e);
  }
  return PatternGraph(std::move(nodes), std::move(edges));
}

namespace {

std::string node_text(const PatternNode& n, std::optional<int> label) {
  std::string sym;
  if (n.wildcard()) {
    sym = "*";
  } else {
    sym = std::string(element_symbol(*n.element));
    if (n.aromatic.value_or(false)) {
      for (auto& c : sym) c = static_cast<char>(std::tolower(c));
    }
  }
  // Unbracketed form only when it reparses to exactly these constraints.
  const bool plain_ok = !n.charge && !n.hcount && !label &&
                        ((n.wildcard() && !n.aromatic) ||
                         (!n.wildcard() && n.aromatic.has_value() &&
                          std::string_view("BCNOPSFIClBrbcnops").find(sym) !=
                              std::string_view::npos &&
                          !(n.aromatic.value() && (sym == "cl" || sym == "br"))));
  if (plain_ok) return sym;
  std::string out = "[" + sym;
  if (n.hcount) {
    out += 'H';
    out += std::to_string(*n.hcount);
  }
  if (n.charge) {
    out += *n.charge < 0 ? '-' : '+';
    out += std::to_string(*n.charge < 0 ? -*n.charge : *n.charge);
  }
  if (label) {
    out += ':';
    out += std::to_string(*label);
  }
  out += ']';
  return out;
}

// Tuple order used for canonical node colors.
std::tuple<int, int, int, int> node_color_tuple(const PatternNode& n) {
  return {n.element ? static_cast<int>(*n.element) : -1,
          n.aromatic ? (*n.aromatic ? 1 : 0) : -1,
          n.charge ? *n.charge : -100,
          n.hcount ? *n.hcount : -1};
}

}  // namespace

ColoredGraph colored_graph(const PatternGraph& p) {
  std::vector<std::tuple<int, int, int, int>> tuples;
  for (const auto& n : p.nodes()) tuples.push_back(node_color_tuple(n));
  auto sorted = tuples;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  ColoredGraph g;
  for (const auto& t : tuples) {
    g.node_colors.push_back(
        static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin()));
  }
  for (const auto& e : p.edges()) {
    g.edges.push_back({e.a, e.b, e.order ? static_cast<int>(*e.order) : 4});
  }
  return g;
}

std::string write_pattern(const PatternGraph& p, const std::vector<int>& rank,
                          const std::function<std::optional<int>(int)>& label) {
  if (p.empty()) return {};
  std::vector<notation::EmitEdge> edges;
  for (const auto& e : p.edges()) edges.push_back({e.a, e.b});
  return notation::emit(
      p.node_count(), edges, rank,
      [&](int i) { return node_text(p.node(i), label(i)); },
      [&](int e) {
        const auto& o = p.edge(e).order;
        return std::string(1, o ? bond_symbol(*o) : '~');
      });
}

std::string write_pattern(const PatternGraph& p) {
  const auto rank = canonical_ranks(colored_graph(p));
  return write_pattern(p, rank, [&](int i) { return p.node(i).map_label; });
}

CanonicalKey pattern_key(const PatternGraph& p) {
  const auto rank = canonical_ranks(colored_graph(p));
  return CanonicalKey(write_pattern(p, rank, [](int) { return std::optional<int>{}; }));
}

}  // namespace retrologic
