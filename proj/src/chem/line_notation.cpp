#include "retrologic/chem/line_notation.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "retrologic/error.hpp"

namespace retrologic::notation {

namespace {

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string capitalize(std::string_view s) {
  std::string out(s);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(out[0]));
  return out;
}

class Parser {
 public:
  Parser(std::string_view text, Dialect dialect) : text_(text), dialect_(dialect) {}

  ParsedGraph run() {
    if (text_.empty()) throw ParseError("empty input", 0);
    while (pos_ < text_.size()) step();
    if (!branches_.empty()) {
      throw ParseError("unmatched parenthesis", branches_.back().open_offset);
    }
    if (!rings_.empty()) {
      const auto& first = *std::min_element(
          rings_.begin(), rings_.end(),
          [](const auto& x, const auto& y) { return x.second.offset < y.second.offset; });
      throw ParseError("unmatched ring-closure digit", first.second.offset);
    }
    if (pending_) throw ParseError("dangling bond", pending_offset_);
    if (out_.atoms.empty()) throw ParseError("no atoms", 0);
    return std::move(out_);
  }

 private:
  struct Branch {
    int atom;
    std::size_t open_offset;
  };
  struct OpenRing {
    int atom;
    std::optional<char> symbol;
    std::size_t offset;
  };

  void step() {
    const char c = text_[pos_];
    switch (c) {
      case '(': {
        if (prev_ < 0) throw ParseError("branch without preceding atom", pos_);
        if (pending_) throw ParseError("bond before branch", pending_offset_);
        branches_.push_back({prev_, pos_});
        ++pos_;
        if (pos_ < text_.size() && text_[pos_] == ')') {
          throw ParseError("empty branch", pos_);
        }
        return;
      }
      case ')': {
        if (branches_.empty()) throw ParseError("unmatched parenthesis", pos_);
        if (pending_) throw ParseError("dangling bond", pending_offset_);
        if (!atom_since_branch_open()) throw ParseError("empty branch", pos_);
        prev_ = branches_.back().atom;
        branches_.pop_back();
        ++pos_;
        return;
      }
      case '-': case '=': case '#': case ':': case '~': {
        if (c == '~' && dialect_ != Dialect::Pattern) {
          throw ParseError("wildcard bond '~' is only valid in patterns", pos_);
        }
        if (prev_ < 0) throw ParseError("bond without preceding atom", pos_);
        if (pending_) throw ParseError("consecutive bond symbols", pos_);
        pending_ = c;
        pending_offset_ = pos_;
        ++pos_;
        return;
      }
      case '/': case '\\':
        throw UnsupportedFeature("unsupported feature: stereo bond", pos_);
      case '@':
        throw UnsupportedFeature("unsupported feature: chirality", pos_);
      case '.':
        throw ParseError("'.' separates molecules only at the reaction level", pos_);
      case '%': {
        if (pos_ + 2 >= text_.size() || !is_digit(text_[pos_ + 1]) ||
            !is_digit(text_[pos_ + 2])) {
          throw ParseError("'%' must be followed by two digits", pos_);
        }
        const int number = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
        ring_closure(number, pos_);
        pos_ += 3;
        return;
      }
      case '[':
        bracket_atom();
        return;
      default:
        break;
    }
    if (is_digit(c)) {
      ring_closure(c - '0', pos_);
      ++pos_;
      return;
    }
    if (c == '*' || is_upper(c) || is_lower(c)) {
      organic_atom();
      return;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  bool atom_since_branch_open() const {
    // The branch opened at open_offset; an atom added after it has offset
    // greater than the '(' position.
    return !out_.atoms.empty() && out_.atoms.back().offset > branches_.back().open_offset;
  }

  void ring_closure(int number, std::size_t offset) {
    if (prev_ < 0) throw ParseError("ring closure without preceding atom", offset);
    auto it = rings_.find(number);
    if (it == rings_.end()) {
      rings_[number] = {prev_, pending_, offset};
      pending_.reset();
      return;
    }
    const OpenRing open = it->second;
    rings_.erase(it);
    std::optional<char> symbol = open.symbol;
    if (pending_) {
      if (symbol && *symbol != *pending_) {
        throw ParseError("conflicting ring-closure bond symbols", pending_offset_);
      }
      symbol = pending_;
    }
    pending_.reset();
    add_bond(open.atom, prev_, symbol, offset);
  }

  void add_bond(int a, int b, std::optional<char> symbol, std::size_t offset) {
    if (a == b) throw ParseError("ring closure onto the same atom", offset);
    for (const auto& bond : out_.bonds) {
      if ((bond.a == a && bond.b == b) || (bond.a == b && bond.b == a)) {
        throw ParseError("duplicate bond", offset);
      }
    }
    out_.bonds.push_back({a, b, symbol, offset});
  }

  void attach(ParsedAtom atom) {
    out_.atoms.push_back(atom);
    const int idx = static_cast<int>(out_.atoms.size()) - 1;
    if (prev_ >= 0) {
      add_bond(prev_, idx, pending_, pending_ ? pending_offset_ : atom.offset);
    } else if (pending_) {
      throw ParseError("bond without preceding atom", pending_offset_);
    }
    pending_.reset();
    prev_ = idx;
  }

  void organic_atom() {
    const std::size_t start = pos_;
    ParsedAtom atom;
    atom.offset = start;
    const char c = text_[pos_];
    if (c == '*') {
      ++pos_;
      if (dialect_ == Dialect::Molecule) {
        atom.element = Element::Other;
        atom.aromatic = false;
      }
    } else {
      std::string_view sym;
      bool aromatic = false;
      auto two = pos_ + 1 < text_.size() ? text_.substr(pos_, 2) : std::string_view{};
      if (two == "Cl" || two == "Br") {
        sym = two;
      } else if (std::string_view("BCNOPSFI").find(c) != std::string_view::npos) {
        sym = text_.substr(pos_, 1);
      } else if (std::string_view("bcnops").find(c) != std::string_view::npos) {
        sym = text_.substr(pos_, 1);
        aromatic = true;
      } else {
        throw ParseError(std::string("'") + c +
                             "' is not an organic-subset atom; use brackets",
                         pos_);
      }
      pos_ += sym.size();
      atom.element = element_from_symbol(capitalize(sym));
      atom.aromatic = aromatic;
    }
    if (dialect_ == Dialect::Molecule) {
      atom.charge = 0;
      atom.hcount = 0;
    }
    attach(atom);
  }

  int read_int(std::size_t& p) const {
    long value = 0;
    const std::size_t start = p;
    while (p < text_.size() && is_digit(text_[p])) {
      value = value * 10 + (text_[p] - '0');
      if (value > 1000000) throw ParseError("number too large", start);
      ++p;
    }
    return static_cast<int>(value);
  }

  void bracket_atom() {
    const std::size_t start = pos_;
    std::size_t p = pos_ + 1;
    auto at_end = [&] { return p >= text_.size(); };
    if (at_end()) throw ParseError("unterminated bracket atom", start);
    if (is_digit(text_[p])) {
      throw UnsupportedFeature("unsupported feature: isotope", p);
    }
    ParsedAtom atom;
    atom.bracket = true;
    atom.offset = start;
    const char c = text_[p];
    if (c == '*') {
      ++p;
      if (dialect_ == Dialect::Molecule) {
        atom.element = Element::Other;
        atom.aromatic = false;
      }
    } else if (is_upper(c)) {
      std::size_t len = 1;
      // Two-letter symbol unless the second letter starts the H count.
      if (p + 1 < text_.size() && is_lower(text_[p + 1])) len = 2;
      atom.element = element_from_symbol(text_.substr(p, len));
      atom.aromatic = false;
      p += len;
    } else if (is_lower(c)) {
      std::size_t len = 1;
      if (p + 1 < text_.size() && is_lower(text_[p + 1])) len = 2;
      atom.element = element_from_symbol(capitalize(text_.substr(p, len)));
      atom.aromatic = true;
      p += len;
    } else {
      throw ParseError("expected element symbol in bracket atom", p);
    }
    if (!at_end() && text_[p] == '@') {
      throw UnsupportedFeature("unsupported feature: chirality", p);
    }
    if (!at_end() && text_[p] == 'H') {
      ++p;
      atom.hcount = (!at_end() && is_digit(text_[p])) ? read_int(p) : 1;
    }
    if (!at_end() && (text_[p] == '+' || text_[p] == '-')) {
      const char sign = text_[p];
      const std::size_t charge_pos = p;
      ++p;
      int magnitude = 1;
      if (!at_end() && is_digit(text_[p])) {
        magnitude = read_int(p);
      } else {
        while (!at_end() && text_[p] == sign) {
          ++magnitude;
          ++p;
        }
      }
      if (magnitude > 4) throw ParseError("formal charge out of range", charge_pos);
      atom.charge = sign == '+' ? magnitude : -magnitude;
    }
    if (!at_end() && text_[p] == ':') {
      ++p;
      if (at_end() || !is_digit(text_[p])) throw ParseError("expected map label digits", p);
      const int label = read_int(p);
      if (label > 0) atom.map_label = label;
    }
    if (at_end()) throw ParseError("unterminated bracket atom", start);
    if (text_[p] == '@') throw UnsupportedFeature("unsupported feature: chirality", p);
    if (text_[p] != ']') {
      throw ParseError(std::string("unexpected character '") + text_[p] + "' in bracket atom", p);
    }
    ++p;
    if (dialect_ == Dialect::Molecule) {
      if (!atom.charge) atom.charge = 0;
      if (!atom.hcount) atom.hcount = 0;
    }
    if (atom.map_label) {
      if (!labels_.insert(*atom.map_label).second) {
        throw ParseError("duplicate map label", start);
      }
    }
    pos_ = p;
    attach(atom);
  }

  std::string_view text_;
  Dialect dialect_;
  std::size_t pos_ = 0;
  int prev_ = -1;
  std::optional<char> pending_;
  std::size_t pending_offset_ = 0;
  std::vector<Branch> branches_;
  std::map<int, OpenRing> rings_;
  std::set<int> labels_;
  ParsedGraph out_;
};

}  // namespace

ParsedGraph parse(std::string_view text, Dialect dialect) {
  return Parser(text, dialect).run();
}

std::string emit(std::size_t node_count, const std::vector<EmitEdge>& edges,
                 const std::vector<int>& rank,
                 const std::function<std::string(int)>& node_text,
                 const std::function<std::string(int)>& edge_text) {
  const auto n = node_count;
  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, edge)
  for (std::size_t e = 0; e < edges.size(); ++e) {
    adj[static_cast<std::size_t>(edges[e].a)].push_back({edges[e].b, static_cast<int>(e)});
    adj[static_cast<std::size_t>(edges[e].b)].push_back({edges[e].a, static_cast<int>(e)});
  }
  for (auto& list : adj) {
    std::sort(list.begin(), list.end(), [&](const auto& x, const auto& y) {
      return rank[static_cast<std::size_t>(x.first)] < rank[static_cast<std::size_t>(y.first)];
    });
  }

  // Pass 1: DFS tree and ring-closure edges.
  std::vector<char> visited(n, 0);
  std::vector<char> edge_used(edges.size(), 0);
  std::vector<std::vector<int>> children(n);             // child nodes in visit order
  std::vector<int> parent_edge(n, -1);
  std::vector<std::vector<int>> ring_open(n), ring_close(n);  // edge ids
  std::vector<int> roots;

  std::vector<int> by_rank(n);
  for (std::size_t i = 0; i < n; ++i) by_rank[i] = static_cast<int>(i);
  std::sort(by_rank.begin(), by_rank.end(), [&](int x, int y) {
    return rank[static_cast<std::size_t>(x)] < rank[static_cast<std::size_t>(y)];
  });

  std::function<void(int)> dfs = [&](int v) {
    visited[static_cast<std::size_t>(v)] = 1;
    for (const auto& [u, e] : adj[static_cast<std::size_t>(v)]) {
      if (edge_used[static_cast<std::size_t>(e)]) continue;
      edge_used[static_cast<std::size_t>(e)] = 1;
      if (visited[static_cast<std::size_t>(u)]) {
        ring_open[static_cast<std::size_t>(u)].push_back(e);
        ring_close[static_cast<std::size_t>(v)].push_back(e);
      } else {
        children[static_cast<std::size_t>(v)].push_back(u);
        parent_edge[static_cast<std::size_t>(u)] = e;
        dfs(u);
      }
    }
  };
  for (int v : by_rank) {
    if (!visited[static_cast<std::size_t>(v)]) {
      roots.push_back(v);
      dfs(v);
    }
  }

  // Pass 2: emit. Ring openings at a node are ordered by the rank of the
  // closing node.
  std::map<int, int> edge_digit;
  std::set<int> free_digits;
  for (int d = 1; d < 100; ++d) free_digits.insert(d);
  auto digit_text = [](int d) {
    return d < 10 ? std::to_string(d) : "%" + std::to_string(d);
  };
  auto other_end = [&](int e, int v) {
    return edges[static_cast<std::size_t>(e)].a == v ? edges[static_cast<std::size_t>(e)].b
                                                      : edges[static_cast<std::size_t>(e)].a;
  };

  std::string out;
  std::function<void(int)> write = [&](int v) {
    out += node_text(v);
    auto& opens = ring_open[static_cast<std::size_t>(v)];
    std::sort(opens.begin(), opens.end(), [&](int x, int y) {
      return rank[static_cast<std::size_t>(other_end(x, v))] <
             rank[static_cast<std::size_t>(other_end(y, v))];
    });
    // Closings first so their digits can be reused by openings here.
    auto& closes = ring_close[static_cast<std::size_t>(v)];
    std::sort(closes.begin(), closes.end(),
              [&](int x, int y) { return edge_digit.at(x) < edge_digit.at(y); });
    for (int e : closes) {
      const int d = edge_digit.at(e);
      out += digit_text(d);
      free_digits.insert(d);
    }
    for (int e : opens) {
      const int d = *free_digits.begin();
      free_digits.erase(free_digits.begin());
      edge_digit[e] = d;
      out += edge_text(e);
      out += digit_text(d);
    }
    const auto& kids = children[static_cast<std::size_t>(v)];
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const int c = kids[i];
      const bool last = i + 1 == kids.size();
      if (!last) out += '(';
      out += edge_text(parent_edge[static_cast<std::size_t>(c)]);
      write(c);
      if (!last) out += ')';
    }
  };
  for (std::size_t r = 0; r < roots.size(); ++r) {
    if (r > 0) out += '.';
    write(roots[r]);
  }
  return out;
}

}  // namespace retrologic::notation
