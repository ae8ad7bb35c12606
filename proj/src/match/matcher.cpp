#include "retrologic/match/matcher.hpp"

#include <algorithm>

namespace retrologic {

namespace {

// VF2-style state: pattern nodes are visited in a fixed order (highest degree
// first, then repeatedly the highest-degree node adjacent to the visited set)
// so every node after a component's first has a matched neighbor to seed its
// candidate list.
class Matcher {
 public:
  Matcher(const PatternGraph& p, const MolGraph& m, bool first_only)
      : p_(p), m_(m), first_only_(first_only) {}

  std::vector<MatchMap> run() {
    const auto np = p_.node_count();
    if (np == 0 || np > m_.atom_count()) return {};
    plan();
    assignment_.assign(np, -1);
    used_.assign(m_.atom_count(), 0);
    extend(0);
    std::sort(results_.begin(), results_.end());
    return std::move(results_);
  }

 private:
  void plan() {
    const auto np = p_.node_count();
    std::vector<char> placed(np, 0);
    anchor_.assign(np, -1);
    for (std::size_t k = 0; k < np; ++k) {
      int best = -1;
      bool best_adjacent = false;
      for (std::size_t i = 0; i < np; ++i) {
        if (placed[i]) continue;
        const int v = static_cast<int>(i);
        const bool adjacent = std::any_of(p_.neighbors(v).begin(), p_.neighbors(v).end(),
                                          [&](const auto& nb) {
                                            return placed[static_cast<std::size_t>(nb.atom)] != 0;
                                          });
        if (best < 0 || (adjacent && !best_adjacent) ||
            (adjacent == best_adjacent && p_.degree(v) > p_.degree(best))) {
          best = v;
          best_adjacent = adjacent;
        }
      }
      placed[static_cast<std::size_t>(best)] = 1;
      order_.push_back(best);
      for (const auto& nb : p_.neighbors(best)) {
        if (placed[static_cast<std::size_t>(nb.atom)] && nb.atom != best) {
          anchor_[static_cast<std::size_t>(best)] = nb.atom;
          break;
        }
      }
    }
  }

  bool feasible(int pv, int mv) const {
    if (used_[static_cast<std::size_t>(mv)]) return false;
    if (!p_.node(pv).accepts(m_.atom(mv))) return false;
    if (m_.degree(mv) < p_.degree(pv)) return false;
    for (const auto& nb : p_.neighbors(pv)) {
      const int mapped = assignment_[static_cast<std::size_t>(nb.atom)];
      if (mapped < 0) continue;
      const int bond = m_.bond_between(mv, mapped);
      if (bond < 0 || !p_.edge(nb.bond).accepts(m_.bond(bond).order)) return false;
    }
    return true;
  }

  void try_candidate(std::size_t depth, int pv, int mv) {
    if (!feasible(pv, mv)) return;
    assignment_[static_cast<std::size_t>(pv)] = mv;
    used_[static_cast<std::size_t>(mv)] = 1;
    extend(depth + 1);
    assignment_[static_cast<std::size_t>(pv)] = -1;
    used_[static_cast<std::size_t>(mv)] = 0;
  }

  void extend(std::size_t depth) {
    if (done_) return;
    if (depth == order_.size()) {
      results_.push_back({assignment_});
      if (first_only_) done_ = true;
      return;
    }
    const int pv = order_[depth];
    const int anchor = anchor_[static_cast<std::size_t>(pv)];
    if (anchor >= 0) {
      const int ma = assignment_[static_cast<std::size_t>(anchor)];
      for (const auto& nb : m_.neighbors(ma)) {
        try_candidate(depth, pv, nb.atom);
        if (done_) return;
      }
    } else {
      for (std::size_t mv = 0; mv < m_.atom_count(); ++mv) {
        try_candidate(depth, pv, static_cast<int>(mv));
        if (done_) return;
      }
    }
  }

  const PatternGraph& p_;
  const MolGraph& m_;
  bool first_only_;
  bool done_ = false;
  std::vector<int> order_;
  std::vector<int> anchor_;
  std::vector<int> assignment_;
  std::vector<char> used_;
  std::vector<MatchMap> results_;
};

}  // namespace

std::vector<MatchMap> find_matches(const PatternGraph& p, const MolGraph& m) {
  return Matcher(p, m, false).run();
}

bool contains(const PatternGraph& p, const MolGraph& m) {
  return !Matcher(p, m, true).run().empty();
}

}  // namespace retrologic
