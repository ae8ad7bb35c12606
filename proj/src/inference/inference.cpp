#include "retrologic/inference/inference.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>
#include <tuple>

#include "retrologic/error.hpp"

namespace retrologic {

Example make_example(std::string record_id, ProductSupport support, std::vector<CanonicalKey> truth,
                     std::string truth_template_key, std::optional<int> reaction_class) {
  Example e;
  e.record_id = std::move(record_id);
  e.truth = std::move(truth);
  std::sort(e.truth.begin(), e.truth.end());
  e.truth_template_key = std::move(truth_template_key);
  e.truth_index = locate(support, e.truth_template_key, e.truth);
  e.support = std::move(support);
  e.reaction_class = reaction_class;
  return e;
}

namespace {

// Indices of the `k` largest scores; ties keep the earlier index.
std::vector<std::size_t> top_k(const std::vector<double>& scores, std::size_t k,
                               const std::function<bool(std::size_t, std::size_t)>& tie_less) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return tie_less(a, b);
  });
  if (idx.size() > k) idx.resize(k);
  return idx;
}

}  // namespace

std::vector<Prediction> beam_search(const GlnModel& model, const ProductSupport& support,
                                    const BeamOptions& options) {
  if (options.beam == 0) throw std::invalid_argument("beam must be positive");
  if (support.empty()) return {};
  const Scorer scorer(model, support.product_features);

  // Stage 1: centers by v1. Centers are stored in key order.
  const bool normalized = options.score == BeamScore::LogProb;
  std::vector<double> v1;
  for (const auto& c : support.centers) v1.push_back(scorer.v1(c.center_features));
  if (normalized) {
    const double z = log_sum_exp(v1);
    for (auto& v : v1) v -= z;
  }
  const auto centers = top_k(v1, options.beam, [](std::size_t a, std::size_t b) { return a < b; });

  // Stage 2: templates of those centers by v1 + v2.
  struct Pair {
    std::size_t center;
    std::size_t templ;
  };
  std::vector<Pair> pairs;
  std::vector<double> w1;
  for (auto c : centers) {
    const auto& templates = support.centers[c].templates;
    std::vector<double> v2;
    for (const auto& t : templates) v2.push_back(scorer.v2(t.reactant_patterns));
    const double z = normalized ? log_sum_exp(v2) : 0.0;
    for (std::size_t t = 0; t < templates.size(); ++t) {
      pairs.push_back({c, t});
      w1.push_back(v1[c] + v2[t] - z);
    }
  }
  auto key_of = [&](const Pair& p) -> const std::string& {
    return support.centers[p.center].templates[p.templ].template_key;
  };
  const auto kept = top_k(w1, options.beam, [&](std::size_t a, std::size_t b) {
    return key_of(pairs[a]) < key_of(pairs[b]);
  });

  // Stage 3: every reactant set of the kept templates.
  std::vector<Prediction> all;
  for (auto k : kept) {
    const auto& entry = support.centers[pairs[k].center].templates[pairs[k].templ];
    std::vector<double> w2;
    for (const auto& cand : entry.candidates) w2.push_back(scorer.w2(cand.molecules));
    const double z = normalized ? log_sum_exp(w2) : 0.0;
    for (std::size_t r = 0; r < entry.candidates.size(); ++r) {
      Prediction p;
      p.reactants = entry.candidates[r].reactants;
      p.template_key = entry.template_key;
      p.center_key = support.centers[pairs[k].center].center_key;
      p.score = w1[k] + w2[r] - z;
      all.push_back(std::move(p));
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const Prediction& a, const Prediction& b) {
    return std::tie(b.score, a.template_key, a.reactants.keys) <
           std::tie(a.score, b.template_key, b.reactants.keys);
  });
  std::vector<Prediction> out;
  std::set<std::vector<CanonicalKey>> seen;
  for (auto& p : all) {
    if (out.size() == options.beam) break;
    if (options.dedup && !seen.insert(p.reactants.keys).second) continue;
    p.rank = static_cast<int>(out.size()) + 1;
    out.push_back(std::move(p));
  }
  return out;
}

bool exact_match(const std::vector<CanonicalKey>& predicted, const std::vector<CanonicalKey>& truth) {
  auto a = predicted;
  auto b = truth;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

bool exact_match(const ReactantSet& predicted, const ReactantSet& truth) {
  return exact_match(predicted.keys, truth.keys);
}

EvalReport evaluate_predictions(const std::vector<Example>& examples,
                                const std::vector<std::vector<Prediction>>& predictions,
                                const std::vector<int>& ks) {
  if (examples.size() != predictions.size()) {
    throw std::invalid_argument("one prediction list per example expected");
  }
  EvalReport r;
  r.ks = ks;
  r.count = examples.size();
  r.accuracy.assign(ks.size(), 0.0);
  std::map<int, std::vector<double>> class_hits;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    if (ex.truth_index) ++covered;
    // Rank of the first exact match; 0 when absent.
    int hit = 0;
    for (const auto& p : predictions[i]) {
      if (exact_match(p.reactants.keys, ex.truth)) {
        hit = p.rank;
        break;
      }
    }
    if (ex.reaction_class) {
      ++r.class_count[*ex.reaction_class];
      class_hits[*ex.reaction_class].resize(ks.size(), 0.0);
    }
    for (std::size_t k = 0; k < ks.size(); ++k) {
      if (hit > 0 && hit <= ks[k]) {
        r.accuracy[k] += 1.0;
        if (ex.reaction_class) class_hits[*ex.reaction_class][k] += 1.0;
      }
    }
  }
  if (r.count > 0) {
    for (auto& a : r.accuracy) a /= static_cast<double>(r.count);
    r.coverage = static_cast<double>(covered) / static_cast<double>(r.count);
  }
  for (auto& [c, hits] : class_hits) {
    for (auto& h : hits) h /= static_cast<double>(r.class_count[c]);
    r.class_accuracy[c] = hits;
  }
  return r;
}

EvalReport evaluate(const std::vector<Example>& examples, const GlnModel& model,
                    const std::vector<int>& ks, std::size_t beam, bool class_given) {
  std::vector<std::vector<Prediction>> predictions;
  predictions.reserve(examples.size());
  for (const auto& ex : examples) {
    if (class_given && ex.reaction_class) {
      try {
        predictions.push_back(
            beam_search(model, restrict_by_class(ex.support, *ex.reaction_class), {beam}));
      } catch (const EmptySupportError&) {
        predictions.emplace_back();
      }
    } else {
      predictions.push_back(beam_search(model, ex.support, {beam}));
    }
  }
  return evaluate_predictions(examples, predictions, ks);
}

double uniform_baseline_top1(const std::vector<Example>& examples) {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : examples) {
    const auto n = ex.support.template_count();
    if (n == 0) continue;
    for (const auto& c : ex.support.centers) {
      for (const auto& t : c.templates) {
        for (const auto& cand : t.candidates) {
          if (cand.reactants.keys == ex.truth) {
            total += 1.0 / static_cast<double>(n) / static_cast<double>(t.candidates.size());
          }
        }
      }
    }
  }
  return total / static_cast<double>(examples.size());
}

Eigen::VectorXd atom_scores(const GlnModel& model, const MolGraph& product,
                            const PatternGraph& center) {
  const Scorer scorer(model, featurize(product));
  return scorer.atom_scores(featurize(center));
}

}  // namespace retrologic
