#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "retrologic/model/gln_model.hpp"

namespace retrologic {

/// One product to predict for, with its ground truth when known.
struct Example {
  std::string record_id;
  ProductSupport support;
  std::vector<CanonicalKey> truth;  // sorted reactant keys
  std::string truth_template_key;   // empty when extraction failed
  std::optional<SupportIndex> truth_index;
  std::optional<int> reaction_class;
};

/// Builds an example: locates the ground truth (template key + reactant
/// keys) in the support.
Example make_example(std::string record_id, ProductSupport support, std::vector<CanonicalKey> truth,
                     std::string truth_template_key, std::optional<int> reaction_class);

struct Prediction {
  int rank = 0;
  ReactantSet reactants;
  std::string template_key;
  CanonicalKey center_key;
  double score = 0.0;
};

/// LogProb ranks by log p(o|O), log p(T|O) and log p(T,R|O); Energy by the
/// raw sums v1, v1 + v2 and v1 + v2 + w2.
enum class BeamScore { LogProb, Energy };

struct BeamOptions {
  std::size_t beam = 50;
  /// Keep only the best-scoring occurrence of each reactant set.
  bool dedup = true;
  BeamScore score = BeamScore::LogProb;
};

/// Three stages: the `beam` best centers; among their templates the `beam`
/// best; then every reactant set of the surviving templates. Ties go to the smaller template key,
/// then the smaller reactant keys. At most `beam` predictions.
std::vector<Prediction> beam_search(const GlnModel& model, const ProductSupport& support,
                                    const BeamOptions& options = {});

/// Multiset equality of canonical keys.
bool exact_match(const std::vector<CanonicalKey>& predicted, const std::vector<CanonicalKey>& truth);
bool exact_match(const ReactantSet& predicted, const ReactantSet& truth);

struct EvalReport {
  std::vector<int> ks;
  std::size_t count = 0;
  std::vector<double> accuracy;  // parallel to ks
  std::map<int, std::size_t> class_count;
  std::map<int, std::vector<double>> class_accuracy;
  /// Fraction of examples whose truth appears anywhere in the support.
  double coverage = 0.0;
};

inline const std::vector<int> kDefaultTopK = {1, 3, 5, 10, 20, 50};

/// Top-k exact match. With `class_given`, each support is first restricted
/// to templates of the example's class; an empty restriction is a miss.
EvalReport evaluate(const std::vector<Example>& examples, const GlnModel& model,
                    const std::vector<int>& ks = kDefaultTopK, std::size_t beam = 50,
                    bool class_given = false);

/// Accuracy@k from given prediction lists (parallel to `examples`).
EvalReport evaluate_predictions(const std::vector<Example>& examples,
                                const std::vector<std::vector<Prediction>>& predictions,
                                const std::vector<int>& ks = kDefaultTopK);

/// Expected top-1 accuracy of drawing a matched template uniformly, then one
/// of its reactant sets uniformly.
double uniform_baseline_top1(const std::vector<Example>& examples);

/// Per-atom share of v1(center, O); sums to v1 under mean pooling.
Eigen::VectorXd atom_scores(const GlnModel& model, const MolGraph& product,
                            const PatternGraph& center);

}  // namespace retrologic
