#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "retrologic/chem/canonical.hpp"
#include "retrologic/embed/embedding.hpp"
#include "retrologic/templates/retro_template.hpp"

namespace retrologic {

inline constexpr std::size_t kDefaultSupportCap = 10000;

struct ModelConfig {
  EmbedderConfig embed;
  /// Energies use g^T A g' instead of g^T g'.
  bool bilinear = false;
  bool class_conditional = false;
  std::uint64_t seed = 1;
};

/// Six embedders: g1 (center pattern) and g2 (product) for v1, g3 (product)
/// and g4 (reactant patterns) for v2, g5 (product) and g6 (reactant
/// molecules) for w2. `bilinear[k]` is d x d when enabled, else empty.
struct GlnParams {
  std::array<EmbedderWeights, 6> g;
  std::array<Eigen::MatrixXd, 3> bilinear;

  static GlnParams zeros(const ModelConfig& cfg);
  static GlnParams random(const ModelConfig& cfg, std::mt19937_64& rng);

  /// Stable (name, tensor) listing: "g1.theta1" ... "g6.theta4", then
  /// "A.v1", "A.v2", "A.w2" when bilinear.
  std::vector<std::pair<std::string, Eigen::MatrixXd*>> tensors();
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> tensors() const;

  std::size_t size() const;
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
  /// this += alpha * other
  void axpy(double alpha, const GlnParams& other);
  void scale(double alpha);
  double squared_norm() const;
  bool all_finite() const;
};

struct GlnModel {
  ModelConfig config;
  GlnParams params;

  static GlnModel initialize(const ModelConfig& cfg);

  /// Writes `<path>` (binary tensors) and `<path>.json` (hyperparameters).
  void save(const std::string& path) const;
  /// Throws std::runtime_error on unreadable or inconsistent files.
  static GlnModel load(const std::string& path);
};

/// A candidate reactant set with features of its molecules.
struct CandidateEntry {
  ReactantSet reactants;
  std::vector<GraphFeatures> molecules;
};

struct TemplateEntry {
  std::size_t template_id = 0;  // index into the template table
  std::string template_key;
  std::optional<int> class_tag;
  std::vector<GraphFeatures> reactant_patterns;
  std::vector<CandidateEntry> candidates;
};

/// Templates sharing one reaction center (equal pattern_key of o^T).
struct CenterEntry {
  CanonicalKey center_key;
  PatternGraph center;
  GraphFeatures center_features;
  std::vector<TemplateEntry> templates;
};

/// Restricted supports of one product: matched templates grouped by
/// center, each with its generated reactant sets. Centers are sorted by key,
/// templates by template_key; candidates keep application order. Templates
/// whose application yields nothing are left out.
struct ProductSupport {
  MolGraph product;
  GraphFeatures product_features;
  std::vector<CenterEntry> centers;

  std::size_t template_count() const;
  bool empty() const { return centers.empty(); }
};

/// Position of a (template, reactant set) pair inside a support.
struct SupportIndex {
  std::size_t center = 0;
  std::size_t templ = 0;
  std::size_t candidate = 0;
};

/// Applies every listed template (or, if `template_ids` is nullopt, every
/// table entry passing phi_match_template) and assembles the support.
/// Throws SupportCapError when either support exceeds `cap`.
ProductSupport build_support(const MolGraph& product, const TemplateTable& table,
                             const std::optional<std::vector<std::size_t>>& template_ids = std::nullopt,
                             std::size_t cap = kDefaultSupportCap);

/// Support assembled from precomputed reactant sets, one list per template
/// id (parallel vectors). Empty lists are skipped.
ProductSupport assemble_support(const MolGraph& product, const TemplateTable& table,
                                const std::vector<std::size_t>& template_ids,
                                std::vector<std::vector<ReactantSet>> candidates,
                                std::size_t cap = kDefaultSupportCap);

/// Keeps templates whose class tag equals `c`; throws EmptySupportError when
/// nothing remains.
ProductSupport restrict_by_class(const ProductSupport& support, int c);

/// Locates the ground truth; nullopt when the template or the reactant set
/// is not in the support.
std::optional<SupportIndex> locate(const ProductSupport& support, const std::string& template_key,
                                   const std::vector<CanonicalKey>& reactant_keys);

/// Energies against one product; product embeddings are computed once.
class Scorer {
 public:
  Scorer(const GlnModel& model, const GraphFeatures& product);

  double v1(const GraphFeatures& center) const;
  /// Throws std::invalid_argument on an empty list.
  double v2(const std::vector<GraphFeatures>& reactant_patterns) const;
  double w2(const std::vector<GraphFeatures>& molecules) const;

  /// Per-atom contributions h_v^T A g1(center) / |V|, summing to v1 under
  /// mean pooling. Throws std::invalid_argument for other poolings.
  Eigen::VectorXd atom_scores(const GraphFeatures& center) const;

 private:
  const GlnModel& model_;
  EmbeddingResult g2_;
  Eigen::VectorXd g3_;
  Eigen::VectorXd g5_;
};

/// All energies of a support.
struct SupportScores {
  std::vector<double> v1;                            // per center
  std::vector<std::vector<double>> v2;               // per center, per template
  std::vector<std::vector<std::vector<double>>> w2;  // per center, template, candidate
};

SupportScores score_support(const GlnModel& model, const ProductSupport& support);

/// Softmax with max subtraction. Throws EmptySupportError on empty input.
std::vector<double> softmax(const std::vector<double>& scores);
double log_sum_exp(const std::vector<double>& scores);

std::vector<double> prob_center(const SupportScores& s);
std::vector<double> prob_template_given_center(const SupportScores& s, std::size_t center);
/// p(T|O) = p(o|O) p(T|o,O), per center and template.
std::vector<std::vector<double>> prob_template(const SupportScores& s);
std::vector<double> prob_reactants(const SupportScores& s, std::size_t center, std::size_t templ);

/// log p(T|O) + log p(R|T,O), or a miss when (T, R) is outside the support.
struct LogProb {
  bool miss = true;
  double value = 0.0;
};

LogProb joint_log_prob(const SupportScores& s, const std::optional<SupportIndex>& at);
LogProb joint_log_prob(const ProductSupport& support, const SupportScores& s,
                       const std::string& template_key, const std::vector<CanonicalKey>& reactant_keys);

}  // namespace retrologic
