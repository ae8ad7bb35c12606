#include "retrologic/model/gln_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "retrologic/error.hpp"
#include "retrologic/match/matcher.hpp"

namespace retrologic {

namespace {

Eigen::MatrixXd identity_or(const Eigen::MatrixXd& a, int d) {
  return a.size() == 0 ? Eigen::MatrixXd::Identity(d, d) : a;
}

Eigen::VectorXd mean_embedding(const ModelConfig& cfg, const EmbedderWeights& w,
                               const std::vector<GraphFeatures>& graphs) {
  if (graphs.empty()) throw std::invalid_argument("mean over an empty set of graphs");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(cfg.embed.dim);
  for (const auto& g : graphs) sum += embed(cfg.embed, w, g).graph_embedding;
  return sum / static_cast<double>(graphs.size());
}

double bilinear_form(const Eigen::VectorXd& x, const Eigen::MatrixXd& a, const Eigen::VectorXd& y) {
  return a.size() == 0 ? x.dot(y) : x.dot(a * y);
}

}  // namespace

GlnParams GlnParams::zeros(const ModelConfig& cfg) {
  GlnParams p;
  for (auto& w : p.g) w = EmbedderWeights::zeros(cfg.embed);
  if (cfg.bilinear) {
    for (auto& a : p.bilinear) a = Eigen::MatrixXd::Zero(cfg.embed.dim, cfg.embed.dim);
  }
  return p;
}

GlnParams GlnParams::random(const ModelConfig& cfg, std::mt19937_64& rng) {
  GlnParams p;
  for (auto& w : p.g) w = EmbedderWeights::random(cfg.embed, rng);
  if (cfg.bilinear) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.embed.dim));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& a : p.bilinear) {
      a = Eigen::MatrixXd::Identity(cfg.embed.dim, cfg.embed.dim);
      for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] += u(rng);
    }
  }
  return p;
}

std::vector<std::pair<std::string, Eigen::MatrixXd*>> GlnParams::tensors() {
  std::vector<std::pair<std::string, Eigen::MatrixXd*>> out;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const std::string prefix = "g" + std::to_string(k + 1) + ".";
    out.emplace_back(prefix + "theta1", &g[k].theta1);
    out.emplace_back(prefix + "theta2", &g[k].theta2);
    out.emplace_back(prefix + "theta3", &g[k].theta3);
    out.emplace_back(prefix + "theta4", &g[k].theta4);
  }
  static const char* kBilinearNames[] = {"A.v1", "A.v2", "A.w2"};
  for (std::size_t k = 0; k < bilinear.size(); ++k) {
    if (bilinear[k].size() > 0) out.emplace_back(kBilinearNames[k], &bilinear[k]);
  }
  return out;
}

std::vector<std::pair<std::string, const Eigen::MatrixXd*>> GlnParams::tensors() const {
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> out;
  for (const auto& [name, m] : const_cast<GlnParams*>(this)->tensors()) out.emplace_back(name, m);
  return out;
}

std::size_t GlnParams::size() const {
  std::size_t n = 0;
  for (const auto& [name, m] : tensors()) n += static_cast<std::size_t>(m->size());
  return n;
}

Eigen::VectorXd GlnParams::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(size()));
  Eigen::Index at = 0;
  for (const auto& [name, m] : tensors()) {
    flat.segment(at, m->size()) = Eigen::Map<const Eigen::VectorXd>(m->data(), m->size());
    at += m->size();
  }
  return flat;
}

void GlnParams::assign(const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(size())) throw ShapeError("flat parameter size mismatch");
  Eigen::Index at = 0;
  for (auto& [name, m] : tensors()) {
    Eigen::Map<Eigen::VectorXd>(m->data(), m->size()) = flat.segment(at, m->size());
    at += m->size();
  }
}

void GlnParams::axpy(double alpha, const GlnParams& other) {
  auto mine = tensors();
  const auto theirs = other.tensors();
  if (mine.size() != theirs.size()) throw ShapeError("parameter sets differ in layout");
  for (std::size_t k = 0; k < mine.size(); ++k) {
    if (mine[k].second->rows() != theirs[k].second->rows() ||
        mine[k].second->cols() != theirs[k].second->cols()) {
      throw ShapeError("tensor " + mine[k].first + " shape mismatch");
    }
    *mine[k].second += alpha * *theirs[k].second;
  }
}

void GlnParams::scale(double alpha) {
  for (auto& [name, m] : tensors()) *m *= alpha;
}

double GlnParams::squared_norm() const {
  double s = 0.0;
  for (const auto& [name, m] : tensors()) s += m->squaredNorm();
  return s;
}

bool GlnParams::all_finite() const {
  for (const auto& [name, m] : tensors()) {
    if (!m->allFinite()) return false;
  }
  return true;
}

GlnModel GlnModel::initialize(const ModelConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  return {cfg, GlnParams::random(cfg, rng)};
}

void GlnModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  std::vector<NamedTensor> named;
  for (const auto& [name, m] : params.tensors()) named.emplace_back(name, *m);
  write_tensors(out, named);
  if (!out) throw std::runtime_error("write failed for " + path);

  nlohmann::json meta = {
      {"format", "retrologic-model"},
      {"version", 1},
      {"dim", config.embed.dim},
      {"layers", config.embed.layers},
      {"activation", to_string(config.embed.activation)},
      {"pooling", to_string(config.embed.pooling)},
      {"raw_x0", config.embed.raw_x0},
      {"bilinear", config.bilinear},
      {"class_conditional", config.class_conditional},
      {"seed", config.seed},
      {"node_feature_dim", kNodeFeatureDim},
      {"edge_feature_dim", kEdgeFeatureDim},
  };
  std::ofstream side(path + ".json");
  if (!side) throw std::runtime_error("cannot write " + path + ".json");
  side << meta.dump(2) << "\n";
}

GlnModel GlnModel::load(const std::string& path) {
  std::ifstream side(path + ".json");
  if (!side) throw std::runtime_error("cannot read " + path + ".json");
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad model sidecar: " + std::string(e.what()));
  }
  if (meta.value("format", "") != "retrologic-model") throw std::runtime_error("not a model sidecar");
  if (meta.value("node_feature_dim", 0) != kNodeFeatureDim ||
      meta.value("edge_feature_dim", 0) != kEdgeFeatureDim) {
    throw std::runtime_error("model was trained with a different feature layout");
  }
  ModelConfig cfg;
  cfg.embed.dim = meta.at("dim").get<int>();
  cfg.embed.layers = meta.at("layers").get<int>();
  cfg.embed.activation = activation_from_string(meta.at("activation").get<std::string>());
  cfg.embed.pooling = pooling_from_string(meta.at("pooling").get<std::string>());
  cfg.embed.raw_x0 = meta.value("raw_x0", false);
  cfg.bilinear = meta.value("bilinear", false);
  cfg.class_conditional = meta.value("class_conditional", false);
  cfg.seed = meta.value("seed", std::uint64_t{1});

  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  const auto named = read_tensors(in);
  GlnModel model{cfg, GlnParams::zeros(cfg)};
  auto slots = model.params.tensors();
  if (slots.size() != named.size()) throw std::runtime_error("tensor count does not match sidecar");
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (slots[k].first != named[k].first || slots[k].second->rows() != named[k].second.rows() ||
        slots[k].second->cols() != named[k].second.cols()) {
      throw std::runtime_error("tensor " + named[k].first + " does not match sidecar shapes");
    }
    *slots[k].second = named[k].second;
  }
  return model;
}

std::size_t ProductSupport::template_count() const {
  std::size_t n = 0;
  for (const auto& c : centers) n += c.templates.size();
  return n;
}

ProductSupport assemble_support(const MolGraph& product, const TemplateTable& table,
                                const std::vector<std::size_t>& template_ids,
                                std::vector<std::vector<ReactantSet>> candidates, std::size_t cap) {
  if (template_ids.size() != candidates.size()) {
    throw std::invalid_argument("template ids and candidate lists differ in length");
  }
  ProductSupport s;
  s.product = product;
  s.product_features = featurize(product);
  std::map<CanonicalKey, CenterEntry> by_center;
  std::size_t n_templates = 0;
  for (std::size_t k = 0; k < template_ids.size(); ++k) {
    if (candidates[k].empty()) continue;
    if (candidates[k].size() > cap) {
      throw SupportCapError("reactant support of " + std::to_string(candidates[k].size()) +
                            " entries exceeds cap " + std::to_string(cap));
    }
    if (++n_templates > cap) {
      throw SupportCapError("template support exceeds cap " + std::to_string(cap));
    }
    const RetroTemplate& t = table[template_ids[k]];
    const auto key = pattern_key(t.product_pattern);
    auto [it, fresh] = by_center.try_emplace(key);
    if (fresh) {
      it->second.center_key = key;
      it->second.center = t.product_pattern.without_map_labels();
      it->second.center_features = featurize(it->second.center);
    }
    TemplateEntry entry;
    entry.template_id = template_ids[k];
    entry.template_key = t.template_key;
    entry.class_tag = t.class_tag;
    for (const auto& r : t.reactant_patterns) entry.reactant_patterns.push_back(featurize(r));
    for (auto& set : candidates[k]) {
      CandidateEntry c;
      for (const auto& m : set.molecules) c.molecules.push_back(featurize(m));
      c.reactants = std::move(set);
      entry.candidates.push_back(std::move(c));
    }
    it->second.templates.push_back(std::move(entry));
  }
  for (auto& [key, center] : by_center) {
    std::sort(center.templates.begin(), center.templates.end(),
              [](const auto& a, const auto& b) { return a.template_key < b.template_key; });
    s.centers.push_back(std::move(center));
  }
  return s;
}

ProductSupport build_support(const MolGraph& product, const TemplateTable& table,
                             const std::optional<std::vector<std::size_t>>& template_ids,
                             std::size_t cap) {
  std::vector<std::size_t> ids;
  if (template_ids) {
    ids = *template_ids;
  } else {
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (phi_match_template(product, table[i], table)) ids.push_back(i);
    }
  }
  std::vector<std::vector<ReactantSet>> candidates;
  for (auto id : ids) candidates.push_back(apply_template(table[id], product));
  return assemble_support(product, table, ids, std::move(candidates), cap);
}

ProductSupport restrict_by_class(const ProductSupport& support, int c) {
  ProductSupport out;
  out.product = support.product;
  out.product_features = support.product_features;
  for (const auto& center : support.centers) {
    CenterEntry kept{center.center_key, center.center, center.center_features, {}};
    for (const auto& t : center.templates) {
      if (t.class_tag == c) kept.templates.push_back(t);
    }
    if (!kept.templates.empty()) out.centers.push_back(std::move(kept));
  }
  if (out.centers.empty()) {
    throw EmptySupportError("no matched template has class " + std::to_string(c));
  }
  return out;
}

std::optional<SupportIndex> locate(const ProductSupport& support, const std::string& template_key,
                                   const std::vector<CanonicalKey>& reactant_keys) {
  for (std::size_t c = 0; c < support.centers.size(); ++c) {
    const auto& templates = support.centers[c].templates;
    for (std::size_t t = 0; t < templates.size(); ++t) {
      if (templates[t].template_key != template_key) continue;
      for (std::size_t r = 0; r < templates[t].candidates.size(); ++r) {
        if (templates[t].candidates[r].reactants.keys == reactant_keys) return SupportIndex{c, t, r};
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

Scorer::Scorer(const GlnModel& model, const GraphFeatures& product)
    : model_(model),
      g2_(embed(model.config.embed, model.params.g[1], product)),
      g3_(embed(model.config.embed, model.params.g[2], product).graph_embedding),
      g5_(embed(model.config.embed, model.params.g[4], product).graph_embedding) {}

double Scorer::v1(const GraphFeatures& center) const {
  const auto g1 = embed(model_.config.embed, model_.params.g[0], center).graph_embedding;
  return bilinear_form(g1, model_.params.bilinear[0], g2_.graph_embedding);
}

double Scorer::v2(const std::vector<GraphFeatures>& reactant_patterns) const {
  const auto m = mean_embedding(model_.config, model_.params.g[3], reactant_patterns);
  return bilinear_form(g3_, model_.params.bilinear[1], m);
}

double Scorer::w2(const std::vector<GraphFeatures>& molecules) const {
  const auto m = mean_embedding(model_.config, model_.params.g[5], molecules);
  return bilinear_form(g5_, model_.params.bilinear[2], m);
}

Eigen::VectorXd Scorer::atom_scores(const GraphFeatures& center) const {
  if (model_.config.embed.pooling != Pooling::Mean) {
    throw std::invalid_argument("atom scores need mean pooling");
  }
  const auto g1 = embed(model_.config.embed, model_.params.g[0], center).graph_embedding;
  const Eigen::VectorXd u = identity_or(model_.params.bilinear[0], model_.config.embed.dim).transpose() * g1;
  const auto n = static_cast<double>(g2_.node_embeddings.cols());
  return (g2_.node_embeddings.transpose() * u) / n;
}

SupportScores score_support(const GlnModel& model, const ProductSupport& support) {
  const Scorer scorer(model, support.product_features);
  SupportScores s;
  for (const auto& center : support.centers) {
    s.v1.push_back(scorer.v1(center.center_features));
    auto& v2 = s.v2.emplace_back();
    auto& w2 = s.w2.emplace_back();
    for (const auto& t : center.templates) {
      v2.push_back(scorer.v2(t.reactant_patterns));
      auto& row = w2.emplace_back();
      for (const auto& c : t.candidates) row.push_back(scorer.w2(c.molecules));
    }
  }
  return s;
}

std::vector<double> softmax(const std::vector<double>& scores) {
  if (scores.empty()) throw EmptySupportError("distribution over an empty support");
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - top);
    z += p[i];
  }
  for (auto& x : p) x /= z;
  return p;
}

double log_sum_exp(const std::vector<double>& scores) {
  if (scores.empty()) throw EmptySupportError("partition over an empty support");
  const double top = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double x : scores) z += std::exp(x - top);
  return top + std::log(z);
}

std::vector<double> prob_center(const SupportScores& s) { return softmax(s.v1); }

std::vector<double> prob_template_given_center(const SupportScores& s, std::size_t center) {
  return softmax(s.v2.at(center));
}

std::vector<std::vector<double>> prob_template(const SupportScores& s) {
  const auto pc = prob_center(s);
  std::vector<std::vector<double>> out;
  for (std::size_t c = 0; c < pc.size(); ++c) {
    auto pt = prob_template_given_center(s, c);
    for (auto& x : pt) x *= pc[c];
    out.push_back(std::move(pt));
  }
  return out;
}

std::vector<double> prob_reactants(const SupportScores& s, std::size_t center, std::size_t templ) {
  return softmax(s.w2.at(center).at(templ));
}

LogProb joint_log_prob(const SupportScores& s, const std::optional<SupportIndex>& at) {
  if (!at) return {};
  const auto& v2 = s.v2.at(at->center);
  const auto& w2 = s.w2.at(at->center).at(at->templ);
  const double value = s.v1[at->center] - log_sum_exp(s.v1) + v2.at(at->templ) - log_sum_exp(v2) +
                       w2.at(at->candidate) - log_sum_exp(w2);
  return {false, value};
}

LogProb joint_log_prob(const ProductSupport& support, const SupportScores& s,
                       const std::string& template_key,
                       const std::vector<CanonicalKey>& reactant_keys) {
  return joint_log_prob(s, locate(support, template_key, reactant_keys));
}

}  // namespace retrologic
