#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "retrologic/chem/smiles.hpp"
#include "retrologic/error.hpp"
#include "retrologic/model/gln_model.hpp"
#include "support_fixture.hpp"

namespace retrologic {
namespace {

using testing::synthetic_support;
using testing::tiny_model_config;

Eigen::VectorXd mean_embed(const ModelConfig& cfg, const EmbedderWeights& w,
                           const std::vector<GraphFeatures>& gs) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(cfg.embed.dim);
  for (const auto& g : gs) s += embed(cfg.embed, w, g).graph_embedding;
  return s / static_cast<double>(gs.size());
}

TEST(Softmax, HandExamples) {
  const auto p = softmax({std::log(2.0), 0.0});
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
  const auto q = softmax({0.0, std::log(3.0), 0.0});
  EXPECT_NEAR(q[0], 0.2, 1e-15);
  EXPECT_NEAR(q[1], 0.6, 1e-15);
  EXPECT_NEAR(q[2], 0.2, 1e-15);
}

TEST(Softmax, StableForLargeScores) {
  const auto p = softmax({1000.0, 1000.0});
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_NEAR(log_sum_exp({1000.0, 1000.0}), 1000.0 + std::log(2.0), 1e-12);
  EXPECT_THROW(softmax({}), EmptySupportError);
  EXPECT_THROW(log_sum_exp({}), EmptySupportError);
}

TEST(Params, TensorListingAndFlatten) {
  std::mt19937_64 rng(1);
  const auto cfg = tiny_model_config(4, true);
  auto p = GlnParams::random(cfg, rng);
  const auto named = p.tensors();
  ASSERT_EQ(named.size(), 27u);
  EXPECT_EQ(named.front().first, "g1.theta1");
  EXPECT_EQ(named[23].first, "g6.theta4");
  EXPECT_EQ(named.back().first, "A.w2");
  const auto flat = p.flatten();
  EXPECT_EQ(static_cast<std::size_t>(flat.size()), p.size());
  auto q = GlnParams::zeros(cfg);
  q.assign(flat);
  EXPECT_EQ(q.flatten(), flat);
  EXPECT_NEAR(q.squared_norm(), flat.squaredNorm(), 1e-12);
  q.axpy(-1.0, p);
  EXPECT_EQ(q.squared_norm(), 0.0);
  EXPECT_EQ(tiny_model_config(4, false).bilinear, false);
  EXPECT_EQ(GlnParams::zeros(tiny_model_config(4, false)).tensors().size(), 24u);
}

TEST(Params, BilinearStartsNearIdentity) {
  const auto cfg = tiny_model_config(16, true);
  const auto m = GlnModel::initialize(cfg);
  for (const auto& a : m.params.bilinear) {
    const Eigen::MatrixXd noise = a - Eigen::MatrixXd::Identity(16, 16);
    EXPECT_LE(noise.cwiseAbs().maxCoeff(), 0.25);
    EXPECT_GT(noise.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Params, InitializeIsSeeded) {
  auto cfg = tiny_model_config();
  cfg.seed = 42;
  EXPECT_EQ(GlnModel::initialize(cfg).params.flatten(), GlnModel::initialize(cfg).params.flatten());
  auto other = cfg;
  other.seed = 43;
  EXPECT_NE(GlnModel::initialize(cfg).params.flatten(), GlnModel::initialize(other).params.flatten());
}

TEST(Scorer, EnergiesAreInnerProductsOfEmbeddings) {
  std::mt19937_64 rng(4);
  for (bool bilinear : {false, true}) {
    const auto cfg = tiny_model_config(5, bilinear);
    const auto model = GlnModel::initialize(cfg);
    const auto s = synthetic_support(rng, {{2, 1}, {3}});
    const auto scores = score_support(model, s);
    const auto& p = model.params;
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(5, 5);
    auto a = [&](int k) { return bilinear ? p.bilinear[static_cast<std::size_t>(k)] : id; };
    const auto g2 = embed(cfg.embed, p.g[1], s.product_features).graph_embedding;
    const auto g3 = embed(cfg.embed, p.g[2], s.product_features).graph_embedding;
    const auto g5 = embed(cfg.embed, p.g[4], s.product_features).graph_embedding;
    for (std::size_t c = 0; c < s.centers.size(); ++c) {
      const auto g1 = embed(cfg.embed, p.g[0], s.centers[c].center_features).graph_embedding;
      EXPECT_NEAR(scores.v1[c], g1.dot(a(0) * g2), 1e-12);
      for (std::size_t t = 0; t < s.centers[c].templates.size(); ++t) {
        const auto& te = s.centers[c].templates[t];
        EXPECT_NEAR(scores.v2[c][t], g3.dot(a(1) * mean_embed(cfg, p.g[3], te.reactant_patterns)), 1e-12);
        for (std::size_t r = 0; r < te.candidates.size(); ++r) {
          EXPECT_NEAR(scores.w2[c][t][r],
                      g5.dot(a(2) * mean_embed(cfg, p.g[5], te.candidates[r].molecules)), 1e-12);
        }
      }
    }
  }
}

TEST(Scorer, SetEnergiesIgnoreOrderAndRepetition) {
  std::mt19937_64 rng(8);
  const auto model = GlnModel::initialize(tiny_model_config());
  const auto s = synthetic_support(rng, {{1}});
  const Scorer scorer(model, s.product_features);
  std::vector<GraphFeatures> mols;
  for (int i = 0; i < 3; ++i) mols.push_back(featurize(testing::random_molecule(rng)));
  auto reversed = std::vector<GraphFeatures>(mols.rbegin(), mols.rend());
  auto doubled = mols;
  doubled.insert(doubled.end(), mols.begin(), mols.end());
  EXPECT_NEAR(scorer.w2(mols), scorer.w2(reversed), 1e-12);
  EXPECT_NEAR(scorer.w2(mols), scorer.w2(doubled), 1e-12);
  EXPECT_NEAR(scorer.v2(mols), scorer.v2(reversed), 1e-12);
  EXPECT_THROW(scorer.v2({}), std::invalid_argument);
}

TEST(Distributions, ChainRuleAndNormalization) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const auto model = GlnModel::initialize(tiny_model_config(4, trial % 2 == 1));
    const auto s = synthetic_support(rng, {{1, 3}, {2}, {1, 1, 4}});
    const auto sc = score_support(model, s);
    const auto pc = prob_center(sc);
    const auto pt = prob_template(sc);
    double total_t = 0.0;
    double total_joint = 0.0;
    EXPECT_NEAR(std::accumulate(pc.begin(), pc.end(), 0.0), 1.0, 1e-12);
    for (std::size_t c = 0; c < pc.size(); ++c) {
      const auto cond = prob_template_given_center(sc, c);
      EXPECT_NEAR(std::accumulate(cond.begin(), cond.end(), 0.0), 1.0, 1e-12);
      for (std::size_t t = 0; t < cond.size(); ++t) {
        EXPECT_NEAR(pt[c][t], pc[c] * cond[t], 1e-14);
        total_t += pt[c][t];
        const auto pr = prob_reactants(sc, c, t);
        EXPECT_NEAR(std::accumulate(pr.begin(), pr.end(), 0.0), 1.0, 1e-12);
        for (std::size_t r = 0; r < pr.size(); ++r) {
          const auto lp = joint_log_prob(sc, SupportIndex{c, t, r});
          ASSERT_FALSE(lp.miss);
          EXPECT_NEAR(std::exp(lp.value), pt[c][t] * pr[r], 1e-14);
          total_joint += std::exp(lp.value);
        }
      }
    }
    EXPECT_NEAR(total_t, 1.0, 1e-12);
    EXPECT_NEAR(total_joint, 1.0, 1e-12);
  }
}

TEST(Distributions, MissOutsideSupport) {
  std::mt19937_64 rng(2);
  const auto model = GlnModel::initialize(tiny_model_config());
  const auto s = synthetic_support(rng, {{2}});
  const auto sc = score_support(model, s);
  EXPECT_TRUE(joint_log_prob(sc, std::nullopt).miss);
  EXPECT_TRUE(joint_log_prob(s, sc, "nope", {CanonicalKey("k0")}).miss);
  EXPECT_TRUE(joint_log_prob(s, sc, "t0_0", {CanonicalKey("absent")}).miss);
  const auto& keys = s.centers[0].templates[0].candidates[1].reactants.keys;
  const auto hit = joint_log_prob(s, sc, "t0_0", keys);
  EXPECT_FALSE(hit.miss);
  EXPECT_LT(hit.value, 0.0);
}

TEST(Support, LocateFindsEveryEntry) {
  std::mt19937_64 rng(6);
  const auto s = synthetic_support(rng, {{2, 1}, {3}});
  for (std::size_t c = 0; c < s.centers.size(); ++c) {
    for (std::size_t t = 0; t < s.centers[c].templates.size(); ++t) {
      const auto& te = s.centers[c].templates[t];
      for (std::size_t r = 0; r < te.candidates.size(); ++r) {
        const auto at = locate(s, te.template_key, te.candidates[r].reactants.keys);
        ASSERT_TRUE(at);
        EXPECT_EQ(at->center, c);
        EXPECT_EQ(at->templ, t);
        EXPECT_EQ(at->candidate, r);
      }
    }
  }
}

TEST(Support, RestrictByClass) {
  std::mt19937_64 rng(7);
  testing::SyntheticSupportOptions opt;
  opt.n_classes = 2;
  const auto s = synthetic_support(rng, {{1, 1}, {1}, {2}}, opt);  // tags 1 2 | 1 | 2
  const auto one = restrict_by_class(s, 1);
  ASSERT_EQ(one.centers.size(), 2u);
  EXPECT_EQ(one.template_count(), 2u);
  for (const auto& c : one.centers) {
    for (const auto& t : c.templates) EXPECT_EQ(t.class_tag, 1);
  }
  EXPECT_EQ(one.centers[0].center_key, s.centers[0].center_key);
  EXPECT_EQ(one.centers[1].center_key, s.centers[1].center_key);
  EXPECT_THROW(restrict_by_class(s, 9), EmptySupportError);
}

TEST(Support, BuiltFromTemplatesIsGroupedAndSorted) {
  TemplateTable table;
  table.add(parse_template("[C:1](=[O:2])-[O:3]-[C:4]>>[C:1](=[O:2])-O.[O:3]-[C:4]"));
  table.add(parse_template("[C:1](=[O:2])-[O:3]-[C:4]>>[C:1](=[O:2])-Cl.[O:3]-[C:4]"));
  table.add(parse_template("[C:1]-[O:2]>>[C:1]-Br.[O:2]"));
  table.add(parse_template("[N:1]-[C:2]>>[N:1].[C:2]-Br"));
  const auto product = parse_molecule("CC(=O)OCC");
  const auto s = build_support(product, table);
  EXPECT_EQ(s.template_count(), 3u);
  ASSERT_EQ(s.centers.size(), 2u);
  EXPECT_LT(s.centers[0].center_key, s.centers[1].center_key);
  for (const auto& c : s.centers) {
    for (std::size_t t = 1; t < c.templates.size(); ++t) {
      EXPECT_LT(c.templates[t - 1].template_key, c.templates[t].template_key);
    }
    for (const auto& t : c.templates) {
      EXPECT_EQ(pattern_key(table[t.template_id].product_pattern), c.center_key);
      EXPECT_FALSE(t.candidates.empty());
    }
  }
  EXPECT_THROW(build_support(product, table, std::nullopt, 2), SupportCapError);
}

TEST(AtomScores, SumToCenterEnergy) {
  std::mt19937_64 rng(10);
  for (bool bilinear : {false, true}) {
    const auto model = GlnModel::initialize(tiny_model_config(6, bilinear));
    for (int trial = 0; trial < 10; ++trial) {
      const auto s = synthetic_support(rng, {{1}});
      const Scorer scorer(model, s.product_features);
      const auto& center = s.centers[0].center_features;
      const auto per_atom = scorer.atom_scores(center);
      EXPECT_EQ(per_atom.size(), s.product_features.node_count());
      EXPECT_NEAR(per_atom.sum(), scorer.v1(center), 1e-12);
    }
  }
  auto cfg = tiny_model_config();
  cfg.embed.pooling = Pooling::Max;
  const auto model = GlnModel::initialize(cfg);
  const auto f = featurize(parse_molecule("CCO"));
  EXPECT_THROW(Scorer(model, f).atom_scores(f), std::invalid_argument);
}

TEST(ModelFile, SaveLoadRoundtrip) {
  const auto dir = std::filesystem::temp_directory_path() / "retrologic_model_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "m.bin").string();
  auto cfg = tiny_model_config(7, true, 3);
  cfg.embed.pooling = Pooling::Sum;
  cfg.class_conditional = true;
  cfg.seed = 99;
  const auto model = GlnModel::initialize(cfg);
  model.save(path);
  EXPECT_TRUE(std::filesystem::exists(path + ".json"));
  const auto back = GlnModel::load(path);
  EXPECT_EQ(back.config.embed.dim, 7);
  EXPECT_EQ(back.config.embed.layers, 3);
  EXPECT_EQ(back.config.embed.pooling, Pooling::Sum);
  EXPECT_TRUE(back.config.bilinear);
  EXPECT_TRUE(back.config.class_conditional);
  EXPECT_EQ(back.config.seed, 99u);
  EXPECT_EQ(back.params.flatten(), model.params.flatten());

  std::ofstream(path, std::ios::binary) << "garbage";
  EXPECT_THROW(GlnModel::load(path), std::runtime_error);
  EXPECT_THROW(GlnModel::load((dir / "absent.bin").string()), std::runtime_error);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace retrologic
