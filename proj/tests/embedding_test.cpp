#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <cstring>
#include <sstream>

#include "retrologic/chem/smiles.hpp"
#include "retrologic/embed/embedding.hpp"
#include "retrologic/error.hpp"
#include "retrologic/match/pattern.hpp"
#include "test_support.hpp"

namespace retrologic {
namespace {

double sigma(Activation a, double v) { return a == Activation::Relu ? std::max(0.0, v) : std::tanh(v); }

Eigen::VectorXd sigma(Activation a, const Eigen::VectorXd& v) {
  return v.unaryExpr([a](double x) { return sigma(a, x); });
}

// Node-by-node message passing with explicit neighbor loops.
Eigen::MatrixXd reference_nodes(const EmbedderConfig& cfg, const EmbedderWeights& w,
                                const GraphFeatures& g) {
  const int n = g.node_count();
  const int d = cfg.dim;
  std::vector<std::vector<std::pair<int, int>>> nbrs(static_cast<std::size_t>(n));
  for (std::size_t e = 0; e < g.endpoints.size(); ++e) {
    const auto [a, b] = g.endpoints[e];
    nbrs[static_cast<std::size_t>(a)].push_back({b, static_cast<int>(e)});
    nbrs[static_cast<std::size_t>(b)].push_back({a, static_cast<int>(e)});
  }
  Eigen::MatrixXd h(d, n);
  for (int v = 0; v < n; ++v) {
    if (cfg.raw_x0) {
      h.col(v).setZero();
      h.col(v).head(kNodeFeatureDim) = g.nodes.col(v);
    } else {
      h.col(v) = sigma(cfg.activation, w.theta1 * g.nodes.col(v));
    }
  }
  for (int l = 0; l < cfg.layers; ++l) {
    Eigen::MatrixXd next(d, n);
    for (int v = 0; v < n; ++v) {
      Eigen::VectorXd hs = Eigen::VectorXd::Zero(d);
      Eigen::VectorXd es = Eigen::VectorXd::Zero(d);
      for (auto [u, e] : nbrs[static_cast<std::size_t>(v)]) {
        hs += h.col(u);
        es += sigma(cfg.activation, w.theta4 * g.edges.col(e));
      }
      next.col(v) = sigma(cfg.activation, w.theta1 * g.nodes.col(v) + w.theta2 * hs + w.theta3 * es);
    }
    h = next;
  }
  return h;
}

Eigen::VectorXd reference_pool(Pooling p, const Eigen::MatrixXd& h) {
  Eigen::VectorXd out(h.rows());
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    double acc = p == Pooling::Max ? -INFINITY : 0.0;
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
      acc = p == Pooling::Max ? std::max(acc, h(i, j)) : acc + h(i, j);
    }
    out(i) = p == Pooling::Mean ? acc / static_cast<double>(h.cols()) : acc;
  }
  return out;
}

EmbedderConfig small(Activation a = Activation::Tanh, Pooling p = Pooling::Mean, int layers = 2) {
  EmbedderConfig c;
  c.dim = 6;
  c.layers = layers;
  c.activation = a;
  c.pooling = p;
  return c;
}

std::vector<Eigen::MatrixXd*> parts(EmbedderWeights& w) {
  return {&w.theta1, &w.theta2, &w.theta3, &w.theta4};
}

TEST(Featurize, SlotsFollowAtomAttributes) {
  const auto m = parse_molecule("[NH3+]C(=O)[O-]");
  const auto f = featurize(m);
  ASSERT_EQ(f.nodes.rows(), kNodeFeatureDim);
  ASSERT_EQ(f.node_count(), 4);
  ASSERT_EQ(f.edge_count(), 3);
  // Every node: one element, one charge, one degree slot.
  for (int v = 0; v < 4; ++v) {
    EXPECT_DOUBLE_EQ(f.nodes.col(v).head(kNumElements).sum(), 1.0);
    EXPECT_DOUBLE_EQ(f.nodes.col(v).segment(kNumElements, kChargeSlots).sum(), 1.0);
    EXPECT_DOUBLE_EQ(f.nodes.col(v).segment(kNumElements + kChargeSlots, kDegreeSlots).sum(), 1.0);
  }
  EXPECT_DOUBLE_EQ(f.nodes(static_cast<int>(Element::N), 0), 1.0);
  EXPECT_DOUBLE_EQ(f.nodes(kNumElements + (1 - kChargeMin), 0), 1.0);
  EXPECT_DOUBLE_EQ(f.nodes(kNumElements + kChargeSlots + 3, 1), 1.0);  // carbon has degree 3
  EXPECT_DOUBLE_EQ(f.edges.col(1).sum(), 1.0);
}

TEST(Featurize, WildcardPatternNode) {
  const auto p = parse_pattern("[*]~[C]");
  const auto f = featurize(p);
  EXPECT_DOUBLE_EQ(f.nodes(kNodeFeatureDim - 1, 0), 1.0);
  EXPECT_DOUBLE_EQ(f.nodes.col(0).head(kNumElements).sum(), 0.0);
  EXPECT_DOUBLE_EQ(f.edges(kEdgeFeatureDim - 1, 0), 1.0);
}

TEST(Embed, SingleNodeClosedForm) {
  std::mt19937_64 rng(3);
  for (auto a : {Activation::Relu, Activation::Tanh}) {
    const auto cfg = small(a, Pooling::Mean, 3);
    const auto w = EmbedderWeights::random(cfg, rng);
    const auto f = featurize(parse_molecule("[OH2]"));
    // No neighbours: every round recomputes sigma(theta1 x).
    const Eigen::VectorXd expect = sigma(a, w.theta1 * f.nodes.col(0));
    const auto r = embed(cfg, w, f);
    EXPECT_TRUE(r.graph_embedding.isApprox(expect, 1e-12));
  }
}

TEST(Embed, MatchesNeighbourLoopReference) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    auto cfg = small(trial % 2 ? Activation::Relu : Activation::Tanh,
                     static_cast<Pooling>(trial % 3), 1 + trial % 3);
    cfg.raw_x0 = trial % 5 == 0;
    if (cfg.raw_x0) cfg.dim = kNodeFeatureDim + 2;
    const auto w = EmbedderWeights::random(cfg, rng);
    const auto f = featurize(testing::random_molecule(rng));
    const auto r = embed(cfg, w, f);
    const auto h = reference_nodes(cfg, w, f);
    ASSERT_TRUE(r.node_embeddings.isApprox(h, 1e-10)) << trial;
    ASSERT_TRUE(r.graph_embedding.isApprox(reference_pool(cfg.pooling, h), 1e-10)) << trial;
  }
}

TEST(Embed, PermutationInvariantGraphEmbedding) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto cfg = small(Activation::Tanh, static_cast<Pooling>(trial % 3));
    const auto w = EmbedderWeights::random(cfg, rng);
    const auto m = testing::random_molecule(rng);
    const auto p = m.permuted(testing::random_permutation(rng, m.atom_count()));
    const auto a = embed(cfg, w, m).graph_embedding;
    const auto b = embed(cfg, w, p).graph_embedding;
    ASSERT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12) << trial;
  }
}

TEST(Embed, ZeroWeightsGiveSigmaOfZero) {
  const auto f = featurize(parse_molecule("CC(=O)O"));
  auto cfg = small(Activation::Tanh);
  EXPECT_TRUE(embed(cfg, EmbedderWeights::zeros(cfg), f).graph_embedding.isZero());
  cfg.activation = Activation::Relu;
  EXPECT_TRUE(embed(cfg, EmbedderWeights::zeros(cfg), f).graph_embedding.isZero());
}

TEST(Embed, EmptyGraphRejected) {
  const auto cfg = small();
  GraphFeatures g;
  g.nodes = Eigen::MatrixXd::Zero(kNodeFeatureDim, 0);
  g.edges = Eigen::MatrixXd::Zero(kEdgeFeatureDim, 0);
  EXPECT_THROW(embed(cfg, EmbedderWeights::zeros(cfg), g), std::invalid_argument);
}

TEST(Embed, RandomInitBounds) {
  std::mt19937_64 rng(1);
  EmbedderConfig cfg;
  cfg.dim = 16;
  auto w = EmbedderWeights::random(cfg, rng);
  for (auto* m : parts(w)) {
    EXPECT_LE(m->cwiseAbs().maxCoeff(), 0.25);
    EXPECT_GT(m->cwiseAbs().maxCoeff(), 0.2);
  }
}

// Loss = c . pooled + sum(D .* nodes) checked by central differences.
void check_gradient(const EmbedderConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto w = EmbedderWeights::random(cfg, rng);
  // Push weights away from zero so relu kinks are rarely within eps.
  for (auto* m : parts(w)) *m *= 2.0;
  testing::RandomMolOptions opt;
  opt.min_atoms = 2;
  opt.max_atoms = 7;
  const auto f = featurize(testing::random_molecule(rng, opt));
  std::normal_distribution<double> nd;
  Eigen::VectorXd c(cfg.dim);
  for (auto& x : c) x = nd(rng);
  Eigen::MatrixXd dn(cfg.dim, f.node_count());
  for (Eigen::Index i = 0; i < dn.size(); ++i) dn.data()[i] = nd(rng);

  auto loss = [&](const EmbedderWeights& ww) {
    const auto r = embed(cfg, ww, f);
    return c.dot(r.graph_embedding) + (dn.array() * r.node_embeddings.array()).sum();
  };
  EmbeddingTape tape;
  embed(cfg, w, f, &tape);
  auto grad = EmbedderWeights::zeros(cfg);
  embed_backward(cfg, w, f, tape, c, &dn, grad);

  const double eps = 1e-6;
  auto gp = parts(grad);
  auto wp = parts(w);
  for (std::size_t k = 0; k < wp.size(); ++k) {
    for (Eigen::Index i = 0; i < wp[k]->size(); ++i) {
      double& x = wp[k]->data()[i];
      const double keep = x;
      x = keep + eps;
      const double up = loss(w);
      x = keep - eps;
      const double down = loss(w);
      x = keep;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = gp[k]->data()[i];
      ASSERT_NEAR(analytic, numeric, 1e-5 * std::max(1.0, std::abs(numeric)))
          << "theta" << k + 1 << "[" << i << "] " << to_string(cfg.activation) << " "
          << to_string(cfg.pooling);
    }
  }
}

TEST(EmbedBackward, FiniteDifferencesAllVariants) {
  std::uint64_t seed = 100;
  for (auto a : {Activation::Tanh, Activation::Relu}) {
    for (auto p : {Pooling::Mean, Pooling::Sum, Pooling::Max}) {
      check_gradient(small(a, p, 2), seed++);
      check_gradient(small(a, p, 1), seed++);
    }
  }
  auto raw = small(Activation::Tanh, Pooling::Mean, 2);
  raw.raw_x0 = true;
  raw.dim = kNodeFeatureDim + 1;
  check_gradient(raw, 7);
}

TEST(EmbedBackward, ZeroUpstreamLeavesGradientZero) {
  std::mt19937_64 rng(2);
  const auto cfg = small();
  const auto w = EmbedderWeights::random(cfg, rng);
  const auto f = featurize(parse_molecule("CCO"));
  EmbeddingTape tape;
  embed(cfg, w, f, &tape);
  auto grad = EmbedderWeights::zeros(cfg);
  embed_backward(cfg, w, f, tape, Eigen::VectorXd::Zero(cfg.dim), nullptr, grad);
  for (auto* m : parts(grad)) EXPECT_TRUE(m->isZero());
}

TEST(EmbedBackward, ShapeMismatchThrows) {
  std::mt19937_64 rng(2);
  const auto cfg = small();
  const auto w = EmbedderWeights::random(cfg, rng);
  const auto f = featurize(parse_molecule("CCO"));
  const auto other = featurize(parse_molecule("CC"));
  EmbeddingTape tape;
  embed(cfg, w, f, &tape);
  auto grad = EmbedderWeights::zeros(cfg);
  EXPECT_THROW(embed_backward(cfg, w, other, tape, Eigen::VectorXd::Zero(cfg.dim), nullptr, grad),
               ShapeError);
  EXPECT_THROW(embed_backward(cfg, w, f, tape, Eigen::VectorXd::Zero(cfg.dim + 1), nullptr, grad),
               ShapeError);
}

TEST(Tensors, RoundtripIsBitExact) {
  std::mt19937_64 rng(9);
  const auto cfg = small();
  const auto w = EmbedderWeights::random(cfg, rng);
  std::vector<NamedTensor> in = {{"a", w.theta1}, {"bb", w.theta2}, {"empty", Eigen::MatrixXd(0, 3)}};
  in[0].second(0, 0) = -0.0;
  in[0].second(0, 1) = 1e-310;
  std::stringstream ss;
  write_tensors(ss, in);
  const auto out = read_tensors(ss);
  ASSERT_EQ(out.size(), in.size());
  for (std::size_t k = 0; k < in.size(); ++k) {
    EXPECT_EQ(out[k].first, in[k].first);
    ASSERT_EQ(out[k].second.rows(), in[k].second.rows());
    ASSERT_EQ(out[k].second.cols(), in[k].second.cols());
    EXPECT_EQ(std::memcmp(out[k].second.data(), in[k].second.data(),
                          sizeof(double) * static_cast<std::size_t>(in[k].second.size())),
              0);
  }
  EXPECT_TRUE(std::signbit(out[0].second(0, 0)));
}

TEST(Tensors, LayoutIsRowMajorLittleEndian) {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 2.0, 3.0, 4.0;
  std::stringstream ss;
  write_tensors(ss, {{"m", m}});
  const std::string bytes = ss.str();
  // magic 4 + version 4 + count 4 + name len 4 + name 1 + rows 4 + cols 4
  ASSERT_EQ(bytes.size(), 25u + 4 * 8);
  EXPECT_EQ(bytes.substr(0, 4), "RLGN");
  double second;
  std::memcpy(&second, bytes.data() + 25 + 8, 8);
  EXPECT_EQ(second, 2.0);
}

TEST(Tensors, BadInputRejected) {
  std::stringstream bad("XXXX");
  EXPECT_THROW(read_tensors(bad), std::runtime_error);
  std::stringstream ss;
  write_tensors(ss, {{"m", Eigen::MatrixXd::Ones(3, 3)}});
  std::string s = ss.str();
  std::stringstream cut(s.substr(0, s.size() - 5));
  EXPECT_THROW(read_tensors(cut), std::runtime_error);
  s[4] = 9;
  std::stringstream ver(s);
  EXPECT_THROW(read_tensors(ver), std::runtime_error);
}

TEST(Names, ParseAndPrint) {
  for (auto a : {Activation::Relu, Activation::Tanh}) EXPECT_EQ(activation_from_string(to_string(a)), a);
  for (auto p : {Pooling::Mean, Pooling::Sum, Pooling::Max}) EXPECT_EQ(pooling_from_string(to_string(p)), p);
  EXPECT_THROW(pooling_from_string("avg"), std::invalid_argument);
}

}  // namespace
}  // namespace retrologic
