#include "retrologic/embed/embedding.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "retrologic/error.hpp"

namespace retrologic {

namespace {

constexpr int kChargeOffset = static_cast<int>(kNumElements);
constexpr int kDegreeOffset = kChargeOffset + kChargeSlots;
constexpr int kAromaticSlot = kDegreeOffset + kDegreeSlots;
constexpr int kWildcardSlot = kAromaticSlot + 1;

void set_charge(Eigen::Ref<Eigen::VectorXd> x, int charge) {
  const int c = std::clamp(charge, kChargeMin, kChargeMin + kChargeSlots - 1);
  x(kChargeOffset + c - kChargeMin) = 1.0;
}

void set_degree(Eigen::Ref<Eigen::VectorXd> x, int degree) {
  x(kDegreeOffset + std::min(degree, kDegreeSlots - 1)) = 1.0;
}

double act(Activation a, double v) { return a == Activation::Relu ? std::max(v, 0.0) : std::tanh(v); }

Eigen::MatrixXd apply_act(Activation a, const Eigen::MatrixXd& m) {
  return m.unaryExpr([a](double v) { return act(a, v); });
}

// sigma'(pre) expressed through pre and out = sigma(pre).
Eigen::MatrixXd act_grad(Activation a, const Eigen::MatrixXd& pre, const Eigen::MatrixXd& out) {
  if (a == Activation::Relu) return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
  return (1.0 - out.array().square()).matrix();
}

}  // namespace

GraphFeatures featurize(const MolGraph& mol) {
  GraphFeatures g;
  const auto n = static_cast<Eigen::Index>(mol.atom_count());
  g.nodes = Eigen::MatrixXd::Zero(kNodeFeatureDim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Atom& a = mol.atom(static_cast<int>(i));
    auto x = g.nodes.col(i);
    x(static_cast<int>(a.element)) = 1.0;
    set_charge(x, a.formal_charge);
    set_degree(x, mol.degree(static_cast<int>(i)));
    x(kAromaticSlot) = a.aromatic ? 1.0 : 0.0;
  }
  g.edges = Eigen::MatrixXd::Zero(kEdgeFeatureDim, static_cast<Eigen::Index>(mol.bond_count()));
  for (std::size_t e = 0; e < mol.bond_count(); ++e) {
    const Bond& b = mol.bond(static_cast<int>(e));
    g.edges(static_cast<int>(b.order), static_cast<Eigen::Index>(e)) = 1.0;
    g.endpoints.push_back({b.a, b.b});
  }
  return g;
}

GraphFeatures featurize(const PatternGraph& p) {
  GraphFeatures g;
  const auto n = static_cast<Eigen::Index>(p.node_count());
  g.nodes = Eigen::MatrixXd::Zero(kNodeFeatureDim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const PatternNode& node = p.node(static_cast<int>(i));
    auto x = g.nodes.col(i);
    if (node.element) {
      x(static_cast<int>(*node.element)) = 1.0;
    } else {
      x(kWildcardSlot) = 1.0;
    }
    if (node.charge) set_charge(x, *node.charge);
    set_degree(x, p.degree(static_cast<int>(i)));
    x(kAromaticSlot) = node.aromatic.value_or(false) ? 1.0 : 0.0;
  }
  g.edges = Eigen::MatrixXd::Zero(kEdgeFeatureDim, static_cast<Eigen::Index>(p.edge_count()));
  for (std::size_t e = 0; e < p.edge_count(); ++e) {
    const PatternEdge& pe = p.edge(static_cast<int>(e));
    const int slot = pe.order ? static_cast<int>(*pe.order) : static_cast<int>(kNumBondOrders);
    g.edges(slot, static_cast<Eigen::Index>(e)) = 1.0;
    g.endpoints.push_back({pe.a, pe.b});
  }
  return g;
}

std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

std::string to_string(Pooling p) {
  switch (p) {
    case Pooling::Mean: return "mean";
    case Pooling::Sum: return "sum";
    case Pooling::Max: return "max";
  }
  return "mean";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

Pooling pooling_from_string(const std::string& s) {
  if (s == "mean") return Pooling::Mean;
  if (s == "sum") return Pooling::Sum;
  if (s == "max") return Pooling::Max;
  throw std::invalid_argument("unknown pooling '" + s + "'");
}

EmbedderWeights EmbedderWeights::zeros(const EmbedderConfig& cfg) {
  const int d = cfg.dim;
  return {Eigen::MatrixXd::Zero(d, kNodeFeatureDim), Eigen::MatrixXd::Zero(d, d),
          Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Zero(d, kEdgeFeatureDim)};
}

EmbedderWeights EmbedderWeights::random(const EmbedderConfig& cfg, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
  std::uniform_real_distribution<double> u(-bound, bound);
  auto w = zeros(cfg);
  for (auto* m : {&w.theta1, &w.theta2, &w.theta3, &w.theta4}) {
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = u(rng);
  }
  return w;
}

EmbeddingResult embed(const EmbedderConfig& cfg, const EmbedderWeights& w, const GraphFeatures& g,
                      EmbeddingTape* tape) {
  const int n = g.node_count();
  if (n == 0) throw std::invalid_argument("cannot embed an empty graph");
  const int m = g.edge_count();
  const int d = cfg.dim;
  EmbeddingTape local;
  EmbeddingTape& t = tape ? *tape : local;

  t.adjacency = Eigen::MatrixXd::Zero(n, n);
  t.incidence = Eigen::MatrixXd::Zero(m, n);
  for (int e = 0; e < m; ++e) {
    const auto [a, b] = g.endpoints[static_cast<std::size_t>(e)];
    t.adjacency(a, b) = t.adjacency(b, a) = 1.0;
    t.incidence(e, a) = t.incidence(e, b) = 1.0;
  }
  t.edge_pre = w.theta4 * g.edges;
  t.edge_sum = apply_act(cfg.activation, t.edge_pre) * t.incidence;
  const Eigen::MatrixXd node_term = w.theta1 * g.nodes;

  t.hidden.clear();
  t.pre.clear();
  if (cfg.raw_x0) {
    if (d < kNodeFeatureDim) throw std::invalid_argument("raw_x0 needs dim >= node feature dim");
    Eigen::MatrixXd h0 = Eigen::MatrixXd::Zero(d, n);
    h0.topRows(kNodeFeatureDim) = g.nodes;
    t.hidden.push_back(std::move(h0));
  } else {
    t.h0_pre = node_term;
    t.hidden.push_back(apply_act(cfg.activation, node_term));
  }
  const Eigen::MatrixXd edge_term = w.theta3 * t.edge_sum;
  for (int l = 0; l < cfg.layers; ++l) {
    Eigen::MatrixXd pre = node_term + w.theta2 * (t.hidden.back() * t.adjacency) + edge_term;
    t.hidden.push_back(apply_act(cfg.activation, pre));
    t.pre.push_back(std::move(pre));
  }

  EmbeddingResult r;
  r.node_embeddings = t.hidden.back();
  switch (cfg.pooling) {
    case Pooling::Mean: r.graph_embedding = r.node_embeddings.rowwise().mean(); break;
    case Pooling::Sum: r.graph_embedding = r.node_embeddings.rowwise().sum(); break;
    case Pooling::Max: {
      r.graph_embedding.resize(d);
      t.argmax.assign(static_cast<std::size_t>(d), 0);
      for (int i = 0; i < d; ++i) {
        Eigen::Index best = 0;
        r.graph_embedding(i) = r.node_embeddings.row(i).maxCoeff(&best);
        t.argmax[static_cast<std::size_t>(i)] = static_cast<int>(best);
      }
      break;
    }
  }
  return r;
}

EmbeddingResult embed(const EmbedderConfig& cfg, const EmbedderWeights& w, const MolGraph& g) {
  return embed(cfg, w, featurize(g));
}

EmbeddingResult embed(const EmbedderConfig& cfg, const EmbedderWeights& w, const PatternGraph& g) {
  return embed(cfg, w, featurize(g));
}

void embed_backward(const EmbedderConfig& cfg, const EmbedderWeights& w, const GraphFeatures& g,
                    const EmbeddingTape& t, const Eigen::VectorXd& d_graph,
                    const Eigen::MatrixXd* d_nodes, EmbedderWeights& grad) {
  const int n = g.node_count();
  const int d = cfg.dim;
  if (t.hidden.size() != static_cast<std::size_t>(cfg.layers) + 1 || t.hidden.back().cols() != n ||
      t.adjacency.rows() != n) {
    throw ShapeError("embedding tape does not belong to this graph");
  }
  if (d_graph.size() != d) throw ShapeError("pooled gradient has wrong length");
  if (d_nodes && (d_nodes->rows() != d || d_nodes->cols() != n)) {
    throw ShapeError("node gradient has wrong shape");
  }

  Eigen::MatrixXd dh(d, n);
  switch (cfg.pooling) {
    case Pooling::Mean: dh = d_graph.replicate(1, n) / static_cast<double>(n); break;
    case Pooling::Sum: dh = d_graph.replicate(1, n); break;
    case Pooling::Max:
      dh.setZero();
      for (int i = 0; i < d; ++i) dh(i, t.argmax[static_cast<std::size_t>(i)]) = d_graph(i);
      break;
  }
  if (d_nodes) dh += *d_nodes;

  Eigen::MatrixXd d_edge_sum = Eigen::MatrixXd::Zero(d, n);
  for (int l = cfg.layers - 1; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    const Eigen::MatrixXd dpre =
        (dh.array() * act_grad(cfg.activation, t.pre[li], t.hidden[li + 1]).array()).matrix();
    grad.theta1.noalias() += dpre * g.nodes.transpose();
    grad.theta2.noalias() += dpre * (t.hidden[li] * t.adjacency).transpose();
    d_edge_sum.noalias() += dpre;
    dh = w.theta2.transpose() * dpre * t.adjacency;
  }
  if (!cfg.raw_x0) {
    const Eigen::MatrixXd dpre0 =
        (dh.array() * act_grad(cfg.activation, t.h0_pre, t.hidden[0]).array()).matrix();
    grad.theta1.noalias() += dpre0 * g.nodes.transpose();
  }
  grad.theta3.noalias() += d_edge_sum * t.edge_sum.transpose();
  if (g.edge_count() > 0) {
    const Eigen::MatrixXd d_msg = w.theta3.transpose() * d_edge_sum * t.incidence.transpose();
    const Eigen::MatrixXd d_edge_pre =
        (d_msg.array() *
         act_grad(cfg.activation, t.edge_pre, apply_act(cfg.activation, t.edge_pre)).array())
            .matrix();
    grad.theta4.noalias() += d_edge_pre * g.edges.transpose();
  }
}

namespace {

constexpr char kMagic[4] = {'R', 'L', 'G', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated tensor file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated tensor file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_tensors(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  out.write(kMagic, 4);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
  }
  for (const auto& [name, m] : tensors) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
    }
  }
}

std::vector<NamedTensor> read_tensors(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a parameter file (bad magic)");
  }
  if (const auto v = get_u32(in); v != kFormatVersion) {
    throw std::runtime_error("unsupported parameter file version " + std::to_string(v));
  }
  const auto count = get_u32(in);
  std::vector<NamedTensor> tensors;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = get_u32(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw std::runtime_error("truncated tensor file");
    const auto rows = get_u32(in);
    const auto cols = get_u32(in);
    tensors.emplace_back(std::move(name), Eigen::MatrixXd(rows, cols));
  }
  for (auto& [name, m] : tensors) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get_f64(in);
    }
  }
  return tensors;
}

}  // namespace retrologic
