#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "retrologic/chem/mol_graph.hpp"
#include "retrologic/match/pattern.hpp"

namespace retrologic {

// Node features: element one-hot, charge one-hot over [-2, 2] (clipped),
// degree one-hot over 0..5 (clipped), aromatic bit, wildcard bit.
// Edge features: bond-order one-hot, wildcard bit.
inline constexpr int kChargeMin = -2;
inline constexpr int kChargeSlots = 5;
inline constexpr int kDegreeSlots = 6;
inline constexpr int kNodeFeatureDim =
    static_cast<int>(kNumElements) + kChargeSlots + kDegreeSlots + 2;
inline constexpr int kEdgeFeatureDim = static_cast<int>(kNumBondOrders) + 1;

/// Column-per-node / column-per-edge feature matrices plus edge endpoints.
struct GraphFeatures {
  Eigen::MatrixXd nodes;  // kNodeFeatureDim x n
  Eigen::MatrixXd edges;  // kEdgeFeatureDim x m
  std::vector<std::pair<int, int>> endpoints;

  int node_count() const { return static_cast<int>(nodes.cols()); }
  int edge_count() const { return static_cast<int>(edges.cols()); }
};

GraphFeatures featurize(const MolGraph& mol);
GraphFeatures featurize(const PatternGraph& pattern);

enum class Activation { Relu, Tanh };
enum class Pooling { Mean, Sum, Max };

std::string to_string(Activation a);
std::string to_string(Pooling p);
/// Throw std::invalid_argument on unknown names.
Activation activation_from_string(const std::string& s);
Pooling pooling_from_string(const std::string& s);

struct EmbedderConfig {
  int dim = 256;
  int layers = 3;
  Activation activation = Activation::Relu;
  Pooling pooling = Pooling::Mean;
  /// h^0 = x zero-padded to `dim` instead of sigma(theta1 x). Needs
  /// dim >= kNodeFeatureDim.
  bool raw_x0 = false;
};

/// theta1: d x node_dim, theta2: d x d, theta3: d x d, theta4: d x edge_dim.
struct EmbedderWeights {
  Eigen::MatrixXd theta1;
  Eigen::MatrixXd theta2;
  Eigen::MatrixXd theta3;
  Eigen::MatrixXd theta4;

  static EmbedderWeights zeros(const EmbedderConfig& cfg);
  /// Uniform in [-1/sqrt(d), 1/sqrt(d)].
  static EmbedderWeights random(const EmbedderConfig& cfg, std::mt19937_64& rng);
};

struct EmbeddingResult {
  Eigen::MatrixXd node_embeddings;  // d x n
  Eigen::VectorXd graph_embedding;  // d
};

/// Intermediates kept by a forward pass for the backward pass.
struct EmbeddingTape {
  Eigen::MatrixXd adjacency;             // n x n
  Eigen::MatrixXd incidence;             // m x n
  Eigen::MatrixXd edge_pre;              // d x m, theta4 * edge features
  Eigen::MatrixXd edge_sum;              // d x n, summed edge messages
  Eigen::MatrixXd h0_pre;                // d x n (projected h^0 only)
  std::vector<Eigen::MatrixXd> hidden;   // h^0 .. h^L
  std::vector<Eigen::MatrixXd> pre;      // pre-activations of rounds 1..L
  std::vector<int> argmax;               // max pooling winners per row
};

/// L synchronous rounds of
///   h_v <- sigma(theta1 x_v + theta2 sum_{u in N(v)} h_u
///                + theta3 sum_{u in N(v)} sigma(theta4 x_uv)),
/// then pooling. Throws std::invalid_argument on an empty graph.
EmbeddingResult embed(const EmbedderConfig& cfg, const EmbedderWeights& w,
                      const GraphFeatures& g, EmbeddingTape* tape = nullptr);
EmbeddingResult embed(const EmbedderConfig& cfg, const EmbedderWeights& w, const MolGraph& g);
EmbeddingResult embed(const EmbedderConfig& cfg, const EmbedderWeights& w, const PatternGraph& g);

/// Reverse pass. Adds d(loss)/d(theta) into `grad` given the gradient with
/// respect to the pooled embedding and, optionally, the node embeddings
/// (d x n). Throws ShapeError when shapes disagree with the tape.
void embed_backward(const EmbedderConfig& cfg, const EmbedderWeights& w, const GraphFeatures& g,
                    const EmbeddingTape& tape, const Eigen::VectorXd& d_graph,
                    const Eigen::MatrixXd* d_nodes, EmbedderWeights& grad);

/// Named-tensor binary container: magic "RLGN", format version, tensor
/// count, then per tensor its name, rows and cols, followed by all payloads
/// as row-major little-endian f64.
using NamedTensor = std::pair<std::string, Eigen::MatrixXd>;
void write_tensors(std::ostream& out, const std::vector<NamedTensor>& tensors);
/// Throws std::runtime_error on a bad magic, version or truncated payload.
std::vector<NamedTensor> read_tensors(std::istream& in);

}  // namespace retrologic
