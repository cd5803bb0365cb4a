#pragma once

// Isotropic ViG over a fixed multi-modal graph.
//
// One grapher block, for node i with in-neighbours J:
//   m_i   = max_{j in J} (h_j - h_i)           elementwise, 0 when J is empty
//   u_i   = W2 relu(W1 [h_i; m_i] + b1) + b2 + h_i
//   out_i = F2 relu(F1 u_i + c1) + c2 + u_i
// Graph readout pools the first M (patch) node outputs, then a linear head
// produces the class logits.
//
// Objective per graph:  CE(softmax(logits), y) + λ·relu(E - m_in)²,
//   E = -T·log Σ_i exp(logit_i / T)

#include "pnps/graph_builder.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace pnps {

struct GrapherLayer {
  Eigen::MatrixXd w1;  // d x 2d
  Eigen::VectorXd b1;  // d
  Eigen::MatrixXd w2;  // d x d
  Eigen::VectorXd b2;  // d
  Eigen::MatrixXd f1;  // d_h x d
  Eigen::VectorXd c1;  // d_h
  Eigen::MatrixXd f2;  // d x d_h
  Eigen::VectorXd c2;  // d
};

struct ViGModel {
  std::vector<GrapherLayer> layers;
  Eigen::MatrixXd head_w;  // |C| x d
  Eigen::VectorXd head_b;  // |C|

  std::size_t dim() const { return static_cast<std::size_t>(head_w.cols()); }
  std::size_t hidden_dim() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().f1.rows()); }
  std::size_t num_layers() const { return layers.size(); }
  std::size_t num_classes() const { return static_cast<std::size_t>(head_w.rows()); }

  static ViGModel zeros(std::size_t dim, std::size_t hidden_dim, std::size_t num_layers, std::size_t num_classes);

  /// Weights N(0, (gain²/fan_in)), biases zero; grapher weights use `gain`,
  /// the head uses gain 1.
  static ViGModel random(std::size_t dim, std::size_t hidden_dim, std::size_t num_layers, std::size_t num_classes,
                         std::uint64_t seed, double gain = 0.5);

  /// Throws DimensionMismatch / NonFiniteValue / InvalidArgument.
  void validate() const;

  /// All parameters in checkpoint order.
  std::vector<double> flatten() const;
  /// Inverse of flatten for a model of the same shape.
  void assign(const std::vector<double>& values);
  std::size_t parameter_count() const;

  /// this += scale * other (same shape).
  void add_scaled(const ViGModel& other, double scale);
};

enum class Pooling { Mean, Max };

struct EnergyConfig {
  double temperature = 1.0;
  double margin_in = 10.0;
  double lambda = 0.1;

  /// Throws InvalidArgument.
  void validate() const;
};

using Adjacency = std::vector<std::vector<std::size_t>>;

/// One grapher block over node features (one node per column).
Eigen::MatrixXd grapher_forward(const Eigen::MatrixXd& nodes, const Adjacency& in_neighbors, const GrapherLayer& layer);

/// All blocks over the graph's node features.
Eigen::MatrixXd vig_forward(const MultiModalGraph& graph, const ViGModel& model);
Eigen::MatrixXd vig_forward(const Eigen::MatrixXd& nodes, const Adjacency& in_neighbors, const ViGModel& model);

/// Pools the first `patch_count` columns.
Eigen::VectorXd pool_patches(const Eigen::MatrixXd& node_reps, std::size_t patch_count, Pooling pooling = Pooling::Mean);

Eigen::VectorXd head_logits(const Eigen::VectorXd& pooled, const ViGModel& model);

/// -T·log Σ exp(logit/T), max-shifted.
double energy(const Eigen::VectorXd& logits, double temperature);

struct ViGLoss {
  double total = 0.0;
  double ce = 0.0;
  double energy_term = 0.0;  // λ·relu(E - m_in)²
  double energy = 0.0;       // E
  Eigen::VectorXd logits;
};

/// Forward pass to logits for a graph.
Eigen::VectorXd vig_logits(const MultiModalGraph& graph, const ViGModel& model, Pooling pooling);

ViGLoss vig_loss(const MultiModalGraph& graph, std::size_t label, const ViGModel& model, const EnergyConfig& config,
                 Pooling pooling = Pooling::Mean);

/// Loss value from given logits.
ViGLoss loss_from_logits(const Eigen::VectorXd& logits, std::size_t label, const EnergyConfig& config);

struct ViGGradients {
  ViGModel d_model;
  Eigen::MatrixXd d_nodes;  // w.r.t. input node features
  ViGLoss loss;
};

/// Reverse-mode gradients of vig_loss. Max selections use the first
/// maximizing neighbour (lowest node id); relu'(0) = 0.
ViGGradients vig_gradients(const MultiModalGraph& graph, std::size_t label, const ViGModel& model,
                           const EnergyConfig& config, Pooling pooling = Pooling::Mean);

struct LabeledGraph {
  MultiModalGraph graph;
  std::size_t label;
};

struct ViGTrainConfig {
  EnergyConfig energy;
  Pooling pooling = Pooling::Mean;
  double learning_rate = 0.05;
  std::size_t epochs = 200;
};

struct ViGEpoch {
  std::size_t epoch;
  double loss;
  double ce;
  double energy_term;
  double accuracy;
};

struct ViGTrainResult {
  ViGModel model;
  std::vector<ViGEpoch> trace;  // trace[0] = initial model, trace[e] after epoch e
};

/// Full-batch gradient descent on the mean objective. Throws
/// DimensionMismatch or OutOfRange on a bad label.
ViGTrainResult train_vig(const std::vector<LabeledGraph>& data, ViGModel model, const ViGTrainConfig& config);

/// Columns: epoch,loss,ce,energy_term,accuracy.
std::string vig_trace_csv(const std::vector<ViGEpoch>& trace);

/// PVIG: "PVIG" | version u32 | d, d_h, L, |C| as u32 | parameters in
/// flatten() order as f32. Matrices are row-major; per layer the order is
/// w1 b1 w2 b2 f1 c1 f2 c2, then head_w head_b.
std::size_t write_vig(const ViGModel& model, std::ostream& out);
ViGModel read_vig(std::istream& in);
void save_vig(const ViGModel& model, const std::filesystem::path& path);
ViGModel load_vig(const std::filesystem::path& path);

}  // namespace pnps
