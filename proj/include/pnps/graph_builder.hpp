#pragma once

// Per-sample multi-modal graph: M patch nodes followed by the prompt nodes
// of one category, with Top-K intra-modal and inter-modal edges under
// Euclidean distance (smaller distance = more similar, ties to the lower
// node index).

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <string>
#include <vector>

namespace pnps {

enum class NodeModality { Patch, Prompt };

struct NodeRef {
  NodeModality modality;
  std::size_t position;

  friend bool operator==(const NodeRef&, const NodeRef&) = default;
};

/// Directed edge carrying a message from `src` to `dst` (global node ids).
struct Edge {
  std::size_t src;
  std::size_t dst;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct TopKConfig {
  std::size_t k_text = 2;
  std::size_t k_patch = 10;
  std::size_t k_cross = 8;

  /// Throws InvalidArgument when any k is zero.
  void validate() const;
};

struct MultiModalGraph {
  Eigen::MatrixXd patches;  // d x M
  Eigen::MatrixXd prompts;  // d x P (P may be 0)
  std::vector<Edge> intra_edges;
  std::vector<Edge> inter_edges;

  std::size_t patch_count() const { return static_cast<std::size_t>(patches.cols()); }
  std::size_t prompt_count() const { return static_cast<std::size_t>(prompts.cols()); }
  std::size_t node_count() const { return patch_count() + prompt_count(); }
  std::size_t dim() const { return static_cast<std::size_t>(patches.rows()); }

  NodeRef node(std::size_t id) const;

  /// Patches then prompts, one node per column.
  Eigen::MatrixXd node_features() const;

  /// Sources of all edges (intra and inter) ending at each node, ascending.
  std::vector<std::vector<std::size_t>> in_neighbors() const;
};

/// For each column i: the min(k, count-1) other columns nearest to it.
/// Each list is ordered by (distance, index).
std::vector<std::vector<std::size_t>> intra_neighbors(const Eigen::MatrixXd& features, std::size_t k);

/// Union of {k nearest prompts of each patch} and {k nearest patches of each
/// prompt} as (patch, prompt) pairs, sorted and deduplicated.
std::vector<std::pair<std::size_t, std::size_t>> inter_pairs(const Eigen::MatrixXd& patches,
                                                             const Eigen::MatrixXd& prompts, std::size_t k);

/// inter_pairs materialized as two directed edges per pair, with prompt ids
/// offset by the patch count.
std::vector<Edge> inter_neighbors(const Eigen::MatrixXd& patches, const Eigen::MatrixXd& prompts, std::size_t k);

/// Throws DimensionMismatch when the two sides disagree on d, InvalidArgument
/// when there are no patches.
MultiModalGraph build_graph(const Eigen::MatrixXd& patches, const Eigen::MatrixXd& prompts, const TopKConfig& config);

}  // namespace pnps
