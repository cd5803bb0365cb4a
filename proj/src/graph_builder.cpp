#include "pnps/graph_builder.hpp"

#include "pnps/error.hpp"

#include <algorithm>
#include <set>

namespace pnps {
namespace {

// Indices of the k columns of `pool` nearest to `query`, skipping `exclude`.
std::vector<std::size_t> nearest(const Eigen::VectorXd& query, const Eigen::MatrixXd& pool, std::size_t k,
                                 std::size_t exclude) {
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(static_cast<std::size_t>(pool.cols()));
  for (Eigen::Index j = 0; j < pool.cols(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    if (ju == exclude) continue;
    cand.emplace_back((pool.col(j) - query).squaredNorm(), ju);
  }
  const std::size_t take = std::min(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
  std::vector<std::size_t> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(cand[i].second);
  return out;
}

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

}  // namespace

void TopKConfig::validate() const {
  if (k_text == 0 || k_patch == 0 || k_cross == 0) throw Error(ErrorCode::InvalidArgument, "Top-K values must be >= 1");
}

NodeRef MultiModalGraph::node(std::size_t id) const {
  if (id < patch_count()) return {NodeModality::Patch, id};
  if (id < node_count()) return {NodeModality::Prompt, id - patch_count()};
  throw Error(ErrorCode::OutOfRange, "node id " + std::to_string(id));
}

Eigen::MatrixXd MultiModalGraph::node_features() const {
  Eigen::MatrixXd out(patches.rows(), static_cast<Eigen::Index>(node_count()));
  out.leftCols(patches.cols()) = patches;
  if (prompts.cols() > 0) out.rightCols(prompts.cols()) = prompts;
  return out;
}

std::vector<std::vector<std::size_t>> MultiModalGraph::in_neighbors() const {
  std::vector<std::vector<std::size_t>> out(node_count());
  for (const auto* edges : {&intra_edges, &inter_edges}) {
    for (const auto& e : *edges) out[e.dst].push_back(e.src);
  }
  for (auto& list : out) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return out;
}

std::vector<std::vector<std::size_t>> intra_neighbors(const Eigen::MatrixXd& features, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index i = 0; i < features.cols(); ++i) {
    out.push_back(nearest(features.col(i), features, k, static_cast<std::size_t>(i)));
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> inter_pairs(const Eigen::MatrixXd& patches,
                                                             const Eigen::MatrixXd& prompts, std::size_t k) {
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (Eigen::Index p = 0; p < patches.cols(); ++p) {
    for (std::size_t t : nearest(patches.col(p), prompts, k, kNone)) pairs.emplace(static_cast<std::size_t>(p), t);
  }
  for (Eigen::Index t = 0; t < prompts.cols(); ++t) {
    for (std::size_t p : nearest(prompts.col(t), patches, k, kNone)) pairs.emplace(p, static_cast<std::size_t>(t));
  }
  return {pairs.begin(), pairs.end()};
}

std::vector<Edge> inter_neighbors(const Eigen::MatrixXd& patches, const Eigen::MatrixXd& prompts, std::size_t k) {
  const auto offset = static_cast<std::size_t>(patches.cols());
  std::vector<Edge> edges;
  for (const auto& [p, t] : inter_pairs(patches, prompts, k)) {
    edges.push_back({p, offset + t});
    edges.push_back({offset + t, p});
  }
  return edges;
}

MultiModalGraph build_graph(const Eigen::MatrixXd& patches, const Eigen::MatrixXd& prompts, const TopKConfig& config) {
  config.validate();
  if (patches.cols() == 0) throw Error(ErrorCode::InvalidArgument, "a graph needs at least one patch");
  if (prompts.cols() > 0 && prompts.rows() != patches.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "patch dimension " + std::to_string(patches.rows()) +
                                                  " vs prompt dimension " + std::to_string(prompts.rows()));
  }
  MultiModalGraph g;
  g.patches = patches;
  g.prompts = prompts.cols() > 0 ? prompts : Eigen::MatrixXd(patches.rows(), 0);

  const std::size_t offset = g.patch_count();
  const auto patch_nbrs = intra_neighbors(g.patches, config.k_patch);
  for (std::size_t i = 0; i < patch_nbrs.size(); ++i) {
    for (std::size_t j : patch_nbrs[i]) g.intra_edges.push_back({j, i});
  }
  if (g.prompt_count() > 0) {
    const auto prompt_nbrs = intra_neighbors(g.prompts, config.k_text);
    for (std::size_t i = 0; i < prompt_nbrs.size(); ++i) {
      for (std::size_t j : prompt_nbrs[i]) g.intra_edges.push_back({offset + j, offset + i});
    }
    g.inter_edges = inter_neighbors(g.patches, g.prompts, config.k_cross);
  }
  return g;
}

}  // namespace pnps
