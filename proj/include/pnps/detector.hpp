#pragma once

// Two-stage inference: predict a category from positive-prompt matching,
// assemble that category's graph, and score the graph with the ViG head.

#include "pnps/adapter.hpp"
#include "pnps/graph_builder.hpp"
#include "pnps/metrics.hpp"
#include "pnps/vig.hpp"

#include <Eigen/Dense>

#include <optional>

namespace pnps {

struct CategoryPrediction {
  std::size_t category = 0;
  Eigen::VectorXd probabilities;  // p⁺ per category
};

/// Argmax of p⁺ over transformed prompt reps; ties go to the lowest index.
CategoryPrediction predict_category(const Eigen::VectorXd& image_rep, const PromptReps& reps, double tau);

/// Maximum p⁺ over categories.
double mcm_score(const Eigen::VectorXd& image_rep, const PromptReps& reps, double tau);

/// Transformed, unit-length patch columns.
Eigen::MatrixXd transform_patches(const AdapterState& state, const Eigen::MatrixXd& raw_patches);

/// Patches plus every prompt owned by `category`.
MultiModalGraph category_graph(const Eigen::MatrixXd& transformed_patches, const PromptReps& reps,
                               std::size_t category, const TopKConfig& topk);

enum class ScoreMode { NegativeEnergy, MaxSoftmax, Mcm };
enum class Stage1Source { PatchMean, Global };

const char* to_string(ScoreMode m) noexcept;
const char* to_string(Stage1Source s) noexcept;

struct DetectorConfig {
  double tau = 0.01;
  TopKConfig topk;
  Pooling pooling = Pooling::Mean;
  double temperature = 1.0;
  ScoreMode score_mode = ScoreMode::NegativeEnergy;
  Stage1Source stage1 = Stage1Source::PatchMean;
};

struct Detection {
  std::size_t stage1_category = 0;  // selects the prompt set
  std::size_t category = 0;         // ViG head argmax
  double score = 0.0;
  Eigen::VectorXd logits;
};

/// Stage-1 image representation: normalized mean of transformed patches,
/// or the transformed global embedding.
Eigen::VectorXd stage1_rep(const AdapterState& state, const Eigen::MatrixXd& transformed_patches,
                           const std::optional<Eigen::VectorXd>& raw_global, Stage1Source source);

/// Full pipeline for one sample. `reps` are transformed prompt reps.
/// Throws DimensionMismatch, or InvalidArgument when the global source is
/// requested without a global embedding.
Detection detect(const Eigen::MatrixXd& raw_patches, const std::optional<Eigen::VectorXd>& raw_global,
                 const PromptReps& reps, const AdapterState& state, const ViGModel& model,
                 const DetectorConfig& config);

/// Same as detect, packaged as a score record whose `predicted` is the
/// ViG head's category name.
ScoreRecord ood_score(const std::string& name, bool is_id, const Eigen::MatrixXd& raw_patches,
                      const std::optional<Eigen::VectorXd>& raw_global, const PromptReps& reps,
                      const AdapterState& state, const ViGModel& model, const DetectorConfig& config);

}  // namespace pnps
