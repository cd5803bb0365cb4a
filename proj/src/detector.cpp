#include "pnps/detector.hpp"

#include "pnps/error.hpp"

#include <cmath>

namespace pnps {
namespace {

std::size_t first_argmax(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<std::size_t>(best);
}

}  // namespace

const char* to_string(ScoreMode m) noexcept {
  switch (m) {
    case ScoreMode::NegativeEnergy: return "neg_energy";
    case ScoreMode::MaxSoftmax: return "max_softmax";
    case ScoreMode::Mcm: return "mcm";
  }
  return "?";
}

const char* to_string(Stage1Source s) noexcept {
  switch (s) {
    case Stage1Source::PatchMean: return "patch_mean";
    case Stage1Source::Global: return "global";
  }
  return "?";
}

CategoryPrediction predict_category(const Eigen::VectorXd& image_rep, const PromptReps& reps, double tau) {
  CategoryPrediction out;
  out.probabilities = positive_probabilities(image_rep, reps, tau);
  out.category = first_argmax(out.probabilities);
  return out;
}

double mcm_score(const Eigen::VectorXd& image_rep, const PromptReps& reps, double tau) {
  return positive_probabilities(image_rep, reps, tau).maxCoeff();
}

Eigen::MatrixXd transform_patches(const AdapterState& state, const Eigen::MatrixXd& raw_patches) {
  Eigen::MatrixXd out(raw_patches.rows(), raw_patches.cols());
  for (Eigen::Index j = 0; j < raw_patches.cols(); ++j) {
    out.col(j) = transform(state, raw_patches.col(j), Side::Image);
  }
  return out;
}

MultiModalGraph category_graph(const Eigen::MatrixXd& transformed_patches, const PromptReps& reps,
                               std::size_t category, const TopKConfig& topk) {
  if (category >= reps.by_category.size()) throw Error(ErrorCode::OutOfRange, "category " + std::to_string(category));
  return build_graph(transformed_patches, reps.of(category), topk);
}

Eigen::VectorXd stage1_rep(const AdapterState& state, const Eigen::MatrixXd& transformed_patches,
                           const std::optional<Eigen::VectorXd>& raw_global, Stage1Source source) {
  if (source == Stage1Source::Global) {
    if (!raw_global) throw Error(ErrorCode::InvalidArgument, "global stage-1 source needs a global image embedding");
    return transform(state, *raw_global, Side::Image);
  }
  return l2_normalize(transformed_patches.rowwise().mean());
}

Detection detect(const Eigen::MatrixXd& raw_patches, const std::optional<Eigen::VectorXd>& raw_global,
                 const PromptReps& reps, const AdapterState& state, const ViGModel& model,
                 const DetectorConfig& config) {
  if (static_cast<std::size_t>(raw_patches.rows()) != state.dim() || model.dim() != state.dim() ||
      reps.dim() != state.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "patches, prompts, adapters and ViG must share one dimension");
  }
  if (model.num_classes() != reps.layout.num_categories()) {
    throw Error(ErrorCode::DimensionMismatch, "ViG head has " + std::to_string(model.num_classes()) +
                                                  " classes, prompt layout has " +
                                                  std::to_string(reps.layout.num_categories()));
  }
  const Eigen::MatrixXd patches = transform_patches(state, raw_patches);
  const Eigen::VectorXd image = stage1_rep(state, patches, raw_global, config.stage1);
  const CategoryPrediction pred = predict_category(image, reps, config.tau);

  Detection out;
  out.stage1_category = pred.category;
  const MultiModalGraph graph = category_graph(patches, reps, pred.category, config.topk);
  out.logits = vig_logits(graph, model, config.pooling);
  out.category = first_argmax(out.logits);
  switch (config.score_mode) {
    case ScoreMode::NegativeEnergy:
      out.score = -energy(out.logits, config.temperature);
      break;
    case ScoreMode::MaxSoftmax: {
      const Eigen::ArrayXd e = (out.logits.array() - out.logits.maxCoeff()).exp();
      out.score = 1.0 / e.sum();
      break;
    }
    case ScoreMode::Mcm:
      out.score = pred.probabilities.maxCoeff();
      break;
  }
  if (!std::isfinite(out.score)) throw Error(ErrorCode::NonFiniteValue, "detection score");
  return out;
}

ScoreRecord ood_score(const std::string& name, bool is_id, const Eigen::MatrixXd& raw_patches,
                      const std::optional<Eigen::VectorXd>& raw_global, const PromptReps& reps,
                      const AdapterState& state, const ViGModel& model, const DetectorConfig& config) {
  const Detection d = detect(raw_patches, raw_global, reps, state, model, config);
  return {name, reps.layout.category(d.category), d.score, is_id};
}

}  // namespace pnps
