#pragma once

// Learnable text/image adapters and the five alignment losses.
//
// Every embedding passes through its adapter and is re-normalized before
// any inner product:  ĥ = normalize(W · h).
//
//   pir  mean over images of  -log p⁺_y,
//        p⁺_y = Σ_n exp(<ĥI, ĥ(t^{y+}_n)>/τ) / Σ_c Σ_n exp(<ĥI, ĥ(t^{c+}_n)>/τ)
//   ppd  Σ_c Σ_{i<j} |<ĥ(t^{c+}_i), ĥ(t^{c+}_j)>|
//   nir  mean over images of  -log(p⁻_y) / ((s_y - 1)·N),  p⁻_y = Σ_{c≠y} Σ_n s⁻_y(c, n),
//        s⁻_y(c, n) = σ(<ĥI, ĥ(t^{y-c}_n)> - <ĥI, ĥ(t^{c-y}_n)>)   (no temperature)
//        images whose super-class is a singleton contribute 0
//   nnd  Σ_c Σ_{d sibling} Σ_{i<j} |<ĥ(t^{c-d}_i), ĥ(t^{c-d}_j)>|
//   npd  Σ_c Σ_{d sibling} Σ_n |<ĥ(t^{c+}_n), ĥ(t^{d-c}_n)>|
//
//   total = pir + λ⁺·ppd + nir + λ⁻·nnd + λ_npd·npd

#include "pnps/embedding_store.hpp"
#include "pnps/prompt_factory.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace pnps {

struct AdapterState {
  Eigen::MatrixXd w_text;
  Eigen::MatrixXd w_image;

  std::size_t dim() const { return static_cast<std::size_t>(w_text.rows()); }

  static AdapterState identity(std::size_t dim);
  /// Identity plus N(0, noise_scale²) entries.
  static AdapterState perturbed_identity(std::size_t dim, double noise_scale, std::uint64_t seed);

  /// Throws DimensionMismatch or NonFiniteValue.
  void validate() const;
};

enum class Side { Text, Image };

/// normalize(W · raw). Throws ZeroVector or DimensionMismatch.
Eigen::VectorXd transform(const AdapterState& state, const Eigen::VectorXd& raw, Side side);

/// Prompt vectors for every category, column (flat_index - 1). Used both
/// for raw encoder outputs and for transformed unit representations.
struct PromptReps {
  PromptLayout layout;
  std::vector<Eigen::MatrixXd> by_category;  // d x s·N each

  std::size_t dim() const;
  const Eigen::MatrixXd& of(std::size_t c) const { return by_category.at(c); }
  auto positive(std::size_t c, std::size_t n) const { return by_category.at(c).col(static_cast<Eigen::Index>(n - 1)); }
  auto negative(std::size_t c, std::size_t source, std::size_t n) const {
    return by_category.at(c).col(
        static_cast<Eigen::Index>(layout.flat_index(c, PromptKind::Negative, source, n) - 1));
  }
};

/// Collects "{category}#{flat_index}" TextPrompt records. Throws
/// MissingCategory when a position is absent, InvalidRecord on a wrong
/// modality.
PromptReps prompt_reps_from_table(const EmbeddingTable& table, const PromptLayout& layout);

PromptReps transform_prompts(const AdapterState& state, const PromptReps& raw);

// ---------------------------------------------------------------------------
// Probabilities and losses over transformed unit representations.

double match_prob_positive(const Eigen::VectorXd& image_rep, const PromptReps& reps, std::size_t target, double tau);

/// p⁺ for every category at once.
Eigen::VectorXd positive_probabilities(const Eigen::VectorXd& image_rep, const PromptReps& reps, double tau);

double s_minus(const Eigen::VectorXd& image_rep, const PromptReps& reps, std::size_t image_category,
               std::size_t sibling, std::size_t position);

/// Throws EmptyNegativeSet for a singleton super-class.
double p_minus(const Eigen::VectorXd& image_rep, const PromptReps& reps, std::size_t image_category);

/// `image_reps` holds one transformed image per column.
double loss_pir(const Eigen::MatrixXd& image_reps, std::span<const std::size_t> labels, const PromptReps& reps,
                double tau);
double loss_ppd(const PromptReps& reps);
double loss_nir(const Eigen::MatrixXd& image_reps, std::span<const std::size_t> labels, const PromptReps& reps);
double loss_nnd(const PromptReps& reps);
double loss_npd(const PromptReps& reps);

/// Mean of |cos| over the pairs summed by loss_npd (0 when there are none).
double mean_npd_cosine(const PromptReps& reps);

enum class LossTerm { Pir, Ppd, Nir, Nnd, Npd };

struct TermWeights {
  double pir = 1.0;
  double ppd = 0.0;
  double nir = 1.0;
  double nnd = 0.0;
  double npd = 1.0;

  static TermWeights only(LossTerm term);
};

struct LossWeights {
  double lambda_pos = 1e-5;
  double lambda_neg = 1e-3;
  double lambda_npd = 1.0;
  double tau = 0.01;

  TermWeights terms() const { return {1.0, lambda_pos, 1.0, lambda_neg, lambda_npd}; }
  /// Throws InvalidArgument.
  void validate() const;
};

struct LossBreakdown {
  double pir = 0.0;
  double ppd = 0.0;
  double nir = 0.0;
  double nnd = 0.0;
  double npd = 0.0;
  double total = 0.0;
};

/// Raw image embeddings (one per column) with category indices.
struct AdapterBatch {
  Eigen::MatrixXd images;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
};

/// Value of the weighted objective. `raw_prompts` are encoder outputs.
LossBreakdown total_adapter_loss(const AdapterBatch& batch, const PromptReps& raw_prompts,
                                 const AdapterState& state, const TermWeights& weights, double tau);
LossBreakdown total_adapter_loss(const AdapterBatch& batch, const PromptReps& raw_prompts,
                                 const AdapterState& state, const LossWeights& weights);

struct AdapterGradient {
  Eigen::MatrixXd d_text;
  Eigen::MatrixXd d_image;
  LossBreakdown loss;
};

/// Analytic gradient of the weighted objective w.r.t. both adapters,
/// including the normalization Jacobians. |x| uses subgradient 0 at 0.
AdapterGradient adapter_gradients(const AdapterBatch& batch, const PromptReps& raw_prompts,
                                  const AdapterState& state, const TermWeights& weights, double tau);
AdapterGradient adapter_gradients(const AdapterBatch& batch, const PromptReps& raw_prompts,
                                  const AdapterState& state, const LossWeights& weights);

struct AdapterTrainConfig {
  LossWeights weights;
  double learning_rate = 1e-2;
  std::size_t epochs = 200;
  std::size_t batch_size = 0;  // 0 = full batch
  double init_noise = 1e-3;
  std::uint64_t seed = 0;
};

struct AdapterResult {
  AdapterState state;
  std::vector<LossBreakdown> trace;  // trace[0] = initial loss, trace[e] after epoch e
};

/// Plain gradient descent from perturbed_identity(d, init_noise, seed).
/// Throws DimensionMismatch.
AdapterResult optimize_adapters(const AdapterBatch& batch, const PromptReps& raw_prompts,
                                const AdapterTrainConfig& config);

/// Columns: epoch,l_pir,l_ppd,l_nir,l_nnd,l_npd,total.
std::string adapter_trace_csv(const std::vector<LossBreakdown>& trace);

/// PADP: "PADP" | version u32 | dim u32 | d·d f32 W_text (row-major) | d·d f32 W_image.
std::size_t write_adapters(const AdapterState& state, std::ostream& out);
AdapterState read_adapters(std::istream& in);
void save_adapters(const AdapterState& state, const std::filesystem::path& path);
AdapterState load_adapters(const std::filesystem::path& path);

}  // namespace pnps
