#pragma once

// Glue between the stored tables and the training / scoring stages, plus
// the synthetic end-to-end scenario.

#include "pnps/adapter.hpp"
#include "pnps/config.hpp"
#include "pnps/detector.hpp"
#include "pnps/embedding_store.hpp"
#include "pnps/metrics.hpp"
#include "pnps/prompt_factory.hpp"
#include "pnps/vig.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pnps {

/// `groups` contiguous super-classes "g0".. over categories "{prefix}0"..;
/// sizes differ by at most one. Throws InvalidArgument.
SuperClassPartition synthetic_partition(std::size_t num_classes, std::size_t groups, const std::string& prefix = "c");

/// Encoder-like prompt embeddings around the class means (columns of
/// `means`, layout category order):
///   positive t^{c+}_n  = normalize(f_{c,n}),           f_{c,n} = normalize(μ_c + σ·g)
///   negative t^{c-d}_n = normalize(μ_c + f_{d,n} + σ·g)
/// so every negative starts close to the sibling positive it borrows from.
EmbeddingTable synthetic_prompt_table(const PromptLayout& layout, const Eigen::MatrixXd& means, double spread,
                                      std::uint64_t seed);

/// Column i = vector 0 of record i.
Eigen::MatrixXd table_columns(const EmbeddingTable& table);

/// Labels must be category indices of `layout`. Throws InvalidRecord.
AdapterBatch adapter_batch(const EmbeddingTable& images, const PromptLayout& layout);

struct GraphSample {
  std::string name;
  std::size_t label = 0;
  MultiModalGraph graph;
};

struct GraphSet {
  std::vector<std::string> categories;
  std::vector<GraphSample> samples;

  std::vector<LabeledGraph> labeled() const;
};

/// One graph per labeled patch record, using the prompts of its own
/// category. Throws InvalidRecord on an unlabeled record.
GraphSet build_training_graphs(const EmbeddingTable& patches, const PromptReps& transformed_prompts,
                               const AdapterState& state, const TopKConfig& topk);

/// JSON dump: categories, then per graph the sample, label, category, node
/// list, node features and both edge sets.
std::string graph_set_to_json(const GraphSet& set);
/// Throws ParseError or DimensionMismatch.
GraphSet parse_graph_set(const std::string& json_text);

/// Scores every patch record. Global embeddings are looked up by name in
/// `images` when given.
std::vector<ScoreRecord> score_table(const EmbeddingTable& patches, const EmbeddingTable* images, bool is_id,
                                     const PromptReps& transformed_prompts, const AdapterState& state,
                                     const ViGModel& model, const DetectorConfig& config);

/// ID-Acc of score records against the labels stored in `truth`
/// (matched by name). Throws InvalidRecord when a record is missing.
double score_accuracy(const std::vector<ScoreRecord>& records, const EmbeddingTable& truth, const PromptLayout& layout);

struct SyntheticScenario {
  std::uint32_t classes = 6;
  std::uint32_t groups = 2;
  std::uint32_t per_class = 30;
  std::uint32_t test_per_class = 10;
  std::uint32_t dim = 32;
  std::uint32_t patches = 8;
  double spread = 0.15;
  std::uint32_t ood_classes = 3;
  std::uint32_t ood_per_class = 10;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  SuperClassPartition partition;
  SynthDataset train;
  SynthDataset test;  // ID held-out samples
  SynthDataset ood;   // unseen means, unknown labels
  EmbeddingTable prompts;
};

/// Pure in (scenario, n_features).
SyntheticData make_synthetic(const SyntheticScenario& scenario, std::size_t n_features);

struct SyntheticRun {
  AdapterResult adapters;
  ViGTrainResult vig;
  std::vector<ScoreRecord> id_scores;
  std::vector<ScoreRecord> ood_scores;
  MetricReport report;
  double npd_cosine_before = 0.0;
  double npd_cosine_after = 0.0;
};

/// optimize adapters -> training graphs -> train ViG -> score test/OOD.
SyntheticRun run_synthetic(const SyntheticData& data, const RunConfig& config);

/// ViG initialization used by train-vig.
ViGModel initial_vig(std::size_t dim, std::size_t num_classes, const RunConfig& config);

}  // namespace pnps
