#include "pnps/pipeline.hpp"

#include "pnps/error.hpp"

#include <nlohmann/json.hpp>

#include <random>

namespace pnps {
namespace {

using nlohmann::json;

constexpr std::uint64_t kTestStream = 0x5851f42d4c957f2dULL;
constexpr std::uint64_t kOodMeanStream = 0xda942042e4dd58b5ULL;
constexpr std::uint64_t kOodSampleStream = 0x2545f4914f6cdd1dULL;
constexpr std::uint64_t kPromptStream = 0xbf58476d1ce4e5b9ULL;
constexpr std::uint64_t kTrainStream = 0x9e3779b97f4a7c15ULL;

Eigen::VectorXd gaussian(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = normal(rng);
  return v;
}

std::size_t checked_label(const EmbeddingRecord& r, const PromptLayout& layout) {
  if (r.label < 0 || static_cast<std::size_t>(r.label) >= layout.num_categories()) {
    throw Error(ErrorCode::InvalidRecord, "record '" + r.name + "' has label " + std::to_string(r.label) +
                                              " outside the " + std::to_string(layout.num_categories()) +
                                              " categories");
  }
  return static_cast<std::size_t>(r.label);
}

[[noreturn]] void bad_dump(const std::string& what) { throw Error(ErrorCode::ParseError, "graph dump: " + what); }

json edges_json(const std::vector<Edge>& edges) {
  json out = json::array();
  for (const auto& e : edges) out.push_back({e.src, e.dst});
  return out;
}

std::vector<Edge> edges_from(const json& j, std::size_t nodes) {
  std::vector<Edge> out;
  for (const auto& e : j) {
    const auto src = e.at(0).get<std::size_t>();
    const auto dst = e.at(1).get<std::size_t>();
    if (e.size() != 2 || src >= nodes || dst >= nodes) bad_dump("edge out of range");
    out.push_back({src, dst});
  }
  return out;
}

}  // namespace

SuperClassPartition synthetic_partition(std::size_t num_classes, std::size_t groups, const std::string& prefix) {
  if (groups == 0 || groups > num_classes) {
    throw Error(ErrorCode::InvalidArgument, "need 1 <= groups <= classes");
  }
  SuperClassPartition p;
  for (std::size_t g = 0; g < groups; ++g) {
    SuperClass sc{"g" + std::to_string(g), {}};
    for (std::size_t c = g * num_classes / groups; c < (g + 1) * num_classes / groups; ++c) {
      sc.members.push_back(prefix + std::to_string(c));
    }
    p.groups.push_back(std::move(sc));
  }
  return p;
}

EmbeddingTable synthetic_prompt_table(const PromptLayout& layout, const Eigen::MatrixXd& means, double spread,
                                      std::uint64_t seed) {
  if (static_cast<std::size_t>(means.cols()) != layout.num_categories()) {
    throw Error(ErrorCode::DimensionMismatch, "one mean per category required");
  }
  const Eigen::Index d = means.rows();
  std::mt19937_64 rng(seed);
  const std::size_t n = layout.n();
  std::vector<Eigen::MatrixXd> features;  // f_{c,n} per category, d x N
  for (std::size_t c = 0; c < layout.num_categories(); ++c) {
    Eigen::MatrixXd f(d, static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      f.col(static_cast<Eigen::Index>(k)) =
          l2_normalize(means.col(static_cast<Eigen::Index>(c)) + spread * gaussian(rng, d));
    }
    features.push_back(std::move(f));
  }
  EmbeddingTable table(static_cast<std::uint32_t>(d));
  for (std::size_t c = 0; c < layout.num_categories(); ++c) {
    for (std::size_t flat = 1; flat <= layout.prompt_count(c); ++flat) {
      const auto slot = layout.slot(c, flat);
      const auto pos = static_cast<Eigen::Index>(slot.position - 1);
      Eigen::VectorXd v;
      if (slot.kind == PromptKind::Positive) {
        v = features[c].col(pos);
      } else {
        v = l2_normalize(means.col(static_cast<Eigen::Index>(c)) + features[slot.source].col(pos) +
                         spread * gaussian(rng, d));
      }
      table.add({prompt_record_name(layout.category(c), flat), static_cast<std::int32_t>(c), Modality::TextPrompt,
                 {to_floats(v)}});
    }
  }
  return table;
}

Eigen::MatrixXd table_columns(const EmbeddingTable& table) {
  Eigen::MatrixXd out(table.dim(), static_cast<Eigen::Index>(table.size()));
  for (std::size_t i = 0; i < table.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = table[i].vector(0);
  return out;
}

AdapterBatch adapter_batch(const EmbeddingTable& images, const PromptLayout& layout) {
  AdapterBatch batch{table_columns(images), {}};
  for (std::size_t i = 0; i < images.size(); ++i) batch.labels.push_back(checked_label(images[i], layout));
  return batch;
}

std::vector<LabeledGraph> GraphSet::labeled() const {
  std::vector<LabeledGraph> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.graph, s.label});
  return out;
}

GraphSet build_training_graphs(const EmbeddingTable& patches, const PromptReps& transformed_prompts,
                               const AdapterState& state, const TopKConfig& topk) {
  const PromptLayout& layout = transformed_prompts.layout;
  GraphSet set{layout.categories(), {}};
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& r = patches[i];
    const std::size_t label = checked_label(r, layout);
    const Eigen::MatrixXd p = transform_patches(state, r.matrix());
    set.samples.push_back({r.name, label, category_graph(p, transformed_prompts, label, topk)});
  }
  return set;
}

std::string graph_set_to_json(const GraphSet& set) {
  json graphs = json::array();
  for (const auto& s : set.samples) {
    const auto& g = s.graph;
    json nodes = json::array();
    for (std::size_t i = 0; i < g.patch_count(); ++i) nodes.push_back({{"modality", "patch"}, {"index", i}});
    for (std::size_t i = 0; i < g.prompt_count(); ++i) {
      nodes.push_back({{"modality", "prompt"}, {"category", set.categories.at(s.label)}, {"flat_index", i + 1}});
    }
    json features = json::array();
    const Eigen::MatrixXd f = g.node_features();
    for (Eigen::Index j = 0; j < f.cols(); ++j) {
      json col = json::array();
      for (Eigen::Index k = 0; k < f.rows(); ++k) col.push_back(f(k, j));
      features.push_back(std::move(col));
    }
    graphs.push_back({{"sample", s.name},
                      {"label", s.label},
                      {"category", set.categories.at(s.label)},
                      {"patch_count", g.patch_count()},
                      {"nodes", std::move(nodes)},
                      {"features", std::move(features)},
                      {"intra_edges", edges_json(g.intra_edges)},
                      {"inter_edges", edges_json(g.inter_edges)}});
  }
  json root = {{"categories", set.categories}, {"graphs", std::move(graphs)}};
  return root.dump() + "\n";
}

GraphSet parse_graph_set(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    bad_dump(e.what());
  }
  GraphSet set;
  try {
    set.categories = root.at("categories").get<std::vector<std::string>>();
    std::size_t dim = 0;
    for (const auto& g : root.at("graphs")) {
      GraphSample s;
      s.name = g.at("sample").get<std::string>();
      s.label = g.at("label").get<std::size_t>();
      if (s.label >= set.categories.size()) bad_dump("label out of range in '" + s.name + "'");
      const auto m = g.at("patch_count").get<std::size_t>();
      const auto& features = g.at("features");
      if (m == 0 || features.size() < m) bad_dump("bad patch count in '" + s.name + "'");
      const std::size_t d = features.at(0).size();
      if (d == 0) bad_dump("empty feature vector");
      if (dim == 0) dim = d;
      if (d != dim) throw Error(ErrorCode::DimensionMismatch, "graph '" + s.name + "' has dimension " + std::to_string(d));
      Eigen::MatrixXd f(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(features.size()));
      for (std::size_t j = 0; j < features.size(); ++j) {
        if (features[j].size() != d) throw Error(ErrorCode::DimensionMismatch, "ragged features in '" + s.name + "'");
        for (std::size_t k = 0; k < d; ++k) {
          f(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = features[j][k].get<double>();
        }
      }
      s.graph.patches = f.leftCols(static_cast<Eigen::Index>(m));
      s.graph.prompts = f.rightCols(f.cols() - static_cast<Eigen::Index>(m));
      s.graph.intra_edges = edges_from(g.at("intra_edges"), s.graph.node_count());
      s.graph.inter_edges = edges_from(g.at("inter_edges"), s.graph.node_count());
      set.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    bad_dump(e.what());
  }
  return set;
}

std::vector<ScoreRecord> score_table(const EmbeddingTable& patches, const EmbeddingTable* images, bool is_id,
                                     const PromptReps& transformed_prompts, const AdapterState& state,
                                     const ViGModel& model, const DetectorConfig& config) {
  std::vector<ScoreRecord> out;
  out.reserve(patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& r = patches[i];
    std::optional<Eigen::VectorXd> global;
    if (images) {
      if (const EmbeddingRecord* g = images->find(r.name)) global = g->vector(0);
    }
    out.push_back(ood_score(r.name, is_id, r.matrix(), global, transformed_prompts, state, model, config));
  }
  return out;
}

double score_accuracy(const std::vector<ScoreRecord>& records, const EmbeddingTable& truth,
                      const PromptLayout& layout) {
  std::vector<std::string> predicted;
  std::vector<std::string> expected;
  for (const auto& r : records) {
    if (!r.is_id) continue;
    const EmbeddingRecord* t = truth.find(r.name);
    if (!t) throw Error(ErrorCode::InvalidRecord, "no ground truth for '" + r.name + "'");
    predicted.push_back(r.predicted);
    expected.push_back(layout.category(checked_label(*t, layout)));
  }
  return id_accuracy(predicted, expected);
}

SyntheticData make_synthetic(const SyntheticScenario& s, std::size_t n_features) {
  SynthSpec spec{s.classes, s.per_class, s.dim, s.patches, s.spread, s.seed};
  spec.validate();
  SuperClassPartition partition = synthetic_partition(s.classes, s.groups);
  const EmbeddingTable means = draw_unit_means(s.classes, s.dim, s.seed);
  SynthDataset ood{EmbeddingTable(s.dim), EmbeddingTable(s.dim), EmbeddingTable(s.dim)};
  if (s.ood_classes > 0) {
    const EmbeddingTable ood_means = draw_unit_means(s.ood_classes, s.dim, s.seed ^ kOodMeanStream, "ood");
    ood = sample_around(ood_means, s.ood_per_class, s.patches, s.spread, s.seed ^ kOodSampleStream, "o", true);
  }
  const PromptLayout layout(partition, n_features);
  EmbeddingTable prompts = synthetic_prompt_table(layout, table_columns(means), s.spread, s.seed ^ kPromptStream);
  return {std::move(partition),
          sample_around(means, s.per_class, s.patches, s.spread, s.seed ^ kTrainStream, "c"),
          sample_around(means, s.test_per_class, s.patches, s.spread, s.seed ^ kTestStream, "t"),
          std::move(ood),
          std::move(prompts)};
}

ViGModel initial_vig(std::size_t dim, std::size_t num_classes, const RunConfig& config) {
  return ViGModel::random(dim, config.hidden_for(dim), config.vig_layers, num_classes, config.seed);
}

SyntheticRun run_synthetic(const SyntheticData& data, const RunConfig& config) {
  config.validate();
  const PromptLayout layout(data.partition, config.n_features);
  const PromptReps raw = prompt_reps_from_table(data.prompts, layout);
  const AdapterBatch batch = adapter_batch(data.train.images, layout);

  SyntheticRun run;
  const AdapterTrainConfig adapter_cfg = config.adapter_config();
  run.npd_cosine_before = mean_npd_cosine(
      transform_prompts(AdapterState::perturbed_identity(raw.dim(), adapter_cfg.init_noise, adapter_cfg.seed), raw));
  run.adapters = optimize_adapters(batch, raw, adapter_cfg);
  const PromptReps reps = transform_prompts(run.adapters.state, raw);
  run.npd_cosine_after = mean_npd_cosine(reps);

  const GraphSet graphs = build_training_graphs(data.train.patches, reps, run.adapters.state, config.topk());
  run.vig = train_vig(graphs.labeled(), initial_vig(raw.dim(), layout.num_categories(), config), config.vig_config());

  const DetectorConfig det = config.detector_config();
  run.id_scores = score_table(data.test.patches, &data.test.images, true, reps, run.adapters.state, run.vig.model, det);
  run.ood_scores = score_table(data.ood.patches, &data.ood.images, false, reps, run.adapters.state, run.vig.model, det);

  std::vector<double> id;
  std::vector<double> ood;
  for (const auto& r : run.id_scores) id.push_back(r.score);
  for (const auto& r : run.ood_scores) ood.push_back(r.score);
  run.report.auroc = auroc(id, ood);
  run.report.aupr = aupr(id, ood);
  run.report.fpr95 = fpr95(id, ood);
  run.report.id_acc = score_accuracy(run.id_scores, data.test.images, layout);
  return run;
}

}  // namespace pnps
