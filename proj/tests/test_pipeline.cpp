#include "pnps/pipeline.hpp"

#include "helpers.hpp"

#include <algorithm>
#include <set>

using namespace pnps;
using testing::code_of;

namespace {

SyntheticScenario small_scenario() {
  SyntheticScenario s;
  s.classes = 4;
  s.groups = 2;
  s.per_class = 4;
  s.test_per_class = 3;
  s.dim = 8;
  s.patches = 4;
  s.ood_classes = 2;
  s.ood_per_class = 3;
  s.seed = 5;
  return s;
}

RunConfig quick_config() {
  RunConfig c;
  c.epochs_adapter = 5;
  c.epochs_vig = 5;
  c.vig_layers = 2;
  c.hidden_dim = 8;
  c.n_features = 2;
  c.k_patch = 3;
  c.k_cross = 2;
  return c;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("synthetic partition") {
    const auto p = synthetic_partition(7, 3);
    REQUIRE(p.groups.size() == 3);
    std::size_t total = 0;
    std::size_t lo = 99;
    std::size_t hi = 0;
    for (const auto& g : p.groups) {
      total += g.members.size();
      lo = std::min(lo, g.members.size());
      hi = std::max(hi, g.members.size());
    }
    CHECK(total == 7);
    CHECK(hi - lo <= 1);
    CHECK(p.groups[0].name == "g0");
    CHECK(p.categories().front() == "c0");
    CHECK(p.categories().back() == "c6");
    CHECK(synthetic_partition(2, 1, "t").categories() == std::vector<std::string>{"t0", "t1"});
    CHECK(code_of([] { synthetic_partition(2, 3); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { synthetic_partition(2, 0); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("synthetic data shapes") {
    const auto s = small_scenario();
    const auto data = make_synthetic(s, 3);
    CHECK(data.train.images.size() == 16);
    CHECK(data.train.patches[0].size() == 4);
    CHECK(data.test.images.size() == 12);
    CHECK(data.ood.images.size() == 6);
    CHECK(data.ood.images[0].label == kUnknownLabel);
    // Two groups of two: every category owns s·N = 2·3 prompts.
    CHECK(data.prompts.size() == 4 * 2 * 3);
    const PromptLayout layout(data.partition, 3);
    const auto reps = prompt_reps_from_table(data.prompts, layout);
    for (std::size_t c = 0; c < 4; ++c) CHECK(reps.of(c).cols() == 6);
    for (const auto& r : data.prompts.records()) {
      CHECK(r.modality == Modality::TextPrompt);
      CHECK(r.vector(0).norm() == doctest::Approx(1.0).epsilon(1e-6));
    }

    // Pure in its inputs.
    const auto again = make_synthetic(s, 3);
    CHECK(again.prompts == data.prompts);
    CHECK(again.train.patches == data.train.patches);
    CHECK(again.ood.images == data.ood.images);
    auto other = s;
    other.seed = 6;
    CHECK(!(make_synthetic(other, 3).prompts == data.prompts));
  }

  TEST_CASE("adapter batch labels") {
    const auto data = make_synthetic(small_scenario(), 2);
    const PromptLayout layout(data.partition, 2);
    const auto batch = adapter_batch(data.train.images, layout);
    CHECK(batch.size() == 16);
    CHECK(batch.images.cols() == 16);
    CHECK(batch.labels[0] == static_cast<std::size_t>(data.train.images[0].label));
    CHECK((table_columns(data.train.images) - batch.images).norm() == 0.0);

    EmbeddingTable bad(8);
    bad.add({"x", 4, Modality::ImageGlobal, {std::vector<float>(8, 0.5f)}});
    CHECK(code_of([&] { adapter_batch(bad, layout); }) == ErrorCode::InvalidRecord);
    EmbeddingTable unknown(8);
    unknown.add({"y", kUnknownLabel, Modality::ImageGlobal, {std::vector<float>(8, 0.5f)}});
    CHECK(code_of([&] { adapter_batch(unknown, layout); }) == ErrorCode::InvalidRecord);
  }

  TEST_CASE("training graphs and their dump") {
    const auto data = make_synthetic(small_scenario(), 2);
    const PromptLayout layout(data.partition, 2);
    const auto state = AdapterState::perturbed_identity(8, 0.1, 3);
    const auto reps = transform_prompts(state, prompt_reps_from_table(data.prompts, layout));
    const TopKConfig topk{1, 2, 2};
    const auto set = build_training_graphs(data.train.patches, reps, state, topk);
    REQUIRE(set.samples.size() == 16);
    CHECK(set.categories == layout.categories());
    for (const auto& s : set.samples) {
      CHECK(s.graph.patch_count() == 4);
      CHECK(s.graph.prompt_count() == layout.prompt_count(s.label));
    }
    CHECK(set.labeled().size() == 16);

    const std::string json = graph_set_to_json(set);
    const auto back = parse_graph_set(json);
    REQUIRE(back.samples.size() == set.samples.size());
    CHECK(back.categories == set.categories);
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
      const auto& a = set.samples[i];
      const auto& b = back.samples[i];
      CHECK(a.name == b.name);
      CHECK(a.label == b.label);
      CHECK(a.graph.intra_edges == b.graph.intra_edges);
      CHECK(a.graph.inter_edges == b.graph.inter_edges);
      CHECK((a.graph.node_features() - b.graph.node_features()).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK(graph_set_to_json(back) == json);

    CHECK(code_of([] { parse_graph_set("{"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { parse_graph_set("{\"categories\": []}"); }) == ErrorCode::ParseError);

    EmbeddingTable unlabeled(8);
    unlabeled.add({"u", kUnknownLabel, Modality::ImagePatchSet, {std::vector<float>(8, 0.5f)}});
    CHECK(code_of([&] { build_training_graphs(unlabeled, reps, state, topk); }) == ErrorCode::InvalidRecord);
  }

  TEST_CASE("short synthetic run is deterministic") {
    const auto data = make_synthetic(small_scenario(), 2);
    const auto cfg = quick_config();
    const auto a = run_synthetic(data, cfg);
    const auto b = run_synthetic(data, cfg);
    CHECK(a.id_scores == b.id_scores);
    CHECK(a.ood_scores == b.ood_scores);
    CHECK(metric_json(a.report) == metric_json(b.report));
    CHECK(a.id_scores.size() == 12);
    CHECK(a.ood_scores.size() == 6);
    CHECK(a.vig.trace.size() == cfg.epochs_vig + 1);
    CHECK(a.report.has_id_acc());
    for (const auto& r : a.id_scores) CHECK(r.is_id);
    for (const auto& r : a.ood_scores) CHECK(!r.is_id);

    const PromptLayout layout(data.partition, 2);
    CHECK(score_accuracy(a.id_scores, data.test.images, layout) == a.report.id_acc);
    std::vector<ScoreRecord> stray = {{"missing", "c0", 0.0, true}};
    CHECK(code_of([&] { score_accuracy(stray, data.test.images, layout); }) == ErrorCode::InvalidRecord);
  }
}
