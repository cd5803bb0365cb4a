#include "pnps/cli.hpp"

#include "pnps/config.hpp"
#include "pnps/error.hpp"
#include "pnps/gradcheck.hpp"
#include "pnps/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace pnps::cli {
namespace {

namespace fs = std::filesystem;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text) || !out.flush()) {
    throw Error(ErrorCode::IoFailure, "cannot write '" + path.string() + "'");
  }
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create '" + dir.string() + "': " + ec.message());
}

// Options shared by the pipeline stages.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "Run configuration file (key = value lines)");
    app->add_option("--seed", seed, "Override the configuration seed");
  }

  RunConfig load() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) c.seed = *seed;
    return c;
  }
};

struct SynthArgs {
  std::uint32_t classes = 3;
  std::uint32_t per_class = 5;
  std::uint32_t dim = 16;
  std::uint32_t patches = 4;
  double spread = 0.15;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::uint32_t groups = 0;
  std::size_t n_features = 3;
  std::uint32_t test_per_class = 0;
  std::uint32_t ood_classes = 0;
  std::uint32_t ood_per_class = 0;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const SynthSpec spec{a.classes, a.per_class, a.dim, a.patches, a.spread, a.seed};
  const SynthDataset base = synth_dataset(spec);
  const fs::path dir = a.out_dir;
  make_dir(dir);
  std::vector<std::pair<std::string, const EmbeddingTable*>> files = {
      {"images.pemb", &base.images}, {"patches.pemb", &base.patches}, {"means.pemb", &base.class_means}};

  std::optional<SyntheticData> extra;
  if (a.groups > 0 || a.test_per_class > 0 || a.ood_classes > 0) {
    SyntheticScenario sc{a.classes, std::max<std::uint32_t>(a.groups, 1), a.per_class, a.test_per_class, a.dim,
                         a.patches, a.spread, a.ood_classes, a.ood_per_class, a.seed};
    extra = make_synthetic(sc, a.n_features);
    if (a.groups > 0) {
      files.emplace_back("prompts.pemb", &extra->prompts);
      write_text(dir / "partition.json", partition_to_json(extra->partition));
      out << (dir / "partition.json").string() << "\n";
    }
    if (a.test_per_class > 0) {
      files.emplace_back("test_images.pemb", &extra->test.images);
      files.emplace_back("test_patches.pemb", &extra->test.patches);
    }
    if (a.ood_classes > 0) {
      files.emplace_back("ood_images.pemb", &extra->ood.images);
      files.emplace_back("ood_patches.pemb", &extra->ood.patches);
    }
  }
  for (const auto& [name, table] : files) {
    save_table(*table, dir / name);
    out << (dir / name).string() << "\n";
  }
  return kExitOk;
}

struct Paths {
  std::string partition;
  std::string features;
  std::string images;
  std::string patches;
  std::string prompts;
  std::string adapters;
  std::string graphs;
  std::string vig;
  std::string out;
  std::string trace;
  std::string labels;
  std::string id_scores;
  std::string ood_scores;
  bool ood = false;
};

void emit(const std::string& out_path, const std::string& text, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
  } else {
    write_text(out_path, text);
  }
}

int cmd_gen_queries(const Paths& p, std::ostream& out) {
  emit(p.out, emit_query_file(load_partition(p.partition)), out);
  return kExitOk;
}

int cmd_build_prompts(const Paths& p, const Common& common, std::ostream& out) {
  const RunConfig cfg = common.load();
  const SuperClassPartition partition = load_partition(p.partition);
  const FeatureBank bank = ingest_features(read_text(p.features), cfg.n_features);
  emit(p.out, export_prompt_bank(build_prompts(bank, partition)), out);
  return kExitOk;
}

int cmd_optimize_adapters(const Paths& p, const Common& common, std::ostream& err) {
  const RunConfig cfg = common.load();
  const PromptLayout layout(load_partition(p.partition), cfg.n_features);
  const PromptReps raw = prompt_reps_from_table(load_table(p.prompts), layout);
  const AdapterBatch batch = adapter_batch(load_table(p.images), layout);
  const AdapterResult result = optimize_adapters(batch, raw, cfg.adapter_config());
  save_adapters(result.state, p.out);
  if (!p.trace.empty()) write_text(p.trace, adapter_trace_csv(result.trace));
  err << fmt::format("optimize-adapters: {} images, {} epochs, loss {} -> {}\n", batch.size(), cfg.epochs_adapter,
                     result.trace.front().total, result.trace.back().total);
  return kExitOk;
}

PromptReps transformed_reps(const Paths& p, const RunConfig& cfg, const AdapterState& state) {
  const PromptLayout layout(load_partition(p.partition), cfg.n_features);
  return transform_prompts(state, prompt_reps_from_table(load_table(p.prompts), layout));
}

int cmd_build_graphs(const Paths& p, const Common& common, std::ostream& err) {
  const RunConfig cfg = common.load();
  const AdapterState state = load_adapters(p.adapters);
  const PromptReps reps = transformed_reps(p, cfg, state);
  const GraphSet set = build_training_graphs(load_table(p.patches), reps, state, cfg.topk());
  write_text(p.out, graph_set_to_json(set));
  err << fmt::format("build-graphs: {} graphs\n", set.samples.size());
  return kExitOk;
}

int cmd_train_vig(const Paths& p, const Common& common, std::ostream& err) {
  const RunConfig cfg = common.load();
  const GraphSet set = parse_graph_set(read_text(p.graphs));
  if (set.samples.empty()) throw Error(ErrorCode::EmptySet, "graph dump holds no graphs");
  const std::size_t dim = set.samples.front().graph.dim();
  const ViGTrainResult result = train_vig(set.labeled(), initial_vig(dim, set.categories.size(), cfg), cfg.vig_config());
  save_vig(result.model, p.out);
  if (!p.trace.empty()) write_text(p.trace, vig_trace_csv(result.trace));
  err << fmt::format("train-vig: {} graphs, {} epochs, loss {} -> {}, accuracy {}\n", set.samples.size(),
                     cfg.epochs_vig, result.trace.front().loss, result.trace.back().loss,
                     result.trace.back().accuracy);
  return kExitOk;
}

int cmd_score(const Paths& p, const Common& common, std::ostream& out) {
  const RunConfig cfg = common.load();
  const AdapterState state = load_adapters(p.adapters);
  const PromptReps reps = transformed_reps(p, cfg, state);
  const ViGModel model = load_vig(p.vig);
  std::optional<EmbeddingTable> images;
  if (!p.images.empty()) images = load_table(p.images);
  const auto records = score_table(load_table(p.patches), images ? &*images : nullptr, !p.ood, reps, state, model,
                                   cfg.detector_config());
  emit(p.out, export_scores(records), out);
  return kExitOk;
}

int cmd_eval(const Paths& p, std::ostream& out) {
  const auto id = parse_scores(read_text(p.id_scores));
  const auto ood = parse_scores(read_text(p.ood_scores));
  std::vector<double> a;
  std::vector<double> b;
  for (const auto& r : id) a.push_back(r.score);
  for (const auto& r : ood) b.push_back(r.score);
  MetricReport report;
  report.auroc = auroc(a, b);
  report.aupr = aupr(a, b);
  report.fpr95 = fpr95(a, b);
  if (!p.labels.empty()) {
    if (p.partition.empty()) throw Error(ErrorCode::InvalidArgument, "--labels needs --partition");
    const PromptLayout layout(load_partition(p.partition), 1);
    std::vector<ScoreRecord> as_id = id;
    for (auto& r : as_id) r.is_id = true;
    report.id_acc = score_accuracy(as_id, load_table(p.labels), layout);
  }
  emit(p.out, metric_json(report) + "\n", out);
  return kExitOk;
}

int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out) {
  const auto results = run_gradcheck(opt);
  std::map<std::string, std::pair<std::size_t, double>> summary;  // failures, worst error
  std::vector<std::string> order;
  for (const auto& r : results) {
    if (!summary.count(r.suite)) order.push_back(r.suite);
    auto& s = summary[r.suite];
    s.first += r.passed ? 0 : 1;
    s.second = std::max(s.second, r.relative_error);
  }
  bool ok = true;
  for (const auto& name : order) {
    const auto& [fails, worst] = summary[name];
    ok = ok && fails == 0;
    out << fmt::format("{} {:<4} instances={} worst_rel_err={:.3e}\n", fails == 0 ? "PASS" : "FAIL", name,
                       opt.instances, worst);
  }
  return ok ? kExitOk : kExitInvalid;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prompt-guided multi-modal graph OOD detector"};
  app.name("pnps");
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a synthetic dataset as PEMB files");
  s->add_option("--classes", synth.classes, "Number of ID categories")->capture_default_str();
  s->add_option("--per-class", synth.per_class, "Training samples per category")->capture_default_str();
  s->add_option("--dim", synth.dim, "Embedding dimension")->capture_default_str();
  s->add_option("--patches", synth.patches, "Patches per image")->capture_default_str();
  s->add_option("--spread", synth.spread, "Cluster spread")->capture_default_str();
  s->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  s->add_option("--out-dir", synth.out_dir, "Output directory")->capture_default_str();
  s->add_option("--groups", synth.groups, "Also write partition.json and prompts.pemb with this many super-classes");
  s->add_option("--n-features", synth.n_features, "Features per category for prompts.pemb")->capture_default_str();
  s->add_option("--test-per-class", synth.test_per_class, "Also write held-out ID test tables");
  s->add_option("--ood-classes", synth.ood_classes, "Also write OOD tables drawn from this many unseen means");
  s->add_option("--ood-per-class", synth.ood_per_class, "OOD samples per unseen mean");

  Paths paths;
  Common common;

  auto* q = app.add_subcommand("gen-queries", "Emit one LLM query per category");
  q->add_option("--partition", paths.partition, "Super-class partition JSON")->required();
  q->add_option("--out", paths.out, "Output file (default stdout)");

  auto* bp = app.add_subcommand("build-prompts", "Expand a feature bank into the prompt-bank JSON");
  bp->add_option("--partition", paths.partition, "Super-class partition JSON")->required();
  bp->add_option("--features", paths.features, "Feature bank JSON")->required();
  bp->add_option("--out", paths.out, "Output file (default stdout)");
  common.attach(bp);

  auto* oa = app.add_subcommand("optimize-adapters", "Learn the text and image adapters");
  oa->add_option("--images", paths.images, "Labeled ImageGlobal PEMB")->required();
  oa->add_option("--prompts", paths.prompts, "TextPrompt PEMB")->required();
  oa->add_option("--partition", paths.partition, "Super-class partition JSON")->required();
  oa->add_option("--out", paths.out, "Adapter file (PADP)")->required();
  oa->add_option("--trace", paths.trace, "Per-epoch loss CSV");
  common.attach(oa);

  auto* bg = app.add_subcommand("build-graphs", "Build the per-sample training graphs");
  bg->add_option("--patches", paths.patches, "Labeled ImagePatchSet PEMB")->required();
  bg->add_option("--prompts", paths.prompts, "TextPrompt PEMB")->required();
  bg->add_option("--partition", paths.partition, "Super-class partition JSON")->required();
  bg->add_option("--adapters", paths.adapters, "Adapter file (PADP)")->required();
  bg->add_option("--out", paths.out, "Graph dump JSON")->required();
  common.attach(bg);

  auto* tv = app.add_subcommand("train-vig", "Train the ViG on a graph dump");
  tv->add_option("--graphs", paths.graphs, "Graph dump JSON")->required();
  tv->add_option("--out", paths.out, "Model file (PVIG)")->required();
  tv->add_option("--trace", paths.trace, "Per-epoch loss CSV");
  common.attach(tv);

  auto* sc = app.add_subcommand("score", "Score samples with the trained detector");
  sc->add_option("--patches", paths.patches, "ImagePatchSet PEMB to score")->required();
  sc->add_option("--images", paths.images, "ImageGlobal PEMB (needed for stage1_source = global)");
  sc->add_option("--prompts", paths.prompts, "TextPrompt PEMB")->required();
  sc->add_option("--partition", paths.partition, "Super-class partition JSON")->required();
  sc->add_option("--adapters", paths.adapters, "Adapter file (PADP)")->required();
  sc->add_option("--vig", paths.vig, "Model file (PVIG)")->required();
  sc->add_flag("--ood", paths.ood, "Mark the scored samples as OOD");
  sc->add_option("--out", paths.out, "Score CSV (default stdout)");
  common.attach(sc);

  auto* ev = app.add_subcommand("eval", "Compute AUROC, AUPR, FPR95 and ID-Acc");
  ev->add_option("--id", paths.id_scores, "Score CSV of ID samples")->required();
  ev->add_option("--ood", paths.ood_scores, "Score CSV of OOD samples")->required();
  ev->add_option("--labels", paths.labels, "PEMB holding the ID ground-truth labels");
  ev->add_option("--partition", paths.partition, "Partition that maps labels to category names");
  ev->add_option("--out", paths.out, "Metric JSON (default stdout)");

  GradcheckOptions gc;
  auto* g = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  g->add_option("--seed", gc.seed, "Random seed")->capture_default_str();
  g->add_option("--instances", gc.instances, "Instances per suite")->capture_default_str();
  g->add_option("--max-dim", gc.max_dim, "Largest embedding dimension")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*s) return cmd_synth(synth, out);
    if (*q) return cmd_gen_queries(paths, out);
    if (*bp) return cmd_build_prompts(paths, common, out);
    if (*oa) return cmd_optimize_adapters(paths, common, err);
    if (*bg) return cmd_build_graphs(paths, common, err);
    if (*tv) return cmd_train_vig(paths, common, err);
    if (*sc) return cmd_score(paths, common, out);
    if (*ev) return cmd_eval(paths, out);
    if (*g) return cmd_gradcheck(gc, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.is_io() ? kExitIo : kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}

}  // namespace pnps::cli
