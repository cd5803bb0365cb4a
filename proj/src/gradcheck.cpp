#include "pnps/gradcheck.hpp"

#include "pnps/adapter.hpp"
#include "pnps/error.hpp"
#include "pnps/graph_builder.hpp"
#include "pnps/vig.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace pnps {
namespace {

Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::vector<double> central_difference(std::vector<double> x, double step,
                                       const std::function<double(const std::vector<double>&)>& f) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f(x);
    x[i] = saved - step;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

std::vector<double> flatten_adapters(const Eigen::MatrixXd& text, const Eigen::MatrixXd& image) {
  std::vector<double> out(text.data(), text.data() + text.size());
  out.insert(out.end(), image.data(), image.data() + image.size());
  return out;
}

AdapterState unflatten_adapters(const std::vector<double>& x, std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  AdapterState s;
  s.w_text = Eigen::Map<const Eigen::MatrixXd>(x.data(), n, n);
  s.w_image = Eigen::Map<const Eigen::MatrixXd>(x.data() + d * d, n, n);
  return s;
}

struct AdapterInstance {
  SuperClassPartition partition;
  std::size_t n;
  AdapterBatch batch;
  Eigen::MatrixXd raw_prompt_cols;
  AdapterState state;
  double tau;
};

PromptReps raw_reps(const AdapterInstance& inst, const PromptLayout& layout) {
  PromptReps reps{layout, {}};
  Eigen::Index at = 0;
  for (std::size_t c = 0; c < layout.num_categories(); ++c) {
    const auto count = static_cast<Eigen::Index>(layout.prompt_count(c));
    reps.by_category.push_back(inst.raw_prompt_cols.middleCols(at, count));
    at += count;
  }
  return reps;
}

AdapterInstance random_adapter_instance(std::mt19937_64& rng, std::size_t max_dim) {
  AdapterInstance inst;
  const std::size_t groups = uniform(rng, 1, 3);
  std::size_t next = 0;
  bool has_sibling = false;
  for (std::size_t g = 0; g < groups; ++g) {
    std::size_t size = uniform(rng, 1, 3);
    if (g + 1 == groups && !has_sibling) size = std::max<std::size_t>(size, 2);
    has_sibling = has_sibling || size >= 2;
    SuperClass sc{"g" + std::to_string(g), {}};
    for (std::size_t i = 0; i < size; ++i) sc.members.push_back("k" + std::to_string(next++));
    inst.partition.groups.push_back(std::move(sc));
  }
  inst.n = uniform(rng, 1, 3);
  const PromptLayout layout(inst.partition, inst.n);
  const std::size_t d = uniform(rng, 4, std::max<std::size_t>(4, max_dim));
  std::size_t total_prompts = 0;
  for (std::size_t c = 0; c < layout.num_categories(); ++c) total_prompts += layout.prompt_count(c);
  inst.raw_prompt_cols = gaussian_matrix(rng, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(total_prompts));
  const std::size_t images = uniform(rng, 2, 6);
  inst.batch.images = gaussian_matrix(rng, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(images));
  for (std::size_t i = 0; i < images; ++i) inst.batch.labels.push_back(uniform(rng, 0, layout.num_categories() - 1));
  inst.state = AdapterState::perturbed_identity(d, 0.3, rng());
  inst.tau = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
  return inst;
}

GradcheckResult check_adapter(LossTerm term, const char* name, std::size_t index, std::mt19937_64& rng,
                              const GradcheckOptions& opt) {
  const AdapterInstance inst = random_adapter_instance(rng, opt.max_dim);
  const PromptLayout layout(inst.partition, inst.n);
  const PromptReps raw = raw_reps(inst, layout);
  const TermWeights w = TermWeights::only(term);
  const std::size_t d = inst.state.dim();
  const AdapterGradient g = adapter_gradients(inst.batch, raw, inst.state, w, inst.tau);
  const auto numeric = central_difference(flatten_adapters(inst.state.w_text, inst.state.w_image), opt.step,
                                          [&](const std::vector<double>& x) {
                                            return total_adapter_loss(inst.batch, raw, unflatten_adapters(x, d), w,
                                                                      inst.tau)
                                                .total;
                                          });
  const double err = relative_error(flatten_adapters(g.d_text, g.d_image), numeric);
  return {name, index, d, err, err < opt.tolerance};
}

GradcheckResult check_vig(std::size_t index, std::mt19937_64& rng, const GradcheckOptions& opt) {
  const std::size_t d = uniform(rng, 3, std::min<std::size_t>(8, std::max<std::size_t>(3, opt.max_dim)));
  const std::size_t m = uniform(rng, 2, 6);
  const std::size_t p = uniform(rng, 0, 5);
  const std::size_t classes = uniform(rng, 2, 4);
  const std::size_t layers = uniform(rng, 1, 2);
  const TopKConfig topk{uniform(rng, 1, 3), uniform(rng, 1, 4), uniform(rng, 1, 3)};
  const MultiModalGraph graph = build_graph(gaussian_matrix(rng, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m)),
                                            gaussian_matrix(rng, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(p)),
                                            topk);
  ViGModel model = ViGModel::random(d, 2 * d, layers, classes, rng(), 1.0);
  std::normal_distribution<double> normal(0.0, 0.3);
  for (auto& l : model.layers) {
    for (Eigen::Index i = 0; i < l.b1.size(); ++i) l.b1[i] = normal(rng);
    for (Eigen::Index i = 0; i < l.c1.size(); ++i) l.c1[i] = normal(rng);
  }
  const std::size_t label = uniform(rng, 0, classes - 1);
  const Pooling pooling = index % 2 == 0 ? Pooling::Mean : Pooling::Max;
  EnergyConfig energy;
  energy.temperature = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
  energy.lambda = 0.5;
  // Place the margin below the current energy so the hinge is active.
  energy.margin_in = loss_from_logits(vig_logits(graph, model, pooling), label, energy).energy - 1.0;

  const ViGGradients g = vig_gradients(graph, label, model, energy, pooling);
  ViGModel probe = model;
  const auto numeric = central_difference(model.flatten(), opt.step, [&](const std::vector<double>& x) {
    probe.assign(x);
    return vig_loss(graph, label, probe, energy, pooling).total;
  });
  const double err = relative_error(g.d_model.flatten(), numeric);
  return {"vig", index, d, err, err < opt.tolerance};
}

}  // namespace

double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  if (analytic.size() != numeric.size()) throw Error(ErrorCode::LengthMismatch, "gradient sizes differ");
  double diff = 0.0;
  double na = 0.0;
  double nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-8});
}

std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& options) {
  if (options.instances == 0 || options.max_dim < 4 || !(options.step > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "gradcheck needs instances >= 1, max_dim >= 4, step > 0");
  }
  std::vector<GradcheckResult> out;
  const std::pair<LossTerm, const char*> terms[] = {{LossTerm::Pir, "pir"},
                                                    {LossTerm::Ppd, "ppd"},
                                                    {LossTerm::Nir, "nir"},
                                                    {LossTerm::Nnd, "nnd"},
                                                    {LossTerm::Npd, "npd"}};
  std::uint64_t stream = 0;
  for (const auto& [term, name] : terms) {
    std::mt19937_64 rng(options.seed * 7919 + ++stream);
    for (std::size_t i = 0; i < options.instances; ++i) out.push_back(check_adapter(term, name, i, rng, options));
  }
  std::mt19937_64 rng(options.seed * 7919 + ++stream);
  for (std::size_t i = 0; i < options.instances; ++i) out.push_back(check_vig(i, rng, options));
  return out;
}

}  // namespace pnps
