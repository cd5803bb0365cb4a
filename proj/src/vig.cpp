#include "pnps/vig.hpp"

#include "binary_io.hpp"
#include "pnps/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <random>

namespace pnps {
namespace {

constexpr std::uint32_t kPvigVersion = 1;

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
  const Eigen::ArrayXd e = (v.array() - v.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

Eigen::Index argmax(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& m) { return m.cwiseMax(0.0); }

Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& pre) { return (pre.array() > 0.0).cast<double>().matrix(); }

// Visits every parameter block of a model in checkpoint order.
template <typename Model, typename Fn>
void for_each_block(Model& m, Fn&& fn) {
  for (auto& l : m.layers) {
    fn(l.w1);
    fn(l.b1);
    fn(l.w2);
    fn(l.b2);
    fn(l.f1);
    fn(l.c1);
    fn(l.f2);
    fn(l.c2);
  }
  fn(m.head_w);
  fn(m.head_b);
}

// Row-major traversal so flat order matches the checkpoint layout.
template <typename Block, typename Fn>
void for_each_entry(Block& b, Fn&& fn) {
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.cols(); ++j) fn(b(i, j));
  }
}

struct MaxRelative {
  Eigen::MatrixXd values;                   // d x V
  Eigen::Matrix<Eigen::Index, -1, -1> arg;  // d x V, -1 where no neighbour
};

MaxRelative max_relative(const Eigen::MatrixXd& h, const Adjacency& nbrs) {
  const Eigen::Index d = h.rows();
  const Eigen::Index v = h.cols();
  MaxRelative out{Eigen::MatrixXd::Zero(d, v), Eigen::Matrix<Eigen::Index, -1, -1>::Constant(d, v, -1)};
  for (Eigen::Index i = 0; i < v; ++i) {
    const auto& list = nbrs[static_cast<std::size_t>(i)];
    if (list.empty()) continue;
    for (Eigen::Index k = 0; k < d; ++k) {
      double best = -std::numeric_limits<double>::infinity();
      Eigen::Index arg = -1;
      for (std::size_t j : list) {  // ascending ids: strict > keeps the lowest on ties
        const double diff = h(k, static_cast<Eigen::Index>(j)) - h(k, i);
        if (diff > best) {
          best = diff;
          arg = static_cast<Eigen::Index>(j);
        }
      }
      out.values(k, i) = best;
      out.arg(k, i) = arg;
    }
  }
  return out;
}

struct LayerCache {
  Eigen::MatrixXd input;    // h
  MaxRelative rel;          // m
  Eigen::MatrixXd stacked;  // [h; m]
  Eigen::MatrixXd a;        // W1 [h; m] + b1
  Eigen::MatrixXd r;        // relu(a)
  Eigen::MatrixXd u;
  Eigen::MatrixXd f;        // F1 u + c1
  Eigen::MatrixXd q;        // relu(f)
  Eigen::MatrixXd out;
};

LayerCache layer_forward(const Eigen::MatrixXd& h, const Adjacency& nbrs, const GrapherLayer& l) {
  if (h.rows() != l.w2.rows() || static_cast<std::size_t>(h.cols()) != nbrs.size()) {
    throw Error(ErrorCode::DimensionMismatch, "grapher input does not match layer or adjacency");
  }
  LayerCache c;
  c.input = h;
  c.rel = max_relative(h, nbrs);
  c.stacked.resize(2 * h.rows(), h.cols());
  c.stacked << h, c.rel.values;
  c.a = (l.w1 * c.stacked).colwise() + l.b1;
  c.r = relu(c.a);
  c.u = ((l.w2 * c.r).colwise() + l.b2) + h;
  c.f = (l.f1 * c.u).colwise() + l.c1;
  c.q = relu(c.f);
  c.out = ((l.f2 * c.q).colwise() + l.c2) + c.u;
  return c;
}

// Returns the gradient w.r.t. the layer input; accumulates parameter grads.
Eigen::MatrixXd layer_backward(const LayerCache& c, const GrapherLayer& l, const Eigen::MatrixXd& g_out,
                               GrapherLayer& grad) {
  const Eigen::Index d = c.input.rows();
  grad.f2.noalias() += g_out * c.q.transpose();
  grad.c2 += g_out.rowwise().sum();
  const Eigen::MatrixXd g_f = (l.f2.transpose() * g_out).cwiseProduct(relu_mask(c.f));
  grad.f1.noalias() += g_f * c.u.transpose();
  grad.c1 += g_f.rowwise().sum();
  const Eigen::MatrixXd g_u = g_out + l.f1.transpose() * g_f;

  grad.w2.noalias() += g_u * c.r.transpose();
  grad.b2 += g_u.rowwise().sum();
  const Eigen::MatrixXd g_a = (l.w2.transpose() * g_u).cwiseProduct(relu_mask(c.a));
  grad.w1.noalias() += g_a * c.stacked.transpose();
  grad.b1 += g_a.rowwise().sum();
  const Eigen::MatrixXd g_stacked = l.w1.transpose() * g_a;

  Eigen::MatrixXd g_h = g_u + g_stacked.topRows(d);
  const auto g_m = g_stacked.bottomRows(d);
  for (Eigen::Index i = 0; i < c.input.cols(); ++i) {
    for (Eigen::Index k = 0; k < d; ++k) {
      const Eigen::Index j = c.rel.arg(k, i);
      if (j < 0) continue;
      g_h(k, j) += g_m(k, i);
      g_h(k, i) -= g_m(k, i);
    }
  }
  return g_h;
}

GrapherLayer zero_layer(std::size_t dim, std::size_t hidden) {
  const auto d = static_cast<Eigen::Index>(dim);
  const auto h = static_cast<Eigen::Index>(hidden);
  return {Eigen::MatrixXd::Zero(d, 2 * d), Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d),
          Eigen::VectorXd::Zero(d),        Eigen::MatrixXd::Zero(h, d), Eigen::VectorXd::Zero(h),
          Eigen::MatrixXd::Zero(d, h),     Eigen::VectorXd::Zero(d)};
}

void check_label(std::size_t label, const ViGModel& model) {
  if (label >= model.num_classes()) {
    throw Error(ErrorCode::OutOfRange, "label " + std::to_string(label) + " outside 0.." +
                                           std::to_string(model.num_classes() - 1));
  }
}

Eigen::VectorXd pool_backward(const Eigen::MatrixXd& reps, std::size_t m, Pooling pooling, const Eigen::VectorXd& g,
                              Eigen::MatrixXd& g_nodes) {
  const auto mm = static_cast<Eigen::Index>(m);
  if (pooling == Pooling::Mean) {
    for (Eigen::Index j = 0; j < mm; ++j) g_nodes.col(j) += g / static_cast<double>(m);
  } else {
    for (Eigen::Index k = 0; k < reps.rows(); ++k) {
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < mm; ++j) {
        if (reps(k, j) > reps(k, best)) best = j;
      }
      g_nodes(k, best) += g[k];
    }
  }
  return g;
}

}  // namespace

ViGModel ViGModel::zeros(std::size_t dim, std::size_t hidden_dim, std::size_t num_layers, std::size_t num_classes) {
  ViGModel m;
  for (std::size_t i = 0; i < num_layers; ++i) m.layers.push_back(zero_layer(dim, hidden_dim));
  m.head_w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_classes), static_cast<Eigen::Index>(dim));
  m.head_b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_classes));
  return m;
}

ViGModel ViGModel::random(std::size_t dim, std::size_t hidden_dim, std::size_t num_layers, std::size_t num_classes,
                          std::uint64_t seed, double gain) {
  ViGModel m = zeros(dim, hidden_dim, num_layers, num_classes);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](Eigen::MatrixXd& w, double g) {
    std::normal_distribution<double> normal(0.0, g / std::sqrt(static_cast<double>(w.cols())));
    for_each_entry(w, [&](double& x) { x = normal(rng); });
  };
  for (auto& l : m.layers) {
    fill(l.w1, gain);
    fill(l.w2, gain);
    fill(l.f1, gain);
    fill(l.f2, gain);
  }
  fill(m.head_w, 1.0);
  return m;
}

void ViGModel::validate() const {
  const auto d = head_w.cols();
  if (layers.empty()) throw Error(ErrorCode::InvalidArgument, "ViG needs at least one layer");
  if (d == 0 || head_w.rows() == 0 || head_b.size() != head_w.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "ViG head shape");
  }
  const auto h = layers.front().f1.rows();
  if (h < d) throw Error(ErrorCode::InvalidArgument, "ViG hidden dimension must be >= d");
  for (const auto& l : layers) {
    const bool ok = l.w1.rows() == d && l.w1.cols() == 2 * d && l.b1.size() == d && l.w2.rows() == d &&
                    l.w2.cols() == d && l.b2.size() == d && l.f1.rows() == h && l.f1.cols() == d && l.c1.size() == h &&
                    l.f2.rows() == d && l.f2.cols() == h && l.c2.size() == d;
    if (!ok) throw Error(ErrorCode::DimensionMismatch, "ViG layer shapes are inconsistent");
  }
  bool finite = true;
  for_each_block(*this, [&](const auto& b) { finite = finite && b.allFinite(); });
  if (!finite) throw Error(ErrorCode::NonFiniteValue, "ViG parameters");
}

std::vector<double> ViGModel::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for_each_block(*this, [&](const auto& b) { for_each_entry(b, [&](const double& x) { out.push_back(x); }); });
  return out;
}

void ViGModel::assign(const std::vector<double>& values) {
  if (values.size() != parameter_count()) throw Error(ErrorCode::LengthMismatch, "ViG parameter vector");
  std::size_t i = 0;
  for_each_block(*this, [&](auto& b) { for_each_entry(b, [&](double& x) { x = values[i++]; }); });
}

std::size_t ViGModel::parameter_count() const {
  std::size_t n = 0;
  for_each_block(*this, [&](const auto& b) { n += static_cast<std::size_t>(b.size()); });
  return n;
}

void ViGModel::add_scaled(const ViGModel& other, double scale) {
  if (other.layers.size() != layers.size()) throw Error(ErrorCode::DimensionMismatch, "ViG layer count");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    const auto& o = other.layers[i];
    l.w1 += scale * o.w1;
    l.b1 += scale * o.b1;
    l.w2 += scale * o.w2;
    l.b2 += scale * o.b2;
    l.f1 += scale * o.f1;
    l.c1 += scale * o.c1;
    l.f2 += scale * o.f2;
    l.c2 += scale * o.c2;
  }
  head_w += scale * other.head_w;
  head_b += scale * other.head_b;
}

void EnergyConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::InvalidArgument, "energy temperature must be > 0");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::InvalidArgument, "energy lambda must be >= 0");
  if (std::isnan(margin_in)) throw Error(ErrorCode::InvalidArgument, "energy margin is NaN");
}

Eigen::MatrixXd grapher_forward(const Eigen::MatrixXd& nodes, const Adjacency& in_neighbors, const GrapherLayer& layer) {
  return layer_forward(nodes, in_neighbors, layer).out;
}

Eigen::MatrixXd vig_forward(const Eigen::MatrixXd& nodes, const Adjacency& in_neighbors, const ViGModel& model) {
  Eigen::MatrixXd h = nodes;
  for (const auto& l : model.layers) h = grapher_forward(h, in_neighbors, l);
  return h;
}

Eigen::MatrixXd vig_forward(const MultiModalGraph& graph, const ViGModel& model) {
  return vig_forward(graph.node_features(), graph.in_neighbors(), model);
}

Eigen::VectorXd pool_patches(const Eigen::MatrixXd& node_reps, std::size_t patch_count, Pooling pooling) {
  if (patch_count == 0 || patch_count > static_cast<std::size_t>(node_reps.cols())) {
    throw Error(ErrorCode::OutOfRange, "patch count " + std::to_string(patch_count));
  }
  const auto block = node_reps.leftCols(static_cast<Eigen::Index>(patch_count));
  if (pooling == Pooling::Mean) return block.rowwise().mean();
  return block.rowwise().maxCoeff();
}

Eigen::VectorXd head_logits(const Eigen::VectorXd& pooled, const ViGModel& model) {
  return model.head_w * pooled + model.head_b;
}

double energy(const Eigen::VectorXd& logits, double temperature) {
  if (!(temperature > 0.0)) throw Error(ErrorCode::InvalidArgument, "energy temperature must be > 0");
  if (logits.size() == 0) throw Error(ErrorCode::EmptySet, "energy of an empty logit vector");
  return -temperature * log_sum_exp(logits / temperature);
}

Eigen::VectorXd vig_logits(const MultiModalGraph& graph, const ViGModel& model, Pooling pooling) {
  return head_logits(pool_patches(vig_forward(graph, model), graph.patch_count(), pooling), model);
}

ViGLoss loss_from_logits(const Eigen::VectorXd& logits, std::size_t label, const EnergyConfig& config) {
  config.validate();
  if (label >= static_cast<std::size_t>(logits.size())) throw Error(ErrorCode::OutOfRange, "label");
  ViGLoss out;
  out.logits = logits;
  out.ce = log_sum_exp(logits) - logits[static_cast<Eigen::Index>(label)];
  out.energy = energy(logits, config.temperature);
  const double excess = std::max(0.0, out.energy - config.margin_in);
  out.energy_term = config.lambda * excess * excess;
  out.total = out.ce + out.energy_term;
  return out;
}

ViGLoss vig_loss(const MultiModalGraph& graph, std::size_t label, const ViGModel& model, const EnergyConfig& config,
                 Pooling pooling) {
  check_label(label, model);
  return loss_from_logits(vig_logits(graph, model, pooling), label, config);
}

namespace {

ViGGradients gradients_with(const Eigen::MatrixXd& nodes, const Adjacency& nbrs, std::size_t patch_count,
                            std::size_t label, const ViGModel& model, const EnergyConfig& config, Pooling pooling) {
  check_label(label, model);
  std::vector<LayerCache> caches;
  caches.reserve(model.layers.size());
  Eigen::MatrixXd h = nodes;
  for (const auto& l : model.layers) {
    caches.push_back(layer_forward(h, nbrs, l));
    h = caches.back().out;
  }
  const Eigen::VectorXd pooled = pool_patches(h, patch_count, pooling);
  const Eigen::VectorXd logits = head_logits(pooled, model);

  ViGGradients out{ViGModel::zeros(model.dim(), model.hidden_dim(), model.num_layers(), model.num_classes()),
                   Eigen::MatrixXd::Zero(nodes.rows(), nodes.cols()), loss_from_logits(logits, label, config)};

  // dCE/dz = softmax(z) - onehot;  dE/dz = -softmax(z/T)
  Eigen::VectorXd g_logits = softmax(logits);
  g_logits[static_cast<Eigen::Index>(label)] -= 1.0;
  const double excess = std::max(0.0, out.loss.energy - config.margin_in);
  if (excess > 0.0 && config.lambda > 0.0) {
    g_logits -= 2.0 * config.lambda * excess * softmax(logits / config.temperature);
  }

  out.d_model.head_w = g_logits * pooled.transpose();
  out.d_model.head_b = g_logits;
  const Eigen::VectorXd g_pooled = model.head_w.transpose() * g_logits;

  Eigen::MatrixXd g_h = Eigen::MatrixXd::Zero(h.rows(), h.cols());
  pool_backward(h, patch_count, pooling, g_pooled, g_h);
  for (std::size_t i = model.layers.size(); i-- > 0;) {
    g_h = layer_backward(caches[i], model.layers[i], g_h, out.d_model.layers[i]);
  }
  out.d_nodes = std::move(g_h);
  return out;
}

}  // namespace

ViGGradients vig_gradients(const MultiModalGraph& graph, std::size_t label, const ViGModel& model,
                           const EnergyConfig& config, Pooling pooling) {
  return gradients_with(graph.node_features(), graph.in_neighbors(), graph.patch_count(), label, model, config,
                        pooling);
}

ViGTrainResult train_vig(const std::vector<LabeledGraph>& data, ViGModel model, const ViGTrainConfig& config) {
  model.validate();
  config.energy.validate();
  if (!(config.learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be > 0");

  struct Prepared {
    Eigen::MatrixXd nodes;
    Adjacency nbrs;
    std::size_t patches;
    std::size_t label;
  };
  std::vector<Prepared> prepared;
  prepared.reserve(data.size());
  for (const auto& item : data) {
    if (item.graph.dim() != model.dim()) {
      throw Error(ErrorCode::DimensionMismatch, "graph dimension " + std::to_string(item.graph.dim()) +
                                                    " vs model dimension " + std::to_string(model.dim()));
    }
    check_label(item.label, model);
    prepared.push_back({item.graph.node_features(), item.graph.in_neighbors(), item.graph.patch_count(), item.label});
  }

  ViGTrainResult result{std::move(model), {}};
  const double inv = data.empty() ? 0.0 : 1.0 / static_cast<double>(data.size());
  for (std::size_t epoch = 0; epoch <= config.epochs; ++epoch) {
    ViGModel grad = ViGModel::zeros(result.model.dim(), result.model.hidden_dim(), result.model.num_layers(),
                                    result.model.num_classes());
    ViGEpoch stats{epoch, 0.0, 0.0, 0.0, 0.0};
    for (const auto& p : prepared) {
      const ViGGradients g =
          gradients_with(p.nodes, p.nbrs, p.patches, p.label, result.model, config.energy, config.pooling);
      grad.add_scaled(g.d_model, inv);
      stats.loss += g.loss.total * inv;
      stats.ce += g.loss.ce * inv;
      stats.energy_term += g.loss.energy_term * inv;
      if (static_cast<std::size_t>(argmax(g.loss.logits)) == p.label) stats.accuracy += inv;
    }
    result.trace.push_back(stats);
    if (epoch < config.epochs) result.model.add_scaled(grad, -config.learning_rate);
  }
  return result;
}

std::string vig_trace_csv(const std::vector<ViGEpoch>& trace) {
  std::string out = "epoch,loss,ce,energy_term,accuracy\n";
  for (const auto& t : trace) out += fmt::format("{},{},{},{},{}\n", t.epoch, t.loss, t.ce, t.energy_term, t.accuracy);
  return out;
}

std::size_t write_vig(const ViGModel& model, std::ostream& out) {
  model.validate();
  detail::ByteWriter w;
  w.magic("PVIG");
  w.u32(kPvigVersion);
  w.u32(static_cast<std::uint32_t>(model.dim()));
  w.u32(static_cast<std::uint32_t>(model.hidden_dim()));
  w.u32(static_cast<std::uint32_t>(model.num_layers()));
  w.u32(static_cast<std::uint32_t>(model.num_classes()));
  for (double x : model.flatten()) w.f32(static_cast<float>(x));
  return w.flush(out);
}

ViGModel read_vig(std::istream& in) {
  auto r = detail::ByteReader::slurp(in);
  r.expect_magic("PVIG");
  const std::uint32_t version = r.u32("header");
  if (version != kPvigVersion) throw Error(ErrorCode::BadVersion, "PVIG version " + std::to_string(version));
  const std::uint32_t d = r.u32("header");
  const std::uint32_t h = r.u32("header");
  const std::uint32_t layers = r.u32("header");
  const std::uint32_t classes = r.u32("header");
  if (d == 0 || h < d || layers == 0 || classes == 0) throw Error(ErrorCode::InvalidRecord, "PVIG header shape");
  const std::size_t per_layer = 2ull * d * d + d + 1ull * d * d + d + 2ull * h * d + h + d;
  const std::size_t count = per_layer * layers + 1ull * classes * d + classes;
  r.require(count * 4, "ViG parameters");
  ViGModel m = ViGModel::zeros(d, h, layers, classes);
  std::vector<double> values(count);
  for (auto& v : values) v = r.f32("ViG parameters");
  r.expect_end();
  m.assign(values);
  m.validate();
  return m;
}

void save_vig(const ViGModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  write_vig(model, out);
}

ViGModel load_vig(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  return read_vig(in);
}

}  // namespace pnps
