#include "pnps/adapter.hpp"

#include "binary_io.hpp"
#include "pnps/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace pnps {
namespace {

constexpr std::uint32_t kPadpVersion = 1;

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::Index col(std::size_t flat) { return static_cast<Eigen::Index>(flat - 1); }

// Similarity logits <ĥI, ĥ(t^{c+}_n)>/τ for every category, c-major.
Eigen::VectorXd positive_logits(const Eigen::VectorXd& image_rep, const PromptReps& reps, double tau) {
  const std::size_t n = reps.layout.n();
  Eigen::VectorXd logits(static_cast<Eigen::Index>(reps.layout.num_categories() * n));
  for (std::size_t c = 0; c < reps.layout.num_categories(); ++c) {
    logits.segment(static_cast<Eigen::Index>(c * n), static_cast<Eigen::Index>(n)) =
        reps.of(c).leftCols(static_cast<Eigen::Index>(n)).transpose() * image_rep / tau;
  }
  return logits;
}

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorCode::InvalidArgument, "temperature must be > 0");
}

void check_batch(const AdapterBatch& batch, const PromptReps& raw, const AdapterState& state) {
  const auto d = static_cast<Eigen::Index>(state.dim());
  if (raw.dim() != state.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "prompt dimension " + std::to_string(raw.dim()) +
                                                  " vs adapter dimension " + std::to_string(state.dim()));
  }
  if (batch.size() > 0 && batch.images.rows() != d) {
    throw Error(ErrorCode::DimensionMismatch, "image dimension " + std::to_string(batch.images.rows()) +
                                                  " vs adapter dimension " + std::to_string(state.dim()));
  }
  if (static_cast<std::size_t>(batch.images.cols()) != batch.labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "batch images and labels differ in length");
  }
  for (auto y : batch.labels) {
    if (y >= raw.layout.num_categories()) throw Error(ErrorCode::OutOfRange, "batch label " + std::to_string(y));
  }
}

Eigen::MatrixXd normalize_columns(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) out.col(j) = l2_normalize(m.col(j));
  return out;
}

}  // namespace

AdapterState AdapterState::identity(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return {Eigen::MatrixXd::Identity(d, d), Eigen::MatrixXd::Identity(d, d)};
}

AdapterState AdapterState::perturbed_identity(std::size_t dim, double noise_scale, std::uint64_t seed) {
  AdapterState s = identity(dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, noise_scale);
  for (auto* w : {&s.w_text, &s.w_image}) {
    for (Eigen::Index i = 0; i < w->rows(); ++i) {
      for (Eigen::Index j = 0; j < w->cols(); ++j) (*w)(i, j) += normal(rng);
    }
  }
  return s;
}

void AdapterState::validate() const {
  if (w_text.rows() == 0 || w_text.rows() != w_text.cols() || w_image.rows() != w_text.rows() ||
      w_image.cols() != w_text.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "adapters must be two non-empty d x d matrices");
  }
  if (!w_text.allFinite() || !w_image.allFinite()) throw Error(ErrorCode::NonFiniteValue, "adapter entries");
}

Eigen::VectorXd transform(const AdapterState& state, const Eigen::VectorXd& raw, Side side) {
  const Eigen::MatrixXd& w = side == Side::Text ? state.w_text : state.w_image;
  if (raw.size() != w.cols()) throw Error(ErrorCode::DimensionMismatch, "transform input dimension");
  return l2_normalize(w * raw);
}

std::size_t PromptReps::dim() const { return by_category.empty() ? 0 : static_cast<std::size_t>(by_category.front().rows()); }

PromptReps prompt_reps_from_table(const EmbeddingTable& table, const PromptLayout& layout) {
  PromptReps reps{layout, {}};
  const auto d = static_cast<Eigen::Index>(table.dim());
  for (std::size_t c = 0; c < layout.num_categories(); ++c) {
    Eigen::MatrixXd m(d, static_cast<Eigen::Index>(layout.prompt_count(c)));
    for (std::size_t flat = 1; flat <= layout.prompt_count(c); ++flat) {
      const std::string name = prompt_record_name(layout.category(c), flat);
      const EmbeddingRecord* r = table.find(name);
      if (!r) throw Error(ErrorCode::MissingCategory, "prompt table lacks record '" + name + "'");
      if (r->modality != Modality::TextPrompt) {
        throw Error(ErrorCode::InvalidRecord, "record '" + name + "' is not a TextPrompt");
      }
      m.col(col(flat)) = r->vector(0);
    }
    reps.by_category.push_back(std::move(m));
  }
  return reps;
}

PromptReps transform_prompts(const AdapterState& state, const PromptReps& raw) {
  PromptReps out{raw.layout, {}};
  for (const auto& m : raw.by_category) {
    if (m.rows() != state.w_text.cols()) throw Error(ErrorCode::DimensionMismatch, "prompt dimension");
    out.by_category.push_back(normalize_columns(state.w_text * m));
  }
  return out;
}

Eigen::VectorXd positive_probabilities(const Eigen::VectorXd& image_rep, const PromptReps& reps, double tau) {
  check_tau(tau);
  const std::size_t n = reps.layout.n();
  const Eigen::VectorXd logits = positive_logits(image_rep, reps, tau);
  const double total = log_sum_exp(logits);
  Eigen::VectorXd probs(static_cast<Eigen::Index>(reps.layout.num_categories()));
  for (std::size_t c = 0; c < reps.layout.num_categories(); ++c) {
    probs[static_cast<Eigen::Index>(c)] =
        std::exp(log_sum_exp(logits.segment(static_cast<Eigen::Index>(c * n), static_cast<Eigen::Index>(n))) - total);
  }
  return probs;
}

double match_prob_positive(const Eigen::VectorXd& image_rep, const PromptReps& reps, std::size_t target, double tau) {
  if (target >= reps.layout.num_categories()) throw Error(ErrorCode::OutOfRange, "target category");
  return positive_probabilities(image_rep, reps, tau)[static_cast<Eigen::Index>(target)];
}

double s_minus(const Eigen::VectorXd& image_rep, const PromptReps& reps, std::size_t image_category,
               std::size_t sibling, std::size_t position) {
  const double own = image_rep.dot(reps.negative(image_category, sibling, position));
  const double other = image_rep.dot(reps.negative(sibling, image_category, position));
  return logistic(own - other);
}

double p_minus(const Eigen::VectorXd& image_rep, const PromptReps& reps, std::size_t image_category) {
  const auto& sib = reps.layout.siblings(image_category);
  if (sib.empty()) {
    throw Error(ErrorCode::EmptyNegativeSet, "category '" + reps.layout.category(image_category) +
                                                 "' is alone in its super-class");
  }
  double p = 0.0;
  for (std::size_t c : sib) {
    for (std::size_t n = 1; n <= reps.layout.n(); ++n) p += s_minus(image_rep, reps, image_category, c, n);
  }
  return p;
}

double loss_pir(const Eigen::MatrixXd& image_reps, std::span<const std::size_t> labels, const PromptReps& reps,
                double tau) {
  if (labels.empty()) return 0.0;
  double sum = 0.0;
  const std::size_t n = reps.layout.n();
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const Eigen::VectorXd logits = positive_logits(image_reps.col(static_cast<Eigen::Index>(b)), reps, tau);
    const auto own = logits.segment(static_cast<Eigen::Index>(labels[b] * n), static_cast<Eigen::Index>(n));
    sum += log_sum_exp(logits) - log_sum_exp(own);
  }
  return sum / static_cast<double>(labels.size());
}

double loss_ppd(const PromptReps& reps) {
  double sum = 0.0;
  const auto n = static_cast<Eigen::Index>(reps.layout.n());
  for (const auto& m : reps.by_category) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) sum += std::abs(m.col(i).dot(m.col(j)));
    }
  }
  return sum;
}

double loss_nir(const Eigen::MatrixXd& image_reps, std::span<const std::size_t> labels, const PromptReps& reps) {
  if (labels.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const std::size_t y = labels[b];
    const std::size_t s = reps.layout.group_size(y);
    if (s < 2) continue;
    const double p = p_minus(image_reps.col(static_cast<Eigen::Index>(b)), reps, y);
    sum += -std::log(p) / static_cast<double>((s - 1) * reps.layout.n());
  }
  return sum / static_cast<double>(labels.size());
}

double loss_nnd(const PromptReps& reps) {
  double sum = 0.0;
  const std::size_t n = reps.layout.n();
  for (std::size_t c = 0; c < reps.layout.num_categories(); ++c) {
    const auto& m = reps.of(c);
    for (std::size_t d : reps.layout.siblings(c)) {
      const std::size_t first = reps.layout.flat_index(c, PromptKind::Negative, d, 1);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) sum += std::abs(m.col(col(first + i)).dot(m.col(col(first + j))));
      }
    }
  }
  return sum;
}

double loss_npd(const PromptReps& reps) {
  double sum = 0.0;
  for (std::size_t c = 0; c < reps.layout.num_categories(); ++c) {
    for (std::size_t d : reps.layout.siblings(c)) {
      for (std::size_t n = 1; n <= reps.layout.n(); ++n) {
        sum += std::abs(reps.positive(c, n).dot(reps.negative(d, c, n)));
      }
    }
  }
  return sum;
}

double mean_npd_cosine(const PromptReps& reps) {
  std::size_t pairs = 0;
  for (std::size_t c = 0; c < reps.layout.num_categories(); ++c) pairs += reps.layout.siblings(c).size();
  pairs *= reps.layout.n();
  return pairs == 0 ? 0.0 : loss_npd(reps) / static_cast<double>(pairs);
}

TermWeights TermWeights::only(LossTerm term) {
  TermWeights w{0.0, 0.0, 0.0, 0.0, 0.0};
  switch (term) {
    case LossTerm::Pir: w.pir = 1.0; break;
    case LossTerm::Ppd: w.ppd = 1.0; break;
    case LossTerm::Nir: w.nir = 1.0; break;
    case LossTerm::Nnd: w.nnd = 1.0; break;
    case LossTerm::Npd: w.npd = 1.0; break;
  }
  return w;
}

void LossWeights::validate() const {
  check_tau(tau);
  if (!(lambda_pos >= 0.0) || !(lambda_neg >= 0.0) || !(lambda_npd >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "loss weights must be >= 0");
  }
}

LossBreakdown total_adapter_loss(const AdapterBatch& batch, const PromptReps& raw_prompts,
                                 const AdapterState& state, const TermWeights& w, double tau) {
  check_tau(tau);
  check_batch(batch, raw_prompts, state);
  const PromptReps reps = transform_prompts(state, raw_prompts);
  const Eigen::MatrixXd images = normalize_columns(state.w_image * batch.images);

  LossBreakdown out;
  out.pir = loss_pir(images, batch.labels, reps, tau);
  out.ppd = loss_ppd(reps);
  out.nir = loss_nir(images, batch.labels, reps);
  out.nnd = loss_nnd(reps);
  out.npd = loss_npd(reps);
  out.total = w.pir * out.pir + w.ppd * out.ppd + w.nir * out.nir + w.nnd * out.nnd + w.npd * out.npd;
  return out;
}

LossBreakdown total_adapter_loss(const AdapterBatch& batch, const PromptReps& raw_prompts,
                                 const AdapterState& state, const LossWeights& weights) {
  weights.validate();
  return total_adapter_loss(batch, raw_prompts, state, weights.terms(), weights.tau);
}

AdapterGradient adapter_gradients(const AdapterBatch& batch, const PromptReps& raw, const AdapterState& state,
                                  const TermWeights& w, double tau) {
  check_tau(tau);
  check_batch(batch, raw, state);
  const PromptLayout& layout = raw.layout;
  const std::size_t n = layout.n();
  const std::size_t num_cat = layout.num_categories();
  const std::size_t batch_size = batch.size();
  const double inv_batch = batch_size == 0 ? 0.0 : 1.0 / static_cast<double>(batch_size);

  // Forward: pre-normalization outputs, their norms, unit representations.
  std::vector<Eigen::MatrixXd> text_pre(num_cat), text(num_cat), text_adj(num_cat);
  for (std::size_t c = 0; c < num_cat; ++c) {
    text_pre[c] = state.w_text * raw.of(c);
    text[c] = normalize_columns(text_pre[c]);
    text_adj[c] = Eigen::MatrixXd::Zero(text[c].rows(), text[c].cols());
  }
  const Eigen::MatrixXd image_pre = state.w_image * batch.images;
  const Eigen::MatrixXd image = normalize_columns(image_pre);
  Eigen::MatrixXd image_adj = Eigen::MatrixXd::Zero(image.rows(), image.cols());

  LossBreakdown loss;

  // pir: dL/dlogit(c,n) = softmax_all(c,n) - [c = y]·softmax_own(n)
  for (std::size_t b = 0; b < batch_size; ++b) {
    const auto bi = static_cast<Eigen::Index>(b);
    const std::size_t y = batch.labels[b];
    Eigen::VectorXd logits(static_cast<Eigen::Index>(num_cat * n));
    for (std::size_t c = 0; c < num_cat; ++c) {
      for (std::size_t k = 0; k < n; ++k) {
        logits[static_cast<Eigen::Index>(c * n + k)] = image.col(bi).dot(text[c].col(static_cast<Eigen::Index>(k))) / tau;
      }
    }
    const double lse_all = log_sum_exp(logits);
    const auto own = logits.segment(static_cast<Eigen::Index>(y * n), static_cast<Eigen::Index>(n));
    const double lse_own = log_sum_exp(own);
    loss.pir += (lse_all - lse_own) * inv_batch;
    if (w.pir == 0.0) continue;
    const double scale = w.pir * inv_batch / tau;
    for (std::size_t c = 0; c < num_cat; ++c) {
      for (std::size_t k = 0; k < n; ++k) {
        const auto idx = static_cast<Eigen::Index>(c * n + k);
        double g = std::exp(logits[idx] - lse_all);
        if (c == y) g -= std::exp(logits[idx] - lse_own);
        image_adj.col(bi) += scale * g * text[c].col(static_cast<Eigen::Index>(k));
        text_adj[c].col(static_cast<Eigen::Index>(k)) += scale * g * image.col(bi);
      }
    }
  }

  // Pairwise |<a, b>| penalty between two columns.
  auto abs_pair = [](const Eigen::MatrixXd& ma, Eigen::Index ia, Eigen::MatrixXd& ga, const Eigen::MatrixXd& mb,
                     Eigen::Index ib, Eigen::MatrixXd& gb, double weight) {
    const double ip = ma.col(ia).dot(mb.col(ib));
    const double g = weight * sign(ip);
    if (g != 0.0) {
      ga.col(ia) += g * mb.col(ib);
      gb.col(ib) += g * ma.col(ia);
    }
    return std::abs(ip);
  };

  // ppd
  for (std::size_t c = 0; c < num_cat; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        loss.ppd += abs_pair(text[c], static_cast<Eigen::Index>(i), text_adj[c], text[c], static_cast<Eigen::Index>(j),
                             text_adj[c], w.ppd);
      }
    }
  }

  // nir: d(-log p / k)/ds = -1/(k p); ds/d(own - other) = s(1 - s)
  for (std::size_t b = 0; b < batch_size; ++b) {
    const auto bi = static_cast<Eigen::Index>(b);
    const std::size_t y = batch.labels[b];
    const auto& sib = layout.siblings(y);
    if (sib.empty()) continue;
    const double norm = static_cast<double>(sib.size() * n);
    double p = 0.0;
    for (std::size_t c : sib) {
      for (std::size_t k = 1; k <= n; ++k) {
        const double own = image.col(bi).dot(text[y].col(col(layout.flat_index(y, PromptKind::Negative, c, k))));
        const double other = image.col(bi).dot(text[c].col(col(layout.flat_index(c, PromptKind::Negative, y, k))));
        p += logistic(own - other);
      }
    }
    loss.nir += -std::log(p) / norm * inv_batch;
    if (w.nir == 0.0) continue;
    const double dl_ds = -w.nir * inv_batch / (norm * p);
    for (std::size_t c : sib) {
      for (std::size_t k = 1; k <= n; ++k) {
        const Eigen::Index iy = col(layout.flat_index(y, PromptKind::Negative, c, k));
        const Eigen::Index ic = col(layout.flat_index(c, PromptKind::Negative, y, k));
        const double s = logistic(image.col(bi).dot(text[y].col(iy)) - image.col(bi).dot(text[c].col(ic)));
        const double g = dl_ds * s * (1.0 - s);
        image_adj.col(bi) += g * (text[y].col(iy) - text[c].col(ic));
        text_adj[y].col(iy) += g * image.col(bi);
        text_adj[c].col(ic) -= g * image.col(bi);
      }
    }
  }

  // nnd, npd
  for (std::size_t c = 0; c < num_cat; ++c) {
    for (std::size_t d : layout.siblings(c)) {
      const std::size_t first = layout.flat_index(c, PromptKind::Negative, d, 1);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          loss.nnd += abs_pair(text[c], col(first + i), text_adj[c], text[c], col(first + j), text_adj[c], w.nnd);
        }
      }
      for (std::size_t k = 1; k <= n; ++k) {
        loss.npd += abs_pair(text[c], col(k), text_adj[c], text[d], col(layout.flat_index(d, PromptKind::Negative, c, k)),
                             text_adj[d], w.npd);
      }
    }
  }

  loss.total = w.pir * loss.pir + w.ppd * loss.ppd + w.nir * loss.nir + w.nnd * loss.nnd + w.npd * loss.npd;

  // Backward through y -> y/|y| and y = W h:  dL/dy = (g - ĥ(ĥ·g)) / |y|,  dW += dL/dy hᵀ
  AdapterGradient out{Eigen::MatrixXd::Zero(state.w_text.rows(), state.w_text.cols()),
                      Eigen::MatrixXd::Zero(state.w_image.rows(), state.w_image.cols()), loss};
  auto backprop = [](const Eigen::MatrixXd& unit, const Eigen::MatrixXd& pre, const Eigen::MatrixXd& adj,
                     const Eigen::MatrixXd& input, Eigen::MatrixXd& dw) {
    for (Eigen::Index j = 0; j < unit.cols(); ++j) {
      const Eigen::VectorXd g = adj.col(j);
      const Eigen::VectorXd dy = (g - unit.col(j) * unit.col(j).dot(g)) / pre.col(j).norm();
      dw.noalias() += dy * input.col(j).transpose();
    }
  };
  for (std::size_t c = 0; c < num_cat; ++c) backprop(text[c], text_pre[c], text_adj[c], raw.of(c), out.d_text);
  backprop(image, image_pre, image_adj, batch.images, out.d_image);
  return out;
}

AdapterGradient adapter_gradients(const AdapterBatch& batch, const PromptReps& raw_prompts,
                                  const AdapterState& state, const LossWeights& weights) {
  weights.validate();
  return adapter_gradients(batch, raw_prompts, state, weights.terms(), weights.tau);
}

AdapterResult optimize_adapters(const AdapterBatch& batch, const PromptReps& raw_prompts,
                                const AdapterTrainConfig& config) {
  config.weights.validate();
  if (!(config.learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be > 0");
  if (raw_prompts.dim() == 0) throw Error(ErrorCode::DimensionMismatch, "empty prompt set");

  AdapterResult result{AdapterState::perturbed_identity(raw_prompts.dim(), config.init_noise, config.seed), {}};
  check_batch(batch, raw_prompts, result.state);
  result.trace.push_back(total_adapter_loss(batch, raw_prompts, result.state, config.weights));

  const std::size_t total = batch.size();
  const std::size_t step = config.batch_size == 0 || config.batch_size >= total ? std::max<std::size_t>(total, 1)
                                                                                 : config.batch_size;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t start = 0; start < std::max<std::size_t>(total, 1); start += step) {
      const std::size_t len = std::min(step, total - std::min(start, total));
      AdapterBatch slice{batch.images.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)),
                         std::vector<std::size_t>(batch.labels.begin() + static_cast<std::ptrdiff_t>(start),
                                                  batch.labels.begin() + static_cast<std::ptrdiff_t>(start + len))};
      const AdapterGradient g = adapter_gradients(slice, raw_prompts, result.state, config.weights);
      result.state.w_text -= config.learning_rate * g.d_text;
      result.state.w_image -= config.learning_rate * g.d_image;
    }
    result.trace.push_back(total_adapter_loss(batch, raw_prompts, result.state, config.weights));
  }
  return result;
}

std::string adapter_trace_csv(const std::vector<LossBreakdown>& trace) {
  std::string out = "epoch,l_pir,l_ppd,l_nir,l_nnd,l_npd,total\n";
  for (std::size_t e = 0; e < trace.size(); ++e) {
    const auto& t = trace[e];
    out += fmt::format("{},{},{},{},{},{},{}\n", e, t.pir, t.ppd, t.nir, t.nnd, t.npd, t.total);
  }
  return out;
}

std::size_t write_adapters(const AdapterState& state, std::ostream& out) {
  state.validate();
  detail::ByteWriter w;
  w.magic("PADP");
  w.u32(kPadpVersion);
  w.u32(static_cast<std::uint32_t>(state.dim()));
  for (const auto* m : {&state.w_text, &state.w_image}) {
    for (Eigen::Index i = 0; i < m->rows(); ++i) {
      for (Eigen::Index j = 0; j < m->cols(); ++j) w.f32(static_cast<float>((*m)(i, j)));
    }
  }
  return w.flush(out);
}

AdapterState read_adapters(std::istream& in) {
  auto r = detail::ByteReader::slurp(in);
  r.expect_magic("PADP");
  const std::uint32_t version = r.u32("header");
  if (version != kPadpVersion) throw Error(ErrorCode::BadVersion, "PADP version " + std::to_string(version));
  const std::uint32_t dim = r.u32("header");
  if (dim == 0) throw Error(ErrorCode::InvalidRecord, "PADP dimension is zero");
  r.require(static_cast<std::size_t>(dim) * dim * 8, "adapter matrices");
  AdapterState s = AdapterState::identity(dim);
  for (auto* m : {&s.w_text, &s.w_image}) {
    for (Eigen::Index i = 0; i < m->rows(); ++i) {
      for (Eigen::Index j = 0; j < m->cols(); ++j) (*m)(i, j) = r.f32("adapter matrices");
    }
  }
  r.expect_end();
  s.validate();
  return s;
}

void save_adapters(const AdapterState& state, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  write_adapters(state, out);
}

AdapterState load_adapters(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  return read_adapters(in);
}

}  // namespace pnps
