#include "pnps/adapter.hpp"

#include "helpers.hpp"

#include <cmath>

using namespace pnps;
using testing::code_of;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Partition helper: one group per entry, sizes as given, categories k0, k1, ...
SuperClassPartition groups_of(std::initializer_list<int> sizes) {
  SuperClassPartition p;
  int next = 0;
  int g = 0;
  for (int s : sizes) {
    SuperClass sc{"g" + std::to_string(g++), {}};
    for (int i = 0; i < s; ++i) sc.members.push_back("k" + std::to_string(next++));
    p.groups.push_back(sc);
  }
  return p;
}

PromptReps reps_from(const PromptLayout& layout, std::vector<Eigen::MatrixXd> cols) {
  return PromptReps{layout, std::move(cols)};
}

// ---- scalar oracles written from the loss definitions ----

struct Oracle {
  const PromptLayout& layout;
  const std::vector<Eigen::MatrixXd>& t;  // unit columns per category

  std::vector<std::size_t> siblings(std::size_t c) const {
    std::vector<std::size_t> out;
    for (std::size_t d = 0; d < layout.num_categories(); ++d) {
      if (d != c && layout.group_of(d) == layout.group_of(c)) out.push_back(d);
    }
    return out;
  }
  Eigen::VectorXd pos(std::size_t c, std::size_t n) const { return t[c].col(static_cast<Eigen::Index>(n - 1)); }
  Eigen::VectorXd neg(std::size_t c, std::size_t d, std::size_t n) const {
    const auto sib = siblings(c);
    const std::size_t r = static_cast<std::size_t>(std::find(sib.begin(), sib.end(), d) - sib.begin()) + 1;
    return t[c].col(static_cast<Eigen::Index>(r * layout.n() + n - 1));
  }

  double pir(const Eigen::MatrixXd& images, const std::vector<std::size_t>& labels, double tau) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const Eigen::VectorXd x = images.col(static_cast<Eigen::Index>(i));
      double num = 0.0;
      double den = 0.0;
      for (std::size_t c = 0; c < layout.num_categories(); ++c) {
        for (std::size_t n = 1; n <= layout.n(); ++n) {
          const double e = std::exp(x.dot(pos(c, n)) / tau);
          den += e;
          if (c == labels[i]) num += e;
        }
      }
      sum += -std::log(num / den);
    }
    return sum / static_cast<double>(labels.size());
  }
  double ppd() const {
    double s = 0.0;
    for (std::size_t c = 0; c < layout.num_categories(); ++c)
      for (std::size_t i = 1; i <= layout.n(); ++i)
        for (std::size_t j = i + 1; j <= layout.n(); ++j) s += std::abs(pos(c, i).dot(pos(c, j)));
    return s;
  }
  double nir(const Eigen::MatrixXd& images, const std::vector<std::size_t>& labels) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const std::size_t y = labels[i];
      const auto sib = siblings(y);
      if (sib.empty()) continue;
      const Eigen::VectorXd x = images.col(static_cast<Eigen::Index>(i));
      double p = 0.0;
      for (std::size_t c : sib)
        for (std::size_t n = 1; n <= layout.n(); ++n) p += sigmoid(x.dot(neg(y, c, n)) - x.dot(neg(c, y, n)));
      sum += -std::log(p) / static_cast<double>(sib.size() * layout.n());
    }
    return sum / static_cast<double>(labels.size());
  }
  double nnd() const {
    double s = 0.0;
    for (std::size_t c = 0; c < layout.num_categories(); ++c)
      for (std::size_t d : siblings(c))
        for (std::size_t i = 1; i <= layout.n(); ++i)
          for (std::size_t j = i + 1; j <= layout.n(); ++j) s += std::abs(neg(c, d, i).dot(neg(c, d, j)));
    return s;
  }
  double npd() const {
    double s = 0.0;
    for (std::size_t c = 0; c < layout.num_categories(); ++c)
      for (std::size_t d : siblings(c))
        for (std::size_t n = 1; n <= layout.n(); ++n) s += std::abs(pos(c, n).dot(neg(d, c, n)));
    return s;
  }
};

struct RandomInstance {
  PromptLayout layout;
  PromptReps raw;
  AdapterBatch batch;
  AdapterState state;
};

RandomInstance random_instance(std::mt19937_64& rng, std::size_t d, std::initializer_list<int> sizes, std::size_t n) {
  PromptLayout layout(groups_of(sizes), n);
  std::vector<Eigen::MatrixXd> cols;
  for (std::size_t c = 0; c < layout.num_categories(); ++c) {
    cols.push_back(testing::gaussian(rng, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(layout.prompt_count(c))));
  }
  AdapterBatch batch{testing::gaussian(rng, static_cast<Eigen::Index>(d), 5), {}};
  for (int i = 0; i < 5; ++i) batch.labels.push_back(static_cast<std::size_t>(i) % layout.num_categories());
  return {layout, PromptReps{layout, cols}, batch, AdapterState::perturbed_identity(d, 0.4, rng())};
}

double directional(const std::function<double(const AdapterState&)>& f, const AdapterState& s,
                   const AdapterState& dir, double h) {
  AdapterState up = s;
  AdapterState down = s;
  up.w_text += h * dir.w_text;
  up.w_image += h * dir.w_image;
  down.w_text -= h * dir.w_text;
  down.w_image -= h * dir.w_image;
  return (f(up) - f(down)) / (2 * h);
}

}  // namespace

TEST_SUITE("adapter") {
  TEST_CASE("transform") {
    const auto id = AdapterState::identity(2);
    CHECK((transform(id, testing::vec({0.6, 0.8}), Side::Text) - testing::vec({0.6, 0.8})).norm() < 1e-15);
    AdapterState twice = id;
    twice.w_image *= 2.0;
    CHECK((transform(twice, testing::vec({0.6, 0.8}), Side::Image) - testing::vec({0.6, 0.8})).norm() < 1e-15);
    AdapterState rot = id;
    rot.w_text << 0, -1, 1, 0;
    CHECK((transform(rot, testing::vec({1, 0}), Side::Text) - testing::vec({0, 1})).norm() < 1e-15);
    CHECK(code_of([&] { transform(id, testing::vec({0, 0}), Side::Text); }) == ErrorCode::ZeroVector);
    CHECK(code_of([&] { transform(id, testing::vec({1, 0, 0}), Side::Text); }) == ErrorCode::DimensionMismatch);
  }

  TEST_CASE("positive match probability") {
    // Two singleton categories, N = 1: sims (1, 0).
    const PromptLayout two(groups_of({1, 1}), 1);
    const auto reps = reps_from(two, {testing::vec({1, 0}), testing::vec({0, 1})});
    const Eigen::VectorXd x = testing::vec({1, 0});
    const double e = std::exp(1.0);
    CHECK(match_prob_positive(x, reps, 0, 1.0) == doctest::Approx(e / (e + 1)).epsilon(1e-12));
    CHECK(match_prob_positive(x, reps, 1, 1.0) == doctest::Approx(1 / (e + 1)).epsilon(1e-12));
    CHECK(match_prob_positive(x, reps, 0, 1.0) == doctest::Approx(0.7311).epsilon(1e-4));

    const PromptLayout one(groups_of({1}), 3);
    std::mt19937_64 rng(1);
    const auto single = reps_from(one, {testing::gaussian(rng, 2, 3).colwise().normalized()});
    CHECK(match_prob_positive(x, single, 0, 0.01) == doctest::Approx(1.0).epsilon(1e-12));

    // Identical positives everywhere: uniform.
    const PromptLayout ten(groups_of({4, 3, 3}), 2);
    std::vector<Eigen::MatrixXd> cols;
    for (std::size_t c = 0; c < 10; ++c) cols.push_back(Eigen::MatrixXd::Constant(2, static_cast<Eigen::Index>(ten.prompt_count(c)), std::sqrt(0.5)));
    const auto uniform = reps_from(ten, cols);
    const auto probs = positive_probabilities(x, uniform, 0.01);
    for (Eigen::Index c = 0; c < probs.size(); ++c) CHECK(probs[c] == doctest::Approx(0.1).epsilon(1e-12));

    Eigen::MatrixXd images(2, 10);
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < 10; ++i) {
      images.col(static_cast<Eigen::Index>(i)) = x;
      labels.push_back(i);
    }
    CHECK(loss_pir(images, labels, uniform, 0.01) == doctest::Approx(std::log(10.0)).epsilon(1e-12));

    // p⁺ = 0.5 for both samples gives log 2.
    const auto half = reps_from(two, {testing::vec({1, 0}), testing::vec({1, 0})});
    Eigen::MatrixXd two_images(2, 2);
    two_images << 1, 0, 0, 1;
    const std::vector<std::size_t> two_labels = {0, 1};
    CHECK(loss_pir(two_images, two_labels, half, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // Near-perfect match drives the loss to 0.
    const std::vector<std::size_t> first = {0};
    CHECK(loss_pir(x, first, reps, 0.01) < 1e-40);
  }

  TEST_CASE("positive prompt decorrelation") {
    const PromptLayout one(groups_of({1}), 2);
    Eigen::MatrixXd same(2, 2);
    same << 1, 1, 0, 0;
    CHECK(loss_ppd(reps_from(one, {same})) == doctest::Approx(1.0).epsilon(1e-15));

    const PromptLayout three(groups_of({1}), 3);
    Eigen::MatrixXd cos_half(3, 3);
    cos_half << 1, 1, 0, 1, 0, 1, 0, 1, 1;
    cos_half /= std::sqrt(2.0);
    CHECK(loss_ppd(reps_from(three, {cos_half})) == doctest::Approx(1.5).epsilon(1e-12));

    CHECK(loss_ppd(reps_from(three, {Eigen::MatrixXd::Identity(3, 3)})) == 0.0);
  }

  TEST_CASE("negative match") {
    // Group {A, B}, N = 1. Columns: A = [A+, A-B], B = [B+, B-A].
    const PromptLayout ab(groups_of({2}), 1);
    Eigen::MatrixXd a(3, 2);
    Eigen::MatrixXd b(3, 2);
    a.col(0) = testing::basis(3, 2);  // A+
    a.col(1) = testing::basis(3, 0);  // A-B
    b.col(0) = testing::basis(3, 2);  // B+
    b.col(1) = testing::basis(3, 1);  // B-A
    const auto reps = reps_from(ab, {a, b});
    const Eigen::VectorXd x = testing::basis(3, 0);
    const double e = std::exp(1.0);
    CHECK(s_minus(x, reps, 0, 1, 1) == doctest::Approx(e / (e + 1)).epsilon(1e-12));
    CHECK(s_minus(x, reps, 1, 0, 1) == doctest::Approx(1 / (e + 1)).epsilon(1e-12));
    CHECK(s_minus(x, reps, 0, 1, 1) + s_minus(x, reps, 1, 0, 1) == doctest::Approx(1.0).epsilon(1e-15));

    const Eigen::VectorXd orth = testing::basis(3, 2);
    CHECK(s_minus(orth, reps, 0, 1, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p_minus(orth, reps, 0) == doctest::Approx(0.5).epsilon(1e-15));
    const std::vector<std::size_t> label0 = {0};
    CHECK(loss_nir(orth, label0, reps) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // s = 3, N = 2, all s⁻ = 0.5 -> p⁻ = 2.
    const PromptLayout abc(groups_of({3}), 2);
    std::vector<Eigen::MatrixXd> cols(3, Eigen::MatrixXd::Constant(3, 6, 1.0 / std::sqrt(3.0)));
    const auto flat = reps_from(abc, cols);
    CHECK(p_minus(testing::basis(3, 0), flat, 1) == doctest::Approx(2.0).epsilon(1e-15));

    // s = 3, N = 1 with each s⁻ = σ(2): loss = -log(2σ(2)) / 2.
    const PromptLayout abc1(groups_of({3}), 1);
    std::vector<Eigen::MatrixXd> sharp(3, Eigen::MatrixXd::Zero(3, 3));
    const Eigen::VectorXd y = testing::basis(3, 0);
    for (std::size_t c = 0; c < 3; ++c) sharp[c].col(0) = testing::basis(3, 2);
    sharp[0].col(1) = y;  // 0-1
    sharp[0].col(2) = y;  // 0-2
    sharp[1].col(1) = -y; // 1-0
    sharp[1].col(2) = testing::basis(3, 1);
    sharp[2].col(1) = -y; // 2-0
    sharp[2].col(2) = testing::basis(3, 1);
    const auto sharp_reps = reps_from(abc1, sharp);
    CHECK(loss_nir(y, label0, sharp_reps) == doctest::Approx(-std::log(2 * sigmoid(2.0)) / 2).epsilon(1e-12));
    CHECK(loss_nir(y, label0, sharp_reps) < 0.0);

    // Singleton super-class: no negatives.
    const PromptLayout solo(groups_of({1, 2}), 1);
    std::vector<Eigen::MatrixXd> scols = {testing::basis(3, 0), Eigen::MatrixXd::Identity(3, 2), Eigen::MatrixXd::Identity(3, 2)};
    const auto sreps = reps_from(solo, scols);
    CHECK(code_of([&] { p_minus(y, sreps, 0); }) == ErrorCode::EmptyNegativeSet);
    CHECK(loss_nir(y, label0, sreps) == 0.0);
  }

  TEST_CASE("negative decorrelation and boundary terms") {
    const PromptLayout ab(groups_of({2}), 3);
    // Category A's three negatives (borrowing from B) with pairwise cosine 0.2.
    Eigen::Matrix3d gram;
    gram << 1, 0.2, 0.2, 0.2, 1, 0.2, 0.2, 0.2, 1;
    const Eigen::Matrix3d chol = gram.llt().matrixU();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(9, 6);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(9, 6);
    a.block(0, 3, 3, 3) = chol;
    for (int i = 0; i < 3; ++i) {
      b(3 + i, 3 + i) = 1;  // B-A orthonormal
      a(6 + i, i) = 1;      // positives orthonormal and orthogonal to everything else
      b(6 + i, i) = 1;
    }
    // Make positive/negative pairs orthogonal: A+ (e6..e8) vs B-A (e3..e5),
    // B+ (e6..e8) vs A-B (span e0..e2). Positives of A and B coincide, which
    // only the cross-category terms would see.
    const auto reps = reps_from(ab, {a, b});
    CHECK(loss_nnd(reps) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(loss_npd(reps) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(loss_ppd(reps) == 0.0);

    const PromptLayout ab1(groups_of({2}), 1);
    Eigen::MatrixXd pa(2, 2);
    Eigen::MatrixXd pb(2, 2);
    pa.col(0) = testing::vec({1, 0});
    pa.col(1) = testing::vec({0, 1});                        // A-B ⟂ B+
    pb.col(0) = testing::vec({1, 0});                        // B+
    pb.col(1) = testing::vec({-0.4, std::sqrt(1 - 0.16)});   // B-A, cos(A+, B-A) = -0.4
    const auto pairs = reps_from(ab1, {pa, pb});
    CHECK(loss_npd(pairs) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(mean_npd_cosine(pairs) == doctest::Approx(0.2).epsilon(1e-12));

    const PromptLayout two_neg(groups_of({2}), 2);
    Eigen::MatrixXd c0 = Eigen::MatrixXd::Zero(4, 4);
    Eigen::MatrixXd c1 = Eigen::MatrixXd::Zero(4, 4);
    c0(0, 0) = c0(1, 1) = 1;
    c0(2, 2) = c0(2, 3) = 1;  // identical negatives
    c1(0, 0) = c1(1, 1) = 1;
    c1(3, 2) = 1;
    c1(0, 3) = 1;
    const auto ident = reps_from(two_neg, {c0, c1});
    CHECK(loss_nnd(ident) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("orthogonal prompt sets zero the decorrelation terms") {
    const PromptLayout layout(groups_of({3, 2, 1}), 2);
    std::size_t total = 0;
    for (std::size_t c = 0; c < layout.num_categories(); ++c) total += layout.prompt_count(c);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(total));
    std::vector<Eigen::MatrixXd> cols;
    Eigen::Index at = 0;
    for (std::size_t c = 0; c < layout.num_categories(); ++c) {
      const auto k = static_cast<Eigen::Index>(layout.prompt_count(c));
      cols.push_back(eye.middleCols(at, k));
      at += k;
    }
    const auto reps = reps_from(layout, cols);
    CHECK(loss_ppd(reps) == 0.0);
    CHECK(loss_nnd(reps) == 0.0);
    CHECK(loss_npd(reps) == 0.0);
  }

  TEST_CASE("losses agree with scalar oracles") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 25; ++trial) {
      CAPTURE(trial);
      auto inst = random_instance(rng, 6, {3, 1, 2}, 1 + static_cast<std::size_t>(trial % 3));
      const PromptReps t = transform_prompts(inst.state, inst.raw);
      Eigen::MatrixXd images(inst.batch.images.rows(), inst.batch.images.cols());
      for (Eigen::Index i = 0; i < images.cols(); ++i) images.col(i) = transform(inst.state, inst.batch.images.col(i), Side::Image);
      const Oracle o{inst.layout, t.by_category};
      const double tau = 0.3;
      CHECK(loss_pir(images, inst.batch.labels, t, tau) == doctest::Approx(o.pir(images, inst.batch.labels, tau)).epsilon(1e-10));
      CHECK(loss_ppd(t) == doctest::Approx(o.ppd()).epsilon(1e-10));
      CHECK(loss_nir(images, inst.batch.labels, t) == doctest::Approx(o.nir(images, inst.batch.labels)).epsilon(1e-10));
      CHECK(loss_nnd(t) == doctest::Approx(o.nnd()).epsilon(1e-10));
      CHECK(loss_npd(t) == doctest::Approx(o.npd()).epsilon(1e-10));

      LossWeights w;
      w.tau = tau;
      const auto total = total_adapter_loss(inst.batch, inst.raw, inst.state, w);
      const double hand = o.pir(images, inst.batch.labels, tau) + 1e-5 * o.ppd() + o.nir(images, inst.batch.labels) +
                          1e-3 * o.nnd() + 1.0 * o.npd();
      CHECK(total.total == doctest::Approx(hand).epsilon(1e-10));

      LossWeights off = w;
      off.lambda_pos = 0;
      off.lambda_neg = 0;
      const auto ablated = total_adapter_loss(inst.batch, inst.raw, inst.state, off);
      CHECK(ablated.total == doctest::Approx(ablated.pir + ablated.nir + ablated.npd).epsilon(1e-12));
    }
  }

  TEST_CASE("gradients match central differences") {
    std::mt19937_64 rng(5);
    const LossTerm terms[] = {LossTerm::Pir, LossTerm::Ppd, LossTerm::Nir, LossTerm::Nnd, LossTerm::Npd};
    for (LossTerm term : terms) {
      for (int trial = 0; trial < 4; ++trial) {
        auto inst = random_instance(rng, 8, {2, 3}, 2);
        const TermWeights w = TermWeights::only(term);
        const double tau = 0.5;
        const auto g = adapter_gradients(inst.batch, inst.raw, inst.state, w, tau);
        const double h = 1e-5;
        Eigen::MatrixXd fd_text(8, 8);
        Eigen::MatrixXd fd_image(8, 8);
        for (int side = 0; side < 2; ++side) {
          for (Eigen::Index i = 0; i < 8; ++i) {
            for (Eigen::Index j = 0; j < 8; ++j) {
              AdapterState up = inst.state;
              AdapterState down = inst.state;
              (side == 0 ? up.w_text : up.w_image)(i, j) += h;
              (side == 0 ? down.w_text : down.w_image)(i, j) -= h;
              const double v = (total_adapter_loss(inst.batch, inst.raw, up, w, tau).total -
                                total_adapter_loss(inst.batch, inst.raw, down, w, tau).total) /
                               (2 * h);
              (side == 0 ? fd_text : fd_image)(i, j) = v;
            }
          }
        }
        const double num = std::sqrt((g.d_text - fd_text).squaredNorm() + (g.d_image - fd_image).squaredNorm());
        const double den = std::max({std::sqrt(g.d_text.squaredNorm() + g.d_image.squaredNorm()),
                                     std::sqrt(fd_text.squaredNorm() + fd_image.squaredNorm()), 1e-8});
        CHECK(num / den < 1e-4);
      }
    }
  }

  TEST_CASE("normalization makes the text loss scale invariant") {
    std::mt19937_64 rng(8);
    auto inst = random_instance(rng, 8, {3}, 3);
    const TermWeights w = TermWeights::only(LossTerm::Ppd);
    const auto g = adapter_gradients(inst.batch, inst.raw, inst.state, w, 1.0);
    // Radial direction W_text: L(αW) is constant in α.
    AdapterState radial{inst.state.w_text, Eigen::MatrixXd::Zero(8, 8)};
    const auto f = [&](const AdapterState& s) { return total_adapter_loss(inst.batch, inst.raw, s, w, 1.0).total; };
    CHECK(std::abs(directional(f, inst.state, radial, 1e-5)) < 1e-8);
    CHECK(std::abs((g.d_text.array() * inst.state.w_text.array()).sum()) < 1e-10 * std::max(1.0, g.d_text.norm()));
    CHECK(g.d_image.norm() == 0.0);
  }

  TEST_CASE("zero loss has zero gradient") {
    const PromptLayout layout(groups_of({1}), 2);
    PromptReps raw{layout, {Eigen::MatrixXd::Identity(3, 2)}};
    AdapterBatch batch{testing::basis(3, 2), {0}};
    const auto g = adapter_gradients(batch, raw, AdapterState::identity(3), TermWeights::only(LossTerm::Ppd), 1.0);
    CHECK(g.loss.total == 0.0);
    CHECK(g.d_text.norm() == 0.0);
    CHECK(g.d_image.norm() == 0.0);
  }

  TEST_CASE("optimizer") {
    std::mt19937_64 rng(21);
    // Three super-classes, d = 16, N = 2; images sit near their own positives.
    const PromptLayout layout(groups_of({2, 2, 2}), 2);
    std::vector<Eigen::MatrixXd> cols;
    const Eigen::MatrixXd centers = testing::gaussian(rng, 16, 6).colwise().normalized();
    for (std::size_t c = 0; c < 6; ++c) {
      Eigen::MatrixXd m = testing::gaussian(rng, 16, static_cast<Eigen::Index>(layout.prompt_count(c))) * 0.3;
      m.colwise() += centers.col(static_cast<Eigen::Index>(c));
      cols.push_back(m);
    }
    const PromptReps raw{layout, cols};
    AdapterBatch batch{Eigen::MatrixXd(16, 24), {}};
    for (Eigen::Index i = 0; i < 24; ++i) {
      batch.images.col(i) = centers.col(i % 6) + 0.2 * testing::gaussian(rng, 16, 1);
      batch.labels.push_back(static_cast<std::size_t>(i % 6));
    }
    AdapterTrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 4;
    const auto none = optimize_adapters(batch, raw, cfg);
    const auto init = AdapterState::perturbed_identity(16, cfg.init_noise, cfg.seed);
    CHECK(none.state.w_text == init.w_text);
    CHECK(none.state.w_image == init.w_image);
    CHECK(none.trace.size() == 1);

    cfg.epochs = 60;
    cfg.weights.tau = 0.1;
    const auto run = optimize_adapters(batch, raw, cfg);
    CHECK(run.trace.size() == 61);
    for (const auto& t : run.trace) CHECK(std::isfinite(t.total));
    CHECK(run.trace.back().total < run.trace.front().total);

    cfg.batch_size = 5;
    const auto mini = optimize_adapters(batch, raw, cfg);
    CHECK(mini.trace.back().total < mini.trace.front().total);
    const auto mini_again = optimize_adapters(batch, raw, cfg);
    CHECK(mini_again.state.w_text == mini.state.w_text);

    const std::string csv = adapter_trace_csv(run.trace);
    CHECK(csv.rfind("epoch,l_pir,l_ppd,l_nir,l_nnd,l_npd,total\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 62);
  }

  TEST_CASE("adapter files") {
    const auto s = AdapterState::perturbed_identity(5, 0.1, 3);
    std::stringstream buf;
    CHECK(write_adapters(s, buf) == 12 + 2 * 25 * 4);
    const auto back = read_adapters(buf);
    CHECK((back.w_text - s.w_text).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((back.w_image - s.w_image).cwiseAbs().maxCoeff() < 1e-6);
    std::istringstream bad(std::string("PADQ") + std::string(8, '\0'));
    CHECK(code_of([&] { read_adapters(bad); }) == ErrorCode::BadMagic);
    std::stringstream again;
    write_adapters(s, again);
    const std::string bytes = again.str();
    std::istringstream cut(bytes.substr(0, bytes.size() - 1));
    CHECK(code_of([&] { read_adapters(cut); }) == ErrorCode::Truncated);
  }
}
