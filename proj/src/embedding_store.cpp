#include "pnps/embedding_store.hpp"

#include "binary_io.hpp"
#include "pnps/error.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <random>

namespace pnps {
namespace {

constexpr std::uint32_t kPembVersion = 1;

std::size_t expected_vectors(Modality m) {
  return m == Modality::ImagePatchSet ? 0 : 1;  // 0 = "at least one"
}

void check_record(const EmbeddingRecord& r, std::uint32_t dim) {
  if (r.vectors.empty()) throw Error(ErrorCode::InvalidRecord, "record '" + r.name + "' has no vectors");
  const std::size_t want = expected_vectors(r.modality);
  if (want != 0 && r.vectors.size() != want) {
    throw Error(ErrorCode::InvalidRecord, "record '" + r.name + "' of modality " + to_string(r.modality) +
                                              " must hold exactly one vector");
  }
  for (const auto& v : r.vectors) {
    if (v.size() != dim) {
      throw Error(ErrorCode::DimensionMismatch, "record '" + r.name + "' has a vector of dimension " +
                                                    std::to_string(v.size()) + ", table dimension is " +
                                                    std::to_string(dim));
    }
    for (float x : v) {
      if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteValue, "record '" + r.name + "'");
    }
  }
}

}  // namespace

const char* to_string(Modality m) noexcept {
  switch (m) {
    case Modality::ImageGlobal: return "ImageGlobal";
    case Modality::ImagePatchSet: return "ImagePatchSet";
    case Modality::TextPrompt: return "TextPrompt";
  }
  return "Unknown";
}

Eigen::VectorXd EmbeddingRecord::vector(std::size_t i) const { return to_vector(vectors.at(i)); }

Eigen::MatrixXd EmbeddingRecord::matrix() const {
  const Eigen::Index dim = vectors.empty() ? 0 : static_cast<Eigen::Index>(vectors.front().size());
  Eigen::MatrixXd m(dim, static_cast<Eigen::Index>(vectors.size()));
  for (std::size_t j = 0; j < vectors.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = to_vector(vectors[j]);
  return m;
}

EmbeddingTable::EmbeddingTable(std::uint32_t dim) : dim_(dim) {
  if (dim == 0) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be positive");
}

void EmbeddingTable::add(EmbeddingRecord record) {
  check_record(record, dim_);
  if (index_.contains(record.name)) throw Error(ErrorCode::DuplicateName, "record '" + record.name + "'");
  index_.emplace(record.name, records_.size());
  records_.push_back(std::move(record));
}

const EmbeddingRecord* EmbeddingTable::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &records_[it->second];
}

bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
  if (a.dim_ != b.dim_ || a.records_.size() != b.records_.size()) return false;
  for (std::size_t i = 0; i < a.records_.size(); ++i) {
    const auto& x = a.records_[i];
    const auto& y = b.records_[i];
    if (x.name != y.name || x.label != y.label || x.modality != y.modality || x.vectors.size() != y.vectors.size()) {
      return false;
    }
    for (std::size_t j = 0; j < x.vectors.size(); ++j) {
      for (std::size_t k = 0; k < x.vectors[j].size(); ++k) {
        if (std::bit_cast<std::uint32_t>(x.vectors[j][k]) != std::bit_cast<std::uint32_t>(y.vectors[j][k])) {
          return false;
        }
      }
    }
  }
  return true;
}

Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v) {
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
  return v / norm;
}

Eigen::VectorXd to_vector(std::span<const float> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

std::vector<float> to_floats(const Eigen::VectorXd& v) {
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(v[i]);
  return out;
}

std::size_t write_table(const EmbeddingTable& table, std::ostream& out) {
  detail::ByteWriter w;
  w.magic("PEMB");
  w.u32(kPembVersion);
  w.u32(table.dim());
  w.u32(static_cast<std::uint32_t>(table.size()));
  for (const auto& r : table.records()) {
    w.u32(static_cast<std::uint32_t>(r.name.size()));
    w.raw(r.name);
    w.i32(r.label);
    w.u8(static_cast<std::uint8_t>(r.modality));
    w.u32(static_cast<std::uint32_t>(r.vectors.size()));
    for (const auto& v : r.vectors) {
      for (float x : v) w.f32(x);
    }
  }
  return w.flush(out);
}

EmbeddingTable read_table(std::istream& in) {
  auto r = detail::ByteReader::slurp(in);
  r.expect_magic("PEMB");
  const std::uint32_t version = r.u32("header");
  if (version != kPembVersion) throw Error(ErrorCode::BadVersion, "PEMB version " + std::to_string(version));
  const std::uint32_t dim = r.u32("header");
  const std::uint32_t count = r.u32("header");
  if (dim == 0) throw Error(ErrorCode::InvalidRecord, "PEMB dimension is zero");

  EmbeddingTable table(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    EmbeddingRecord rec;
    rec.name = r.str(r.u32("record name length"), "record name");
    rec.label = r.i32("record label");
    const std::uint8_t modality = r.u8("record modality");
    if (modality > 2) throw Error(ErrorCode::InvalidRecord, "unknown modality byte " + std::to_string(modality));
    rec.modality = static_cast<Modality>(modality);
    const std::uint32_t vec_count = r.u32("record vector count");
    r.require(static_cast<std::size_t>(vec_count) * dim * 4, "record vectors");
    rec.vectors.assign(vec_count, std::vector<float>(dim));
    for (auto& v : rec.vectors) {
      for (auto& x : v) x = r.f32("record vectors");
    }
    table.add(std::move(rec));
  }
  r.expect_end();
  return table;
}

void save_table(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  write_table(table, out);
}

EmbeddingTable load_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  return read_table(in);
}

void SynthSpec::validate() const {
  if (num_classes < 2) throw Error(ErrorCode::InvalidArgument, "synth: num_classes must be >= 2");
  if (per_class < 1) throw Error(ErrorCode::InvalidArgument, "synth: per_class must be >= 1");
  if (dim < 1) throw Error(ErrorCode::InvalidArgument, "synth: dim must be >= 1");
  if (patches_per_image < 1) throw Error(ErrorCode::InvalidArgument, "synth: patches_per_image must be >= 1");
  if (!(cluster_spread >= 0.0) || !std::isfinite(cluster_spread)) {
    throw Error(ErrorCode::InvalidArgument, "synth: cluster_spread must be a finite value >= 0");
  }
}

namespace {

Eigen::VectorXd gaussian(std::mt19937_64& rng, std::uint32_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (auto& x : v) x = normal(rng);
  return v;
}

Eigen::VectorXd perturb(const Eigen::VectorXd& center, double spread, std::mt19937_64& rng) {
  // Noise is drawn even at zero spread so the stream does not depend on it.
  // Centers are already unit, so zero spread returns them untouched.
  Eigen::VectorXd noise = gaussian(rng, static_cast<std::uint32_t>(center.size()));
  if (spread == 0.0) return center;
  return l2_normalize(center + spread * noise);
}

}  // namespace

EmbeddingTable draw_unit_means(std::uint32_t count, std::uint32_t dim, std::uint64_t seed,
                               const std::string& prefix) {
  std::mt19937_64 rng(seed);
  EmbeddingTable means(dim);
  for (std::uint32_t c = 0; c < count; ++c) {
    Eigen::VectorXd mu = gaussian(rng, dim);
    while (mu.norm() == 0.0) mu = gaussian(rng, dim);
    means.add({prefix + std::to_string(c), static_cast<std::int32_t>(c), Modality::ImageGlobal,
               {to_floats(l2_normalize(mu))}});
  }
  return means;
}

SynthDataset sample_around(const EmbeddingTable& means, std::uint32_t per_class,
                           std::uint32_t patches_per_image, double spread, std::uint64_t seed,
                           const std::string& prefix, bool unknown_labels) {
  std::mt19937_64 rng(seed);
  SynthDataset out{EmbeddingTable(means.dim()), EmbeddingTable(means.dim()), means};
  for (std::size_t c = 0; c < means.size(); ++c) {
    const Eigen::VectorXd mu = means[c].vector(0);
    const std::int32_t label = unknown_labels ? kUnknownLabel : static_cast<std::int32_t>(c);
    for (std::uint32_t i = 0; i < per_class; ++i) {
      const std::string name = prefix + std::to_string(c) + "_" + std::to_string(i);
      const Eigen::VectorXd image = perturb(mu, spread, rng);
      EmbeddingRecord patch_set{name, label, Modality::ImagePatchSet, {}};
      for (std::uint32_t p = 0; p < patches_per_image; ++p) {
        patch_set.vectors.push_back(to_floats(perturb(image, spread, rng)));
      }
      out.images.add({name, label, Modality::ImageGlobal, {to_floats(image)}});
      out.patches.add(std::move(patch_set));
    }
  }
  return out;
}

SynthDataset synth_dataset(const SynthSpec& spec) {
  spec.validate();
  const EmbeddingTable means = draw_unit_means(spec.num_classes, spec.dim, spec.seed);
  // Separate stream for the samples so that means do not shift with per_class.
  return sample_around(means, spec.per_class, spec.patches_per_image, spec.cluster_spread,
                       spec.seed ^ 0x9e3779b97f4a7c15ULL, "c");
}

}  // namespace pnps
