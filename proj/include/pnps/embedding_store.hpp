#pragma once

// Embedding tables: the only ingestion boundary of the engine.
//
// PEMB v1 layout (all integers little-endian):
//   "PEMB" | version u32 = 1 | dim u32 | record_count u32
//   per record: name_len u32 | name bytes | label i32 | modality u8 |
//               vec_count u32 | vec_count * dim * f32

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace pnps {

enum class Modality : std::uint8_t {
  ImageGlobal = 0,
  ImagePatchSet = 1,
  TextPrompt = 2,
};

const char* to_string(Modality m) noexcept;

/// Label value used for samples outside the training label set.
inline constexpr std::int32_t kUnknownLabel = -1;

struct EmbeddingRecord {
  std::string name;
  std::int32_t label = kUnknownLabel;
  Modality modality = Modality::ImageGlobal;
  std::vector<std::vector<float>> vectors;

  std::size_t size() const { return vectors.size(); }

  /// Vector `i` widened to double precision.
  Eigen::VectorXd vector(std::size_t i) const;

  /// All vectors as columns of a dim x size() matrix.
  Eigen::MatrixXd matrix() const;
};

/// Ordered collection of records sharing one dimension. Invariants are
/// enforced on insertion, so a constructed table is always valid.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::uint32_t dim);

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  const std::vector<EmbeddingRecord>& records() const { return records_; }
  const EmbeddingRecord& operator[](std::size_t i) const { return records_[i]; }

  /// Throws DimensionMismatch, NonFiniteValue, InvalidRecord or DuplicateName.
  void add(EmbeddingRecord record);

  /// nullptr when absent.
  const EmbeddingRecord* find(const std::string& name) const;

  /// Bit-exact equality of every stored float.
  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b);

 private:
  std::uint32_t dim_;
  std::vector<EmbeddingRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// v / |v|. Throws ZeroVector for a zero (or non-finite norm) input.
Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v);

Eigen::VectorXd to_vector(std::span<const float> values);
std::vector<float> to_floats(const Eigen::VectorXd& v);

std::size_t write_table(const EmbeddingTable& table, std::ostream& out);
EmbeddingTable read_table(std::istream& in);

void save_table(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable load_table(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthSpec {
  std::uint32_t num_classes = 3;
  std::uint32_t per_class = 5;
  std::uint32_t dim = 16;
  std::uint32_t patches_per_image = 4;
  double cluster_spread = 0.15;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

struct SynthDataset {
  EmbeddingTable images;       // ImageGlobal, one per sample
  EmbeddingTable patches;      // ImagePatchSet, same names as `images`
  EmbeddingTable class_means;  // ImageGlobal, one per category
};

/// Draws `count` unit vectors from the isotropic Gaussian.
EmbeddingTable draw_unit_means(std::uint32_t count, std::uint32_t dim, std::uint64_t seed,
                               const std::string& prefix = "mean");

/// Samples `per_class` images around every mean in `means`:
///   image = normalize(mean + spread * noise), patch = normalize(image + spread * noise).
/// Sample names are "{prefix}{mean index}_{i}". Labels are the mean's
/// position, or kUnknownLabel when `unknown_labels` is set.
SynthDataset sample_around(const EmbeddingTable& means, std::uint32_t per_class,
                           std::uint32_t patches_per_image, double spread, std::uint64_t seed,
                           const std::string& prefix, bool unknown_labels = false);

/// Means drawn from `spec.seed`, samples around them. Pure in `spec`.
SynthDataset synth_dataset(const SynthSpec& spec);

}  // namespace pnps
