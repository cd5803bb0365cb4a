#pragma once

// Super-class partitions, LLM query text, feature banks and the indexed
// positive/negative prompt bank.
//
// Flat prompt index of a category c in a super-class of size s with N
// features per category (1-based):
//   positives            1 .. N
//   negatives of sibling r·N + 1 .. r·N + N, r = 1-based rank of the sibling
//                        among c's siblings in partition order
// so every category owns exactly the positions 1 .. s·N.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace pnps {

struct SuperClass {
  std::string name;
  std::vector<std::string> members;
};

/// Groups in the order the partition file lists them.
struct SuperClassPartition {
  std::vector<SuperClass> groups;

  /// Every member of every group, in listing order (duplicates kept).
  std::vector<std::string> categories() const;
};

/// JSON object: super-class name -> array of category names. Key order is
/// preserved. Throws ParseError.
SuperClassPartition parse_partition(const std::string& json_text);
SuperClassPartition load_partition(const std::filesystem::path& path);
std::string partition_to_json(const SuperClassPartition& partition);

enum class ViolationKind { MissingCategory, DuplicateCategory, EmptyGroup, UnexpectedCategory };

struct Violation {
  ViolationKind kind;
  std::string group;
  std::string category;

  std::string describe() const;
};

/// Empty result means the groups exactly partition `categories`.
std::vector<Violation> validate_partition(const SuperClassPartition& partition,
                                          const std::vector<std::string>& categories);

/// Throws UnknownCategory.
std::string emit_query(const std::string& category, const SuperClassPartition& partition);

/// One "{category}\t{query}" line per category, partition order.
std::string emit_query_file(const SuperClassPartition& partition);

struct FeatureBank {
  std::size_t n = 0;
  std::vector<std::pair<std::string, std::vector<std::string>>> features;

  /// nullptr when the category is absent.
  const std::vector<std::string>* find(const std::string& category) const;
};

/// JSON object: category -> array of exactly `expected_n` distinct,
/// non-empty strings. Throws ParseError, WrongCount, EmptyFeature or
/// DuplicateFeature.
FeatureBank ingest_features(const std::string& json_text, std::size_t expected_n);

enum class PromptKind { Positive, Negative };

const char* to_string(PromptKind kind) noexcept;

/// Category indexing and flat prompt positions derived from a valid
/// partition. Category index = position in partition order.
class PromptLayout {
 public:
  /// Throws InvalidPartition when a category repeats or a group is empty.
  PromptLayout(const SuperClassPartition& partition, std::size_t n);

  std::size_t n() const { return n_; }
  std::size_t num_categories() const { return categories_.size(); }
  const std::vector<std::string>& categories() const { return categories_; }
  const std::string& category(std::size_t c) const { return categories_.at(c); }

  std::optional<std::size_t> find(const std::string& category) const;
  /// Throws UnknownCategory.
  std::size_t index_of(const std::string& category) const;

  std::size_t group_of(std::size_t c) const { return group_of_.at(c); }
  const std::string& group_name(std::size_t g) const { return group_names_.at(g); }
  std::size_t group_size(std::size_t c) const { return siblings_.at(c).size() + 1; }

  /// Other members of c's super-class, in partition order.
  const std::vector<std::size_t>& siblings(std::size_t c) const { return siblings_.at(c); }

  /// 1-based rank of d among c's siblings; nullopt when d is not a sibling.
  std::optional<std::size_t> sibling_rank(std::size_t c, std::size_t d) const;

  /// s·N, the number of prompts owned by category c.
  std::size_t prompt_count(std::size_t c) const { return group_size(c) * n_; }

  /// Flat 1-based index. For positives `source` is ignored. Throws OutOfRange.
  std::size_t flat_index(std::size_t c, PromptKind kind, std::size_t source, std::size_t position) const;

  struct Slot {
    PromptKind kind;
    std::size_t source;    // category whose feature is used
    std::size_t position;  // 1..N
  };
  /// Inverse of flat_index. Throws OutOfRange.
  Slot slot(std::size_t c, std::size_t flat) const;

 private:
  std::size_t n_;
  std::vector<std::string> categories_;
  std::vector<std::string> group_names_;
  std::vector<std::size_t> group_of_;
  std::vector<std::vector<std::size_t>> siblings_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Name-based form of PromptLayout::flat_index. For positives
/// `source_category` is ignored.
std::size_t prompt_index(const PromptLayout& layout, const std::string& category, PromptKind kind,
                         const std::string& source_category, std::size_t position);

struct PromptEntry {
  std::string category;
  PromptKind kind;
  std::string source_category;
  std::size_t feature_position;  // 1..N
  std::size_t flat_index;        // 1..s·N
  std::string text;
};

struct PromptBank {
  PromptLayout layout;
  std::vector<std::vector<PromptEntry>> entries;  // [category][flat_index - 1]
};

std::string positive_prompt_text(const std::string& category, const std::string& feature);
std::string negative_prompt_text(const std::string& category, const std::string& feature);

/// Throws MissingCategory when the bank lacks a partition category.
PromptBank build_prompts(const FeatureBank& bank, const SuperClassPartition& partition);

/// JSON array of {category, kind, source_category, feature_position,
/// flat_index, text}, categories in partition order, flat order within.
std::string export_prompt_bank(const PromptBank& bank);

/// Record name of a prompt embedding: "{category}#{flat_index}".
std::string prompt_record_name(const std::string& category, std::size_t flat_index);

}  // namespace pnps
