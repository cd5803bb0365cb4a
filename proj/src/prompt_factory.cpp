#include "pnps/prompt_factory.hpp"

#include "pnps/error.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace pnps {
namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json parse_object(const std::string& text, const char* what) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string(what) + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::ParseError, std::string(what) + ": top level must be an object");
  return doc;
}

std::vector<std::string> string_array(const ordered_json& value, const std::string& key, const char* what) {
  if (!value.is_array()) throw Error(ErrorCode::ParseError, std::string(what) + ": '" + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& item : value) {
    if (!item.is_string()) {
      throw Error(ErrorCode::ParseError, std::string(what) + ": '" + key + "' must contain only strings");
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<std::string> SuperClassPartition::categories() const {
  std::vector<std::string> out;
  for (const auto& g : groups) out.insert(out.end(), g.members.begin(), g.members.end());
  return out;
}

SuperClassPartition parse_partition(const std::string& json_text) {
  const ordered_json doc = parse_object(json_text, "partition");
  SuperClassPartition p;
  for (const auto& [name, members] : doc.items()) {
    p.groups.push_back({name, string_array(members, name, "partition")});
  }
  return p;
}

SuperClassPartition load_partition(const std::filesystem::path& path) { return parse_partition(read_file(path)); }

std::string partition_to_json(const SuperClassPartition& partition) {
  ordered_json doc = ordered_json::object();
  for (const auto& g : partition.groups) doc[g.name] = g.members;
  return doc.dump(2) + "\n";
}

std::string Violation::describe() const {
  switch (kind) {
    case ViolationKind::MissingCategory: return "category '" + category + "' is not assigned to any super-class";
    case ViolationKind::DuplicateCategory:
      return "category '" + category + "' appears more than once (again in '" + group + "')";
    case ViolationKind::EmptyGroup: return "super-class '" + group + "' is empty";
    case ViolationKind::UnexpectedCategory:
      return "super-class '" + group + "' lists unknown category '" + category + "'";
  }
  return "unknown violation";
}

std::vector<Violation> validate_partition(const SuperClassPartition& partition,
                                          const std::vector<std::string>& categories) {
  std::vector<Violation> out;
  const std::unordered_set<std::string> expected(categories.begin(), categories.end());
  std::unordered_set<std::string> seen;
  for (const auto& g : partition.groups) {
    if (g.members.empty()) out.push_back({ViolationKind::EmptyGroup, g.name, ""});
    for (const auto& m : g.members) {
      if (!seen.insert(m).second) out.push_back({ViolationKind::DuplicateCategory, g.name, m});
      if (!expected.contains(m)) out.push_back({ViolationKind::UnexpectedCategory, g.name, m});
    }
  }
  for (const auto& c : categories) {
    if (!seen.contains(c)) out.push_back({ViolationKind::MissingCategory, "", c});
  }
  return out;
}

std::string emit_query(const std::string& category, const SuperClassPartition& partition) {
  for (const auto& g : partition.groups) {
    bool found = false;
    std::string siblings;
    for (const auto& m : g.members) {
      if (m == category) {
        found = true;
        continue;
      }
      if (!siblings.empty()) siblings += ", ";
      siblings += m;
    }
    if (!found) continue;
    if (siblings.empty()) return "What are useful features for distinguishing a " + category + " in a photo?";
    return "What are useful features for distinguishing a " + category + " from " + siblings + " in a photo?";
  }
  throw Error(ErrorCode::UnknownCategory, "'" + category + "' is not in the partition");
}

std::string emit_query_file(const SuperClassPartition& partition) {
  std::string out;
  for (const auto& c : partition.categories()) out += c + "\t" + emit_query(c, partition) + "\n";
  return out;
}

const std::vector<std::string>* FeatureBank::find(const std::string& category) const {
  for (const auto& [name, list] : features) {
    if (name == category) return &list;
  }
  return nullptr;
}

FeatureBank ingest_features(const std::string& json_text, std::size_t expected_n) {
  const ordered_json doc = parse_object(json_text, "features");
  FeatureBank bank;
  bank.n = expected_n;
  for (const auto& [category, value] : doc.items()) {
    auto list = string_array(value, category, "features");
    if (list.size() != expected_n) {
      throw Error(ErrorCode::WrongCount, "'" + category + "' has " + std::to_string(list.size()) +
                                             " features, expected " + std::to_string(expected_n));
    }
    std::set<std::string> distinct;
    for (const auto& f : list) {
      if (f.empty()) throw Error(ErrorCode::EmptyFeature, "'" + category + "' has an empty feature");
      if (!distinct.insert(f).second) {
        throw Error(ErrorCode::DuplicateFeature, "'" + category + "' repeats feature '" + f + "'");
      }
    }
    bank.features.emplace_back(category, std::move(list));
  }
  return bank;
}

const char* to_string(PromptKind kind) noexcept { return kind == PromptKind::Positive ? "positive" : "negative"; }

PromptLayout::PromptLayout(const SuperClassPartition& partition, std::size_t n) : n_(n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "feature count N must be >= 1");
  for (std::size_t g = 0; g < partition.groups.size(); ++g) {
    const auto& group = partition.groups[g];
    if (group.members.empty()) throw Error(ErrorCode::InvalidPartition, "super-class '" + group.name + "' is empty");
    group_names_.push_back(group.name);
    const std::size_t first = categories_.size();
    for (const auto& m : group.members) {
      if (!index_.emplace(m, categories_.size()).second) {
        throw Error(ErrorCode::InvalidPartition, "category '" + m + "' appears more than once");
      }
      categories_.push_back(m);
      group_of_.push_back(g);
    }
    for (std::size_t c = first; c < categories_.size(); ++c) {
      std::vector<std::size_t> sib;
      for (std::size_t d = first; d < categories_.size(); ++d) {
        if (d != c) sib.push_back(d);
      }
      siblings_.push_back(std::move(sib));
    }
  }
}

std::optional<std::size_t> PromptLayout::find(const std::string& category) const {
  auto it = index_.find(category);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t PromptLayout::index_of(const std::string& category) const {
  auto c = find(category);
  if (!c) throw Error(ErrorCode::UnknownCategory, "'" + category + "' is not in the partition");
  return *c;
}

std::optional<std::size_t> PromptLayout::sibling_rank(std::size_t c, std::size_t d) const {
  const auto& sib = siblings_.at(c);
  for (std::size_t r = 0; r < sib.size(); ++r) {
    if (sib[r] == d) return r + 1;
  }
  return std::nullopt;
}

std::size_t PromptLayout::flat_index(std::size_t c, PromptKind kind, std::size_t source, std::size_t position) const {
  if (c >= categories_.size()) throw Error(ErrorCode::OutOfRange, "category index " + std::to_string(c));
  if (position < 1 || position > n_) {
    throw Error(ErrorCode::OutOfRange, "feature position " + std::to_string(position) + " outside 1.." +
                                           std::to_string(n_));
  }
  if (kind == PromptKind::Positive) return position;
  const auto rank = source < categories_.size() ? sibling_rank(c, source) : std::nullopt;
  if (!rank) throw Error(ErrorCode::OutOfRange, "negative source is not a super-class sibling");
  return *rank * n_ + position;
}

PromptLayout::Slot PromptLayout::slot(std::size_t c, std::size_t flat) const {
  if (c >= categories_.size() || flat < 1 || flat > prompt_count(c)) {
    throw Error(ErrorCode::OutOfRange, "flat index " + std::to_string(flat));
  }
  const std::size_t block = (flat - 1) / n_;
  const std::size_t position = (flat - 1) % n_ + 1;
  if (block == 0) return {PromptKind::Positive, c, position};
  return {PromptKind::Negative, siblings_[c][block - 1], position};
}

std::size_t prompt_index(const PromptLayout& layout, const std::string& category, PromptKind kind,
                         const std::string& source_category, std::size_t position) {
  const std::size_t c = layout.index_of(category);
  if (kind == PromptKind::Positive) return layout.flat_index(c, kind, c, position);
  const auto d = layout.find(source_category);
  if (!d) throw Error(ErrorCode::OutOfRange, "unknown negative source '" + source_category + "'");
  return layout.flat_index(c, kind, *d, position);
}

std::string positive_prompt_text(const std::string& category, const std::string& feature) {
  return "a photo of a " + category + ", which has " + feature;
}

std::string negative_prompt_text(const std::string& category, const std::string& feature) {
  return "a photo of a " + category + ", which has no " + feature;
}

PromptBank build_prompts(const FeatureBank& bank, const SuperClassPartition& partition) {
  PromptLayout layout(partition, bank.n);
  std::vector<const std::vector<std::string>*> features;
  for (const auto& c : layout.categories()) {
    const auto* f = bank.find(c);
    if (!f) throw Error(ErrorCode::MissingCategory, "no features for category '" + c + "'");
    if (f->size() != bank.n) throw Error(ErrorCode::WrongCount, "'" + c + "'");
    features.push_back(f);
  }

  std::vector<std::vector<PromptEntry>> entries(layout.num_categories());
  for (std::size_t c = 0; c < layout.num_categories(); ++c) {
    for (std::size_t flat = 1; flat <= layout.prompt_count(c); ++flat) {
      const auto slot = layout.slot(c, flat);
      const std::string& feature = (*features[slot.source])[slot.position - 1];
      const std::string& name = layout.category(c);
      entries[c].push_back({name, slot.kind, layout.category(slot.source), slot.position, flat,
                            slot.kind == PromptKind::Positive ? positive_prompt_text(name, feature)
                                                              : negative_prompt_text(name, feature)});
    }
  }
  return {std::move(layout), std::move(entries)};
}

std::string export_prompt_bank(const PromptBank& bank) {
  ordered_json doc = ordered_json::array();
  for (const auto& list : bank.entries) {
    for (const auto& e : list) {
      doc.push_back({{"category", e.category},
                     {"kind", to_string(e.kind)},
                     {"source_category", e.source_category},
                     {"feature_position", e.feature_position},
                     {"flat_index", e.flat_index},
                     {"text", e.text}});
    }
  }
  return doc.dump(2) + "\n";
}

std::string prompt_record_name(const std::string& category, std::size_t flat_index) {
  return category + "#" + std::to_string(flat_index);
}

}  // namespace pnps
