#include "pnps/metrics.hpp"

#include "pnps/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace pnps {
namespace {

void require_both(std::span<const double> id, std::span<const double> ood) {
  if (id.empty() || ood.empty()) throw Error(ErrorCode::EmptySet, "ID and OOD score sets must be non-empty");
}

std::vector<double> sorted_desc(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

std::size_t count_at_least(const std::vector<double>& desc, double t) {
  return static_cast<std::size_t>(std::upper_bound(desc.begin(), desc.end(), t, std::greater<>()) - desc.begin());
}

}  // namespace

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_both(id_scores, ood_scores);
  std::vector<double> ood(ood_scores.begin(), ood_scores.end());
  std::sort(ood.begin(), ood.end());
  double wins = 0.0;
  for (double s : id_scores) {
    const auto lo = std::lower_bound(ood.begin(), ood.end(), s);
    const auto hi = std::upper_bound(lo, ood.end(), s);
    wins += static_cast<double>(lo - ood.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(id_scores.size()) * static_cast<double>(ood.size()));
}

double aupr(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_both(id_scores, ood_scores);
  const auto id = sorted_desc(id_scores);
  const auto ood = sorted_desc(ood_scores);
  std::vector<double> thresholds = id;
  thresholds.insert(thresholds.end(), ood.begin(), ood.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double n_id = static_cast<double>(id.size());
  double area = 0.0;
  double prev_recall = 0.0;
  for (double t : thresholds) {
    const double tp = static_cast<double>(count_at_least(id, t));
    const double fp = static_cast<double>(count_at_least(ood, t));
    const double recall = tp / n_id;
    if (recall > prev_recall) {
      area += (recall - prev_recall) * (tp / (tp + fp));
      prev_recall = recall;
    }
  }
  return area;
}

double fpr95(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_both(id_scores, ood_scores);
  const auto id = sorted_desc(id_scores);
  const auto ood = sorted_desc(ood_scores);
  const std::size_t k = (95 * id.size() + 99) / 100;  // ceil(0.95·n) in integers
  const double threshold = id[k - 1];
  return static_cast<double>(count_at_least(ood, threshold)) / static_cast<double>(ood.size());
}

double id_accuracy(std::span<const std::string> predictions, std::span<const std::string> labels) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                               std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw Error(ErrorCode::EmptySet, "no predictions");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::string metric_json(const MetricReport& r) {
  const std::string acc = r.has_id_acc() ? fmt::format("{:.6f}", r.id_acc) : "null";
  return fmt::format("{{\"auroc\": {:.6f}, \"aupr\": {:.6f}, \"fpr95\": {:.6f}, \"id_acc\": {}}}", r.auroc, r.aupr,
                     r.fpr95, acc);
}

std::string export_scores(const std::vector<ScoreRecord>& records) {
  std::string out = "name,predicted,score,is_id\n";
  for (const auto& r : records) {
    if (r.name.find_first_of(",\n") != std::string::npos || r.predicted.find_first_of(",\n") != std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "score record fields may not contain ',' or newlines");
    }
    out += fmt::format("{},{},{},{}\n", r.name, r.predicted, r.score, r.is_id ? 1 : 0);
  }
  return out;
}

std::vector<ScoreRecord> parse_scores(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::ParseError, "score CSV line " + std::to_string(line_no) + ": " + what);
  };
  if (!std::getline(in, line)) {
    line_no = 1;
    fail("missing header");
  }
  ++line_no;
  if (line != "name,predicted,score,is_id") fail("unexpected header '" + line + "'");
  std::vector<ScoreRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (;;) {
      const auto pos = line.find(',', start);
      cols.push_back(line.substr(start, pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (cols.size() != 4) fail("expected 4 columns, got " + std::to_string(cols.size()));
    ScoreRecord r;
    r.name = cols[0];
    r.predicted = cols[1];
    const auto& s = cols[2];
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), r.score);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail("bad score '" + s + "'");
    if (!std::isfinite(r.score)) fail("non-finite score");
    if (cols[3] == "1") {
      r.is_id = true;
    } else if (cols[3] == "0") {
      r.is_id = false;
    } else {
      fail("is_id must be 0 or 1");
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace pnps
