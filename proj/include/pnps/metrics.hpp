#pragma once

// OOD detection metrics. Scores follow "higher = more in-distribution" and
// the ID set is the positive class throughout.

#include <span>
#include <string>
#include <vector>

namespace pnps {

/// P(id > ood) + 0.5·P(id = ood) over all pairs. Throws EmptySet.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

/// Average precision: Σ_t (R_t - R_{t-1})·P_t over distinct thresholds t in
/// descending order. Throws EmptySet.
double aupr(std::span<const double> id_scores, std::span<const double> ood_scores);

/// Fraction of OOD scores >= the largest threshold keeping ID recall at or
/// above 95%. Throws EmptySet.
double fpr95(std::span<const double> id_scores, std::span<const double> ood_scores);

/// Throws LengthMismatch, EmptySet.
double id_accuracy(std::span<const std::string> predictions, std::span<const std::string> labels);

struct MetricReport {
  double auroc = 0.0;
  double aupr = 0.0;
  double fpr95 = 0.0;
  double id_acc = -1.0;  // negative when no ground truth was supplied
  bool has_id_acc() const { return id_acc >= 0.0; }
};

/// {"auroc":..,"aupr":..,"fpr95":..,"id_acc":..} with 6 decimals; id_acc is
/// null without ground truth.
std::string metric_json(const MetricReport& report);

struct ScoreRecord {
  std::string name;
  std::string predicted;
  double score = 0.0;
  bool is_id = true;

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

/// Header "name,predicted,score,is_id", scores with round-trip precision,
/// is_id as 1/0.
std::string export_scores(const std::vector<ScoreRecord>& records);

/// Inverse of export_scores. Throws ParseError with a line number.
std::vector<ScoreRecord> parse_scores(const std::string& csv);

}  // namespace pnps
