#pragma once

// Run configuration: `key = value` lines, `#` comments, blank lines
// ignored. Missing keys keep their defaults; unknown keys are errors.

#include "pnps/adapter.hpp"
#include "pnps/detector.hpp"
#include "pnps/graph_builder.hpp"
#include "pnps/vig.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace pnps {

struct RunConfig {
  double tau = 0.01;
  double lambda_pos = 1e-5;
  double lambda_neg = 1e-3;
  double lambda_npd = 1.0;
  double lambda_energy = 0.1;
  double m_in = 10.0;
  double t_energy = 1.0;
  std::size_t n_features = 3;
  std::size_t k_text = 2;
  std::size_t k_patch = 10;
  std::size_t k_cross = 8;
  std::size_t vig_layers = 4;
  std::size_t hidden_dim = 0;  // 0 = 4·d
  double lr_adapter = 1e-2;
  double lr_vig = 0.05;
  std::size_t epochs_adapter = 200;
  std::size_t epochs_vig = 200;
  std::size_t batch_size = 0;  // adapter mini-batch, 0 = full batch
  Pooling pooling = Pooling::Mean;
  ScoreMode score_mode = ScoreMode::NegativeEnergy;
  Stage1Source stage1_source = Stage1Source::PatchMean;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument on a range violation.
  void validate() const;

  std::size_t hidden_for(std::size_t dim) const { return hidden_dim == 0 ? 4 * dim : hidden_dim; }
  LossWeights loss_weights() const;
  AdapterTrainConfig adapter_config() const;
  TopKConfig topk() const;
  EnergyConfig energy() const;
  ViGTrainConfig vig_config() const;
  DetectorConfig detector_config() const;
};

/// Throws ParseError (with line number) or InvalidArgument.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical `key = value` text; parse_config(to_text(c)) == c.
std::string config_to_text(const RunConfig& config);

}  // namespace pnps
