#include "pnps/config.hpp"

#include "pnps/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace pnps {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v) {
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw std::invalid_argument("expected a number, got '" + v + "'");
  }
  return out;
}

template <typename T>
T parse_unsigned(const std::string& v) {
  T out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto real = [&t](const char* key, double RunConfig::*field) {
      t[key] = [field](RunConfig& c, const std::string& v) { c.*field = parse_double(v); };
    };
    auto count = [&t](const char* key, std::size_t RunConfig::*field) {
      t[key] = [field](RunConfig& c, const std::string& v) { c.*field = parse_unsigned<std::size_t>(v); };
    };
    real("tau", &RunConfig::tau);
    real("lambda_pos", &RunConfig::lambda_pos);
    real("lambda_neg", &RunConfig::lambda_neg);
    real("lambda_npd", &RunConfig::lambda_npd);
    real("lambda_energy", &RunConfig::lambda_energy);
    real("m_in", &RunConfig::m_in);
    real("t_energy", &RunConfig::t_energy);
    count("n_features", &RunConfig::n_features);
    count("k_text", &RunConfig::k_text);
    count("k_patch", &RunConfig::k_patch);
    count("k_cross", &RunConfig::k_cross);
    count("vig_layers", &RunConfig::vig_layers);
    count("hidden_dim", &RunConfig::hidden_dim);
    real("lr_adapter", &RunConfig::lr_adapter);
    real("lr_vig", &RunConfig::lr_vig);
    count("epochs_adapter", &RunConfig::epochs_adapter);
    count("epochs_vig", &RunConfig::epochs_vig);
    count("batch_size", &RunConfig::batch_size);
    t["seed"] = [](RunConfig& c, const std::string& v) { c.seed = parse_unsigned<std::uint64_t>(v); };
    t["pooling"] = [](RunConfig& c, const std::string& v) {
      if (v == "mean") {
        c.pooling = Pooling::Mean;
      } else if (v == "max") {
        c.pooling = Pooling::Max;
      } else {
        throw std::invalid_argument("pooling must be mean or max");
      }
    };
    t["score_mode"] = [](RunConfig& c, const std::string& v) {
      for (auto m : {ScoreMode::NegativeEnergy, ScoreMode::MaxSoftmax, ScoreMode::Mcm}) {
        if (v == to_string(m)) {
          c.score_mode = m;
          return;
        }
      }
      throw std::invalid_argument("score_mode must be neg_energy, max_softmax or mcm");
    };
    t["stage1_source"] = [](RunConfig& c, const std::string& v) {
      for (auto s : {Stage1Source::PatchMean, Stage1Source::Global}) {
        if (v == to_string(s)) {
          c.stage1_source = s;
          return;
        }
      }
      throw std::invalid_argument("stage1_source must be patch_mean or global");
    };
    return t;
  }();
  return table;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

}  // namespace

void RunConfig::validate() const {
  require(tau > 0.0 && std::isfinite(tau), "tau must be > 0");
  require(lambda_pos >= 0.0 && std::isfinite(lambda_pos), "lambda_pos must be >= 0");
  require(lambda_neg >= 0.0 && std::isfinite(lambda_neg), "lambda_neg must be >= 0");
  require(lambda_npd >= 0.0 && std::isfinite(lambda_npd), "lambda_npd must be >= 0");
  require(lambda_energy >= 0.0 && std::isfinite(lambda_energy), "lambda_energy must be >= 0");
  require(!std::isnan(m_in) && m_in > -std::numeric_limits<double>::infinity(), "m_in must be a number or inf");
  require(t_energy > 0.0 && std::isfinite(t_energy), "t_energy must be > 0");
  require(n_features >= 1, "n_features must be >= 1");
  require(k_text >= 1 && k_patch >= 1 && k_cross >= 1, "k_text, k_patch and k_cross must be >= 1");
  require(vig_layers >= 1, "vig_layers must be >= 1");
  require(lr_adapter > 0.0 && std::isfinite(lr_adapter), "lr_adapter must be > 0");
  require(lr_vig > 0.0 && std::isfinite(lr_vig), "lr_vig must be > 0");
}

LossWeights RunConfig::loss_weights() const { return {lambda_pos, lambda_neg, lambda_npd, tau}; }

AdapterTrainConfig RunConfig::adapter_config() const {
  AdapterTrainConfig c;
  c.weights = loss_weights();
  c.learning_rate = lr_adapter;
  c.epochs = epochs_adapter;
  c.batch_size = batch_size;
  c.seed = seed;
  return c;
}

TopKConfig RunConfig::topk() const { return {k_text, k_patch, k_cross}; }

EnergyConfig RunConfig::energy() const { return {t_energy, m_in, lambda_energy}; }

ViGTrainConfig RunConfig::vig_config() const { return {energy(), pooling, lr_vig, epochs_vig}; }

DetectorConfig RunConfig::detector_config() const {
  return {tau, topk(), pooling, t_energy, score_mode, stage1_source};
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    auto fail = [line_no](const std::string& what) {
      throw Error(ErrorCode::ParseError, "config line " + std::to_string(line_no) + ": " + what);
    };
    if (eq == std::string::npos) fail("expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) fail("unknown key '" + key + "'");
    if (value.empty()) fail("missing value for '" + key + "'");
    try {
      it->second(config, value);
    } catch (const std::invalid_argument& e) {
      fail(key + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_text(const RunConfig& c) {
  std::string out;
  auto put = [&out](const char* key, const auto& value) { out += fmt::format("{} = {}\n", key, value); };
  put("tau", c.tau);
  put("lambda_pos", c.lambda_pos);
  put("lambda_neg", c.lambda_neg);
  put("lambda_npd", c.lambda_npd);
  put("lambda_energy", c.lambda_energy);
  put("m_in", c.m_in);
  put("t_energy", c.t_energy);
  put("n_features", c.n_features);
  put("k_text", c.k_text);
  put("k_patch", c.k_patch);
  put("k_cross", c.k_cross);
  put("vig_layers", c.vig_layers);
  put("hidden_dim", c.hidden_dim);
  put("lr_adapter", c.lr_adapter);
  put("lr_vig", c.lr_vig);
  put("epochs_adapter", c.epochs_adapter);
  put("epochs_vig", c.epochs_vig);
  put("batch_size", c.batch_size);
  put("pooling", c.pooling == Pooling::Mean ? "mean" : "max");
  put("score_mode", to_string(c.score_mode));
  put("stage1_source", to_string(c.stage1_source));
  put("seed", c.seed);
  return out;
}

}  // namespace pnps
