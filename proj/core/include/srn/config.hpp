#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "srn/attack.hpp"
#include "srn/baseline.hpp"
#include "srn/metric.hpp"
#include "srn/model.hpp"
#include "srn/stablerank.hpp"

// Pipeline configuration: an INI file with one section per stage. Every
// key is optional; missing keys keep the defaults below.
namespace srn::config {

struct DataConfig {
  std::size_t per_class = 200;
  std::size_t n_points = 300;
};

struct PhConfig {
  int degree = 1;
  double scale = 1000.0;
};

struct VectorizeConfig {
  metric::MetricParams p = metric::MetricParams::infinity();
  stablerank::Reparameterization rep = stablerank::Reparameterization::identity();
  std::size_t dim = 100;
};

struct CertifyConfig {
  std::vector<double> eps{1e-5, 1e-2, 1e-1, 1.0};
};

struct AttackStageConfig {
  attack::AttackConfig attack;
  /// Test samples attacked per repetition (the first ones in file order).
  std::size_t max_samples = 200;
  /// Models to attack: any of "baseline", "srn".
  std::vector<std::string> targets{"baseline"};
};

struct DistancesConfig {
  metric::MetricParams p = metric::MetricParams::infinity();
  /// Upper limit on the diagram pairs sampled per class cell.
  std::size_t pairs_per_cell = 100;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t repetitions = 5;
  double test_fraction = 0.3;
};

struct PipelineConfig {
  DataConfig data;
  PhConfig ph;
  VectorizeConfig vectorize;
  model::SrnTrainConfig srn;
  baseline::DeepSetTrainConfig baseline;
  CertifyConfig certify;
  AttackStageConfig attack;
  DistancesConfig distances;
  RunConfig run;
};

/// Checks value ranges and the ascending eps grid. Throws ParameterError.
void validate(const PipelineConfig& config);

/// Parses INI text. Unknown sections or keys and malformed values throw
/// ParameterError naming the offending key.
PipelineConfig parse(const std::string& ini_text);
PipelineConfig load(const std::filesystem::path& path);

/// Canonical "key = value" text of one section ("data", "ph", "vectorize",
/// "srn", "baseline", "certify", "attack", "distances", "run") with every
/// key present. Equal configurations give equal text.
std::string canonical_section(const PipelineConfig& config, const std::string& section);

/// The whole configuration as canonical INI text; parse() reads it back.
std::string to_ini(const PipelineConfig& config);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& text);

/// Hex FNV-1a hash over the canonical text of the given sections, in order.
std::string stanza_hash(const PipelineConfig& config, const std::vector<std::string>& sections);

}  // namespace srn::config
