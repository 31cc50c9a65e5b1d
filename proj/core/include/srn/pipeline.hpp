#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "srn/config.hpp"
#include "srn/io.hpp"
#include "srn/lipnet.hpp"
#include "srn/matrix.hpp"
#include "srn/types.hpp"

namespace srn::pipeline {

/// A failed pipeline stage. what() starts with the stage name.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per class, round(test_fraction * class size) samples go to the test set,
/// chosen by a seeded shuffle. Both index lists are sorted.
Split stratified_split(std::span<const int> labels, double test_fraction, std::uint64_t seed);

/// Seeds derived from the run seed, one stream per purpose and repetition.
std::uint64_t split_seed(std::uint64_t run_seed, std::size_t repetition);
std::uint64_t srn_seed(std::uint64_t run_seed, std::size_t repetition);
std::uint64_t baseline_seed(std::uint64_t run_seed, std::size_t repetition);
std::uint64_t attack_seed(std::uint64_t run_seed, std::size_t repetition);

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows);
template <class T>
std::vector<T> select(std::span<const T> v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

/// Alpha persistence of every cloud in the given degree, scaled by `scale`.
io::DiagramSet compute_diagrams(const orbit::LabeledDataset& data, int degree, double scale);

/// Mean pairwise distance per class pair (a <= b). Each cell samples at
/// most `pairs_per_cell` distinct pairs uniformly without replacement;
/// cells with fewer candidate pairs use all of them.
/// Header: class_a,class_b,mean_distance,pairs
io::Table report_class_distances(std::span<const PersistenceDiagram> diagrams,
                                 std::span<const int> labels, metric::MetricParams p,
                                 std::size_t pairs_per_cell, std::uint64_t seed);

/// (class, radius) for every correctly classified record.
/// Header: class,certified_radius
io::Table report_certified_distribution(std::span<const lipnet::CertificationRecord> records);

/// Attacks every sample at each budget of an ascending grid. A sample broken
/// at some eps is recorded as broken at all larger ones without rerunning.
/// Returns one record list per eps.
std::vector<std::vector<attack::AttackRecord>> attack_grid(
    const attack::Classifier& classifier, std::span<const PersistenceDiagram> diagrams,
    std::span<const int> labels, std::span<const double> eps_grid,
    const attack::AttackConfig& config);

/// Fraction of records that are correct and not broken.
double robust_fraction(std::span<const attack::AttackRecord> records);

struct StageStatus {
  std::string stage;
  bool skipped = false;
};

/// Runs gen-data, compute-ph, vectorize, train, certify, attack and report
/// into `out_dir`. A stage whose outputs exist and carry the matching
/// config hash is skipped. Throws StageError; outputs of completed stages
/// stay on disk.
std::vector<StageStatus> run_pipeline(const config::PipelineConfig& config,
                                      const std::filesystem::path& out_dir,
                                      std::ostream* log = nullptr);

/// The report stage alone: reads stage outputs from `out_dir` and writes the
/// summary tables there.
void write_report(const config::PipelineConfig& config, const std::filesystem::path& out_dir,
                  std::ostream* log = nullptr);

}  // namespace srn::pipeline
