#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "srn/attack.hpp"
#include "srn/baseline.hpp"
#include "srn/lipnet.hpp"
#include "srn/matrix.hpp"
#include "srn/metric.hpp"
#include "srn/model.hpp"
#include "srn/orbit.hpp"
#include "srn/stablerank.hpp"
#include "srn/types.hpp"

// Delimited text files: zero or more "# key=value" metadata lines, a header
// row, then comma-separated data rows. Reals are written with 17 significant
// digits so every file re-parses to the same doubles.
namespace srn::io {

using Metadata = std::map<std::string, std::string>;

std::string format_double(double v);
double parse_double(const std::string& s);

/// "inf" or a number >= 1.
std::string format_p(metric::MetricParams p);
metric::MetricParams parse_p(const std::string& s);

/// "identity" or "mixture:w,mu,s;w,mu,s;...".
std::string format_reparameterization(const stablerank::Reparameterization& rep);
stablerank::Reparameterization parse_reparameterization(const std::string& s);

/// Reads only the metadata lines of a file. Throws FormatError when the
/// file cannot be opened.
Metadata read_metadata(const std::filesystem::path& path);

struct DiagramSet {
  std::vector<PersistenceDiagram> diagrams;
  std::vector<int> labels;
};

struct VectorSet {
  Matrix vectors;
  std::vector<int> labels;
};

// One record per sample after the metadata, no header row:
// label,x_0,y_0,x_1,y_1,...  The sample id is the record index.
void write_point_clouds(const std::filesystem::path& path, const orbit::LabeledDataset& data,
                        const Metadata& meta = {});
orbit::LabeledDataset read_point_clouds(const std::filesystem::path& path,
                                        Metadata* meta = nullptr);

// Rows: sample_id,degree,birth,death. Sample count and labels live in the
// metadata so that empty diagrams survive a round trip.
void write_diagrams(const std::filesystem::path& path, const DiagramSet& set,
                    const Metadata& meta = {});
DiagramSet read_diagrams(const std::filesystem::path& path, Metadata* meta = nullptr);

// Rows: sample_id,label,v0,...,v{N-1}
void write_vectors(const std::filesystem::path& path, const VectorSet& set,
                   const Metadata& meta = {});
VectorSet read_vectors(const std::filesystem::path& path, Metadata* meta = nullptr);

// Rows: sample_id,true_class,predicted,margin,certified_radius,lipschitz_constant
void write_certification(const std::filesystem::path& path,
                         const std::vector<lipnet::CertificationRecord>& records,
                         const Metadata& meta = {});
std::vector<lipnet::CertificationRecord> read_certification(const std::filesystem::path& path,
                                                            Metadata* meta = nullptr);

// Rows: sample_id,clean_correct,success,distance,iterations
void write_attack_records(const std::filesystem::path& path,
                          const std::vector<attack::AttackRecord>& records,
                          const Metadata& meta = {});
std::vector<attack::AttackRecord> read_attack_records(const std::filesystem::path& path,
                                                      Metadata* meta = nullptr);

/// Generic table: header plus rows of preformatted cells.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
void write_table(const std::filesystem::path& path, const Table& table, const Metadata& meta = {});
Table read_table(const std::filesystem::path& path, Metadata* meta = nullptr);

// Model files: JSON with a version field and an architecture tag.
inline constexpr int kModelVersion = 1;
inline constexpr const char* kSrnArchitecture = "srn-linf";
inline constexpr const char* kDeepSetArchitecture = "deepset";

void write_srn_model(const std::filesystem::path& path, const model::SrnModel& model,
                     const Metadata& meta = {});
model::SrnModel read_srn_model(const std::filesystem::path& path, Metadata* meta = nullptr);
void write_deepset_model(const std::filesystem::path& path, const baseline::DeepSetNet& net,
                         const Metadata& meta = {});
baseline::DeepSetNet read_deepset_model(const std::filesystem::path& path,
                                        Metadata* meta = nullptr);
/// The architecture tag of a model file.
std::string model_architecture(const std::filesystem::path& path);

}  // namespace srn::io
