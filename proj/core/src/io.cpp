#include "srn/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "srn/errors.hpp"

namespace srn::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Csv {
  Metadata meta;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void parse_meta_line(const std::string& line, Metadata& meta) {
  const std::string body = trim(line.substr(1));
  const auto eq = body.find('=');
  if (eq == std::string::npos) return;
  meta[trim(body.substr(0, eq))] = trim(body.substr(eq + 1));
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

Csv read_csv(const fs::path& path) {
  auto in = open_in(path);
  Csv csv;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (!have_header) parse_meta_line(line, csv.meta);
      continue;
    }
    auto cells = split(line, ',');
    if (!have_header) {
      csv.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != csv.header.size()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(csv.header.size()) + " fields, found " +
                        std::to_string(cells.size()));
    }
    csv.rows.push_back(std::move(cells));
  }
  if (!have_header) throw FormatError(path.string() + ": missing header row");
  return csv;
}

void require_header(const Csv& csv, const fs::path& path, const std::vector<std::string>& expected,
                    bool prefix_only = false) {
  const bool ok = prefix_only ? csv.header.size() >= expected.size() &&
                                    std::equal(expected.begin(), expected.end(), csv.header.begin())
                              : csv.header == expected;
  if (!ok) throw FormatError(path.string() + ": unexpected header row");
}

void write_meta(std::ostream& out, const Metadata& meta) {
  for (const auto& [k, v] : meta) out << "# " << k << '=' << v << '\n';
}

long long parse_int(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno != 0) {
    throw FormatError("not an integer: '" + s + "'");
  }
  return v;
}

std::size_t parse_index(const std::string& s) {
  const long long v = parse_int(s);
  if (v < 0) throw FormatError("negative index: '" + s + "'");
  return static_cast<std::size_t>(v);
}

std::string join_labels(const std::vector<int>& labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i > 0) out += ' ';
    out += std::to_string(labels[i]);
  }
  return out;
}

std::vector<int> parse_labels(const std::string& s) {
  std::vector<int> out;
  std::istringstream ss(s);
  std::string tok;
  while (ss >> tok) out.push_back(static_cast<int>(parse_int(tok)));
  return out;
}

const std::string& require_key(const Metadata& meta, const std::string& key, const fs::path& path) {
  const auto it = meta.find(key);
  if (it == meta.end()) throw FormatError(path.string() + ": missing metadata '" + key + "'");
  return it->second;
}

json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void check_model(const json& j, const fs::path& path, const char* architecture) {
  if (!j.contains("version") || j["version"].get<int>() != kModelVersion) {
    throw FormatError(path.string() + ": unsupported model version");
  }
  if (j.value("architecture", "") != architecture) {
    throw FormatError(path.string() + ": expected architecture '" + architecture + "'");
  }
}

json meta_json(const Metadata& meta) {
  json m = json::object();
  for (const auto& [k, v] : meta) m[k] = v;
  return m;
}

void read_meta_json(const json& j, Metadata* meta) {
  if (meta == nullptr || !j.contains("metadata")) return;
  for (const auto& [k, v] : j["metadata"].items()) (*meta)[k] = v.get<std::string>();
}

}  // namespace

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  const std::string t = trim(s);
  if (t == "inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
    throw FormatError("not a number: '" + s + "'");
  }
  return v;
}

std::string format_p(metric::MetricParams p) {
  return p.is_infinite() ? "inf" : format_double(p.p());
}

metric::MetricParams parse_p(const std::string& s) {
  try {
    return metric::MetricParams(parse_double(s));
  } catch (const ParameterError&) {
    throw FormatError("invalid p: '" + s + "'");
  }
}

std::string format_reparameterization(const stablerank::Reparameterization& rep) {
  if (rep.is_identity()) return "identity";
  std::string out = "mixture:";
  bool first = true;
  for (const auto& c : rep.components()) {
    if (!first) out += ';';
    first = false;
    out += format_double(c.weight) + ',' + format_double(c.mean) + ',' + format_double(c.stddev);
  }
  return out;
}

stablerank::Reparameterization parse_reparameterization(const std::string& s) {
  const std::string t = trim(s);
  if (t == "identity") return stablerank::Reparameterization::identity();
  const std::string prefix = "mixture:";
  if (t.rfind(prefix, 0) != 0) throw FormatError("unknown reparameterization: '" + s + "'");
  std::vector<stablerank::GaussianComponent> comps;
  for (const auto& part : split(t.substr(prefix.size()), ';')) {
    const auto f = split(part, ',');
    if (f.size() != 3) throw FormatError("mixture component needs weight,mean,stddev: '" + part + "'");
    comps.push_back({parse_double(f[0]), parse_double(f[1]), parse_double(f[2])});
  }
  try {
    return stablerank::Reparameterization::gaussian_mixture(std::move(comps));
  } catch (const ParameterError& e) {
    throw FormatError(std::string("invalid mixture: ") + e.what());
  }
}

Metadata read_metadata(const fs::path& path) {
  auto in = open_in(path);
  Metadata meta;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] != '#') break;
    parse_meta_line(line, meta);
  }
  if (meta.empty() && path.extension() == ".json") {
    const json j = read_json(path);
    read_meta_json(j, &meta);
  }
  return meta;
}

void write_point_clouds(const fs::path& path, const orbit::LabeledDataset& data,
                        const Metadata& meta) {
  auto out = open_out(path);
  Metadata m = meta;
  m["n_samples"] = std::to_string(data.samples.size());
  m["per_class"] = std::to_string(data.per_class);
  m["n_points"] = std::to_string(data.n_points);
  m["dataset_seed"] = std::to_string(data.seed);
  std::string params;
  for (double r : data.class_params) params += (params.empty() ? "" : " ") + format_double(r);
  m["class_params"] = params;
  write_meta(out, m);
  for (const auto& sample : data.samples) {
    out << sample.label;
    for (const auto& p : sample.cloud) out << ',' << format_double(p.x) << ',' << format_double(p.y);
    out << '\n';
  }
}

orbit::LabeledDataset read_point_clouds(const fs::path& path, Metadata* meta) {
  auto in = open_in(path);
  orbit::LabeledDataset data;
  Metadata m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      parse_meta_line(line, m);
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() % 2 != 1) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected a label followed by coordinate pairs");
    }
    orbit::Sample sample;
    sample.label = static_cast<int>(parse_int(cells[0]));
    for (std::size_t k = 1; k < cells.size(); k += 2) {
      sample.cloud.push_back({parse_double(cells[k]), parse_double(cells[k + 1])});
    }
    data.samples.push_back(std::move(sample));
  }
  const std::size_t n = parse_index(require_key(m, "n_samples", path));
  if (n != data.samples.size()) throw FormatError(path.string() + ": sample count mismatch");
  if (auto it = m.find("per_class"); it != m.end()) data.per_class = parse_index(it->second);
  if (auto it = m.find("n_points"); it != m.end()) data.n_points = parse_index(it->second);
  if (auto it = m.find("dataset_seed"); it != m.end()) data.seed = std::stoull(it->second);
  if (auto it = m.find("class_params"); it != m.end()) {
    std::istringstream ss(it->second);
    std::string tok;
    while (ss >> tok) data.class_params.push_back(parse_double(tok));
  }
  if (meta != nullptr) *meta = m;
  return data;
}

void write_diagrams(const fs::path& path, const DiagramSet& set, const Metadata& meta) {
  if (set.labels.size() != set.diagrams.size()) {
    throw ContractError("write_diagrams: labels and diagrams differ in count");
  }
  auto out = open_out(path);
  Metadata m = meta;
  m["n_samples"] = std::to_string(set.diagrams.size());
  m["labels"] = join_labels(set.labels);
  write_meta(out, m);
  out << "sample_id,degree,birth,death\n";
  for (std::size_t i = 0; i < set.diagrams.size(); ++i) {
    for (const auto& p : set.diagrams[i].points) {
      out << i << ',' << set.diagrams[i].degree << ',' << format_double(p.birth) << ','
          << format_double(p.death) << '\n';
    }
  }
}

DiagramSet read_diagrams(const fs::path& path, Metadata* meta) {
  const Csv csv = read_csv(path);
  require_header(csv, path, {"sample_id", "degree", "birth", "death"});
  DiagramSet set;
  const std::size_t n = parse_index(require_key(csv.meta, "n_samples", path));
  set.labels = parse_labels(require_key(csv.meta, "labels", path));
  if (set.labels.size() != n) throw FormatError(path.string() + ": label count mismatch");
  set.diagrams.resize(n);
  if (auto it = csv.meta.find("degree"); it != csv.meta.end()) {
    for (auto& d : set.diagrams) d.degree = static_cast<int>(parse_int(it->second));
  }
  for (const auto& row : csv.rows) {
    const std::size_t id = parse_index(row[0]);
    if (id >= n) throw FormatError(path.string() + ": sample id out of range");
    set.diagrams[id].degree = static_cast<int>(parse_int(row[1]));
    set.diagrams[id].points.push_back({parse_double(row[2]), parse_double(row[3])});
  }
  if (meta != nullptr) *meta = csv.meta;
  return set;
}

void write_vectors(const fs::path& path, const VectorSet& set, const Metadata& meta) {
  if (set.labels.size() != set.vectors.rows()) {
    throw ContractError("write_vectors: labels and vectors differ in count");
  }
  auto out = open_out(path);
  Metadata m = meta;
  m["dim"] = std::to_string(set.vectors.cols());
  write_meta(out, m);
  out << "sample_id,label";
  for (std::size_t j = 0; j < set.vectors.cols(); ++j) out << ",v" << j;
  out << '\n';
  for (std::size_t i = 0; i < set.vectors.rows(); ++i) {
    out << i << ',' << set.labels[i];
    for (double v : set.vectors.row(i)) out << ',' << format_double(v);
    out << '\n';
  }
}

VectorSet read_vectors(const fs::path& path, Metadata* meta) {
  const Csv csv = read_csv(path);
  require_header(csv, path, {"sample_id", "label"}, true);
  const std::size_t dim = csv.header.size() - 2;
  VectorSet set;
  set.vectors = Matrix(csv.rows.size(), dim);
  set.labels.resize(csv.rows.size());
  for (const auto& row : csv.rows) {
    const std::size_t id = parse_index(row[0]);
    if (id >= csv.rows.size()) throw FormatError(path.string() + ": sample id out of range");
    set.labels[id] = static_cast<int>(parse_int(row[1]));
    for (std::size_t j = 0; j < dim; ++j) set.vectors(id, j) = parse_double(row[j + 2]);
  }
  if (meta != nullptr) *meta = csv.meta;
  return set;
}

void write_certification(const fs::path& path,
                         const std::vector<lipnet::CertificationRecord>& records,
                         const Metadata& meta) {
  auto out = open_out(path);
  write_meta(out, meta);
  out << "sample_id,true_class,predicted,margin,certified_radius,lipschitz_constant\n";
  for (const auto& r : records) {
    out << r.sample_id << ',' << r.true_class << ',' << r.predicted << ','
        << format_double(r.margin) << ',' << format_double(r.certified_radius) << ','
        << format_double(r.lipschitz_constant) << '\n';
  }
}

std::vector<lipnet::CertificationRecord> read_certification(const fs::path& path, Metadata* meta) {
  const Csv csv = read_csv(path);
  require_header(csv, path, {"sample_id", "true_class", "predicted", "margin", "certified_radius",
                             "lipschitz_constant"});
  std::vector<lipnet::CertificationRecord> out;
  for (const auto& row : csv.rows) {
    lipnet::CertificationRecord r;
    r.sample_id = parse_index(row[0]);
    r.true_class = static_cast<int>(parse_int(row[1]));
    r.predicted = static_cast<int>(parse_int(row[2]));
    r.margin = parse_double(row[3]);
    r.certified_radius = parse_double(row[4]);
    r.lipschitz_constant = parse_double(row[5]);
    out.push_back(r);
  }
  if (meta != nullptr) *meta = csv.meta;
  return out;
}

void write_attack_records(const fs::path& path, const std::vector<attack::AttackRecord>& records,
                          const Metadata& meta) {
  auto out = open_out(path);
  write_meta(out, meta);
  out << "sample_id,clean_correct,success,distance,iterations\n";
  for (const auto& r : records) {
    out << r.sample_id << ',' << (r.clean_correct ? 1 : 0) << ',' << (r.success ? 1 : 0) << ','
        << format_double(r.distance) << ',' << r.iterations << '\n';
  }
}

std::vector<attack::AttackRecord> read_attack_records(const fs::path& path, Metadata* meta) {
  const Csv csv = read_csv(path);
  require_header(csv, path, {"sample_id", "clean_correct", "success", "distance", "iterations"});
  std::vector<attack::AttackRecord> out;
  for (const auto& row : csv.rows) {
    attack::AttackRecord r;
    r.sample_id = parse_index(row[0]);
    r.clean_correct = parse_int(row[1]) != 0;
    r.success = parse_int(row[2]) != 0;
    r.distance = parse_double(row[3]);
    r.iterations = parse_index(row[4]);
    out.push_back(r);
  }
  if (meta != nullptr) *meta = csv.meta;
  return out;
}

void write_table(const fs::path& path, const Table& table, const Metadata& meta) {
  auto out = open_out(path);
  write_meta(out, meta);
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw ContractError("write_table: ragged row");
    line(row);
  }
}

Table read_table(const fs::path& path, Metadata* meta) {
  Csv csv = read_csv(path);
  if (meta != nullptr) *meta = csv.meta;
  return {std::move(csv.header), std::move(csv.rows)};
}

void write_srn_model(const fs::path& path, const model::SrnModel& model, const Metadata& meta) {
  json j;
  j["version"] = kModelVersion;
  j["architecture"] = kSrnArchitecture;
  j["p"] = format_p(model.p);
  j["reparameterization"] = format_reparameterization(model.rep);
  j["dim"] = model.dim;
  j["lipschitz_constant"] = model.lipschitz_constant();
  j["input_scale"] = model.net.input_scale();
  json layers = json::array();
  for (const auto& l : model.net.layers()) {
    layers.push_back({{"inputs", l.inputs},
                      {"units", l.units},
                      {"centering", l.centering},
                      {"weights", l.weights},
                      {"biases", l.biases},
                      {"running_mean", l.running_mean}});
  }
  j["layers"] = layers;
  j["metadata"] = meta_json(meta);
  auto out = open_out(path);
  out << j.dump(1) << '\n';
}

model::SrnModel read_srn_model(const fs::path& path, Metadata* meta) {
  const json j = read_json(path);
  check_model(j, path, kSrnArchitecture);
  try {
    model::SrnModel m;
    m.p = parse_p(j.at("p").get<std::string>());
    m.rep = parse_reparameterization(j.at("reparameterization").get<std::string>());
    m.dim = j.at("dim").get<std::size_t>();
    std::vector<std::size_t> sizes;
    for (const auto& l : j.at("layers")) sizes.push_back(l.at("units").get<std::size_t>());
    if (sizes.empty()) throw FormatError(path.string() + ": model has no layers");
    const auto& first = j.at("layers").front();
    m.net = lipnet::LipschitzNetwork(first.at("inputs").get<std::size_t>(), sizes);
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      const auto& src = j.at("layers")[k];
      auto& layer = m.net.layers()[k];
      if (src.at("inputs").get<std::size_t>() != layer.inputs) {
        throw FormatError(path.string() + ": layer input sizes do not chain");
      }
      layer.centering = src.at("centering").get<bool>();
      layer.weights = src.at("weights").get<std::vector<double>>();
      layer.biases = src.at("biases").get<std::vector<double>>();
      layer.running_mean = src.at("running_mean").get<std::vector<double>>();
      if (layer.weights.size() != layer.inputs * layer.units || layer.biases.size() != layer.units ||
          layer.running_mean.size() != layer.units) {
        throw FormatError(path.string() + ": layer " + std::to_string(k) + " has wrong shapes");
      }
    }
    m.net.set_input_scale(j.at("input_scale").get<std::vector<double>>());
    if (m.net.input_dim() != m.dim) throw FormatError(path.string() + ": dim mismatch");
    read_meta_json(j, meta);
    return m;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ParameterError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_deepset_model(const fs::path& path, const baseline::DeepSetNet& net,
                         const Metadata& meta) {
  json j;
  j["version"] = kModelVersion;
  j["architecture"] = kDeepSetArchitecture;
  j["classes"] = net.classes;
  j["hidden"] = baseline::DeepSetNet::kHidden;
  j["top"] = baseline::DeepSetNet::kTop;
  j["input_scale"] = net.input_scale;
  j["w1"] = net.w1;
  j["b1"] = net.b1;
  j["w2"] = net.w2;
  j["b2"] = net.b2;
  j["wh"] = net.wh;
  j["bh"] = net.bh;
  j["metadata"] = meta_json(meta);
  auto out = open_out(path);
  out << j.dump(1) << '\n';
}

baseline::DeepSetNet read_deepset_model(const fs::path& path, Metadata* meta) {
  const json j = read_json(path);
  check_model(j, path, kDeepSetArchitecture);
  try {
    if (j.at("hidden").get<std::size_t>() != baseline::DeepSetNet::kHidden ||
        j.at("top").get<std::size_t>() != baseline::DeepSetNet::kTop) {
      throw FormatError(path.string() + ": unsupported encoder shape");
    }
    baseline::DeepSetNet net;
    net.classes = j.at("classes").get<std::size_t>();
    net.input_scale = j.at("input_scale").get<double>();
    net.w1 = j.at("w1").get<std::vector<double>>();
    net.b1 = j.at("b1").get<std::vector<double>>();
    net.w2 = j.at("w2").get<std::vector<double>>();
    net.b2 = j.at("b2").get<std::vector<double>>();
    net.wh = j.at("wh").get<std::vector<double>>();
    net.bh = j.at("bh").get<std::vector<double>>();
    read_meta_json(j, meta);
    try {
      baseline::deepset_forward(net, PersistenceDiagram{});
    } catch (const ContractError& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
    return net;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string model_architecture(const fs::path& path) {
  const json j = read_json(path);
  return j.value("architecture", "");
}

}  // namespace srn::io
