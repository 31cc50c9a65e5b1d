#include "srn/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "srn/errors.hpp"
#include "srn/io.hpp"

namespace srn::config {

namespace {

using Getter = std::function<std::string(const PipelineConfig&)>;
using Setter = std::function<void(PipelineConfig&, const std::string&)>;

struct Field {
  std::string name;
  Getter get;
  Setter set;
};

struct Section {
  std::string name;
  std::vector<Field> fields;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& s) { return io::parse_double(s); }

std::size_t to_size(const std::string& s) {
  const double v = to_double(s);
  if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
    throw FormatError("not a non-negative integer: '" + s + "'");
  }
  return static_cast<std::size_t>(v);
}

int to_int(const std::string& s) {
  const double v = to_double(s);
  if (v != static_cast<double>(static_cast<int>(v))) throw FormatError("not an integer: '" + s + "'");
  return static_cast<int>(v);
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw FormatError("not a boolean: '" + s + "'");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

std::string from_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + io::format_double(v[i]);
  return out;
}

std::vector<double> to_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(to_double(item));
  return out;
}

std::string from_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<std::size_t> to_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) out.push_back(to_size(item));
  return out;
}

std::string from_strings(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

lipnet::LossKind to_loss(const std::string& s) {
  if (s == "hinge") return lipnet::LossKind::hinge;
  if (s == "cross_entropy" || s == "ce") return lipnet::LossKind::cross_entropy;
  throw FormatError("unknown loss: '" + s + "'");
}

std::string from_loss(lipnet::LossKind k) {
  return k == lipnet::LossKind::hinge ? "hinge" : "cross_entropy";
}

#define SRN_FIELD(name, expr, to, from)                                            \
  Field {                                                                          \
    name, [](const PipelineConfig& c) { return from(c.expr); },                    \
        [](PipelineConfig& c, const std::string& v) { c.expr = to(v); }            \
  }

std::string from_size(std::size_t v) { return std::to_string(v); }
std::string from_int(int v) { return std::to_string(v); }
std::string from_double(double v) { return io::format_double(v); }
std::string from_u64(std::uint64_t v) { return std::to_string(v); }
std::uint64_t to_u64(const std::string& s) {
  std::size_t pos = 0;
  const auto v = std::stoull(s, &pos);
  if (pos != s.size()) throw FormatError("not an unsigned integer: '" + s + "'");
  return v;
}
std::string from_kind(optim::Kind k) { return optim::to_string(k); }
optim::Kind to_kind(const std::string& s) { return optim::parse_kind(s); }

const std::vector<Section>& sections() {
  static const std::vector<Section> table = {
      {"data",
       {SRN_FIELD("per_class", data.per_class, to_size, from_size),
        SRN_FIELD("n_points", data.n_points, to_size, from_size)}},
      {"ph",
       {SRN_FIELD("degree", ph.degree, to_int, from_int),
        SRN_FIELD("scale", ph.scale, to_double, from_double)}},
      {"vectorize",
       {SRN_FIELD("p", vectorize.p, io::parse_p, io::format_p),
        SRN_FIELD("F", vectorize.rep, io::parse_reparameterization, io::format_reparameterization),
        SRN_FIELD("dim", vectorize.dim, to_size, from_size)}},
      {"srn",
       {SRN_FIELD("layer_sizes", srn.net.layer_sizes, to_sizes, from_sizes),
        SRN_FIELD("epochs", srn.net.epochs, to_size, from_size),
        SRN_FIELD("batch_size", srn.net.batch_size, to_size, from_size),
        SRN_FIELD("optimizer", srn.net.optimizer.kind, to_kind, from_kind),
        SRN_FIELD("learning_rate", srn.net.optimizer.learning_rate, to_double, from_double),
        SRN_FIELD("momentum", srn.net.optimizer.momentum, to_double, from_double),
        SRN_FIELD("decay_every", srn.net.optimizer.decay_every, to_size, from_size),
        SRN_FIELD("decay_factor", srn.net.optimizer.decay_factor, to_double, from_double),
        SRN_FIELD("loss", srn.net.loss, to_loss, from_loss),
        SRN_FIELD("margin_target", srn.net.margin_target, to_double, from_double),
        SRN_FIELD("temperature", srn.net.temperature, to_double, from_double),
        SRN_FIELD("validation_fraction", srn.net.validation_fraction, to_double, from_double),
        SRN_FIELD("centering_momentum", srn.net.centering_momentum, to_double, from_double),
        SRN_FIELD("center_last_layer", srn.net.center_last_layer, to_bool, from_bool),
        SRN_FIELD("contract_inputs", srn.net.contract_inputs, to_bool, from_bool),
        SRN_FIELD("relax_p_start", srn.net.relax_p_start, to_int, from_int),
        SRN_FIELD("relax_p_max", srn.net.relax_p_max, to_int, from_int),
        SRN_FIELD("relax_fraction", srn.net.relax_fraction, to_double, from_double),
        SRN_FIELD("train_F", srn.train_reparameterization, to_bool, from_bool),
        SRN_FIELD("F_learning_rate", srn.reparam_learning_rate, to_double, from_double)}},
      {"baseline",
       {SRN_FIELD("epochs", baseline.epochs, to_size, from_size),
        SRN_FIELD("batch_size", baseline.batch_size, to_size, from_size),
        SRN_FIELD("optimizer", baseline.optimizer.kind, to_kind, from_kind),
        SRN_FIELD("learning_rate", baseline.optimizer.learning_rate, to_double, from_double),
        SRN_FIELD("momentum", baseline.optimizer.momentum, to_double, from_double),
        SRN_FIELD("validation_fraction", baseline.validation_fraction, to_double, from_double)}},
      {"certify", {SRN_FIELD("eps", certify.eps, to_doubles, from_doubles)}},
      {"attack",
       {SRN_FIELD("lambdas", attack.attack.lambdas, to_doubles, from_doubles),
        SRN_FIELD("steps", attack.attack.steps, to_size, from_size),
        SRN_FIELD("step_size", attack.attack.step_size, to_double, from_double),
        SRN_FIELD("n_added", attack.attack.n_added, to_size, from_size),
        SRN_FIELD("init_offset", attack.attack.init_offset, to_double, from_double),
        SRN_FIELD("restarts", attack.attack.restarts, to_size, from_size),
        SRN_FIELD("init_spread", attack.attack.init_spread, to_double, from_double),
        SRN_FIELD("temperature_start", attack.attack.temperature_start, to_double, from_double),
        SRN_FIELD("temperature_end", attack.attack.temperature_end, to_double, from_double),
        SRN_FIELD("p", attack.attack.p, io::parse_p, io::format_p),
        SRN_FIELD("max_samples", attack.max_samples, to_size, from_size),
        SRN_FIELD("targets", attack.targets, split_list, from_strings)}},
      {"distances",
       {SRN_FIELD("p", distances.p, io::parse_p, io::format_p),
        SRN_FIELD("pairs_per_cell", distances.pairs_per_cell, to_size, from_size)}},
      {"run",
       {SRN_FIELD("seed", run.seed, to_u64, from_u64),
        SRN_FIELD("repetitions", run.repetitions, to_size, from_size),
        SRN_FIELD("test_fraction", run.test_fraction, to_double, from_double)}},
  };
  return table;
}

#undef SRN_FIELD

const Section& find_section(const std::string& name) {
  for (const auto& s : sections()) {
    if (s.name == name) return s;
  }
  throw ParameterError("unknown config section [" + name + "]");
}

void check(bool ok, const std::string& what) {
  if (!ok) throw ParameterError("config: " + what);
}

}  // namespace

void validate(const PipelineConfig& c) {
  check(c.data.per_class > 0, "data.per_class must be positive");
  check(c.data.n_points > 0, "data.n_points must be positive");
  check(c.ph.degree >= 0 && c.ph.degree <= 1, "ph.degree must be 0 or 1");
  check(c.ph.scale > 0, "ph.scale must be positive");
  check(c.vectorize.dim > 0, "vectorize.dim must be positive");
  check(!c.srn.net.layer_sizes.empty(), "srn.layer_sizes must not be empty");
  check(c.srn.net.epochs > 0 && c.srn.net.batch_size > 0, "srn.epochs and srn.batch_size must be positive");
  check(c.srn.net.optimizer.learning_rate > 0, "srn.learning_rate must be positive");
  check(c.srn.net.validation_fraction >= 0 && c.srn.net.validation_fraction < 1,
        "srn.validation_fraction must lie in [0, 1)");
  check(c.baseline.epochs > 0 && c.baseline.batch_size > 0,
        "baseline.epochs and baseline.batch_size must be positive");
  check(c.baseline.optimizer.learning_rate > 0, "baseline.learning_rate must be positive");
  check(c.baseline.validation_fraction >= 0 && c.baseline.validation_fraction < 1,
        "baseline.validation_fraction must lie in [0, 1)");
  check(!c.certify.eps.empty(), "certify.eps must not be empty");
  for (std::size_t i = 0; i < c.certify.eps.size(); ++i) {
    check(c.certify.eps[i] >= 0, "certify.eps must be non-negative");
    check(i == 0 || c.certify.eps[i - 1] < c.certify.eps[i], "certify.eps must be sorted ascending");
  }
  check(!c.attack.attack.lambdas.empty(), "attack.lambdas must not be empty");
  check(c.attack.attack.steps > 0, "attack.steps must be positive");
  for (const auto& t : c.attack.targets) {
    check(t == "baseline" || t == "srn", "attack.targets entries must be 'baseline' or 'srn'");
  }
  check(c.distances.pairs_per_cell > 0, "distances.pairs_per_cell must be positive");
  check(c.run.repetitions > 0, "run.repetitions must be positive");
  check(c.run.test_fraction > 0 && c.run.test_fraction < 1, "run.test_fraction must lie in (0, 1)");
}

PipelineConfig parse(const std::string& ini_text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParameterError(std::string("config: ") + e.what());
  }
  PipelineConfig config;
  for (const auto& [section_name, section_tree] : tree) {
    if (section_tree.empty()) {
      throw ParameterError("config: key '" + section_name + "' outside of a section");
    }
    const Section& section = find_section(section_name);
    for (const auto& [key, value] : section_tree) {
      const Field* field = nullptr;
      for (const auto& f : section.fields) {
        if (f.name == key) field = &f;
      }
      if (field == nullptr) throw ParameterError("config: unknown key " + section_name + "." + key);
      try {
        field->set(config, trim(value.data()));
      } catch (const std::exception& e) {
        throw ParameterError("config: " + section_name + "." + key + ": " + e.what());
      }
    }
  }
  validate(config);
  return config;
}

PipelineConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string canonical_section(const PipelineConfig& config, const std::string& name) {
  const Section& section = find_section(name);
  std::string out;
  for (const auto& f : section.fields) out += f.name + " = " + f.get(config) + "\n";
  return out;
}

std::string to_ini(const PipelineConfig& config) {
  std::string out;
  for (const auto& s : sections()) {
    if (!out.empty()) out += "\n";
    out += "[" + s.name + "]\n" + canonical_section(config, s.name);
  }
  return out;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string stanza_hash(const PipelineConfig& config, const std::vector<std::string>& names) {
  std::string text;
  for (const auto& n : names) text += "[" + n + "]\n" + canonical_section(config, n);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

}  // namespace srn::config
