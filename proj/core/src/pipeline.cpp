#include "srn/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>

#include "srn/attack.hpp"
#include "srn/baseline.hpp"
#include "srn/complex.hpp"
#include "srn/errors.hpp"
#include "srn/model.hpp"
#include "srn/orbit.hpp"
#include "srn/rng.hpp"
#include "srn/stablerank.hpp"

namespace srn::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr const char* kClouds = "clouds.csv";
constexpr const char* kDiagrams = "diagrams.csv";
constexpr const char* kVectors = "vectors.csv";
constexpr const char* kSrnModel = "srn_model.json";
constexpr const char* kBaselineModel = "baseline_model.json";
constexpr const char* kSplit = "split.csv";
constexpr const char* kCertification = "certification.csv";
constexpr const char* kBaselineEval = "baseline_predictions.csv";
constexpr const char* kClassDistances = "table_class_distances.csv";

std::string hash_of(const config::PipelineConfig& c, const std::vector<std::string>& sections) {
  std::string text = "seed = " + std::to_string(c.run.seed) + "\n";
  for (const auto& s : sections) text += "[" + s + "]\n" + config::canonical_section(c, s);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config::fnv1a(text)));
  return buf;
}

std::string data_hash(const config::PipelineConfig& c) { return hash_of(c, {"data"}); }
std::string ph_hash(const config::PipelineConfig& c) { return hash_of(c, {"data", "ph"}); }
std::string vec_hash(const config::PipelineConfig& c) {
  return hash_of(c, {"data", "ph", "vectorize"});
}
std::string train_hash(const config::PipelineConfig& c) {
  return hash_of(c, {"data", "ph", "vectorize", "srn", "baseline", "run"});
}
std::string certify_hash(const config::PipelineConfig& c) {
  return hash_of(c, {"data", "ph", "vectorize", "srn", "baseline", "run", "certify"});
}
std::string attack_hash(const config::PipelineConfig& c) {
  return hash_of(c, {"data", "ph", "vectorize", "srn", "baseline", "run", "certify", "attack"});
}
std::string distance_hash(const config::PipelineConfig& c) {
  return hash_of(c, {"data", "ph", "distances"});
}
std::string report_hash(const config::PipelineConfig& c) {
  return hash_of(c, {"data", "ph", "vectorize", "srn", "baseline", "run", "certify", "attack",
                     "distances"});
}

bool current(const fs::path& path, const std::string& hash) {
  if (!fs::exists(path)) return false;
  try {
    const auto meta = io::read_metadata(path);
    const auto it = meta.find("config_hash");
    return it != meta.end() && it->second == hash;
  } catch (const std::exception&) {
    return false;
  }
}

bool all_current(const std::vector<fs::path>& paths, const std::string& hash) {
  return std::all_of(paths.begin(), paths.end(), [&](const fs::path& p) { return current(p, hash); });
}

fs::path rep_dir(const fs::path& out, std::size_t r) { return out / ("rep" + std::to_string(r)); }

std::string split_description(const config::PipelineConfig& c) {
  return "stratified test_fraction=" + io::format_double(c.run.test_fraction) +
         " seed=" + std::to_string(c.run.seed);
}

io::Metadata stage_meta(const config::PipelineConfig& c, const std::string& stage,
                        const std::string& hash) {
  return {{"stage", stage}, {"config_hash", hash}, {"seed", std::to_string(c.run.seed)}};
}

std::string attack_file(const std::string& target, std::size_t k) {
  return "attack_" + target + "_eps" + std::to_string(k) + ".csv";
}

std::vector<fs::path> rep_files(const config::PipelineConfig& c, const fs::path& out,
                                std::initializer_list<const char*> names) {
  std::vector<fs::path> files;
  for (std::size_t r = 0; r < c.run.repetitions; ++r) {
    for (const char* n : names) files.push_back(rep_dir(out, r) / n);
  }
  return files;
}

std::vector<fs::path> attack_files(const config::PipelineConfig& c, const fs::path& out) {
  std::vector<fs::path> files;
  for (std::size_t r = 0; r < c.run.repetitions; ++r) {
    for (const auto& t : c.attack.targets) {
      for (std::size_t k = 0; k < c.certify.eps.size(); ++k) {
        files.push_back(rep_dir(out, r) / attack_file(t, k));
      }
    }
  }
  return files;
}

Split read_split(const fs::path& path) {
  const io::Table t = io::read_table(path);
  Split s;
  for (const auto& row : t.rows) {
    const auto id = static_cast<std::size_t>(std::stoull(row.at(0)));
    (row.at(1) == "test" ? s.test : s.train).push_back(id);
  }
  return s;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

class Logger {
 public:
  explicit Logger(std::ostream* out) : out_(out) {}
  void operator()(const std::string& msg) const {
    if (out_ != nullptr) *out_ << msg << std::endl;
  }

 private:
  std::ostream* out_;
};

// ---------------------------------------------------------------------------
// Stages

void stage_gen_data(const config::PipelineConfig& c, const fs::path& out) {
  const auto data = orbit::generate_dataset(c.data.per_class, c.data.n_points, c.run.seed);
  io::write_point_clouds(out / kClouds, data, stage_meta(c, "gen-data", data_hash(c)));
}

void stage_compute_ph(const config::PipelineConfig& c, const fs::path& out) {
  const auto data = io::read_point_clouds(out / kClouds);
  const auto set = compute_diagrams(data, c.ph.degree, c.ph.scale);
  auto meta = stage_meta(c, "compute-ph", ph_hash(c));
  meta["degree"] = std::to_string(c.ph.degree);
  meta["scale"] = io::format_double(c.ph.scale);
  io::write_diagrams(out / kDiagrams, set, meta);
}

void stage_vectorize(const config::PipelineConfig& c, const fs::path& out) {
  const auto set = io::read_diagrams(out / kDiagrams);
  const auto vec = stablerank::vectorize_dataset(set.diagrams, c.vectorize.p, c.vectorize.rep,
                                                 c.vectorize.dim);
  auto meta = stage_meta(c, "vectorize", vec_hash(c));
  meta["p"] = io::format_p(c.vectorize.p);
  meta["F"] = io::format_reparameterization(c.vectorize.rep);
  meta["truncated_rows"] = std::to_string(vec.truncated_rows.size());
  io::write_vectors(out / kVectors, {vec.vectors, set.labels}, meta);
}

void stage_train(const config::PipelineConfig& c, const fs::path& out, const Logger& log) {
  const auto set = io::read_diagrams(out / kDiagrams);
  const auto hash = train_hash(c);
  for (std::size_t r = 0; r < c.run.repetitions; ++r) {
    const fs::path dir = rep_dir(out, r);
    fs::create_directories(dir);
    const Split split = stratified_split(set.labels, c.run.test_fraction, split_seed(c.run.seed, r));
    io::Table st{{"sample_id", "set"}, {}};
    for (auto i : split.train) st.rows.push_back({std::to_string(i), "train"});
    for (auto i : split.test) st.rows.push_back({std::to_string(i), "test"});
    auto meta = stage_meta(c, "train", hash);
    meta["split"] = split_description(c);
    meta["repetition"] = std::to_string(r);
    io::write_table(dir / kSplit, st, meta);

    const auto dgms = select<PersistenceDiagram>(set.diagrams, split.train);
    const auto labels = select<int>(set.labels, split.train);

    auto srn_cfg = c.srn;
    srn_cfg.net.seed = srn_seed(c.run.seed, r);
    const auto t0 = std::chrono::steady_clock::now();
    const auto srn = model::train_srn(dgms, labels, c.vectorize.p, c.vectorize.rep, c.vectorize.dim,
                                      srn_cfg);
    const double t_srn = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto srn_meta = meta;
    srn_meta["margin_target"] = io::format_double(srn.margin_target);
    srn_meta["truncated_rows"] = std::to_string(srn.truncated_rows);
    io::write_srn_model(dir / kSrnModel, srn.model, srn_meta);
    log("  rep " + std::to_string(r) + ": srn trained in " + io::format_double(std::round(t_srn)) +
        " s, final validation accuracy " +
        io::format_double(srn.history.empty() ? 0.0 : srn.history.back().validation_accuracy));

    auto bl_cfg = c.baseline;
    bl_cfg.seed = baseline_seed(c.run.seed, r);
    const auto bl = baseline::train_deepset(dgms, labels, bl_cfg);
    io::write_deepset_model(dir / kBaselineModel, bl.net, meta);
    log("  rep " + std::to_string(r) + ": baseline trained");
  }
}

void stage_certify(const config::PipelineConfig& c, const fs::path& out, const Logger& log) {
  const auto set = io::read_diagrams(out / kDiagrams);
  const auto hash = certify_hash(c);
  for (std::size_t r = 0; r < c.run.repetitions; ++r) {
    const fs::path dir = rep_dir(out, r);
    const Split split = read_split(dir / kSplit);
    const auto srn = io::read_srn_model(dir / kSrnModel);
    const auto bl = io::read_deepset_model(dir / kBaselineModel);
    std::vector<lipnet::CertificationRecord> records;
    io::Table preds{{"sample_id", "true_class", "predicted"}, {}};
    for (auto i : split.test) {
      records.push_back(srn.certify(set.diagrams[i], set.labels[i], i));
      const auto logits = baseline::deepset_forward(bl, set.diagrams[i]);
      preds.rows.push_back({std::to_string(i), std::to_string(set.labels[i]),
                            std::to_string(lipnet::predict(logits))});
    }
    auto meta = stage_meta(c, "certify", hash);
    meta["repetition"] = std::to_string(r);
    io::write_certification(dir / kCertification, records, meta);
    io::write_table(dir / kBaselineEval, preds, meta);
    log("  rep " + std::to_string(r) + ": srn clean accuracy " +
        io::format_double(lipnet::clean_accuracy(records)));
  }
}

void stage_attack(const config::PipelineConfig& c, const fs::path& out, const Logger& log) {
  const auto set = io::read_diagrams(out / kDiagrams);
  const auto hash = attack_hash(c);
  for (std::size_t r = 0; r < c.run.repetitions; ++r) {
    const fs::path dir = rep_dir(out, r);
    Split split = read_split(dir / kSplit);
    if (split.test.size() > c.attack.max_samples) split.test.resize(c.attack.max_samples);
    const auto dgms = select<PersistenceDiagram>(set.diagrams, split.test);
    const auto labels = select<int>(set.labels, split.test);
    auto cfg = c.attack.attack;
    cfg.seed = attack_seed(c.run.seed, r);
    for (const auto& target : c.attack.targets) {
      std::vector<std::vector<attack::AttackRecord>> grid;
      if (target == "srn") {
        const auto m = io::read_srn_model(dir / kSrnModel);
        grid = attack_grid(attack::SrnClassifier(m), dgms, labels, c.certify.eps, cfg);
      } else {
        const auto net = io::read_deepset_model(dir / kBaselineModel);
        grid = attack_grid(attack::DeepSetClassifier(net), dgms, labels, c.certify.eps, cfg);
      }
      for (std::size_t k = 0; k < grid.size(); ++k) {
        for (auto& rec : grid[k]) rec.sample_id = split.test[rec.sample_id];
        auto meta = stage_meta(c, "attack", hash);
        meta["repetition"] = std::to_string(r);
        meta["target"] = target;
        meta["eps"] = io::format_double(c.certify.eps[k]);
        io::write_attack_records(dir / attack_file(target, k), grid[k], meta);
        log("  rep " + std::to_string(r) + ": " + target + " empirical robust accuracy at eps " +
            io::format_double(c.certify.eps[k]) + " = " + io::format_double(robust_fraction(grid[k])));
      }
    }
  }
}

void stage_distances(const config::PipelineConfig& c, const fs::path& out) {
  const auto set = io::read_diagrams(out / kDiagrams);
  const auto table = report_class_distances(set.diagrams, set.labels, c.distances.p,
                                            c.distances.pairs_per_cell, mix_seed(c.run.seed, 5000));
  auto meta = stage_meta(c, "report", distance_hash(c));
  meta["p"] = io::format_p(c.distances.p);
  meta["pairs_per_cell"] = std::to_string(c.distances.pairs_per_cell);
  io::write_table(out / kClassDistances, table, meta);
}

}  // namespace

// ---------------------------------------------------------------------------

Split stratified_split(std::span<const int> labels, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ParameterError("stratified_split: test_fraction must lie in (0, 1)");
  }
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  Split s;
  for (int cls : classes) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) idx.push_back(i);
    }
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(cls) + 1));
    rng.shuffle(idx);
    const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(idx.size())));
    s.test.insert(s.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.insert(s.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::uint64_t split_seed(std::uint64_t s, std::size_t r) { return mix_seed(s, 1000 + r); }
std::uint64_t srn_seed(std::uint64_t s, std::size_t r) { return mix_seed(s, 2000 + r); }
std::uint64_t baseline_seed(std::uint64_t s, std::size_t r) { return mix_seed(s, 3000 + r); }
std::uint64_t attack_seed(std::uint64_t s, std::size_t r) { return mix_seed(s, 4000 + r); }

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  }
  return out;
}

io::DiagramSet compute_diagrams(const orbit::LabeledDataset& data, int degree, double scale) {
  io::DiagramSet set;
  set.diagrams.reserve(data.samples.size());
  for (const auto& s : data.samples) {
    set.diagrams.push_back(
        complex::scale_diagram(complex::alpha_persistence(s.cloud, degree), scale));
    set.labels.push_back(s.label);
  }
  return set;
}

io::Table report_class_distances(std::span<const PersistenceDiagram> diagrams,
                                 std::span<const int> labels, metric::MetricParams p,
                                 std::size_t pairs_per_cell, std::uint64_t seed) {
  if (diagrams.size() != labels.size()) {
    throw ParameterError("report_class_distances: diagrams and labels differ in count");
  }
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::vector<std::vector<std::size_t>> members(classes.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = std::lower_bound(classes.begin(), classes.end(), labels[i]) - classes.begin();
    members[static_cast<std::size_t>(c)].push_back(i);
  }
  io::Table table{{"class_a", "class_b", "mean_distance", "pairs"}, {}};
  Rng rng(seed);
  for (std::size_t a = 0; a < classes.size(); ++a) {
    for (std::size_t b = a; b < classes.size(); ++b) {
      const auto& ma = members[a];
      const auto& mb = members[b];
      const std::size_t total = a == b ? ma.size() * (ma.size() - 1) / 2 : ma.size() * mb.size();
      // Pair k of the cell: for a != b the grid index (k / |mb|, k % |mb|);
      // for a == b the k-th pair (i < j) in row-major order.
      auto pair_at = [&](std::size_t k) -> std::pair<std::size_t, std::size_t> {
        if (a != b) return {ma[k / mb.size()], mb[k % mb.size()]};
        std::size_t i = 0;
        std::size_t row = ma.size() - 1;
        while (k >= row) {
          k -= row;
          ++i;
          --row;
        }
        return {ma[i], ma[i + 1 + k]};
      };
      std::vector<std::size_t> picks;
      if (total <= pairs_per_cell) {
        picks.resize(total);
        std::iota(picks.begin(), picks.end(), 0);
      } else {
        // Floyd's algorithm: distinct uniform sample of pair indices.
        std::vector<std::size_t> chosen;
        for (std::size_t j = total - pairs_per_cell; j < total; ++j) {
          const auto t = static_cast<std::size_t>(rng.below(j + 1));
          chosen.push_back(std::find(chosen.begin(), chosen.end(), t) == chosen.end() ? t : j);
        }
        picks = std::move(chosen);
        std::sort(picks.begin(), picks.end());
      }
      double sum = 0.0;
      for (auto k : picks) {
        const auto [i, j] = pair_at(k);
        sum += metric::distance(diagrams[i], diagrams[j], p);
      }
      const double mean = picks.empty() ? 0.0 : sum / static_cast<double>(picks.size());
      table.rows.push_back({std::to_string(classes[a]), std::to_string(classes[b]),
                            io::format_double(mean), std::to_string(picks.size())});
    }
  }
  return table;
}

io::Table report_certified_distribution(std::span<const lipnet::CertificationRecord> records) {
  io::Table table{{"class", "certified_radius"}, {}};
  for (const auto& r : records) {
    if (r.correct()) {
      table.rows.push_back({std::to_string(r.true_class), io::format_double(r.certified_radius)});
    }
  }
  return table;
}

std::vector<std::vector<attack::AttackRecord>> attack_grid(
    const attack::Classifier& classifier, std::span<const PersistenceDiagram> diagrams,
    std::span<const int> labels, std::span<const double> eps_grid,
    const attack::AttackConfig& config) {
  for (std::size_t k = 1; k < eps_grid.size(); ++k) {
    if (!(eps_grid[k - 1] < eps_grid[k])) {
      throw ParameterError("attack_grid: eps grid must be sorted ascending");
    }
  }
  std::vector<std::vector<attack::AttackRecord>> out;
  std::vector<attack::AttackRecord> previous;
  for (std::size_t k = 0; k < eps_grid.size(); ++k) {
    std::vector<attack::AttackRecord> level(diagrams.size());
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < diagrams.size(); ++i) {
      if (k > 0 && (!previous[i].clean_correct || previous[i].success)) {
        level[i] = previous[i];
        level[i].iterations = 0;
      } else {
        pending.push_back(i);
      }
    }
    if (!pending.empty()) {
      const auto sub_d = select<PersistenceDiagram>(diagrams, pending);
      const auto sub_l = select<int>(labels, pending);
      std::vector<attack::AttackRecord> recs;
      attack::empirical_robust_accuracy(classifier, sub_d, sub_l, eps_grid[k], config, &recs);
      for (std::size_t j = 0; j < pending.size(); ++j) {
        level[pending[j]] = recs[j];
      }
    }
    for (std::size_t i = 0; i < diagrams.size(); ++i) level[i].sample_id = i;
    previous = level;
    out.push_back(std::move(level));
  }
  return out;
}

double robust_fraction(std::span<const attack::AttackRecord> records) {
  if (records.empty()) return 0.0;
  const auto n = std::count_if(records.begin(), records.end(),
                               [](const auto& r) { return r.clean_correct && !r.success; });
  return static_cast<double>(n) / static_cast<double>(records.size());
}

void write_report(const config::PipelineConfig& c, const fs::path& out, std::ostream* log_stream) {
  const Logger log(log_stream);
  io::Metadata meta{{"config_hash", report_hash(c)},
                    {"split", split_description(c)},
                    {"repetitions", std::to_string(c.run.repetitions)}};

  std::vector<double> srn_acc;
  std::vector<double> bl_acc;
  std::vector<std::vector<double>> certified(c.certify.eps.size());
  std::vector<lipnet::CertificationRecord> first_records;
  for (std::size_t r = 0; r < c.run.repetitions; ++r) {
    const fs::path dir = rep_dir(out, r);
    const auto records = io::read_certification(dir / kCertification);
    if (r == 0) first_records = records;
    srn_acc.push_back(100.0 * lipnet::clean_accuracy(records));
    for (std::size_t k = 0; k < c.certify.eps.size(); ++k) {
      certified[k].push_back(100.0 * lipnet::certified_robust_accuracy(records, c.certify.eps[k]));
    }
    const auto preds = io::read_table(dir / kBaselineEval);
    std::size_t correct = 0;
    for (const auto& row : preds.rows) correct += row.at(1) == row.at(2) ? 1 : 0;
    bl_acc.push_back(preds.rows.empty() ? 0.0
                                        : 100.0 * static_cast<double>(correct) /
                                              static_cast<double>(preds.rows.size()));
  }

  io::Table acc{{"model", "accuracy_mean", "accuracy_std", "repetitions"}, {}};
  acc.rows.push_back({"srn", io::format_double(mean_of(srn_acc)), io::format_double(std_of(srn_acc)),
                      std::to_string(srn_acc.size())});
  acc.rows.push_back({"baseline", io::format_double(mean_of(bl_acc)),
                      io::format_double(std_of(bl_acc)), std::to_string(bl_acc.size())});
  io::write_table(out / "table_accuracy.csv", acc, meta);
  log("srn accuracy " + io::format_double(mean_of(srn_acc)) + " +- " +
      io::format_double(std_of(srn_acc)) + ", baseline " + io::format_double(mean_of(bl_acc)));

  io::Table robust{{"model", "kind", "eps", "accuracy_mean", "accuracy_std", "samples"}, {}};
  const std::string n_test = std::to_string(first_records.size());
  for (std::size_t k = 0; k < c.certify.eps.size(); ++k) {
    robust.rows.push_back({"srn", "certified", io::format_double(c.certify.eps[k]),
                           io::format_double(mean_of(certified[k])),
                           io::format_double(std_of(certified[k])), n_test});
  }
  for (const auto& target : c.attack.targets) {
    for (std::size_t k = 0; k < c.certify.eps.size(); ++k) {
      std::vector<double> values;
      std::size_t samples = 0;
      for (std::size_t r = 0; r < c.run.repetitions; ++r) {
        const auto recs = io::read_attack_records(rep_dir(out, r) / attack_file(target, k));
        values.push_back(100.0 * robust_fraction(recs));
        samples = recs.size();
      }
      robust.rows.push_back({target, "empirical", io::format_double(c.certify.eps[k]),
                             io::format_double(mean_of(values)), io::format_double(std_of(values)),
                             std::to_string(samples)});
    }
  }
  io::write_table(out / "table_robust_accuracy.csv", robust, meta);

  auto dist_meta = meta;
  dist_meta["repetition"] = "0";
  io::write_table(out / "certified_distribution.csv", report_certified_distribution(first_records),
                  dist_meta);
}

std::vector<StageStatus> run_pipeline(const config::PipelineConfig& c, const fs::path& out,
                                      std::ostream* log_stream) {
  config::validate(c);
  const Logger log(log_stream);
  fs::create_directories(out);
  std::vector<StageStatus> status;

  auto run_stage = [&](const std::string& name, bool up_to_date, const std::function<void()>& body) {
    if (up_to_date) {
      log("[" + name + "] up to date, skipped");
      status.push_back({name, true});
      return;
    }
    log("[" + name + "] running");
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", secs);
    log("[" + name + "] done in " + buf + " s");
    status.push_back({name, false});
  };

  bool dirty = false;
  auto step = [&](const std::string& name, bool outputs_current, const std::function<void()>& body) {
    const bool skip = !dirty && outputs_current;
    run_stage(name, skip, body);
    dirty = dirty || !skip;
  };

  step("gen-data", current(out / kClouds, data_hash(c)), [&] { stage_gen_data(c, out); });
  step("compute-ph", current(out / kDiagrams, ph_hash(c)), [&] { stage_compute_ph(c, out); });
  step("vectorize", current(out / kVectors, vec_hash(c)), [&] { stage_vectorize(c, out); });
  step("train", all_current(rep_files(c, out, {kSplit, kSrnModel, kBaselineModel}), train_hash(c)),
       [&] { stage_train(c, out, log); });
  step("certify", all_current(rep_files(c, out, {kCertification, kBaselineEval}), certify_hash(c)),
       [&] { stage_certify(c, out, log); });
  step("attack", all_current(attack_files(c, out), attack_hash(c)),
       [&] { stage_attack(c, out, log); });
  // The class-distance table depends only on the diagrams and its own
  // stanza, so it is cached independently of training.
  step("report",
       current(out / kClassDistances, distance_hash(c)) &&
           all_current({out / "table_accuracy.csv", out / "table_robust_accuracy.csv",
                        out / "certified_distribution.csv"},
                       report_hash(c)),
       [&] {
    if (!current(out / kClassDistances, distance_hash(c))) stage_distances(c, out);
    write_report(c, out, log_stream);
  });
  return status;
}

}  // namespace srn::pipeline
