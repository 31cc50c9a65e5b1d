// Command-line front end for the stable-rank network pipeline.
#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "srn/attack.hpp"
#include "srn/baseline.hpp"
#include "srn/config.hpp"
#include "srn/errors.hpp"
#include "srn/io.hpp"
#include "srn/lipnet.hpp"
#include "srn/metric.hpp"
#include "srn/model.hpp"
#include "srn/orbit.hpp"
#include "srn/pipeline.hpp"
#include "srn/rng.hpp"
#include "srn/stablerank.hpp"

namespace {

using namespace srn;
namespace fs = std::filesystem;

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, const std::string& out_help) {
  cmd->add_option("--seed", c.seed, "Global seed (overrides run.seed)");
  cmd->add_option("--config", c.config_path, "INI configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, out_help)->required();
}

config::PipelineConfig load_config(const Common& c) {
  config::PipelineConfig cfg = c.config_path.empty() ? config::PipelineConfig{} : config::load(c.config_path);
  if (c.seed) cfg.run.seed = *c.seed;
  return cfg;
}

io::Metadata base_meta(const std::string& stage, const config::PipelineConfig& cfg,
                       const std::vector<std::string>& sections) {
  return {{"stage", stage},
          {"seed", std::to_string(cfg.run.seed)},
          {"config_hash", config::stanza_hash(cfg, sections)}};
}

int report_failure(const std::string& stage, const std::string& message) {
  std::cerr << "srn " << stage << ": error: " << message << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stable-rank network pipeline: data, persistence, vectors, training, certification, attacks"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // gen-data
  Common gen;
  std::optional<std::size_t> per_class, points;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate the labelled orbit point clouds");
  add_common(gen_cmd, gen, "Output point-cloud file");
  gen_cmd->add_option("--per-class", per_class, "Orbits per class");
  gen_cmd->add_option("--points", points, "Points per orbit");

  // compute-ph
  Common ph;
  std::string ph_in;
  std::optional<int> degree;
  std::optional<double> scale;
  auto* ph_cmd = app.add_subcommand("compute-ph", "Alpha-complex persistence diagrams of point clouds");
  add_common(ph_cmd, ph, "Output diagram file");
  ph_cmd->add_option("--in", ph_in, "Point-cloud file")->required()->check(CLI::ExistingFile);
  ph_cmd->add_option("--degree", degree, "Homology degree");
  ph_cmd->add_option("--scale", scale, "Factor applied to births and deaths");

  // vectorize
  Common vec;
  std::string vec_in, vec_p, vec_f;
  std::optional<std::size_t> vec_dim;
  auto* vec_cmd = app.add_subcommand("vectorize", "Stable-rank vectors of diagrams");
  add_common(vec_cmd, vec, "Output vector file");
  vec_cmd->add_option("--in", vec_in, "Diagram file")->required()->check(CLI::ExistingFile);
  vec_cmd->add_option("--p", vec_p, "Wasserstein exponent: 1, 2, ... or inf");
  vec_cmd->add_option("--F", vec_f, "identity or mixture:w,mu,s;...");
  vec_cmd->add_option("--dim", vec_dim, "Vector length N");

  // train-srn
  Common tsrn;
  std::string tsrn_vectors, tsrn_diagrams;
  auto* tsrn_cmd = app.add_subcommand("train-srn", "Train a stable-rank network");
  add_common(tsrn_cmd, tsrn, "Output model file");
  auto* tsrn_v = tsrn_cmd->add_option("--vectors", tsrn_vectors, "Vector file (p, F and N from its header)")
                     ->check(CLI::ExistingFile);
  auto* tsrn_d = tsrn_cmd->add_option("--diagrams", tsrn_diagrams,
                                      "Diagram file (vectorized with the [vectorize] settings; "
                                      "required when srn.train_F is set)")
                     ->check(CLI::ExistingFile);
  tsrn_v->excludes(tsrn_d);

  // train-baseline
  Common tbl;
  std::string tbl_diagrams;
  auto* tbl_cmd = app.add_subcommand("train-baseline", "Train the DeepSet baseline");
  add_common(tbl_cmd, tbl, "Output model file");
  tbl_cmd->add_option("--diagrams", tbl_diagrams, "Diagram file")->required()->check(CLI::ExistingFile);

  // certify
  Common cert;
  std::string cert_model, cert_vectors, cert_diagrams;
  auto* cert_cmd = app.add_subcommand("certify", "Certified radii of an SRN model");
  add_common(cert_cmd, cert, "Output records file");
  cert_cmd->add_option("--model", cert_model, "SRN model file")->required()->check(CLI::ExistingFile);
  auto* cert_v = cert_cmd->add_option("--vectors", cert_vectors, "Vector file")->check(CLI::ExistingFile);
  auto* cert_d = cert_cmd->add_option("--diagrams", cert_diagrams, "Diagram file")->check(CLI::ExistingFile);
  cert_v->excludes(cert_d);

  // attack
  Common atk;
  std::string atk_model, atk_diagrams, atk_p;
  std::optional<double> atk_eps;
  std::optional<std::size_t> atk_max;
  auto* atk_cmd = app.add_subcommand("attack", "Adversarial diagram perturbations");
  add_common(atk_cmd, atk, "Output records file");
  atk_cmd->add_option("--model", atk_model, "SRN or baseline model file")->required()->check(CLI::ExistingFile);
  atk_cmd->add_option("--diagrams", atk_diagrams, "Diagram file")->required()->check(CLI::ExistingFile);
  atk_cmd->add_option("--p", atk_p, "Wasserstein exponent of the budget: 1, 2, ... or inf");
  atk_cmd->add_option("--eps", atk_eps, "Budget; omit for an unconstrained attack");
  atk_cmd->add_option("--max-samples", atk_max, "Attack only the first N samples");

  // distances
  Common dist;
  std::string dist_in, dist_p = "inf", dist_pairs = "all";
  std::optional<std::size_t> dist_max;
  auto* dist_cmd = app.add_subcommand("distances", "Pairwise diagram distances");
  add_common(dist_cmd, dist, "Output CSV (id_a,id_b,distance)");
  dist_cmd->add_option("--in", dist_in, "Diagram file")->required()->check(CLI::ExistingFile);
  dist_cmd->add_option("--p", dist_p, "Wasserstein exponent: 1, 2, ... or inf");
  dist_cmd->add_option("--pairs", dist_pairs, "all, intra or inter")
      ->check(CLI::IsMember({"all", "intra", "inter"}));
  dist_cmd->add_option("--max-pairs", dist_max, "Uniformly subsample at most this many pairs");

  // report
  Common rep;
  auto* rep_cmd = app.add_subcommand("report", "Summary tables from the outputs of a pipeline run");
  add_common(rep_cmd, rep, "Pipeline output directory");

  // run
  Common run;
  auto* run_cmd = app.add_subcommand("run", "Full pipeline with per-stage caching");
  add_common(run_cmd, run, "Pipeline output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0 || argc < 2) return app.exit(e);
    return report_failure(argv[1], e.what());
  }

  std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (gen_cmd->parsed()) {
      auto cfg = load_config(gen);
      if (per_class) cfg.data.per_class = *per_class;
      if (points) cfg.data.n_points = *points;
      const auto data = orbit::generate_dataset(cfg.data.per_class, cfg.data.n_points, cfg.run.seed);
      io::write_point_clouds(gen.out, data, base_meta(stage, cfg, {"data"}));
    } else if (ph_cmd->parsed()) {
      auto cfg = load_config(ph);
      if (degree) cfg.ph.degree = *degree;
      if (scale) cfg.ph.scale = *scale;
      config::validate(cfg);
      const auto data = io::read_point_clouds(ph_in);
      auto meta = base_meta(stage, cfg, {"ph"});
      meta["degree"] = std::to_string(cfg.ph.degree);
      meta["scale"] = io::format_double(cfg.ph.scale);
      io::write_diagrams(ph.out, pipeline::compute_diagrams(data, cfg.ph.degree, cfg.ph.scale), meta);
    } else if (vec_cmd->parsed()) {
      auto cfg = load_config(vec);
      if (!vec_p.empty()) cfg.vectorize.p = io::parse_p(vec_p);
      if (!vec_f.empty()) cfg.vectorize.rep = io::parse_reparameterization(vec_f);
      if (vec_dim) cfg.vectorize.dim = *vec_dim;
      config::validate(cfg);
      const auto set = io::read_diagrams(vec_in);
      const auto v = stablerank::vectorize_dataset(set.diagrams, cfg.vectorize.p, cfg.vectorize.rep,
                                                   cfg.vectorize.dim);
      auto meta = base_meta(stage, cfg, {"vectorize"});
      meta["p"] = io::format_p(cfg.vectorize.p);
      meta["F"] = io::format_reparameterization(cfg.vectorize.rep);
      meta["truncated_rows"] = std::to_string(v.truncated_rows.size());
      if (!v.truncated_rows.empty()) {
        std::cerr << "srn vectorize: " << v.truncated_rows.size()
                  << " diagrams have rank above dim - 1; their vectors are truncated\n";
      }
      io::write_vectors(vec.out, {v.vectors, set.labels}, meta);
    } else if (tsrn_cmd->parsed()) {
      auto cfg = load_config(tsrn);
      auto srn_cfg = cfg.srn;
      srn_cfg.net.seed = pipeline::srn_seed(cfg.run.seed, 0);
      model::SrnModel m;
      io::Metadata meta = base_meta(stage, cfg, {"srn"});
      if (tsrn_vectors.empty() && tsrn_diagrams.empty()) {
        throw ParameterError("one of --vectors or --diagrams is required");
      }
      if (!tsrn_vectors.empty()) {
        if (srn_cfg.train_reparameterization) {
          throw ParameterError("srn.train_F needs --diagrams: vectors cannot be re-vectorized");
        }
        io::Metadata vmeta;
        const auto set = io::read_vectors(tsrn_vectors, &vmeta);
        m.p = io::parse_p(vmeta.count("p") ? vmeta["p"] : "inf");
        m.rep = io::parse_reparameterization(vmeta.count("F") ? vmeta["F"] : "identity");
        m.dim = set.vectors.cols();
        auto res = lipnet::train(set.vectors, set.labels, srn_cfg.net);
        m.net = std::move(res.net);
        meta["margin_target"] = io::format_double(res.margin_target);
      } else {
        const auto set = io::read_diagrams(tsrn_diagrams);
        auto res = model::train_srn(set.diagrams, set.labels, cfg.vectorize.p, cfg.vectorize.rep,
                                    cfg.vectorize.dim, srn_cfg);
        m = std::move(res.model);
        meta["margin_target"] = io::format_double(res.margin_target);
      }
      io::write_srn_model(tsrn.out, m, meta);
    } else if (tbl_cmd->parsed()) {
      auto cfg = load_config(tbl);
      auto bl_cfg = cfg.baseline;
      bl_cfg.seed = pipeline::baseline_seed(cfg.run.seed, 0);
      const auto set = io::read_diagrams(tbl_diagrams);
      const auto res = baseline::train_deepset(set.diagrams, set.labels, bl_cfg);
      io::write_deepset_model(tbl.out, res.net, base_meta(stage, cfg, {"baseline"}));
    } else if (cert_cmd->parsed()) {
      auto cfg = load_config(cert);
      if (cert_vectors.empty() && cert_diagrams.empty()) {
        throw ParameterError("one of --vectors or --diagrams is required");
      }
      const auto m = io::read_srn_model(cert_model);
      std::vector<lipnet::CertificationRecord> records;
      if (!cert_vectors.empty()) {
        io::Metadata vmeta;
        const auto set = io::read_vectors(cert_vectors, &vmeta);
        if ((vmeta.count("p") && io::parse_p(vmeta["p"]).p() != m.p.p()) ||
            (vmeta.count("F") && vmeta["F"] != io::format_reparameterization(m.rep)) ||
            set.vectors.cols() != m.dim) {
          throw ParameterError("vectors were computed with different p, F or dim than the model");
        }
        for (std::size_t i = 0; i < set.vectors.rows(); ++i) {
          records.push_back(lipnet::certify(m.net, set.vectors.row(i), set.labels[i],
                                            m.lipschitz_constant(), i));
        }
      } else {
        const auto set = io::read_diagrams(cert_diagrams);
        for (std::size_t i = 0; i < set.diagrams.size(); ++i) {
          records.push_back(m.certify(set.diagrams[i], set.labels[i], i));
        }
      }
      auto meta = base_meta(stage, cfg, {"certify"});
      meta["clean_accuracy"] = io::format_double(lipnet::clean_accuracy(records));
      io::write_certification(cert.out, records, meta);
      for (double e : cfg.certify.eps) {
        std::cout << "certified robust accuracy at eps " << e << ": "
                  << lipnet::certified_robust_accuracy(records, e) << '\n';
      }
    } else if (atk_cmd->parsed()) {
      auto cfg = load_config(atk);
      auto acfg = cfg.attack.attack;
      if (!atk_p.empty()) acfg.p = io::parse_p(atk_p);
      acfg.budget = atk_eps;
      acfg.seed = pipeline::attack_seed(cfg.run.seed, 0);
      auto set = io::read_diagrams(atk_diagrams);
      std::size_t n = set.diagrams.size();
      if (atk_max) n = std::min(n, *atk_max);
      set.diagrams.resize(n);
      set.labels.resize(n);
      const std::string arch = io::model_architecture(atk_model);
      std::optional<model::SrnModel> srn_model;
      std::optional<baseline::DeepSetNet> bl_model;
      std::unique_ptr<attack::Classifier> clf;
      if (arch == io::kSrnArchitecture) {
        srn_model = io::read_srn_model(atk_model);
        clf = std::make_unique<attack::SrnClassifier>(*srn_model);
      } else if (arch == io::kDeepSetArchitecture) {
        bl_model = io::read_deepset_model(atk_model);
        clf = std::make_unique<attack::DeepSetClassifier>(*bl_model);
      } else {
        throw FormatError("unknown model architecture '" + arch + "'");
      }
      std::vector<attack::AttackRecord> records;
      const double acc = attack::empirical_robust_accuracy(*clf, set.diagrams, set.labels,
                                                           atk_eps.value_or(0.0), acfg, &records);
      if (!atk_eps) {
        // Unconstrained: every success counts, whatever its distance.
        std::cout << "attack success rate: " << 1.0 - pipeline::robust_fraction(records) << '\n';
      } else {
        std::cout << "empirical robust accuracy at eps " << *atk_eps << ": " << acc << '\n';
      }
      auto meta = base_meta(stage, cfg, {"attack"});
      meta["p"] = io::format_p(acfg.p);
      meta["eps"] = atk_eps ? io::format_double(*atk_eps) : "none";
      meta["architecture"] = arch;
      io::write_attack_records(atk.out, records, meta);
    } else if (dist_cmd->parsed()) {
      auto cfg = load_config(dist);
      const auto p = io::parse_p(dist_p);
      const auto set = io::read_diagrams(dist_in);
      std::vector<std::pair<std::size_t, std::size_t>> pairs;
      for (std::size_t i = 0; i < set.diagrams.size(); ++i) {
        for (std::size_t j = i + 1; j < set.diagrams.size(); ++j) {
          const bool same = set.labels[i] == set.labels[j];
          if (dist_pairs == "all" || (dist_pairs == "intra") == same) pairs.emplace_back(i, j);
        }
      }
      if (dist_max && pairs.size() > *dist_max) {
        Rng rng(mix_seed(cfg.run.seed, 5000));
        rng.shuffle(pairs);
        pairs.resize(*dist_max);
        std::sort(pairs.begin(), pairs.end());
      }
      io::Table t{{"id_a", "id_b", "distance"}, {}};
      for (const auto& [i, j] : pairs) {
        t.rows.push_back({std::to_string(i), std::to_string(j),
                          io::format_double(metric::distance(set.diagrams[i], set.diagrams[j], p))});
      }
      auto meta = base_meta(stage, cfg, {"distances"});
      meta["p"] = io::format_p(p);
      meta["pairs"] = dist_pairs;
      io::write_table(dist.out, t, meta);
    } else if (rep_cmd->parsed()) {
      pipeline::write_report(load_config(rep), rep.out, &std::cout);
    } else if (run_cmd->parsed()) {
      pipeline::run_pipeline(load_config(run), run.out, &std::cout);
    }
  } catch (const pipeline::StageError& e) {
    return report_failure(e.stage(), e.what());
  } catch (const std::exception& e) {
    return report_failure(stage, e.what());
  }
  return 0;
}
