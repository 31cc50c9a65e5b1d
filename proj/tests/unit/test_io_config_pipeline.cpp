#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "../support/oracles.hpp"
#include "srn/config.hpp"
#include "srn/errors.hpp"
#include "srn/io.hpp"
#include "srn/pipeline.hpp"

namespace srn {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("srn_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

TEST(Io, DoubleRoundTrip) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(rng.uniform(-1, 1), static_cast<int>(rng.below(80)) - 40);
    EXPECT_EQ(io::parse_double(io::format_double(v)), v);
  }
  EXPECT_TRUE(std::isinf(io::parse_double("inf")));
  EXPECT_THROW(io::parse_double("1.5x"), FormatError);
  EXPECT_THROW(io::parse_double(""), FormatError);
}

TEST(Io, PAndReparameterizationRoundTrip) {
  EXPECT_EQ(io::format_p(metric::MetricParams::infinity()), "inf");
  EXPECT_TRUE(io::parse_p("inf").is_infinite());
  EXPECT_EQ(io::parse_p(io::format_p(metric::MetricParams(2.5))).p(), 2.5);
  EXPECT_EQ(io::format_reparameterization(stablerank::Reparameterization::identity()), "identity");
  Rng rng(2);
  const auto mix = testing::random_mixture(rng, 3);
  const auto back = io::parse_reparameterization(io::format_reparameterization(mix));
  ASSERT_EQ(back.components().size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(back.components()[k].weight, mix.components()[k].weight);
    EXPECT_EQ(back.components()[k].mean, mix.components()[k].mean);
    EXPECT_EQ(back.components()[k].stddev, mix.components()[k].stddev);
  }
  EXPECT_THROW(io::parse_reparameterization("mixture:1,2"), FormatError);
}

TEST(Io, PointCloudsRoundTrip) {
  TempDir dir;
  const auto data = orbit::generate_dataset(2, 7, 5);
  io::write_point_clouds(dir.path() / "c.csv", data, {{"k", "v"}});
  io::Metadata meta;
  const auto back = io::read_point_clouds(dir.path() / "c.csv", &meta);
  EXPECT_EQ(meta.at("k"), "v");
  ASSERT_EQ(back.samples.size(), data.samples.size());
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].label, data.samples[i].label);
    EXPECT_EQ(back.samples[i].cloud, data.samples[i].cloud);
  }
  EXPECT_EQ(back.class_params, data.class_params);
  EXPECT_EQ(back.seed, data.seed);
}

TEST(Io, DiagramsRoundTripIncludingEmpty) {
  TempDir dir;
  Rng rng(3);
  io::DiagramSet set;
  for (int i = 0; i < 6; ++i) {
    set.diagrams.push_back(i == 2 ? PersistenceDiagram{} : testing::random_diagram(rng, 5));
    set.labels.push_back(i % 3);
  }
  set.diagrams[2].points.clear();
  io::write_diagrams(dir.path() / "d.csv", set);
  const auto back = io::read_diagrams(dir.path() / "d.csv");
  ASSERT_EQ(back.diagrams.size(), 6u);
  EXPECT_EQ(back.labels, set.labels);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(back.diagrams[i].points, set.diagrams[i].points);
  EXPECT_TRUE(back.diagrams[2].empty());
}

TEST(Io, VectorsCertificationAttackRoundTrip) {
  TempDir dir;
  Rng rng(4);
  io::VectorSet vs{Matrix(3, 4), {0, 1, 2}};
  for (auto& v : vs.vectors.data()) v = rng.uniform(-5, 5);
  io::write_vectors(dir.path() / "v.csv", vs);
  const auto vb = io::read_vectors(dir.path() / "v.csv");
  EXPECT_EQ(vb.vectors, vs.vectors);
  EXPECT_EQ(vb.labels, vs.labels);

  std::vector<lipnet::CertificationRecord> recs{lipnet::certify_logits(std::vector<double>{3, 1}, 0, 1.5, 7),
                                                lipnet::certify_logits(std::vector<double>{0, 2}, 0, 1.0, 9)};
  io::write_certification(dir.path() / "c.csv", recs);
  const auto rb = io::read_certification(dir.path() / "c.csv");
  ASSERT_EQ(rb.size(), 2u);
  EXPECT_EQ(rb[0].sample_id, 7u);
  EXPECT_EQ(rb[0].certified_radius, recs[0].certified_radius);
  EXPECT_EQ(rb[1].predicted, 1);
  EXPECT_EQ(rb[1].lipschitz_constant, 1.0);

  std::vector<attack::AttackRecord> ar{{1, true, true, 0.125, 40}, {2, false, false, 0.0, 0}};
  io::write_attack_records(dir.path() / "a.csv", ar);
  const auto ab = io::read_attack_records(dir.path() / "a.csv");
  ASSERT_EQ(ab.size(), 2u);
  EXPECT_EQ(ab[0].distance, 0.125);
  EXPECT_EQ(ab[0].iterations, 40u);
  EXPECT_FALSE(ab[1].clean_correct);
}

TEST(Io, MalformedInputThrows) {
  TempDir dir;
  {
    std::ofstream f(dir.path() / "bad.csv");
    f << "sample_id,degree,birth,death\n0,1,abc,2\n";
  }
  EXPECT_THROW(io::read_diagrams(dir.path() / "bad.csv"), FormatError);
  EXPECT_THROW(io::read_table(dir.path() / "missing.csv"), FormatError);
}

TEST(Io, ModelsRoundTrip) {
  TempDir dir;
  Rng rng(5);
  model::SrnModel m;
  m.p = metric::MetricParams(2.0);
  m.rep = testing::random_mixture(rng, 2);
  m.dim = 4;
  m.net = testing::random_network(rng, 4, {6, 3});
  m.net.set_input_scale({1.0, 0.5, 0.5, 0.25});
  io::write_srn_model(dir.path() / "srn.json", m, {{"config_hash", "abc"}});
  EXPECT_EQ(io::model_architecture(dir.path() / "srn.json"), io::kSrnArchitecture);
  EXPECT_EQ(io::read_metadata(dir.path() / "srn.json").at("config_hash"), "abc");
  const auto mb = io::read_srn_model(dir.path() / "srn.json");
  const auto d = testing::random_diagram(rng, 6);
  EXPECT_EQ(mb.logits(d), m.logits(d));
  EXPECT_EQ(mb.lipschitz_constant(), m.lipschitz_constant());

  const auto net = baseline::make_deepset(5, 7.0, 3);
  io::write_deepset_model(dir.path() / "ds.json", net);
  EXPECT_EQ(io::model_architecture(dir.path() / "ds.json"), io::kDeepSetArchitecture);
  const auto nb = io::read_deepset_model(dir.path() / "ds.json");
  EXPECT_EQ(baseline::deepset_forward(nb, d), baseline::deepset_forward(net, d));
  EXPECT_THROW(io::read_srn_model(dir.path() / "ds.json"), FormatError);
}

TEST(Config, DefaultsAndParse) {
  const auto c = config::parse("[data]\nper_class = 7\n[srn]\nlayer_sizes = 10,5\n[vectorize]\np = 2\n");
  EXPECT_EQ(c.data.per_class, 7u);
  EXPECT_EQ(c.data.n_points, 300u);
  EXPECT_EQ(c.srn.net.layer_sizes, (std::vector<std::size_t>{10, 5}));
  EXPECT_EQ(c.vectorize.p.p(), 2.0);
  EXPECT_EQ(c.vectorize.dim, 100u);
}

TEST(Config, RejectsUnknownAndInvalid) {
  EXPECT_THROW(config::parse("[data]\nper_clas = 7\n"), ParameterError);
  EXPECT_THROW(config::parse("[nope]\nx = 1\n"), ParameterError);
  EXPECT_THROW(config::parse("[data]\nper_class = seven\n"), ParameterError);
  EXPECT_THROW(config::parse("[certify]\neps = 0.1,0.01\n"), ParameterError);
  EXPECT_THROW(config::parse("[vectorize]\np = 0.5\n"), ParameterError);
}

TEST(Config, IniRoundTripAndHashes) {
  auto c = config::parse("[attack]\nsteps = 17\ntargets = baseline,srn\n[run]\nseed = 9\n");
  const auto again = config::parse(config::to_ini(c));
  EXPECT_EQ(config::to_ini(again), config::to_ini(c));
  EXPECT_EQ(config::stanza_hash(c, {"data", "attack"}), config::stanza_hash(again, {"data", "attack"}));
  EXPECT_EQ(config::stanza_hash(c, {"data"}).size(), 16u);
  auto changed = c;
  changed.attack.attack.steps = 18;
  EXPECT_EQ(config::stanza_hash(c, {"data"}), config::stanza_hash(changed, {"data"}));
  EXPECT_NE(config::stanza_hash(c, {"attack"}), config::stanza_hash(changed, {"attack"}));
  EXPECT_EQ(config::fnv1a(""), 14695981039346656037ull);
  EXPECT_EQ(config::fnv1a("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Pipeline, StratifiedSplit) {
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c) labels.insert(labels.end(), 10, c);
  const auto s = pipeline::stratified_split(labels, 0.3, 4);
  EXPECT_EQ(s.test.size(), 9u);
  EXPECT_EQ(s.train.size(), 21u);
  EXPECT_TRUE(std::is_sorted(s.test.begin(), s.test.end()));
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  for (auto i : s.test) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), 30u);
  std::vector<int> per(3, 0);
  for (auto i : s.test) ++per[labels[i]];
  EXPECT_EQ(per, (std::vector<int>{3, 3, 3}));
  EXPECT_EQ(pipeline::stratified_split(labels, 0.3, 4).test, s.test);
  EXPECT_NE(pipeline::stratified_split(labels, 0.3, 5).test, s.test);
}

TEST(Pipeline, SeedsDifferPerPurpose) {
  std::set<std::uint64_t> seeds{pipeline::split_seed(0, 0), pipeline::srn_seed(0, 0),
                                pipeline::baseline_seed(0, 0), pipeline::attack_seed(0, 0),
                                pipeline::split_seed(0, 1)};
  EXPECT_EQ(seeds.size(), 5u);
}

TEST(Pipeline, ClassDistancesCapAndSymmetry) {
  Rng rng(6);
  std::vector<PersistenceDiagram> ds;
  std::vector<int> ys;
  for (int i = 0; i < 12; ++i) {
    ds.push_back(testing::random_diagram(rng, 4));
    ys.push_back(i % 2);
  }
  const auto t = pipeline::report_class_distances(ds, ys, metric::MetricParams::infinity(), 5, 1);
  EXPECT_EQ(t.header, (std::vector<std::string>{"class_a", "class_b", "mean_distance", "pairs"}));
  ASSERT_EQ(t.rows.size(), 3u);
  for (const auto& r : t.rows) {
    EXPECT_EQ(r[3], "5");
    EXPECT_GE(io::parse_double(r[2]), 0.0);
  }
  const auto all = pipeline::report_class_distances(ds, ys, metric::MetricParams::infinity(), 1000, 1);
  EXPECT_EQ(all.rows[0][3], "15");  // C(6,2)
  EXPECT_EQ(all.rows[1][3], "36");
  double mean = 0;
  for (int i = 0; i < 12; i += 2) {
    for (int j = 1; j < 12; j += 2) mean += metric::distance(ds[i], ds[j], metric::MetricParams::infinity());
  }
  EXPECT_NEAR(io::parse_double(all.rows[1][2]), mean / 36, 1e-12);
}

TEST(Pipeline, CertifiedDistributionKeepsCorrectOnly) {
  std::vector<lipnet::CertificationRecord> recs{lipnet::certify_logits(std::vector<double>{3, 1}, 0, 1.0),
                                                lipnet::certify_logits(std::vector<double>{0, 2}, 0, 1.0),
                                                lipnet::certify_logits(std::vector<double>{0, 2}, 1, 1.0)};
  const auto t = pipeline::report_certified_distribution(recs);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][0], "1");
  EXPECT_EQ(io::parse_double(t.rows[0][1]), 1.0);
}

config::PipelineConfig tiny_pipeline() {
  return config::parse(
      "[data]\nper_class = 4\nn_points = 40\n"
      "[vectorize]\ndim = 10\n"
      "[srn]\nlayer_sizes = 12,5\nepochs = 2\nbatch_size = 8\nrelax_p_start = 0\n"
      "[baseline]\nepochs = 2\nbatch_size = 8\n"
      "[attack]\nsteps = 5\nmax_samples = 3\ntargets = baseline,srn\n"
      "[distances]\npairs_per_cell = 3\n"
      "[run]\nrepetitions = 1\n");
}

TEST(Pipeline, RunsAndSkipsCurrentStages) {
  TempDir dir;
  auto c = tiny_pipeline();
  const auto first = pipeline::run_pipeline(c, dir.path());
  ASSERT_EQ(first.size(), 7u);
  for (const auto& s : first) EXPECT_FALSE(s.skipped) << s.stage;
  for (const char* f : {"clouds.csv", "diagrams.csv", "vectors.csv", "table_accuracy.csv",
                        "table_robust_accuracy.csv", "table_class_distances.csv",
                        "certified_distribution.csv", "rep0/srn_model.json", "rep0/baseline_model.json",
                        "rep0/certification.csv"}) {
    EXPECT_TRUE(fs::exists(dir.path() / f)) << f;
  }
  const auto acc = io::read_table(dir.path() / "table_accuracy.csv");
  EXPECT_EQ(acc.rows.size(), 2u);

  const auto second = pipeline::run_pipeline(c, dir.path());
  for (const auto& s : second) EXPECT_TRUE(s.skipped) << s.stage;

  c.attack.attack.steps = 6;
  const auto third = pipeline::run_pipeline(c, dir.path());
  std::vector<bool> skipped;
  for (const auto& s : third) skipped.push_back(s.skipped);
  EXPECT_EQ(skipped, (std::vector<bool>{true, true, true, true, true, false, false}));
}

TEST(Pipeline, StageErrorNamesStage) {
  TempDir dir;
  auto c = tiny_pipeline();
  c.srn.net.layer_sizes = {12, 3};  // fewer outputs than classes
  try {
    pipeline::run_pipeline(c, dir.path());
    FAIL() << "expected a StageError";
  } catch (const pipeline::StageError& e) {
    EXPECT_EQ(e.stage(), "train");
  }
  EXPECT_TRUE(fs::exists(dir.path() / "vectors.csv"));
}

}  // namespace
}  // namespace srn
