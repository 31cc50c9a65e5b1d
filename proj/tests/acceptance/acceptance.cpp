// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails. `--only 1,4,11` runs a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "../support/oracles.hpp"
#include "srn/attack.hpp"
#include "srn/baseline.hpp"
#include "srn/complex.hpp"
#include "srn/config.hpp"
#include "srn/io.hpp"
#include "srn/lipnet.hpp"
#include "srn/metric.hpp"
#include "srn/model.hpp"
#include "srn/orbit.hpp"
#include "srn/pipeline.hpp"
#include "srn/stablerank.hpp"

namespace {

using namespace srn;
using metric::MetricParams;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const double kInfP = std::numeric_limits<double>::infinity();

MetricParams params(double p) { return std::isinf(p) ? MetricParams::infinity() : MetricParams(p); }

// ---------------------------------------------------------------------------

Outcome wasserstein_oracle() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  int bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto [a, b] = testing::random_pair(rng, 8);
    for (double p : {1.0, 2.0, kInfP}) {
      const double got = std::isinf(p) ? metric::bottleneck(a, b) : metric::wasserstein(a, b, p);
      const double want = metric::brute_force_wasserstein(a, b, params(p));
      const double err = std::abs(got - want);
      worst = std::max(worst, err);
      bad += err > 1e-9 ? 1 : 0;
    }
  }
  const double t = seconds_since(t0);
  return {bad == 0 && t < 60.0, fmt("1000 pairs x 3 metrics, max error %.2e, %d mismatches, %.1f s", worst, bad, t)};
}

Outcome ph_oracle() {
  const auto t0 = Clock::now();
  Rng rng(202);
  int bad = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto cloud = testing::random_cloud(rng, 1 + rng.below(8));
    const auto got = testing::sorted_points(complex::alpha_persistence(cloud, 1));
    const auto want = testing::oracle_alpha_h1(cloud);
    // Both sides compute circumradii with different formulas; only rounding may differ.
    bad += testing::same_diagram(got, want, 1e-12) ? 0 : 1;
  }
  const auto sq = complex::alpha_persistence({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, 1);
  bool closed = sq.rank() == 1 && std::abs(sq.points[0].birth - 0.5) <= 1e-9 &&
                std::abs(sq.points[0].death - std::sqrt(2.0) / 2) <= 1e-9;
  for (double s : {0.1, 1.0, 3.7}) {
    const auto tri = complex::alpha_persistence({{0, 0}, {s, 0}, {s / 2, s * std::sqrt(3.0) / 2}}, 1);
    closed = closed && tri.rank() == 1 && std::abs(tri.points[0].birth - s / 2) <= 1e-9 &&
             std::abs(tri.points[0].death - s / std::sqrt(3.0)) <= 1e-9;
  }
  const double t = seconds_since(t0);
  return {bad == 0 && closed && t < 60.0,
          fmt("500 clouds, %d mismatches, closed forms %s, %.1f s", bad, closed ? "ok" : "WRONG", t)};
}

Outcome stable_rank_stability() {
  Rng rng(303);
  int violations = 0;
  double worst = -kInfP;
  std::size_t checks = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto d1 = testing::random_diagram(rng, 8);
    const auto d2 = testing::random_diagram(rng, 8);
    const auto mix = testing::random_mixture(rng, 3);
    const std::size_t dim = trial % 4 == 0 ? 4 : 12;  // some runs truncate
    for (double p : {1.0, 2.0, kInfP}) {
      for (const auto& F : {stablerank::Reparameterization::identity(), mix}) {
        const double k = stablerank::lipschitz_bound(F);
        const auto r1 = stablerank::stable_rank_vector(d1, params(p), F, dim);
        const auto r2 = stablerank::stable_rank_vector(d2, params(p), F, dim);
        const double lhs = testing::linf(r1.values, r2.values);
        const double rhs = k * metric::distance(d1, d2, params(p));
        worst = std::max(worst, lhs - rhs);
        violations += lhs > rhs + 1e-9 ? 1 : 0;
        ++checks;
      }
    }
  }
  return {violations == 0, fmt("%zu checks, %d violations, max(lhs - rhs) = %.2e", checks, violations, worst)};
}

Outcome network_lipschitz() {
  Rng rng(404);
  int violations = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t in = 1 + rng.below(12);
    std::vector<std::size_t> sizes;
    const std::size_t depth = 1 + rng.below(4);
    for (std::size_t l = 0; l < depth; ++l) sizes.push_back(1 + rng.below(16));
    auto net = testing::random_network(rng, in, sizes, trial % 2 == 0);
    if (trial % 3 == 0) {
      std::vector<double> s(in);
      for (auto& v : s) v = rng.uniform(0.01, 1.0);
      net.set_input_scale(s);
    }
    const double spread = std::pow(10.0, rng.uniform(-3, 2));
    const auto u = testing::random_vector(rng, in, -spread, spread);
    auto v = u;
    for (auto& x : v) x += rng.uniform(-1, 1) * std::pow(10.0, rng.uniform(-6, 1));
    const double excess = testing::linf(net.forward(u), net.forward(v)) - testing::linf(u, v);
    worst = std::max(worst, excess);
    violations += excess > 1e-12 ? 1 : 0;
  }
  return {violations == 0, fmt("1000 draws, %d violations, max excess %.2e", violations, worst)};
}

// Relative errors are taken over the whole gradient (every parameter group
// and the input concatenated): bias gradients into a batch-centered layer
// vanish exactly and would otherwise compare rounding noise against zero.
Outcome gradient_checks() {
  constexpr double h = 1e-5;
  constexpr double kTie = 1e-6;
  Rng rng(505);

  int lip_checked = 0, lip_skipped = 0, lip_bad = 0;
  double lip_worst = 0.0;
  while (lip_checked < 100) {
    const auto mode = lip_checked % 2 ? lipnet::Mode::train : lipnet::Mode::inference;
    auto net = testing::random_network(rng, 4, {6, 5, 3}, lip_checked % 3 == 0);
    if (lip_checked % 4 == 1) net.set_input_scale({1.0, 0.6, 0.3, 0.8});
    Matrix x(3, 4);
    for (auto& v : x.data()) v = rng.uniform(-2, 2);
    double gap = 0.0;
    testing::oracle_lipnet_forward(net, x, mode, &gap);
    if (gap < kTie) {
      ++lip_skipped;
      continue;
    }
    Matrix up(3, 3);
    for (auto& v : up.data()) v = rng.uniform(-1, 1);
    lipnet::ForwardCache cache;
    lipnet::forward_cached(net, x, mode, cache);
    const auto g = lipnet::backward(net, cache, up);
    auto f = [&] {
      lipnet::ForwardCache c;
      const Matrix out = lipnet::forward_cached(net, x, mode, c);
      double s = 0;
      for (std::size_t i = 0; i < out.data().size(); ++i) s += out.data()[i] * up.data()[i];
      return s;
    };
    std::vector<double> ana, num;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      auto& layer = net.layers()[l];
      const auto nw = testing::central_differences(layer.weights, f, h);
      const auto nb = testing::central_differences(layer.biases, f, h);
      ana.insert(ana.end(), g.weights[l].begin(), g.weights[l].end());
      ana.insert(ana.end(), g.biases[l].begin(), g.biases[l].end());
      num.insert(num.end(), nw.begin(), nw.end());
      num.insert(num.end(), nb.begin(), nb.end());
    }
    const auto nx = testing::central_differences(x.data(), f, h);
    ana.insert(ana.end(), g.input.data().begin(), g.input.data().end());
    num.insert(num.end(), nx.begin(), nx.end());
    const double err = testing::relative_error(ana, num);
    lip_worst = std::max(lip_worst, err);
    lip_bad += err > 1e-4 ? 1 : 0;
    ++lip_checked;
  }

  int ds_checked = 0, ds_skipped = 0, ds_bad = 0;
  double ds_worst = 0.0;
  while (ds_checked < 100) {
    auto net = testing::random_deepset(rng, ds_checked % 2 ? 3.0 : 1.0);
    auto d = testing::random_diagram(rng, 9);
    if (testing::deepset_kink_gap(net, d) < kTie) {
      ++ds_skipped;
      continue;
    }
    const auto up = testing::random_vector(rng, 5);
    baseline::DeepSetCache cache;
    baseline::deepset_forward(net, d, cache);
    const auto g = baseline::deepset_backward(net, cache, up);
    auto f = [&] {
      const auto l = baseline::deepset_forward(net, d);
      double s = 0;
      for (std::size_t c = 0; c < l.size(); ++c) s += l[c] * up[c];
      return s;
    };
    std::vector<double> ana, num;
    auto add = [&](const std::vector<double>& a, std::vector<double>& params) {
      const auto n = testing::central_differences(params, f, h);
      ana.insert(ana.end(), a.begin(), a.end());
      num.insert(num.end(), n.begin(), n.end());
    };
    add(g.w1, net.w1);
    add(g.b1, net.b1);
    add(g.w2, net.w2);
    add(g.b2, net.b2);
    add(g.wh, net.wh);
    add(g.bh, net.bh);
    std::vector<double> coords, point_grad;
    for (std::size_t i = 0; i < d.points.size(); ++i) {
      coords.push_back(d.points[i].birth);
      coords.push_back(d.points[i].death);
      point_grad.push_back(g.points[i].birth);
      point_grad.push_back(g.points[i].death);
    }
    const auto nc = testing::central_differences(coords, [&] {
      for (std::size_t i = 0; i < d.points.size(); ++i) d.points[i] = {coords[2 * i], coords[2 * i + 1]};
      return f();
    }, h);
    ana.insert(ana.end(), point_grad.begin(), point_grad.end());
    num.insert(num.end(), nc.begin(), nc.end());
    const double err = testing::relative_error(ana, num);
    ds_worst = std::max(ds_worst, err);
    ds_bad += err > 1e-4 ? 1 : 0;
    ++ds_checked;
  }
  return {lip_bad == 0 && ds_bad == 0,
          fmt("lipnet: 100 instances, %d over tolerance, max rel error %.2e, %d tie-excluded; "
              "deepset: 100 instances, %d over tolerance, max rel error %.2e, %d tie-excluded",
              lip_bad, lip_worst, lip_skipped, ds_bad, ds_worst, ds_skipped)};
}

Outcome metric_axioms() {
  Rng rng(1111);
  double sym = 0.0, tri = 0.0, diag = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = testing::random_diagram(rng, 12);
    const auto b = testing::random_diagram(rng, 12);
    const auto c = testing::random_diagram(rng, 12);
    auto a_diag = a;
    for (int k = 0; k < 3; ++k) {
      const double t = rng.uniform(0, 10);
      a_diag.points.push_back({t, t});
    }
    rng.shuffle(a_diag.points);
    for (double p : {1.0, 2.0, kInfP}) {
      const auto mp = params(p);
      const double ab = metric::distance(a, b, mp);
      sym = std::max(sym, std::abs(ab - metric::distance(b, a, mp)));
      tri = std::max(tri, metric::distance(a, c, mp) - ab - metric::distance(b, c, mp));
      diag = std::max(diag, std::abs(metric::distance(a_diag, b, mp) - ab));
    }
  }
  const bool ok = sym <= 1e-9 && tri <= 1e-9 && diag <= 1e-12;
  return {ok, fmt("300 triples x 3 metrics: max asymmetry %.2e, max triangle excess %.2e, "
                  "max diagonal-insertion change %.2e", sym, tri, diag)};
}

// ---------------------------------------------------------------------------
// Desk-scale experiments share one dataset, split and trained models.

struct Desk {
  config::PipelineConfig config;
  io::DiagramSet set;
  pipeline::Split split;  // repetition 0
  std::vector<model::SrnModel> srn;
  std::vector<double> srn_accuracy;
  std::vector<lipnet::CertificationRecord> records;  // repetition 0, test set
  double setup_seconds = 0.0;
  double train_seconds = 0.0;
};

Desk& desk() {
  static std::optional<Desk> d;
  if (d) return *d;
  d.emplace();
  auto& c = d->config;
  const auto t0 = Clock::now();
  const auto data = orbit::generate_dataset(c.data.per_class, c.data.n_points, c.run.seed);
  d->set = pipeline::compute_diagrams(data, c.ph.degree, c.ph.scale);
  d->split = pipeline::stratified_split(d->set.labels, c.run.test_fraction, pipeline::split_seed(c.run.seed, 0));
  d->setup_seconds = seconds_since(t0);
  std::printf("  desk-scale data: %zu diagrams in %.1f s\n", d->set.diagrams.size(), d->setup_seconds);
  std::fflush(stdout);
  return *d;
}

Outcome srn_accuracy() {
  auto& d = desk();
  const auto& c = d.config;
  const auto t0 = Clock::now();
  for (std::size_t r = 0; r < 3; ++r) {
    const auto split = pipeline::stratified_split(d.set.labels, c.run.test_fraction, pipeline::split_seed(c.run.seed, r));
    const auto train_d = pipeline::select<PersistenceDiagram>(d.set.diagrams, split.train);
    const auto train_y = pipeline::select<int>(d.set.labels, split.train);
    auto cfg = c.srn;
    cfg.net.seed = pipeline::srn_seed(c.run.seed, r);
    const auto res = model::train_srn(train_d, train_y, c.vectorize.p, c.vectorize.rep, c.vectorize.dim, cfg);
    std::vector<lipnet::CertificationRecord> recs;
    for (auto i : split.test) recs.push_back(res.model.certify(d.set.diagrams[i], d.set.labels[i], i));
    d.srn_accuracy.push_back(lipnet::clean_accuracy(recs));
    if (r == 0) d.records = recs;
    d.srn.push_back(res.model);
    std::printf("  seed %zu: test accuracy %.2f%% (%.0f s elapsed)\n", r, 100 * d.srn_accuracy.back(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  d.train_seconds = seconds_since(t0);
  double mean = 0.0;
  for (double a : d.srn_accuracy) mean += a / 3.0;
  const double runtime = d.train_seconds + d.setup_seconds;
  return {mean >= 0.65 && runtime <= 1800.0,
          fmt("mean test accuracy %.2f%% over 3 seeds (%.2f / %.2f / %.2f), target >= 65%%, %.0f s",
              100 * mean, 100 * d.srn_accuracy[0], 100 * d.srn_accuracy[1], 100 * d.srn_accuracy[2], runtime)};
}

void ensure_srn() {
  if (desk().srn.empty()) srn_accuracy();
}

Outcome certification_structure() {
  ensure_srn();
  const auto& d = desk();
  const auto& recs = d.records;
  std::size_t positive = 0;
  for (const auto& r : recs) positive += r.correct() && r.margin > 0.0 ? 1 : 0;
  const double formula = static_cast<double>(positive) / static_cast<double>(recs.size());
  std::vector<double> cra;
  for (double e : d.config.certify.eps) cra.push_back(lipnet::certified_robust_accuracy(recs, e));
  bool monotone = true;
  for (std::size_t i = 1; i < cra.size(); ++i) monotone = monotone && cra[i] <= cra[i - 1];
  const double at_01 = lipnet::certified_robust_accuracy(recs, 1e-1);
  const bool ok = cra[0] == formula && monotone && at_01 > 0.0;
  std::string profile;
  for (std::size_t i = 0; i < cra.size(); ++i) {
    profile += fmt("%s%g: %.2f%%", i ? ", " : "", d.config.certify.eps[i], 100 * cra[i]);
  }
  return {ok, fmt("clean %.2f%%, positive-margin correct %.2f%%; certified %s; %s", 100 * lipnet::clean_accuracy(recs),
                  100 * formula, profile.c_str(), monotone ? "non-increasing" : "NOT monotone")};
}

Outcome certification_soundness() {
  ensure_srn();
  const auto& d = desk();
  const auto t0 = Clock::now();
  const auto& m = d.srn[0];
  attack::SrnClassifier clf(m);
  auto cfg = d.config.attack.attack;
  cfg.seed = pipeline::attack_seed(d.config.run.seed, 0);
  std::size_t attacked = 0, successes = 0;
  double min_radius = kInfP, max_radius = 0.0;
  for (const auto& r : d.records) {
    if (attacked == 50) break;
    if (!r.correct() || r.certified_radius <= 0.0) continue;
    cfg.budget = 0.99 * r.certified_radius;
    const auto res = attack::attack(clf, d.set.diagrams[r.sample_id], r.true_class, cfg);
    successes += res.success ? 1 : 0;
    min_radius = std::min(min_radius, r.certified_radius);
    max_radius = std::max(max_radius, r.certified_radius);
    ++attacked;
  }
  return {attacked == 50 && successes == 0,
          fmt("%zu samples attacked at 0.99 x radius (radii %.3g..%.3g), %zu successes, %.0f s", attacked,
              min_radius, max_radius, successes, seconds_since(t0))};
}

Outcome baseline_fragility() {
  auto& d = desk();
  const auto& c = d.config;
  const auto t0 = Clock::now();
  const auto train_d = pipeline::select<PersistenceDiagram>(d.set.diagrams, d.split.train);
  const auto train_y = pipeline::select<int>(d.set.labels, d.split.train);
  auto cfg = c.baseline;
  cfg.seed = pipeline::baseline_seed(c.run.seed, 0);
  const auto net = baseline::train_deepset(train_d, train_y, cfg).net;
  const double t_train = seconds_since(t0);

  const auto test_d = pipeline::select<PersistenceDiagram>(d.set.diagrams, d.split.test);
  const auto test_y = pipeline::select<int>(d.set.labels, d.split.test);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_d.size(); ++i) {
    correct += lipnet::predict(baseline::deepset_forward(net, test_d[i])) == test_y[i] ? 1 : 0;
  }
  const double clean = static_cast<double>(correct) / static_cast<double>(test_d.size());

  const std::size_t n = std::min<std::size_t>(200, test_d.size());
  const std::vector<PersistenceDiagram> att_d(test_d.begin(), test_d.begin() + n);
  const std::vector<int> att_y(test_y.begin(), test_y.begin() + n);
  attack::DeepSetClassifier clf(net);
  auto acfg = c.attack.attack;
  acfg.seed = pipeline::attack_seed(c.run.seed, 0);
  const auto t1 = Clock::now();
  std::vector<attack::AttackRecord> recs;
  const double robust = attack::empirical_robust_accuracy(clf, att_d, att_y, 1e-2, acfg, &recs);
  const double t_attack = seconds_since(t1);
  std::size_t clean_sub = 0;
  for (const auto& r : recs) clean_sub += r.clean_correct ? 1 : 0;
  const double clean_n = static_cast<double>(clean_sub) / static_cast<double>(n);
  const bool ok = clean >= 0.65 && clean_n - robust >= 0.25 && t_attack <= 1800.0;
  return {ok, fmt("clean %.2f%% (test set), %.2f%% on the %zu attacked samples; robust at eps=1e-2: %.2f%% "
                  "(drop %.1f points, need >= 25); train %.0f s, attack %.0f s",
                  100 * clean, 100 * clean_n, n, 100 * robust, 100 * (clean_n - robust), t_train, t_attack)};
}

Outcome class_distances() {
  auto& d = desk();
  const auto t0 = Clock::now();
  const auto table = pipeline::report_class_distances(d.set.diagrams, d.set.labels, MetricParams::infinity(),
                                                      d.config.distances.pairs_per_cell, mix_seed(d.config.run.seed, 5000));
  std::map<std::pair<int, int>, double> mean;
  for (const auto& row : table.rows) {
    mean[{std::stoi(row[0]), std::stoi(row[1])}] = io::parse_double(row[2]);
  }
  int ok_pairs = 0, total = 0;
  std::string failures;
  for (int a = 0; a < 5; ++a) {
    for (int b = a + 1; b < 5; ++b) {
      ++total;
      const double inter = mean.at({a, b});
      if (inter > mean.at({a, a}) && inter > mean.at({b, b})) {
        ++ok_pairs;
      } else {
        failures += fmt(" (%d,%d): %.2f vs %.2f/%.2f", a, b, inter, mean.at({a, a}), mean.at({b, b}));
      }
    }
  }
  std::string intra;
  for (int a = 0; a < 5; ++a) intra += fmt("%s%.2f", a ? " " : "", mean.at({a, a}));
  return {ok_pairs >= 9, fmt("%d of %d class pairs above both intra means (intra: %s)%s%s, %.0f s", ok_pairs, total,
                             intra.c_str(), failures.empty() ? "" : "; not separated:", failures.c_str(),
                             seconds_since(t0))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"srn acceptance suite"};
  std::vector<int> only;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"Wasserstein oracle equivalence", wasserstein_oracle},
      {"PH oracle equivalence", ph_oracle},
      {"Stable-rank stability", stable_rank_stability},
      {"Network Lipschitz property", network_lipschitz},
      {"Gradient checks", gradient_checks},
      {"Desk-scale SRN accuracy", srn_accuracy},
      {"Certification structure", certification_structure},
      {"Certification soundness vs attack", certification_soundness},
      {"Baseline fragility", baseline_fragility},
      {"Class-distance structure", class_distances},
      {"Metric axioms", metric_axioms},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failed += out.pass ? 0 : 1;
    std::printf("[%s] criterion %d: %s: %s\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                out.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
