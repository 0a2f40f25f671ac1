// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hit/evalbench.hpp"
#include "support.hpp"

using namespace hit;

namespace {

// Independent metric definitions: per-threshold counting, no sorting.
struct NaiveMetrics {
  double auc, p20, ao, sr50, sr75;
};

double naive_iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double aa = std::max(0.0, a.x1 - a.x0) * std::max(0.0, a.y1 - a.y0);
  const double bb = std::max(0.0, b.x1 - b.x0) * std::max(0.0, b.y1 - b.y0);
  const double u = aa + bb - ix * iy;
  return u > 0 ? ix * iy / u : 0.0;
}

NaiveMetrics naive(const std::vector<Box>& p, const std::vector<Box>& g) {
  const double n = static_cast<double>(p.size());
  NaiveMetrics m{0, 0, 0, 0, 0};
  for (int k = 0; k <= 50; ++k) {
    double hits = 0;
    for (std::size_t i = 0; i < p.size(); ++i) hits += naive_iou(p[i], g[i]) >= k / 50.0 ? 1 : 0;
    m.auc += hits / n / 51.0;
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = naive_iou(p[i], g[i]);
    const double dx = (p[i].x0 + p[i].x1) / 2 - (g[i].x0 + g[i].x1) / 2;
    const double dy = (p[i].y0 + p[i].y1) / 2 - (g[i].y0 + g[i].y1) / 2;
    m.ao += v / n;
    m.p20 += (std::sqrt(dx * dx + dy * dy) <= 20.0) / n;
    m.sr50 += (v > 0.5) / n;
    m.sr75 += (v > 0.75) / n;
  }
  return m;
}

std::vector<SyntheticSequence> small_suite() { return make_mixed_suite(5, 2, 5, 128); }

}  // namespace

TEST_CASE("IoU worked example") {
  CHECK(iou({0, 0, 2, 2}, {1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0));
  CHECK(iou({0, 0, 1, 1}, {0, 0, 1, 1}) == 1.0);
  CHECK(iou({0, 0, 1, 1}, {2, 2, 3, 3}) == 0.0);
  CHECK(iou({0, 0, 0, 0}, {0, 0, 0, 0}) == 0.0);
  CHECK(iou({1, 1, 0, 0}, {0, 0, 1, 1}) == 0.0);
}

TEST_CASE("trace metrics equal the naive definitions on random traces") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.next_u64() % 40;
    std::vector<Box> p, g;
    for (std::size_t i = 0; i < n; ++i) {
      const Box gt = Box::from_xywh(rng.uniform(0, 300), rng.uniform(0, 300), rng.uniform(5, 80), rng.uniform(5, 80));
      g.push_back(gt);
      const int kind = static_cast<int>(rng.next_u64() % 4);
      if (kind == 0) p.push_back(gt);
      else if (kind == 1) p.push_back(Box::from_xywh(gt.x0 + gt.width() / 2, gt.y0, gt.width(), gt.height()));
      else p.push_back(OracleBaseTracker::jitter(gt, 0.3, 9, i));
    }
    const TraceMetrics m = evaluate_trace(p, g);
    const NaiveMetrics o = naive(p, g);
    CHECK(std::abs(m.auc - o.auc) <= 1e-9);
    CHECK(std::abs(m.ao - o.ao) <= 1e-9);
    CHECK(std::abs(m.precision20 - o.p20) <= 1e-9);
    CHECK(std::abs(m.sr50 - o.sr50) <= 1e-9);
    CHECK(std::abs(m.sr75 - o.sr75) <= 1e-9);
  }
  CHECK_THROWS_AS(evaluate_trace({}, {}), DataError);
  CHECK_THROWS_AS(evaluate_trace({Box{}}, {}), DataError);
}

TEST_CASE("success counts IoU above the threshold while the curve includes it") {
  // IoU exactly 0.5: on the success curve at t = 0.5, not in SR@0.5.
  const std::vector<Box> g{{0, 0, 2, 1}}, p{{0, 0, 1, 1}};
  const TraceMetrics m = evaluate_trace(p, g);
  CHECK(m.ao == 0.5);
  CHECK(m.sr50 == 0.0);
  CHECK(m.auc == doctest::Approx(26.0 / 51.0));
  CHECK(m.precision20 == 1.0);
}

TEST_CASE("a plain linear layer is counted as rows x in x out") {
  mac::Recorder rec;
  linear(TensorF({4, 8}), TensorF({8, 10}), TensorF({10}));
  CHECK(rec.tally().total == 320);
}

TEST_CASE("the accountant agrees with executed counters on every path and preset") {
  for (const char* v : {"toy", "tiny"}) {
    const ModelConfig c = model_preset(v);
    const HitNetwork net(c, init_weights(c, 2));
    for (CostPath path : {CostPath::hit, CostPath::route1, CostPath::dyhit_worst}) {
      INFO(v << " " << cost_path_name(path));
      const CostReport r = flop_account(c, path);
      const mac::Tally t = count_forward(net, path);
      CHECK(r.total_macs == t.total);
      for (const auto& m : r.modules) CHECK(m.macs == t.module(m.name));
    }
  }
}

TEST_CASE("module fractions sum to one and parameters cover the whole model") {
  const ModelConfig c = model_preset("base");
  const CostReport worst = flop_account(c, CostPath::dyhit_worst);
  double mac_sum = 0, param_sum = 0;
  for (const auto& m : worst.modules) {
    mac_sum += worst.mac_fraction(m.name);
    param_sum += worst.param_fraction(m.name);
  }
  CHECK(mac_sum == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(param_sum == doctest::Approx(1.0).epsilon(1e-9));
  const CostReport hit = flop_account(c, CostPath::hit);
  const CostReport r1 = flop_account(c, CostPath::route1);
  CHECK(worst.total_macs == hit.total_macs + worst.module("router").macs);
  CHECK(r1.total_macs < hit.total_macs);
  CHECK(hit.total_params + worst.module("router").params + r1.module("head1").params ==
        parameter_count(make_params(c)));
  CHECK_THROWS(worst.module("nope"));
  const std::string table = format_cost_report(worst);
  CHECK(table.find("bridge") != std::string::npos);
  CHECK(table.find("router") != std::string::npos);
}

TEST_CASE("latency summary statistics") {
  const std::vector<double> ms{4, 1, 3, 2};
  const std::vector<Route> routes{Route::route1, Route::route2, Route::route1, Route::route2};
  const LatencyStats s = summarize_latency(ms, routes);
  CHECK(s.samples == 4);
  CHECK(s.mean_ms == 2.5);
  CHECK(s.median_ms == 2.5);
  CHECK(s.p95_ms == 4.0);
  CHECK(s.fps == 400.0);
  CHECK(s.route1_count == 2);
  CHECK(s.route1_mean_ms == 3.5);
  CHECK(s.route2_mean_ms == 1.5);
  CHECK(summarize_latency({}).samples == 0);
}

TEST_CASE("latency bench times the requested number of forwards") {
  const ModelConfig c = test::toy();
  const HitNetwork net(c, init_weights(c, 3));
  const SyntheticSequence seq = gen_synthetic(1, Difficulty{}, 3, 128, 128);
  const LatencyStats s = latency_bench(net, TrackerMode::dyhit, 0.0, seq, 1, 4);
  CHECK(s.samples == 4);
  CHECK(s.route1_count == 4);
  CHECK(s.fps > 0.0);
  CHECK_THROWS_AS(latency_bench(net, TrackerMode::hit, 0.5, seq, 0, 0), UsageError);
}

TEST_CASE("sweep endpoints, monotone Route1 usage and CSV layout") {
  const ModelConfig c = test::toy();
  const HitNetwork net(c, init_weights(c, 4));
  const auto suite = small_suite();
  const std::vector<double> grid{0.0, 0.45, 0.5, 0.55, 1.0};
  const auto rows = threshold_sweep(grid, suite, net);
  REQUIRE(rows.size() == grid.size());
  CHECK(rows.front().route1_fraction == 1.0);
  CHECK(rows.back().route1_fraction == 0.0);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].route1_fraction <= rows[i - 1].route1_fraction);
  for (const auto& r : rows) CHECK(r.fps > 0.0);

  const std::string csv = format_sweep_csv(rows);
  CHECK(csv.rfind("T,metric,fps,route1_fraction\n", 0) == 0);
  CHECK(csv.back() == '\n');
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
}

TEST_CASE("sweeps are reproducible apart from timing, across worker counts") {
  const ModelConfig c = test::toy();
  const HitNetwork net(c, init_weights(c, 4));
  const auto suite = small_suite();
  const std::vector<double> grid{0.0, 0.5, 1.0};
  const auto a = threshold_sweep(grid, suite, net);
  SweepOptions opt;
  opt.workers = 2;
  const auto b = threshold_sweep(grid, suite, net, opt);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(a[i].metric == b[i].metric);
    CHECK(a[i].route1_fraction == b[i].route1_fraction);
  }
  opt.workers = 0;
  CHECK_THROWS_AS(threshold_sweep(grid, suite, net, opt), UsageError);
  CHECK_THROWS_AS(threshold_sweep({}, suite, net), UsageError);
}

TEST_CASE("router datasets hold one record per stage-1 search token") {
  const ModelConfig c = test::toy();
  const HitNetwork net(c, init_weights(c, 4));
  const auto suite = small_suite();
  const RouterDataset ds = collect_router_dataset(net, suite);
  const std::size_t tokens = c.stage_layout(0).search.count();
  CHECK(ds.dim == c.channels[0]);
  CHECK(ds.size() == 2 * 4 * tokens);
  CHECK(ds.features.size() == ds.size() * ds.dim);
  std::size_t positives = 0;
  for (float t : ds.targets) {
    CHECK(t >= 0.0f);
    CHECK(t <= 1.0f);
    positives += t > 0.0f;
  }
  // With a perfect Route1 source every positive token carries label 1.
  const RouterDataset perfect = collect_router_dataset(net, suite, [](const SyntheticSequence& s) {
    return std::make_unique<OracleBaseTracker>(s.gt, 0.0, 1);
  });
  std::size_t ones = 0;
  for (float t : perfect.targets) ones += t == 1.0f;
  CHECK(ones > 0);
  CHECK(ones >= positives);
}
