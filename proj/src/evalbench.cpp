// SPDX-License-Identifier: Apache-2.0
#include "hit/evalbench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

#include "hit/io.hpp"
#include "hit/objectives.hpp"

namespace hit {

TraceMetrics evaluate_trace(const std::vector<Box>& pred, const std::vector<Box>& gt) {
  if (pred.size() != gt.size()) {
    throw DataError("evaluate_trace: " + std::to_string(pred.size()) + " predictions for " +
                    std::to_string(gt.size()) + " ground-truth boxes");
  }
  if (pred.empty()) throw DataError("evaluate_trace: empty trace");
  TraceMetrics m;
  const std::size_t n = pred.size();
  m.ious.reserve(n);
  m.center_errors.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.ious.push_back(iou(pred[i], gt[i]));
    m.center_errors.push_back(std::hypot(pred[i].center_x() - gt[i].center_x(),
                                         pred[i].center_y() - gt[i].center_y()));
  }
  const double dn = static_cast<double>(n);
  std::vector<double> sorted = m.ious;
  std::sort(sorted.begin(), sorted.end());
  double auc = 0.0;
  for (int k = 0; k <= 50; ++k) {
    const double t = static_cast<double>(k) / 50.0;
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), t);
    auc += static_cast<double>(sorted.end() - first) / dn;
  }
  m.auc = auc / 51.0;
  m.ao = std::accumulate(m.ious.begin(), m.ious.end(), 0.0) / dn;
  std::size_t p20 = 0, s50 = 0, s75 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    p20 += m.center_errors[i] <= 20.0;
    s50 += m.ious[i] > 0.5;
    s75 += m.ious[i] > 0.75;
  }
  m.precision20 = static_cast<double>(p20) / dn;
  m.sr50 = static_cast<double>(s50) / dn;
  m.sr75 = static_cast<double>(s75) / dn;
  return m;
}

std::string_view cost_path_name(CostPath p) {
  switch (p) {
    case CostPath::hit: return "hit";
    case CostPath::route1: return "route1";
    case CostPath::dyhit_worst: return "dyhit-worst";
  }
  return "?";
}

const ModuleCost& CostReport::module(std::string_view name) const {
  for (const auto& m : modules) {
    if (m.name == name) return m;
  }
  throw UsageError("cost report has no module " + std::string(name));
}

double CostReport::mac_fraction(std::string_view name) const {
  return total_macs == 0 ? 0.0
                         : static_cast<double>(module(name).macs) / static_cast<double>(total_macs);
}

double CostReport::param_fraction(std::string_view name) const {
  return total_params == 0
             ? 0.0
             : static_cast<double>(module(name).params) / static_cast<double>(total_params);
}

namespace {

using u64 = std::uint64_t;

u64 conv3x3_macs(u64 out_h, u64 out_w, u64 cin, u64 cout) { return out_h * out_w * cout * 9 * cin; }

u64 embed_macs(const ModelConfig& c, std::size_t size) {
  const auto ch = c.embed_channels();
  u64 total = 0, side = size;
  for (std::size_t i = 0; i < 4; ++i) {
    side /= 2;
    total += conv3x3_macs(side, side, ch[i], ch[i + 1]);
  }
  return total;
}

u64 attention_core(u64 nq, u64 nk, u64 heads, u64 d, u64 dv) {
  return heads * (nq * d * nk + nq * nk * dv);
}

u64 block_macs(u64 n, u64 ch, u64 heads, u64 d, u64 ratio) {
  const u64 qkv = n * ch * heads * d * 2 + n * ch * heads * 2 * d;
  const u64 out = n * heads * 2 * d * ch;
  const u64 mlp = 2 * n * ch * ratio * ch;
  return qkv + attention_core(n, n, heads, d, 2 * d) + out + mlp;
}

u64 shrink_macs(u64 n, u64 cin, u64 cout, u64 heads, u64 d) {
  const u64 nq = n / 4;
  const u64 proj = nq * cin * heads * d + n * cin * heads * d + n * cin * heads * 4 * d;
  return proj + attention_core(nq, n, heads, d, 4 * d) + nq * heads * 4 * d * cout;
}

u64 head_macs(const ModelConfig& c, const GridExtent& g, std::size_t global_channels) {
  const auto hc = c.head_channels();
  const u64 hw = g.count();
  u64 total = 0;
  if (global_channels != hc[0]) total += global_channels * hc[0];  // projection
  total += hw * hc[0];                                             // global attention
  u64 branch = 0;
  for (std::size_t i = 0; i < 4; ++i) branch += conv3x3_macs(g.rows, g.cols, hc[i], hc[i + 1]);
  return total + 2 * branch;
}

std::string module_of(const std::string& tensor_name) {
  static constexpr std::string_view kBackbone = "backbone.";
  std::string_view s = tensor_name;
  if (s.substr(0, kBackbone.size()) == kBackbone) s.remove_prefix(kBackbone.size());
  return std::string(s.substr(0, s.find('.')));
}

}  // namespace

CostReport flop_account(const ModelConfig& config, CostPath path) {
  config.validate();
  const u64 d = config.key_dim, ratio = config.mlp_ratio;
  std::vector<ModuleCost> all;
  auto add = [&](std::string name, u64 macs) { all.push_back({std::move(name), macs, 0}); };

  add("embed", embed_macs(config, config.template_size) + embed_macs(config, config.search_size));
  std::array<u64, 3> tokens{};
  for (std::size_t s = 0; s < 3; ++s) tokens[s] = config.stage_layout(s).tokens();
  auto stage = [&](std::size_t s) {
    return config.blocks[s] * block_macs(tokens[s], config.channels[s], config.heads[s], d, ratio);
  };
  add("stage1", stage(0));
  const bool full = path != CostPath::route1;
  const GridExtent s1 = config.stage_layout(0).search;
  if (full) {
    add("shrink1", shrink_macs(tokens[0], config.channels[0], config.channels[1],
                               config.shrink_heads[0], d));
    add("stage2", stage(1));
    add("shrink2", shrink_macs(tokens[1], config.channels[1], config.channels[2],
                               config.shrink_heads[1], d));
    add("stage3", stage(2));
  }
  if (path != CostPath::hit) {
    const auto h = config.router_hidden;
    add("router", s1.count() * (config.channels[0] * h[0] + h[0] * h[1] + h[1]));
  }
  if (full) {
    const GridExtent s2 = config.stage_layout(1).search, s3 = config.stage_layout(2).search;
    add("bridge", u64{4} * s3.count() * config.channels[1] * 4 * config.channels[2] +
                      u64{4} * s2.count() * config.channels[0] * 4 * config.channels[1]);
    add("head2", head_macs(config, s1, config.channels[2]));
  } else {
    add("head1", head_macs(config, s1, config.channels[0]));
  }

  // Parameters of the modules on the path.
  const ModelParams p = make_params(config);
  visit_tensors(p, [&](const std::string& name, const TensorF& t) {
    const std::string m = module_of(name);
    for (auto& mc : all) {
      if (mc.name == m) mc.params += t.size();
    }
  });

  CostReport r;
  r.modules = std::move(all);
  for (const auto& m : r.modules) {
    r.total_macs += m.macs;
    r.total_params += m.params;
  }
  return r;
}

mac::Tally count_forward(const HitNetwork& net, CostPath path, std::uint64_t seed) {
  const ModelConfig& c = net.config();
  Rng rng(seed);
  auto image = [&](std::size_t side) {
    TensorF img({side, side, 3});
    for (auto& v : img.data()) v = static_cast<float>(rng.normal());
    return img;
  };
  const TensorF z = image(c.template_size), x = image(c.search_size);
  mac::Recorder rec;
  switch (path) {
    case CostPath::hit: hit_forward(net, z, x); break;
    case CostPath::route1: dyhit_forward(net, z, x, 0.0); break;
    case CostPath::dyhit_worst: dyhit_forward(net, z, x, 1.0); break;
  }
  return rec.tally();
}

std::string format_cost_report(const CostReport& r) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %16s %8s %14s %8s\n", "module", "MACs", "MAC%", "params",
                "param%");
  out += line;
  for (const auto& m : r.modules) {
    std::snprintf(line, sizeof line, "%-10s %16llu %7.3f%% %14llu %7.3f%%\n", m.name.c_str(),
                  static_cast<unsigned long long>(m.macs), 100.0 * r.mac_fraction(m.name),
                  static_cast<unsigned long long>(m.params), 100.0 * r.param_fraction(m.name));
    out += line;
  }
  std::snprintf(line, sizeof line, "%-10s %16llu %8s %14llu\n", "total",
                static_cast<unsigned long long>(r.total_macs), "",
                static_cast<unsigned long long>(r.total_params));
  out += line;
  std::snprintf(line, sizeof line, "GMACs %.4f  Mparams %.4f\n", static_cast<double>(r.total_macs) / 1e9,
                static_cast<double>(r.total_params) / 1e6);
  out += line;
  return out;
}

LatencyStats summarize_latency(const std::vector<double>& ms, const std::vector<Route>& routes) {
  LatencyStats s;
  s.samples = ms.size();
  if (ms.empty()) return s;
  std::vector<double> sorted = ms;
  std::sort(sorted.begin(), sorted.end());
  s.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
  const std::size_t n = sorted.size();
  s.median_ms = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  const std::size_t p95 = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1;
  s.p95_ms = sorted[std::min(p95, n - 1)];
  s.fps = s.mean_ms > 0.0 ? 1000.0 / s.mean_ms : 0.0;
  double r1 = 0.0, r2 = 0.0;
  for (std::size_t i = 0; i < routes.size() && i < ms.size(); ++i) {
    if (routes[i] == Route::route1) {
      ++s.route1_count;
      r1 += ms[i];
    } else {
      ++s.route2_count;
      r2 += ms[i];
    }
  }
  if (s.route1_count) s.route1_mean_ms = r1 / static_cast<double>(s.route1_count);
  if (s.route2_count) s.route2_mean_ms = r2 / static_cast<double>(s.route2_count);
  return s;
}

LatencyStats latency_bench(const HitNetwork& net, TrackerMode mode, double threshold,
                           const SyntheticSequence& seq, std::size_t warmup, std::size_t reps) {
  if (reps == 0) throw UsageError("latency_bench: reps must be at least 1");
  if (seq.frames.size() < 2) throw DataError("latency_bench: sequence needs two frames");
  const ModelConfig& c = net.config();
  const TensorF templ = net.embed(normalize_image(
      crop_resize(seq.frames[0], seq.gt[0], kTemplateFactor, c.template_size).patch));
  std::vector<TensorF> searches;
  for (std::size_t i = 1; i < seq.frames.size(); ++i) {
    searches.push_back(normalize_image(
        crop_resize(seq.frames[i], seq.gt[i - 1], kSearchFactor, c.search_size).patch));
  }

  std::vector<double> ms;
  std::vector<Route> routes;
  for (std::size_t it = 0; it < warmup + reps; ++it) {
    const TensorF& x = searches[it % searches.size()];
    const auto start = std::chrono::steady_clock::now();
    Route route = Route::route2;
    switch (mode) {
      case TrackerMode::hit: net.forward_hit(templ, x); break;
      case TrackerMode::route1:
        net.forward_route1(templ, x);
        route = Route::route1;
        break;
      case TrackerMode::dyhit: route = net.forward_dyhit(templ, x, threshold).decision.route; break;
    }
    const double elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (it >= warmup) {
      ms.push_back(elapsed);
      routes.push_back(route);
    }
  }
  return summarize_latency(ms, routes);
}

std::vector<SweepRow> threshold_sweep(const std::vector<double>& grid,
                                      const std::vector<SyntheticSequence>& suite,
                                      const HitNetwork& net, const SweepOptions& options) {
  if (grid.empty()) throw UsageError("threshold_sweep: empty threshold grid");
  if (suite.empty()) throw UsageError("threshold_sweep: empty suite");
  if (options.workers == 0) throw UsageError("threshold_sweep: workers must be at least 1");
  std::vector<SweepRow> rows;
  for (double t : grid) {
    std::vector<TrackResult> results(suite.size());
    std::vector<std::exception_ptr> errors(suite.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t s = next++; s < suite.size(); s = next++) {
        try {
          HitTracker tracker(net, TrackerMode::dyhit, t, options.classify_every_n);
          TrackOptions to;
          if (!options.closed_loop) to.reference = &suite[s].gt;
          results[s] = track_sequence(suite[s].frames, suite[s].gt.front(), tracker, to);
        } catch (...) {
          errors[s] = std::current_exception();
        }
      }
    };
    const std::size_t n_threads = std::min(options.workers, suite.size());
    if (n_threads <= 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(work);
      for (auto& th : pool) th.join();
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }

    double iou_sum = 0.0, ms_sum = 0.0;
    std::size_t frames = 0, route1 = 0, decisions = 0;
    for (std::size_t s = 0; s < suite.size(); ++s) {
      const TrackResult& res = results[s];
      for (std::size_t i = 1; i < res.boxes.size(); ++i) iou_sum += iou(res.boxes[i], suite[s].gt[i]);
      frames += res.boxes.size() - 1;
      for (double v : res.forward_ms) ms_sum += v;
      for (const auto& d : res.decisions) route1 += d.route == Route::route1;
      decisions += res.decisions.size();
    }
    SweepRow row;
    row.threshold = t;
    row.metric = frames ? iou_sum / static_cast<double>(frames) : 0.0;
    row.fps = ms_sum > 0.0 ? 1000.0 * static_cast<double>(frames) / ms_sum : 0.0;
    row.route1_fraction = decisions ? static_cast<double>(route1) / static_cast<double>(decisions) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

RouterDataset collect_router_dataset(
    const HitNetwork& net, const std::vector<SyntheticSequence>& suite,
    const std::function<std::unique_ptr<BaseTracker>(const SyntheticSequence&)>& route1) {
  const ModelConfig& c = net.config();
  const GridExtent grid = c.stage_layout(0).search;
  RouterDataset ds;
  ds.dim = c.channels[0];
  for (const auto& seq : suite) {
    const TensorF templ = net.embed(normalize_image(
        crop_resize(seq.frames[0], seq.gt[0], kTemplateFactor, c.template_size).patch));
    std::unique_ptr<BaseTracker> source = route1 ? route1(seq) : nullptr;
    if (source) source->init(seq.frames[0], seq.gt[0]);
    for (std::size_t i = 1; i < seq.frames.size(); ++i) {
      const Crop crop = crop_resize(seq.frames[i], seq.gt[i - 1], kSearchFactor, c.search_size);
      const StageOneOutputs first = net.stage1(templ, net.embed(normalize_image(crop.patch)));
      const Box pred = source ? map_box_to_crop(source->predict(seq.frames[i], seq.gt[i - 1], i),
                                                crop.mapping)
                              : net.head1(first).box;
      const RouterTargets t =
          label_router_targets(grid, map_box_to_crop(seq.gt[i], crop.mapping), pred);
      ds.features.insert(ds.features.end(), first.s_max.data().begin(), first.s_max.data().end());
      ds.targets.insert(ds.targets.end(), t.labels.data().begin(), t.labels.data().end());
    }
  }
  return ds;
}

std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "T,metric,fps,route1_fraction\n";
  for (const auto& r : rows) {
    out += format_double(r.threshold) + "," + format_double(r.metric) + "," +
           format_double(r.fps) + "," + format_double(r.route1_fraction) + "\n";
  }
  return out;
}

}  // namespace hit
