// SPDX-License-Identifier: Apache-2.0
//
// One-pass evaluation metrics, analytic cost accounting, latency benchmarks
// and the threshold sweep.
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hit/runtime.hpp"
#include "hit/synthetic.hpp"
#include "hit/io.hpp"
#include "hit/trackers.hpp"

namespace hit {

struct TraceMetrics {
  std::vector<double> ious;
  std::vector<double> center_errors;  // pixels
  double auc = 0.0;          // mean success rate over IoU ≥ t, t = 0, 0.02, …, 1
  double precision20 = 0.0;  // center error ≤ 20 px
  double ao = 0.0;           // mean IoU
  double sr50 = 0.0;         // IoU > 0.5
  double sr75 = 0.0;         // IoU > 0.75
};

TraceMetrics evaluate_trace(const std::vector<Box>& pred, const std::vector<Box>& gt);

enum class CostPath {
  hit,           // plain full forward, no router
  route1,        // DyHiT early exit: stage 1, router, Head1
  dyhit_worst,   // DyHiT full path: everything plus the router
};

std::string_view cost_path_name(CostPath p);

struct ModuleCost {
  std::string name;
  std::uint64_t macs = 0;
  std::uint64_t params = 0;
};

struct CostReport {
  std::vector<ModuleCost> modules;  // execution order
  std::uint64_t total_macs = 0;
  std::uint64_t total_params = 0;

  const ModuleCost& module(std::string_view name) const;
  double mac_fraction(std::string_view name) const;
  double param_fraction(std::string_view name) const;
};

/// Closed-form per-module multiply-accumulates for one image-pair forward
/// along `path`, and parameter counts of the modules on that path.
CostReport flop_account(const ModelConfig& config, CostPath path);

/// Runs one seeded image-pair forward along `path` under a MAC recorder.
mac::Tally count_forward(const HitNetwork& net, CostPath path, std::uint64_t seed = 1);

/// Fixed-width text table of a report.
std::string format_cost_report(const CostReport& r);

struct LatencyStats {
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double fps = 0.0;
  std::size_t samples = 0;
  std::size_t route1_count = 0;
  std::size_t route2_count = 0;
  double route1_mean_ms = 0.0;
  double route2_mean_ms = 0.0;
};

LatencyStats summarize_latency(const std::vector<double>& ms, const std::vector<Route>& routes = {});

/// Times only the network forward (crops are prepared beforehand) over the
/// sequence frames, cycling `reps` times after `warmup` untimed calls.
LatencyStats latency_bench(const HitNetwork& net, TrackerMode mode, double threshold,
                           const SyntheticSequence& seq, std::size_t warmup, std::size_t reps);

struct SweepRow {
  double threshold = 0.0;
  double metric = 0.0;  // AO over tracked frames
  double fps = 0.0;
  double route1_fraction = 0.0;
};

struct SweepOptions {
  /// Crop each frame around the previous output instead of the previous
  /// ground truth. Makes the frame sequence depend on T.
  bool closed_loop = false;
  std::size_t classify_every_n = 1;
  /// Sequences tracked concurrently; timing columns are noisier above 1.
  std::size_t workers = 1;
};

std::vector<SweepRow> threshold_sweep(const std::vector<double>& grid,
                                      const std::vector<SyntheticSequence>& suite,
                                      const HitNetwork& net, const SweepOptions& options = {});

/// Per-token router training records from a suite: stage-1 search features
/// with targets labeled against the ground truth, the search crop centered on
/// the previous ground-truth box. Route1 boxes come from Head1, or from
/// `route1` (constructed per sequence) when given.
RouterDataset collect_router_dataset(
    const HitNetwork& net, const std::vector<SyntheticSequence>& suite,
    const std::function<std::unique_ptr<BaseTracker>(const SyntheticSequence&)>& route1 = {});

/// Header `T,metric,fps,route1_fraction`, one row per entry.
std::string format_sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace hit
