// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit codes: 0 success, 2 usage, 3 data, 4 numeric.
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "hit/evalbench.hpp"
#include "hit/io.hpp"
#include "hit/objectives.hpp"
#include "hit/trackers.hpp"
#include "hit/weights_io.hpp"

namespace fs = std::filesystem;
using namespace hit;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kData = 3, kNumeric = 4 };

struct ModelOptions {
  std::string config_path;
  std::string variant;
  std::string weights;
  std::uint64_t seed = 1;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key = value configuration file");
    app->add_option("--variant", variant, "preset: base, small, tiny, toy");
    app->add_option("--weights", weights, "weight archive (default: seeded init)");
    app->add_option("--seed", seed, "init seed when no archive is given");
  }

  Settings settings() const {
    Settings s = config_path.empty() ? Settings{} : Settings::load(config_path);
    if (!variant.empty()) s.set("variant", variant);
    return s;
  }

  ModelConfig config() const { return config_from_settings(settings()); }

  HitNetwork network() const {
    const ModelConfig c = config();
    const Settings s = settings();
    const auto init_seed = static_cast<std::uint64_t>(s.get_int("seed", static_cast<std::int64_t>(seed)));
    return HitNetwork(c, weights.empty() ? init_weights(c, init_seed) : load_weights(weights, c));
  }
};

Box parse_box_arg(const std::string& text) {
  const auto boxes = parse_boxes(text, "box argument");
  if (boxes.size() != 1) throw UsageError("expected one box as x,y,w,h");
  return boxes.front();
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      grid.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad threshold '" + item + "'");
    }
  }
  if (grid.empty()) throw UsageError("empty threshold grid");
  return grid;
}

TrackerMode parse_mode(const std::string& m) {
  if (m == "hit") return TrackerMode::hit;
  if (m == "route1") return TrackerMode::route1;
  if (m == "dyhit") return TrackerMode::dyhit;
  throw UsageError("unknown mode '" + m + "' (hit, route1, dyhit)");
}

std::size_t env_threads() {
  const char* v = std::getenv("HIT_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw UsageError("HIT_THREADS must be a positive integer");
  return static_cast<std::size_t>(n);
}

void print_box(const Box& b) {
  std::cout << format_double(b.x0) << "," << format_double(b.y0) << "," << format_double(b.width())
            << "," << format_double(b.height()) << "\n";
}

struct SuiteOptions {
  std::uint64_t seed = 1;
  std::size_t sequences = 4;
  std::size_t length = 50;
  std::size_t side = 128;
  std::size_t hard_level = 3;

  void attach(CLI::App* app) {
    app->add_option("--suite-seed", seed, "synthetic suite seed");
    app->add_option("--sequences", sequences, "synthetic sequences (alternating easy/hard)");
    app->add_option("--length", length, "frames per sequence");
    app->add_option("--side", side, "frame side in pixels");
    app->add_option("--hard-level", hard_level, "difficulty level of the hard sequences");
  }

  std::vector<SyntheticSequence> build() const {
    return make_mixed_suite(seed, sequences, length, side, hard_level);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HiT / DyHiT tracker toolkit"};
  app.require_subcommand(1);

  // init-weights
  ModelOptions init_m;
  std::string init_out;
  auto* init_cmd = app.add_subcommand("init-weights", "write seeded initial weights");
  init_m.attach(init_cmd);
  init_cmd->add_option("--out", init_out, "archive path")->required();

  // infer
  ModelOptions infer_m;
  std::string infer_templ, infer_search, infer_box, infer_ref, infer_mode = "dyhit";
  double infer_t = 0.5;
  auto* infer_cmd = app.add_subcommand("infer", "single template/search pair to a box");
  infer_m.attach(infer_cmd);
  infer_cmd->add_option("--template", infer_templ, "template frame (.ppm)")->required();
  infer_cmd->add_option("--box", infer_box, "target box in the template frame, x,y,w,h")->required();
  infer_cmd->add_option("--search", infer_search, "search frame (.ppm)")->required();
  infer_cmd->add_option("--reference", infer_ref, "search crop center box (default: --box)");
  infer_cmd->add_option("--mode", infer_mode, "hit, route1 or dyhit");
  infer_cmd->add_option("--threshold", infer_t, "scene threshold T for dyhit");

  // track
  ModelOptions track_m;
  std::string track_frames, track_init, track_gt, track_out, track_log, track_mode = "dyhit",
                                                                        track_base;
  double track_t = 0.5;
  std::size_t track_every = 1;
  auto* track_cmd = app.add_subcommand("track", "track a frame directory");
  track_m.attach(track_cmd);
  track_cmd->add_option("--frames", track_frames, "directory of .ppm frames")->required();
  track_cmd->add_option("--init", track_init, "initial box x,y,w,h");
  track_cmd->add_option("--gt", track_gt, "ground-truth file; line 1 initializes when --init is absent");
  track_cmd->add_option("--mode", track_mode, "hit, route1, dyhit or dytracker");
  track_cmd->add_option("--base-results", track_base, "per-frame boxes of the base tracker (dytracker)");
  track_cmd->add_option("--threshold", track_t, "scene threshold T");
  track_cmd->add_option("--classify-every", track_every, "router runs every n frames");
  track_cmd->add_option("--out", track_out, "write boxes here (default stdout)");
  track_cmd->add_option("--decisions", track_log, "write per-frame route decisions as CSV");

  // sweep
  ModelOptions sweep_m;
  SuiteOptions sweep_s;
  std::string sweep_grid = "0,0.25,0.5,0.75,1", sweep_out;
  bool sweep_closed = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "threshold grid to CSV");
  sweep_m.attach(sweep_cmd);
  sweep_s.attach(sweep_cmd);
  sweep_cmd->add_option("--grid", sweep_grid, "comma-separated thresholds");
  sweep_cmd->add_flag("--closed-loop", sweep_closed, "crop around previous outputs");
  sweep_cmd->add_option("--out", sweep_out, "CSV path (default stdout)");

  // bench
  ModelOptions bench_m;
  SuiteOptions bench_s;
  std::string bench_mode = "dyhit";
  double bench_t = 0.5;
  std::size_t bench_warmup = 3, bench_reps = 20;
  auto* bench_cmd = app.add_subcommand("bench", "forward latency statistics");
  bench_m.attach(bench_cmd);
  bench_s.attach(bench_cmd);
  bench_cmd->add_option("--mode", bench_mode, "hit, route1 or dyhit");
  bench_cmd->add_option("--threshold", bench_t, "scene threshold T for dyhit");
  bench_cmd->add_option("--warmup", bench_warmup, "untimed warmup calls");
  bench_cmd->add_option("--reps", bench_reps, "timed calls");

  // flops
  ModelOptions flops_m;
  std::string flops_path = "hit";
  bool flops_verify = false;
  auto* flops_cmd = app.add_subcommand("flops", "MAC and parameter accounting");
  flops_m.attach(flops_cmd);
  flops_cmd->add_option("--path", flops_path, "hit, route1 or dyhit-worst");
  flops_cmd->add_flag("--verify", flops_verify, "cross-check against an instrumented forward");

  // fit-router
  ModelOptions fit_m;
  SuiteOptions fit_s;
  std::string fit_dataset, fit_out, fit_dump;
  double fit_lr = 1e-2;
  std::size_t fit_epochs = 200;
  auto* fit_cmd = app.add_subcommand("fit-router", "fit the router on features and targets");
  fit_m.attach(fit_cmd);
  fit_s.attach(fit_cmd);
  fit_cmd->add_option("--dataset", fit_dataset, "router dataset (default: collect from a synthetic suite)");
  fit_cmd->add_option("--dump-dataset", fit_dump, "also write the dataset used");
  fit_cmd->add_option("--lr", fit_lr, "learning rate");
  fit_cmd->add_option("--epochs", fit_epochs, "full-batch epochs");
  fit_cmd->add_option("--out", fit_out, "archive with the fitted router")->required();

  // gen-synth
  std::uint64_t gen_seed = 1;
  std::size_t gen_level = 0, gen_length = 50, gen_side = 128;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen-synth", "write a synthetic sequence");
  gen_cmd->add_option("--seed", gen_seed, "sequence seed");
  gen_cmd->add_option("--level", gen_level, "difficulty level");
  gen_cmd->add_option("--length", gen_length, "frames");
  gen_cmd->add_option("--side", gen_side, "frame side in pixels");
  gen_cmd->add_option("--out", gen_out, "output directory")->required();

  // eval
  std::string eval_pred, eval_gt;
  auto* eval_cmd = app.add_subcommand("eval", "metrics from prediction and ground-truth files");
  eval_cmd->add_option("--pred", eval_pred, "predicted boxes")->required();
  eval_cmd->add_option("--gt", eval_gt, "ground-truth boxes")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*init_cmd) {
      const HitNetwork net = init_m.network();
      save_weights(init_out, net.params());
      std::cout << "wrote " << init_out << " (" << parameter_count(net.params())
                << " parameters, variant " << net.config().variant << ")\n";
    } else if (*infer_cmd) {
      const HitNetwork net = infer_m.network();
      const ModelConfig& c = net.config();
      const Image zf = read_ppm(infer_templ), xf = read_ppm(infer_search);
      const Box box = parse_box_arg(infer_box);
      const Box ref = infer_ref.empty() ? box : parse_box_arg(infer_ref);
      const TensorF templ = net.embed(
          normalize_image(crop_resize(zf, box, kTemplateFactor, c.template_size).patch));
      const Crop crop = crop_resize(xf, ref, kSearchFactor, c.search_size);
      const Image search = normalize_image(crop.patch);
      BoxPrediction pred;
      switch (parse_mode(infer_mode)) {
        case TrackerMode::hit: pred = net.forward_hit(templ, search); break;
        case TrackerMode::route1: pred = net.forward_route1(templ, search); break;
        case TrackerMode::dyhit: {
          DyHitResult r = net.forward_dyhit(templ, search, infer_t);
          std::cerr << "F=" << format_double(r.decision.f) << " route=" << route_name(r.decision.route)
                    << (r.decision.fallback ? " (fallback)" : "") << "\n";
          pred = std::move(r.prediction);
          break;
        }
      }
      print_box(map_box_to_frame(pred.box, crop.mapping));
    } else if (*track_cmd) {
      const HitNetwork net = track_m.network();
      const std::vector<Image> frames = read_frame_dir(track_frames);
      std::optional<Box> init;
      if (!track_init.empty()) init = parse_box_arg(track_init);
      if (!init && !track_gt.empty()) {
        const auto gt = read_boxes(track_gt);
        if (gt.empty()) throw DataError(track_gt + ": no boxes");
        init = gt.front();
      }
      if (!init) throw UsageError("track needs --init or --gt");
      TrackResult res;
      if (track_mode == "dytracker") {
        if (track_base.empty()) throw UsageError("dytracker mode needs --base-results");
        FileBaseTracker base(fs::path{track_base});
        if (base.size() != frames.size()) {
          throw DataError("base results have " + std::to_string(base.size()) + " boxes for " +
                          std::to_string(frames.size()) + " frames");
        }
        DyTracker tracker(net, base, track_t);
        res = track_sequence(frames, *init, tracker);
      } else {
        HitTracker tracker(net, parse_mode(track_mode), track_t, track_every);
        res = track_sequence(frames, *init, tracker);
      }
      if (track_out.empty()) {
        for (const Box& b : res.boxes) print_box(b);
      } else {
        write_boxes(track_out, res.boxes);
      }
      if (!track_log.empty()) {
        std::string csv = "frame,F,T,route,fallback\n";
        for (std::size_t i = 0; i < res.decisions.size(); ++i) {
          const auto& d = res.decisions[i];
          csv += std::to_string(i + 1) + "," + format_double(d.f) + "," + format_double(d.threshold) +
                 "," + std::string(route_name(d.route)) + "," + (d.fallback ? "1" : "0") + "\n";
        }
        write_file(track_log, csv);
      }
    } else if (*sweep_cmd) {
      const HitNetwork net = sweep_m.network();
      SweepOptions opt;
      opt.closed_loop = sweep_closed;
      opt.workers = env_threads();
      const auto rows = threshold_sweep(parse_grid(sweep_grid), sweep_s.build(), net, opt);
      const std::string csv = format_sweep_csv(rows);
      if (sweep_out.empty()) std::cout << csv;
      else write_file(sweep_out, csv);
    } else if (*bench_cmd) {
      const HitNetwork net = bench_m.network();
      const SyntheticSequence seq = gen_synthetic(bench_s.seed, Difficulty::level(0),
                                                  std::max<std::size_t>(bench_s.length, 2),
                                                  bench_s.side, bench_s.side);
      const LatencyStats s =
          latency_bench(net, parse_mode(bench_mode), bench_t, seq, bench_warmup, bench_reps);
      std::cout << "samples " << s.samples << "\nmean_ms " << s.mean_ms << "\nmedian_ms "
                << s.median_ms << "\np95_ms " << s.p95_ms << "\nfps " << s.fps << "\n";
      if (parse_mode(bench_mode) == TrackerMode::dyhit) {
        std::cout << "route1 " << s.route1_count << " frames, mean " << s.route1_mean_ms
                  << " ms\nroute2 " << s.route2_count << " frames, mean " << s.route2_mean_ms
                  << " ms\n";
      }
    } else if (*flops_cmd) {
      CostPath path;
      if (flops_path == "hit") path = CostPath::hit;
      else if (flops_path == "route1") path = CostPath::route1;
      else if (flops_path == "dyhit-worst") path = CostPath::dyhit_worst;
      else throw UsageError("unknown path '" + flops_path + "'");
      const ModelConfig c = flops_m.config();
      const CostReport r = flop_account(c, path);
      std::cout << "variant " << c.variant << ", path " << cost_path_name(path) << "\n"
                << format_cost_report(r);
      if (flops_verify) {
        const mac::Tally t = count_forward(flops_m.network(), path);
        std::cout << "instrumented " << t.total << (t.total == r.total_macs ? " (match)\n" : " (MISMATCH)\n");
        if (t.total != r.total_macs) return kNumeric;
      }
    } else if (*fit_cmd) {
      HitNetwork net = fit_m.network();
      const RouterDataset ds =
          fit_dataset.empty() ? collect_router_dataset(net, fit_s.build()) : read_router_dataset(fit_dataset);
      if (!fit_dump.empty()) write_router_dataset(fit_dump, ds);
      FitOptions opt;
      opt.lr = fit_lr;
      opt.epochs = fit_epochs;
      const FitResult fr = fit_router(ds, net.params().router, opt);
      net.set_router(fr.weights);
      save_weights(fit_out, net.params());
      std::cout << "records " << ds.size() << "\ninitial_loss " << format_double(fr.loss_history.front())
                << "\nfinal_loss " << format_double(fr.loss_history.back()) << "\naccuracy "
                << format_double(dispatch_accuracy(fr.weights, ds)) << "\n";
    } else if (*gen_cmd) {
      const SyntheticSequence seq =
          gen_synthetic(gen_seed, Difficulty::level(gen_level), gen_length, gen_side, gen_side);
      fs::create_directories(gen_out);
      for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "%06zu.ppm", i + 1);
        write_ppm(fs::path(gen_out) / name, seq.frames[i]);
      }
      write_boxes(fs::path(gen_out) / "groundtruth.txt", seq.gt);
      std::cout << "wrote " << seq.frames.size() << " frames to " << gen_out << "\n";
    } else if (*eval_cmd) {
      const TraceMetrics m = evaluate_trace(read_boxes(eval_pred), read_boxes(eval_gt));
      std::cout << "frames " << m.ious.size() << "\nAUC " << m.auc << "\nP@20 " << m.precision20
                << "\nAO " << m.ao << "\nSR0.5 " << m.sr50 << "\nSR0.75 " << m.sr75 << "\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const TrackingError& e) {
    std::cerr << "tracking failed: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
