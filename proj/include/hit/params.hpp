// SPDX-License-Identifier: Apache-2.0
//
// Full parameter set of HiT/DyHiT and its deterministic initialization.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hit/attention.hpp"
#include "hit/config.hpp"
#include "hit/posenc.hpp"

namespace hit {

struct ConvParams {
  TensorF kernel;  // [k×k×Cin×Cout]
  TensorF bias;    // [Cout]
};

struct LinearParams {
  TensorF weight;  // [in×out]
  TensorF bias;    // [out]
};

struct PatchEmbedParams {
  std::array<ConvParams, 4> convs;
};

struct BlockParams {
  BlockWeights<float> weights;
  BiasTable<float> bias_table;
};

struct ShrinkParams {
  SaWeights<float> weights;
  BiasTable<float> bias_table;
};

struct BackboneParams {
  PatchEmbedParams embed;
  std::array<std::vector<BlockParams>, 3> stages;
  std::array<ShrinkParams, 2> shrinks;
};

/// Two stride-2 transposed convolutions: C3→C2 and C2→C1.
struct BridgeWeights {
  ConvParams up_min;
  ConvParams up_mid;
};

struct HeadParams {
  /// Maps the global vector onto the feature channels. Empty weight means
  /// identity (the global vector already has C1 channels).
  LinearParams projection;
  std::array<ConvParams, 4> top_left;
  std::array<ConvParams, 4> bottom_right;
};

/// Three linear layers C1→h1→h2→1, hardswish between, sigmoid on output.
struct RouterWeights {
  LinearParams l1, l2, l3;
};

struct ModelParams {
  BackboneParams backbone;
  BridgeWeights bridge;
  HeadParams head1;  // Route1: stage-1 features
  HeadParams head2;  // Route2: bridged features
  RouterWeights router;
};

/// Zero-filled parameters with every extent set from `config`.
ModelParams make_params(const ModelConfig& config);
RouterWeights make_router(std::size_t in, std::array<std::size_t, 2> hidden);

/// Seeded fan-in-scaled uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
/// Biases and bias tables start at zero, affine scales at one.
ModelParams init_weights(const ModelConfig& config, std::uint64_t seed);
RouterWeights init_router(std::size_t in, std::array<std::size_t, 2> hidden,
                          std::uint64_t seed);

/// Visits every parameter tensor under a stable dotted name, in archive order.
void visit_tensors(ModelParams& params,
                   const std::function<void(const std::string&, TensorF&)>& fn);
void visit_tensors(const ModelParams& params,
                   const std::function<void(const std::string&, const TensorF&)>& fn);

std::size_t parameter_count(const ModelParams& params);

/// Splitmix-based generator with a platform-independent uniform draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hit
