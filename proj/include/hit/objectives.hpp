// SPDX-License-Identifier: Apache-2.0
//
// Box losses with analytic gradients, router targets and router fitting.
//
// Non-smooth points (max/min ties, zero clamps, hardswish knees) take the
// derivative of the branch reached from below.
#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "hit/box.hpp"
#include "hit/io.hpp"
#include "hit/params.hpp"
#include "hit/posenc.hpp"

namespace hit {

/// Value and gradient with respect to the first box, ordered x0, y0, x1, y1.
struct BoxLoss {
  double value = 0.0;
  std::array<double, 4> grad{};
};

/// IoU − (|C| − |U|)/|C|. When both boxes are degenerate the value is −1 and
/// the gradient is zero.
BoxLoss giou(const Box& a, const Box& b);
/// Σ|a_i − b_i| over the four coordinates.
BoxLoss l1(const Box& a, const Box& b);

struct MapLoss {
  double value = 0.0;
  std::vector<double> grad;  // d value / d scores
};

/// Mean of squared residuals.
MapLoss mse(std::span<const float> scores, std::span<const float> targets);
MapLoss mse(std::span<const double> scores, std::span<const double> targets);

inline constexpr double kGiouWeight = 2.0;
inline constexpr double kL1Weight = 5.0;
inline constexpr double kRouterGiouWeight = 1.0;
inline constexpr double kRouterL1Weight = 1.0;
inline constexpr double kRouterMseWeight = 5.0;

/// 2·(1 − GIoU) + 5·L1.
double hit_loss(const Box& pred, const Box& gt);
/// (1 − GIoU) + L1 + 5·MSE(scores, targets).
double dyhit_stage2_loss(const Box& pred, const Box& gt, std::span<const float> scores,
                         std::span<const float> targets);

struct RouterTargets {
  TensorF labels;                  // [H×W]
  std::vector<std::uint8_t> positive;
};

/// Over the search grid (boxes in crop-normalized units): a token is positive
/// iff its cell center lies in [x0, x1) × [y0, y1) of `gt`; positive labels
/// are IoU(route1_pred, gt), negative labels are 0.
RouterTargets label_router_targets(const GridExtent& grid, const Box& gt, const Box& route1_pred);

struct FitOptions {
  double lr = 1e-2;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
};

struct FitResult {
  RouterWeights weights;
  std::vector<double> loss_history;  // before each update, then the final loss
};

/// Full-batch gradient descent on the mean squared score error, in double.
/// Throws NumericError naming the epoch if the loss stops being finite.
FitResult fit_router(const RouterDataset& data, const RouterWeights& init, const FitOptions& opt);
FitResult fit_router(const RouterDataset& data, std::array<std::size_t, 2> hidden,
                     const FitOptions& opt);

/// Mean squared error of the router on the dataset.
double router_loss(const RouterWeights& w, const RouterDataset& data);
/// Fraction of records whose score and target fall on the same side of `split`.
double dispatch_accuracy(const RouterWeights& w, const RouterDataset& data, double split = 0.5);

/// Two Gaussian clusters: one labeled `easy_target`, the other `hard_target`.
RouterDataset make_separable_dataset(std::size_t dim, std::size_t count, std::uint64_t seed,
                                     double easy_target = 0.9, double hard_target = 0.1);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
};

using ScalarFn = std::function<double(std::span<const double>)>;
using GradFn = std::function<std::vector<double>(std::span<const double>)>;

/// Central differences against the analytic gradient. Relative error is
/// |a − n| / max(|a|, |n|, 1e-6).
GradCheckReport grad_check(const ScalarFn& f, const GradFn& grad, std::span<const double> point,
                           double eps = 1e-6);

}  // namespace hit
