// SPDX-License-Identifier: Apache-2.0
#include "hit/objectives.hpp"

#include <cmath>

namespace hit {

namespace {

// One-sided (from below) derivatives of max/min/clamp with respect to `a`.
constexpr double dmax_da(double a, double b) { return a > b ? 1.0 : 0.0; }
constexpr double dmin_da(double a, double b) { return a <= b ? 1.0 : 0.0; }
constexpr double dclamp0(double t) { return t > 0.0 ? 1.0 : 0.0; }

}  // namespace

BoxLoss giou(const Box& a, const Box& b) {
  const double wa = a.x1 - a.x0, ha = a.y1 - a.y0;
  const double mwa = std::max(0.0, wa), mha = std::max(0.0, ha);
  const double area_a = mwa * mha;
  const double area_b = b.area();

  const double iw_raw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double ih_raw = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  const double iw = std::max(0.0, iw_raw), ih = std::max(0.0, ih_raw);
  const double inter = iw * ih;
  const double uni = area_a + area_b - inter;

  const double cw = std::max(a.x1, b.x1) - std::min(a.x0, b.x0);
  const double ch = std::max(a.y1, b.y1) - std::min(a.y0, b.y0);
  const double cover = cw * ch;

  BoxLoss out;
  if (!(uni > 0.0) || !(cover > 0.0)) {
    out.value = -1.0;
    return out;
  }
  out.value = inter / uni - (cover - uni) / cover;

  // d area_a / d(x0, y0, x1, y1)
  const double daw = dclamp0(wa) * mha, dah = dclamp0(ha) * mwa;
  const std::array<double, 4> d_area{-daw, -dah, daw, dah};
  // d inter
  const double diw = dclamp0(iw_raw) * ih, dih = dclamp0(ih_raw) * iw;
  const std::array<double, 4> d_inter{-dmax_da(a.x0, b.x0) * diw, -dmax_da(a.y0, b.y0) * dih,
                                      dmin_da(a.x1, b.x1) * diw, dmin_da(a.y1, b.y1) * dih};
  // d cover
  const std::array<double, 4> d_cover{-dmin_da(a.x0, b.x0) * ch, -dmin_da(a.y0, b.y0) * cw,
                                      dmax_da(a.x1, b.x1) * ch, dmax_da(a.y1, b.y1) * cw};
  for (std::size_t k = 0; k < 4; ++k) {
    const double d_uni = d_area[k] - d_inter[k];
    out.grad[k] = d_inter[k] / uni - inter * d_uni / (uni * uni) + d_uni / cover -
                  uni * d_cover[k] / (cover * cover);
  }
  return out;
}

BoxLoss l1(const Box& a, const Box& b) {
  const std::array<double, 4> d{a.x0 - b.x0, a.y0 - b.y0, a.x1 - b.x1, a.y1 - b.y1};
  BoxLoss out;
  for (std::size_t k = 0; k < 4; ++k) {
    out.value += std::abs(d[k]);
    out.grad[k] = d[k] > 0.0 ? 1.0 : -1.0;
  }
  return out;
}

namespace {

template <typename T>
MapLoss mse_impl(std::span<const T> scores, std::span<const T> targets) {
  if (scores.size() != targets.size()) {
    throw ShapeError("mse: " + std::to_string(scores.size()) + " scores vs " +
                     std::to_string(targets.size()) + " targets");
  }
  if (scores.empty()) throw ShapeError("mse: empty maps");
  const double n = static_cast<double>(scores.size());
  MapLoss out;
  out.grad.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double r = static_cast<double>(scores[i]) - static_cast<double>(targets[i]);
    out.value += r * r;
    out.grad[i] = 2.0 * r / n;
  }
  out.value /= n;
  return out;
}

}  // namespace

MapLoss mse(std::span<const float> scores, std::span<const float> targets) {
  return mse_impl(scores, targets);
}

MapLoss mse(std::span<const double> scores, std::span<const double> targets) {
  return mse_impl(scores, targets);
}

double hit_loss(const Box& pred, const Box& gt) {
  return kGiouWeight * (1.0 - giou(pred, gt).value) + kL1Weight * l1(pred, gt).value;
}

double dyhit_stage2_loss(const Box& pred, const Box& gt, std::span<const float> scores,
                         std::span<const float> targets) {
  return kRouterGiouWeight * (1.0 - giou(pred, gt).value) + kRouterL1Weight * l1(pred, gt).value +
         kRouterMseWeight * mse(scores, targets).value;
}

RouterTargets label_router_targets(const GridExtent& grid, const Box& gt, const Box& route1_pred) {
  RouterTargets out;
  out.labels = TensorF({grid.rows, grid.cols});
  out.positive.assign(grid.count(), 0);
  const float y = static_cast<float>(iou(route1_pred, gt));
  for (std::size_t r = 0; r < grid.rows; ++r) {
    const double cy = (static_cast<double>(r) + 0.5) / static_cast<double>(grid.rows);
    for (std::size_t c = 0; c < grid.cols; ++c) {
      const double cx = (static_cast<double>(c) + 0.5) / static_cast<double>(grid.cols);
      if (cx >= gt.x0 && cx < gt.x1 && cy >= gt.y0 && cy < gt.y1) {
        out.positive[r * grid.cols + c] = 1;
        out.labels[r * grid.cols + c] = y;
      }
    }
  }
  return out;
}

namespace {

constexpr double hswish(double z) {
  return z <= -3.0 ? 0.0 : (z >= 3.0 ? z : z * (z + 3.0) / 6.0);
}
constexpr double hswish_grad(double z) {
  return z <= -3.0 ? 0.0 : (z > 3.0 ? 1.0 : (2.0 * z + 3.0) / 6.0);
}

struct DenseD {
  std::size_t in = 0, out = 0;
  std::vector<double> w;  // in × out
  std::vector<double> b;  // out
};

DenseD to_double(const LinearParams& p) {
  DenseD d;
  d.in = p.weight.dim(0);
  d.out = p.weight.dim(1);
  d.w.assign(p.weight.data().begin(), p.weight.data().end());
  d.b.assign(p.bias.data().begin(), p.bias.data().end());
  return d;
}

LinearParams to_float(const DenseD& d) {
  LinearParams p;
  p.weight = TensorF({d.in, d.out});
  p.bias = TensorF({d.out});
  for (std::size_t i = 0; i < d.w.size(); ++i) p.weight[i] = static_cast<float>(d.w[i]);
  for (std::size_t i = 0; i < d.b.size(); ++i) p.bias[i] = static_cast<float>(d.b[i]);
  return p;
}

// y[n×out] = x[n×in]·W + b
std::vector<double> dense_forward(const DenseD& l, const std::vector<double>& x, std::size_t n) {
  std::vector<double> y(n * l.out);
  for (std::size_t i = 0; i < n; ++i) {
    double* yi = y.data() + i * l.out;
    for (std::size_t o = 0; o < l.out; ++o) yi[o] = l.b[o];
    for (std::size_t k = 0; k < l.in; ++k) {
      const double xv = x[i * l.in + k];
      const double* wk = l.w.data() + k * l.out;
      for (std::size_t o = 0; o < l.out; ++o) yi[o] += xv * wk[o];
    }
  }
  return y;
}

// Accumulates dW, db for upstream gradient g[n×out]; returns dx when wanted.
std::vector<double> dense_backward(const DenseD& l, const std::vector<double>& x,
                                   const std::vector<double>& g, std::size_t n, DenseD& grad,
                                   bool want_dx) {
  std::vector<double> dx;
  if (want_dx) dx.assign(n * l.in, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* gi = g.data() + i * l.out;
    for (std::size_t o = 0; o < l.out; ++o) grad.b[o] += gi[o];
    for (std::size_t k = 0; k < l.in; ++k) {
      const double xv = x[i * l.in + k];
      double* gw = grad.w.data() + k * l.out;
      const double* wk = l.w.data() + k * l.out;
      double acc = 0.0;
      for (std::size_t o = 0; o < l.out; ++o) {
        gw[o] += xv * gi[o];
        acc += wk[o] * gi[o];
      }
      if (want_dx) dx[i * l.in + k] = acc;
    }
  }
  return dx;
}

DenseD zeros_like(const DenseD& l) {
  DenseD z = l;
  std::fill(z.w.begin(), z.w.end(), 0.0);
  std::fill(z.b.begin(), z.b.end(), 0.0);
  return z;
}

void check_dataset(const RouterDataset& data, const RouterWeights& w) {
  if (data.size() == 0) throw DataError("router dataset is empty");
  if (data.features.size() != data.size() * data.dim) {
    throw ShapeError("router dataset: feature block does not match count × dim");
  }
  if (w.l1.weight.rank() != 2 || w.l1.weight.dim(0) != data.dim) {
    throw ShapeError("router input width does not match the dataset feature dim " +
                     std::to_string(data.dim));
  }
}

}  // namespace

FitResult fit_router(const RouterDataset& data, const RouterWeights& init, const FitOptions& opt) {
  check_dataset(data, init);
  const std::size_t n = data.size();
  std::array<DenseD, 3> layers{to_double(init.l1), to_double(init.l2), to_double(init.l3)};
  const std::vector<double> x(data.features.begin(), data.features.end());

  FitResult result;
  for (std::size_t epoch = 0; epoch <= opt.epochs; ++epoch) {
    const std::vector<double> z1 = dense_forward(layers[0], x, n);
    std::vector<double> a1(z1.size());
    for (std::size_t i = 0; i < z1.size(); ++i) a1[i] = hswish(z1[i]);
    const std::vector<double> z2 = dense_forward(layers[1], a1, n);
    std::vector<double> a2(z2.size());
    for (std::size_t i = 0; i < z2.size(); ++i) a2[i] = hswish(z2[i]);
    const std::vector<double> z3 = dense_forward(layers[2], a2, n);

    double loss = 0.0;
    std::vector<double> g3(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = 1.0 / (1.0 + std::exp(-z3[i]));
      const double r = s - static_cast<double>(data.targets[i]);
      loss += r * r;
      g3[i] = 2.0 * r / static_cast<double>(n) * s * (1.0 - s);
    }
    loss /= static_cast<double>(n);
    if (!std::isfinite(loss)) {
      throw NumericError("fit_router: non-finite loss at epoch " + std::to_string(epoch));
    }
    result.loss_history.push_back(loss);
    if (epoch == opt.epochs) break;

    std::array<DenseD, 3> grads{zeros_like(layers[0]), zeros_like(layers[1]),
                                zeros_like(layers[2])};
    std::vector<double> g2 = dense_backward(layers[2], a2, g3, n, grads[2], true);
    for (std::size_t i = 0; i < g2.size(); ++i) g2[i] *= hswish_grad(z2[i]);
    std::vector<double> g1 = dense_backward(layers[1], a1, g2, n, grads[1], true);
    for (std::size_t i = 0; i < g1.size(); ++i) g1[i] *= hswish_grad(z1[i]);
    dense_backward(layers[0], x, g1, n, grads[0], false);

    for (std::size_t l = 0; l < 3; ++l) {
      for (std::size_t i = 0; i < layers[l].w.size(); ++i) layers[l].w[i] -= opt.lr * grads[l].w[i];
      for (std::size_t i = 0; i < layers[l].b.size(); ++i) layers[l].b[i] -= opt.lr * grads[l].b[i];
    }
  }
  result.weights = {to_float(layers[0]), to_float(layers[1]), to_float(layers[2])};
  return result;
}

FitResult fit_router(const RouterDataset& data, std::array<std::size_t, 2> hidden,
                     const FitOptions& opt) {
  return fit_router(data, init_router(data.dim, hidden, opt.seed), opt);
}

namespace {

TensorF router_batch_scores(const RouterWeights& w, const RouterDataset& data) {
  check_dataset(data, w);
  TensorF x({data.size(), data.dim}, std::vector<float>(data.features));
  x = hardswish(linear(x, w.l1.weight, w.l1.bias));
  x = hardswish(linear(x, w.l2.weight, w.l2.bias));
  x = linear(x, w.l3.weight, w.l3.bias);
  for (auto& v : x.data()) v = sigmoid(v);
  return x;
}

}  // namespace

double router_loss(const RouterWeights& w, const RouterDataset& data) {
  const TensorF s = router_batch_scores(w, data);
  return mse(s.data(), data.targets).value;
}

double dispatch_accuracy(const RouterWeights& w, const RouterDataset& data, double split) {
  const TensorF s = router_batch_scores(w, data);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    hits += (s[i] > split) == (data.targets[i] > split);
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

RouterDataset make_separable_dataset(std::size_t dim, std::size_t count, std::uint64_t seed,
                                     double easy_target, double hard_target) {
  if (dim == 0 || count == 0) throw UsageError("separable dataset needs dim and count");
  Rng rng(seed);
  std::vector<double> easy(dim), hard(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    easy[k] = rng.normal();
    hard[k] = rng.normal();
  }
  RouterDataset ds;
  ds.dim = dim;
  ds.features.reserve(dim * count);
  ds.targets.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const bool is_easy = i % 2 == 0;
    const std::vector<double>& mu = is_easy ? easy : hard;
    for (std::size_t k = 0; k < dim; ++k) {
      ds.features.push_back(static_cast<float>(mu[k] + 0.5 * rng.normal()));
    }
    ds.targets.push_back(static_cast<float>(is_easy ? easy_target : hard_target));
  }
  return ds;
}

GradCheckReport grad_check(const ScalarFn& f, const GradFn& grad, std::span<const double> point,
                           double eps) {
  const std::vector<double> analytic = grad(point);
  if (analytic.size() != point.size()) throw ShapeError("grad_check: gradient size mismatch");
  std::vector<double> p(point.begin(), point.end());
  GradCheckReport rep;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + eps;
    const double fp = f(p);
    p[i] = orig - eps;
    const double fm = f(p);
    p[i] = orig;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    const double err = std::abs(analytic[i] - numeric) / denom;
    if (err > rep.max_rel_error) {
      rep.max_rel_error = err;
      rep.worst_index = i;
    }
  }
  return rep;
}

}  // namespace hit
