// SPDX-License-Identifier: Apache-2.0
#include "hit/params.hpp"

#include <cmath>
#include <numbers>

namespace hit {

std::uint64_t Rng::next_u64() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

namespace {

ConvParams make_conv(std::size_t k, std::size_t cin, std::size_t cout) {
  return {TensorF({k, k, cin, cout}), TensorF({cout})};
}

LinearParams make_linear(std::size_t in, std::size_t out) {
  return {TensorF({in, out}), TensorF({out})};
}

ChannelAffine<float> make_affine(std::size_t c) {
  return {TensorF({c}, 1.0f), TensorF({c})};
}

HeadParams make_head(const ModelConfig& cfg, std::size_t global_channels) {
  HeadParams h;
  if (global_channels != cfg.channels[0]) {
    h.projection = make_linear(global_channels, cfg.channels[0]);
  }
  const auto ch = cfg.head_channels();
  for (std::size_t i = 0; i < 4; ++i) {
    h.top_left[i] = make_conv(3, ch[i], ch[i + 1]);
    h.bottom_right[i] = make_conv(3, ch[i], ch[i + 1]);
  }
  return h;
}

std::string idx(std::string prefix, std::size_t i) { return prefix + std::to_string(i); }

// One traversal shared by the const and mutable visitors.
template <typename Params, typename Fn>
void visit_impl(Params& p, Fn&& fn) {
  auto conv = [&](const std::string& n, auto& c) {
    fn(n + ".kernel", c.kernel);
    fn(n + ".bias", c.bias);
  };
  auto lin = [&](const std::string& n, auto& l) {
    fn(n + ".weight", l.weight);
    fn(n + ".bias", l.bias);
  };
  auto head = [&](const std::string& n, auto& h) {
    if (!h.projection.weight.empty()) lin(n + ".projection", h.projection);
    for (std::size_t i = 0; i < 4; ++i) conv(idx(n + ".top_left.conv", i), h.top_left[i]);
    for (std::size_t i = 0; i < 4; ++i) conv(idx(n + ".bottom_right.conv", i), h.bottom_right[i]);
  };

  for (std::size_t i = 0; i < 4; ++i) conv(idx("backbone.embed.conv", i), p.backbone.embed.convs[i]);
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t b = 0; b < p.backbone.stages[s].size(); ++b) {
      auto& blk = p.backbone.stages[s][b];
      const std::string n = "backbone.stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
      fn(n + ".attn_norm.scale", blk.weights.attn_norm.scale);
      fn(n + ".attn_norm.shift", blk.weights.attn_norm.shift);
      fn(n + ".attn.wq", blk.weights.attn.wq);
      fn(n + ".attn.bq", blk.weights.attn.bq);
      fn(n + ".attn.wk", blk.weights.attn.wk);
      fn(n + ".attn.bk", blk.weights.attn.bk);
      fn(n + ".attn.wv", blk.weights.attn.wv);
      fn(n + ".attn.bv", blk.weights.attn.bv);
      fn(n + ".attn.wo", blk.weights.attn.wo);
      fn(n + ".attn.bo", blk.weights.attn.bo);
      fn(n + ".attn.bias_table", blk.bias_table.values);
      fn(n + ".mlp_norm.scale", blk.weights.mlp_norm.scale);
      fn(n + ".mlp_norm.shift", blk.weights.mlp_norm.shift);
      fn(n + ".mlp.w1", blk.weights.w1);
      fn(n + ".mlp.b1", blk.weights.b1);
      fn(n + ".mlp.w2", blk.weights.w2);
      fn(n + ".mlp.b2", blk.weights.b2);
    }
    if (s < 2) {
      auto& sa = p.backbone.shrinks[s];
      const std::string n = "backbone.shrink" + std::to_string(s + 1);
      fn(n + ".wq", sa.weights.wq);
      fn(n + ".bq", sa.weights.bq);
      fn(n + ".wk", sa.weights.wk);
      fn(n + ".bk", sa.weights.bk);
      fn(n + ".wv", sa.weights.wv);
      fn(n + ".bv", sa.weights.bv);
      fn(n + ".wo", sa.weights.wo);
      fn(n + ".bo", sa.weights.bo);
      fn(n + ".bias_table", sa.bias_table.values);
    }
  }
  conv("bridge.up_min", p.bridge.up_min);
  conv("bridge.up_mid", p.bridge.up_mid);
  head("head1", p.head1);
  head("head2", p.head2);
  lin("router.l1", p.router.l1);
  lin("router.l2", p.router.l2);
  lin("router.l3", p.router.l3);
}

bool is_bias_like(const std::string& name) {
  const auto ends = [&](std::string_view s) {
    return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
  };
  return ends(".bias") || ends(".bq") || ends(".bk") || ends(".bv") || ends(".bo") ||
         ends(".b1") || ends(".b2") || ends(".bias_table") || ends(".shift") ||
         ends(".scale");
}

// Fan-in of a weight tensor: all extents but the last (output) one.
std::size_t fan_in(const TensorF& t) {
  std::size_t f = 1;
  for (std::size_t i = 0; i + 1 < t.rank(); ++i) f *= t.dim(i);
  return f;
}

void fill_uniform(TensorF& t, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(t)));
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
}

}  // namespace

RouterWeights make_router(std::size_t in, std::array<std::size_t, 2> hidden) {
  return {make_linear(in, hidden[0]), make_linear(hidden[0], hidden[1]),
          make_linear(hidden[1], 1)};
}

ModelParams make_params(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  const auto ec = cfg.embed_channels();
  for (std::size_t i = 0; i < 4; ++i) p.backbone.embed.convs[i] = make_conv(3, ec[i], ec[i + 1]);

  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t c = cfg.channels[s];
    const std::size_t h = cfg.heads[s];
    const std::size_t d = cfg.key_dim;
    const TokenLayout layout = cfg.stage_layout(s);
    const CoordMap coords = assign_dual_coords(layout.templ, layout.search, cfg.arrangement);
    const GridExtent ext = bias_table_extent(coords);
    for (std::size_t b = 0; b < cfg.blocks[s]; ++b) {
      BlockParams blk;
      auto& w = blk.weights;
      w.attn_norm = make_affine(c);
      w.attn.heads = h;
      w.attn.key_dim = d;
      w.attn.wq = TensorF({c, h * d});
      w.attn.bq = TensorF({h * d});
      w.attn.wk = TensorF({c, h * d});
      w.attn.bk = TensorF({h * d});
      w.attn.wv = TensorF({c, h * 2 * d});
      w.attn.bv = TensorF({h * 2 * d});
      w.attn.wo = TensorF({h * 2 * d, c});
      w.attn.bo = TensorF({c});
      w.mlp_norm = make_affine(c);
      w.w1 = TensorF({c, cfg.mlp_ratio * c});
      w.b1 = TensorF({cfg.mlp_ratio * c});
      w.w2 = TensorF({cfg.mlp_ratio * c, c});
      w.b2 = TensorF({c});
      blk.bias_table = BiasTable<float>(h, ext);
      p.backbone.stages[s].push_back(std::move(blk));
    }
    if (s < 2) {
      const std::size_t cout = cfg.channels[s + 1];
      const std::size_t sh = cfg.shrink_heads[s];
      auto& sa = p.backbone.shrinks[s];
      sa.weights.heads = sh;
      sa.weights.key_dim = d;
      sa.weights.wq = TensorF({c, sh * d});
      sa.weights.bq = TensorF({sh * d});
      sa.weights.wk = TensorF({c, sh * d});
      sa.weights.bk = TensorF({sh * d});
      sa.weights.wv = TensorF({c, sh * 4 * d});
      sa.weights.bv = TensorF({sh * 4 * d});
      sa.weights.wo = TensorF({sh * 4 * d, cout});
      sa.weights.bo = TensorF({cout});
      // Queries are a subset of the keys' coordinates, so the full-grid
      // table extent covers every query/key offset.
      sa.bias_table = BiasTable<float>(sh, ext);
    }
  }

  p.bridge.up_min = make_conv(2, cfg.channels[2], cfg.channels[1]);
  p.bridge.up_mid = make_conv(2, cfg.channels[1], cfg.channels[0]);
  p.head1 = make_head(cfg, cfg.channels[0]);
  p.head2 = make_head(cfg, cfg.channels[2]);
  p.router = make_router(cfg.channels[0], cfg.router_hidden);
  return p;
}

ModelParams init_weights(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = make_params(cfg);
  Rng rng(seed);
  visit_tensors(p, [&](const std::string& name, TensorF& t) {
    if (is_bias_like(name)) return;
    fill_uniform(t, rng);
  });
  return p;
}

RouterWeights init_router(std::size_t in, std::array<std::size_t, 2> hidden,
                          std::uint64_t seed) {
  RouterWeights r = make_router(in, hidden);
  Rng rng(seed);
  fill_uniform(r.l1.weight, rng);
  fill_uniform(r.l2.weight, rng);
  fill_uniform(r.l3.weight, rng);
  return r;
}

void visit_tensors(ModelParams& params,
                   const std::function<void(const std::string&, TensorF&)>& fn) {
  visit_impl(params, fn);
}

void visit_tensors(const ModelParams& params,
                   const std::function<void(const std::string&, const TensorF&)>& fn) {
  visit_impl(params, fn);
}

std::size_t parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  visit_tensors(params, [&](const std::string&, const TensorF& t) { n += t.size(); });
  return n;
}

}  // namespace hit
