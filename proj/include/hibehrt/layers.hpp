#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hibehrt/params.hpp"
#include "hibehrt/tape.hpp"

namespace hibehrt {

struct LayerConfig {
  int hidden = 150;
  int heads = 6;
  int intermediate = 108;
  double dropout = 0.2;
  double attn_dropout = 0.3;
  double layer_norm_eps = 1e-12;
};

inline constexpr double kInitStd = 0.02;

template <typename T>
void init_linear(ParameterStore<T>& store, const std::string& prefix, std::size_t in, std::size_t out,
                 Rng& rng) {
  store.add(prefix + ".w", truncated_normal<T>({in, out}, kInitStd, rng));
  store.add(prefix + ".b", Tensor<T>::zeros({out}));
}

template <typename T>
void init_layer_norm(ParameterStore<T>& store, const std::string& prefix, std::size_t dim) {
  store.add(prefix + ".gain", Tensor<T>::full({dim}, T(1)));
  store.add(prefix + ".bias", Tensor<T>::zeros({dim}));
}

template <typename T>
void init_encoder_layer(ParameterStore<T>& store, const std::string& prefix, const LayerConfig& cfg,
                        Rng& rng) {
  const std::size_t d = cfg.hidden, I = cfg.intermediate;
  init_linear(store, prefix + ".attn.q", d, d, rng);
  init_linear(store, prefix + ".attn.k", d, d, rng);
  init_linear(store, prefix + ".attn.v", d, d, rng);
  init_linear(store, prefix + ".attn.out", d, d, rng);
  init_layer_norm(store, prefix + ".norm1", d);
  init_linear(store, prefix + ".ffn.in", d, I, rng);
  init_linear(store, prefix + ".ffn.out", I, d, rng);
  init_layer_norm(store, prefix + ".norm2", d);
}

template <typename T>
typename Tape<T>::Ref linear(ParamCtx<T>& ctx, const std::string& prefix, typename Tape<T>::Ref x) {
  auto& t = ctx.tape();
  return t.add_rowvec(t.matmul(x, ctx(prefix + ".w")), ctx(prefix + ".b"));
}

// Masked scaled-dot-product multi-head self-attention. Keys at masked
// positions get -inf logits, so they carry exactly zero attention weight;
// output rows at masked query positions are unspecified and must not be
// consumed downstream. `attn_probs_out`, when non-null, receives the
// post-softmax probability node per head (test hook).
template <typename T>
typename Tape<T>::Ref multi_head_attention(ParamCtx<T>& ctx, const std::string& prefix,
                                           typename Tape<T>::Ref x, const std::vector<char>& keymask,
                                           const LayerConfig& cfg, bool train, Rng& rng,
                                           std::vector<typename Tape<T>::Ref>* attn_probs_out = nullptr) {
  auto& t = ctx.tape();
  const std::size_t d = t.value(x).cols();
  if (d % static_cast<std::size_t>(cfg.heads) != 0)
    throw ShapeMismatch("attention: hidden not divisible by heads");
  const std::size_t dh = d / cfg.heads;

  auto q = linear(ctx, prefix + ".attn.q", x);
  auto k = linear(ctx, prefix + ".attn.k", x);
  auto v = linear(ctx, prefix + ".attn.v", x);

  std::vector<typename Tape<T>::Ref> head_outs;
  for (int h = 0; h < cfg.heads; ++h) {
    auto qh = t.slice_cols(q, h * dh, (h + 1) * dh);
    auto kh = t.slice_cols(k, h * dh, (h + 1) * dh);
    auto vh = t.slice_cols(v, h * dh, (h + 1) * dh);
    auto scores = t.scale(t.matmul(qh, kh, false, true), 1.0 / std::sqrt(static_cast<double>(dh)));
    auto probs = t.softmax_rows(scores, keymask);
    if (attn_probs_out) attn_probs_out->push_back(probs);
    probs = t.dropout(probs, cfg.attn_dropout, train, rng);
    head_outs.push_back(t.matmul(probs, vh));
  }
  auto merged = cfg.heads == 1 ? head_outs[0] : t.concat_cols(head_outs);
  return linear(ctx, prefix + ".attn.out", merged);
}

// Post-layer-norm Transformer encoder layer: self-attention sublayer with
// residual + layer norm, then GELU feed-forward with residual + layer norm.
template <typename T>
typename Tape<T>::Ref transformer_encoder_layer(ParamCtx<T>& ctx, const std::string& prefix,
                                                typename Tape<T>::Ref x, const std::vector<char>& keymask,
                                                const LayerConfig& cfg, bool train, Rng& rng) {
  auto& t = ctx.tape();
  auto attn = multi_head_attention(ctx, prefix, x, keymask, cfg, train, rng);
  attn = t.dropout(attn, cfg.dropout, train, rng);
  auto x1 = t.layer_norm_rows(t.add(x, attn), ctx(prefix + ".norm1.gain"), ctx(prefix + ".norm1.bias"),
                              cfg.layer_norm_eps);
  auto ffn = linear(ctx, prefix + ".ffn.out", t.gelu(linear(ctx, prefix + ".ffn.in", x1)));
  ffn = t.dropout(ffn, cfg.dropout, train, rng);
  return t.layer_norm_rows(t.add(x1, ffn), ctx(prefix + ".norm2.gain"), ctx(prefix + ".norm2.bias"),
                           cfg.layer_norm_eps);
}

// One-hidden-layer MLP with GELU hidden activation and linear output
// (projector / predictor shape).
template <typename T>
void init_mlp(ParameterStore<T>& store, const std::string& prefix, std::size_t in, std::size_t hid,
              std::size_t out, Rng& rng) {
  init_linear(store, prefix + ".hid", in, hid, rng);
  init_linear(store, prefix + ".out", hid, out, rng);
}

template <typename T>
typename Tape<T>::Ref mlp(ParamCtx<T>& ctx, const std::string& prefix, typename Tape<T>::Ref x) {
  auto& t = ctx.tape();
  return linear(ctx, prefix + ".out", t.gelu(linear(ctx, prefix + ".hid", x)));
}

}  // namespace hibehrt
