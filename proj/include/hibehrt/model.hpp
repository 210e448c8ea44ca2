#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "hibehrt/encode.hpp"
#include "hibehrt/layers.hpp"
#include "hibehrt/params.hpp"

namespace hibehrt {

struct ModelConfig {
  int hidden = 150;
  int heads = 6;
  int intermediate = 108;
  int extractor_layers = 4;
  int aggregator_layers = 4;
  int flat_layers = 8;
  double dropout = 0.2;
  double attn_dropout = 0.3;
  int max_len = 1220;       // hierarchical input length
  int flat_max_len = 256;   // flat baseline input length
  int window = 50;
  int stride = 30;
  int age_vocab = 121;
  int position_vocab = 1220;
  std::int64_t vocab_size = 0;

  LayerConfig layer() const { return {hidden, heads, intermediate, dropout, attn_dropout, 1e-12}; }

  void validate() const {
    if (hidden % heads != 0) throw ConfigMismatch("hidden must be divisible by heads");
    if (stride < 1 || window < stride || window > max_len)
      throw ConfigMismatch("require 1 <= stride <= window <= max_len");
    if (vocab_size < 4) throw ConfigMismatch("vocab_size not set");
  }
};

// Number of sliding windows covering a length-L sequence; windows start at
// 0, S, 2S, ... and the final window is padded if it overruns L.
inline int segment_count(int L, int W, int S) {
  if (W < 1 || S < 1) throw ConfigMismatch("segment_count: window and stride must be >= 1");
  return (std::max(L, W) - W) / S + 1;
}

// ---- cost model (exact arithmetic, no asymptotic constants) ----

struct AttnCost {
  long long space;  // L^2 + L*d
  long long time;   // L^2 * d
};

inline AttnCost attention_cost(long long L, long long d) { return {L * L + L * d, L * L * d}; }

struct HierCost {
  int n_seg;
  long long space;
  long long time;
};

// Extractor runs once per window at length W; the aggregator sees the
// segments plus one CLS position.
inline HierCost hierarchical_cost(int max_len, int W, int S, int d) {
  const int n = segment_count(max_len, W, S);
  const long long ncls = n + 1;
  const AttnCost win = attention_cost(W, d);
  const AttnCost agg = attention_cost(ncls, d);
  return {n, n * win.space + agg.space, n * win.time + agg.time};
}

// ---- parameter initialization ----

enum class ModelKind { Hierarchical, Flat };

template <typename T>
void init_embedding_params(ParameterStore<T>& store, const ModelConfig& cfg, Rng& rng) {
  Rng r = rng.split("embed");
  store.add("embed.token", truncated_normal<T>({static_cast<std::size_t>(cfg.vocab_size),
                                                static_cast<std::size_t>(cfg.hidden)},
                                               kInitStd, r));
  store.add("embed.age", truncated_normal<T>({static_cast<std::size_t>(cfg.age_vocab),
                                              static_cast<std::size_t>(cfg.hidden)},
                                             kInitStd, r));
  store.add("embed.segment", truncated_normal<T>({2, static_cast<std::size_t>(cfg.hidden)}, kInitStd, r));
  store.add("embed.position", truncated_normal<T>({static_cast<std::size_t>(cfg.position_vocab),
                                                   static_cast<std::size_t>(cfg.hidden)},
                                                  kInitStd, r));
  store.add("embed.cls", truncated_normal<T>({1, static_cast<std::size_t>(cfg.hidden)}, kInitStd, r));
}

template <typename T>
void init_head_params(ParameterStore<T>& store, const ModelConfig& cfg, Rng& rng) {
  Rng r = rng.split("head");
  init_linear(store, "head.pool", cfg.hidden, cfg.hidden, r);
  init_linear(store, "head.out", cfg.hidden, 1, r);
}

// Encoder = everything below the risk head (what BYOL pretrains and
// transfer_weights copies).
template <typename T>
void init_encoder_params(ParameterStore<T>& store, const ModelConfig& cfg, ModelKind kind, Rng& rng) {
  cfg.validate();
  init_embedding_params(store, cfg, rng);
  const LayerConfig lc = cfg.layer();
  if (kind == ModelKind::Hierarchical) {
    for (int i = 0; i < cfg.extractor_layers; ++i) {
      Rng r = rng.split("extractor" + std::to_string(i));
      init_encoder_layer(store, "extractor.layer" + std::to_string(i), lc, r);
    }
    for (int i = 0; i < cfg.aggregator_layers; ++i) {
      Rng r = rng.split("aggregator" + std::to_string(i));
      init_encoder_layer(store, "aggregator.layer" + std::to_string(i), lc, r);
    }
  } else {
    for (int i = 0; i < cfg.flat_layers; ++i) {
      Rng r = rng.split("encoder" + std::to_string(i));
      init_encoder_layer(store, "encoder.layer" + std::to_string(i), lc, r);
    }
  }
}

template <typename T>
void init_model_params(ParameterStore<T>& store, const ModelConfig& cfg, ModelKind kind, Rng& rng) {
  init_encoder_params(store, cfg, kind, rng);
  init_head_params(store, cfg, rng);
}

// ---- forward pieces ----

// Sum of token, age, segment, and position embeddings for the first
// `count` positions. Position ids beyond the table clamp to the last row.
template <typename T>
typename Tape<T>::Ref embed(ParamCtx<T>& ctx, const ModelConfig& cfg, const EncodedSequence& seq,
                            std::size_t count) {
  auto& t = ctx.tape();
  std::vector<std::int64_t> tok(seq.token_ids.begin(), seq.token_ids.begin() + count);
  std::vector<std::int64_t> age(seq.age_ids.begin(), seq.age_ids.begin() + count);
  std::vector<std::int64_t> segm(seq.segment_ids.begin(), seq.segment_ids.begin() + count);
  std::vector<std::int64_t> pos(seq.position_ids.begin(), seq.position_ids.begin() + count);
  for (std::int64_t& p : pos) p = std::min<std::int64_t>(p, cfg.position_vocab - 1);
  auto x = t.add(t.gather_rows(ctx("embed.token"), tok), t.gather_rows(ctx("embed.age"), age));
  x = t.add(x, t.gather_rows(ctx("embed.segment"), segm));
  return t.add(x, t.gather_rows(ctx("embed.position"), pos));
}

// Standalone sliding-window view (contract form): window k covers
// [k*S, k*S+W); positions beyond L are zero-filled with mask false.
template <typename T>
struct WindowView {
  Tensor<T> values;        // [W x d]
  std::vector<char> mask;  // true = real token
};

template <typename T>
std::vector<WindowView<T>> slide_windows(const Tensor<T>& x, const std::vector<char>& mask, int W, int S) {
  const std::size_t L = x.rows(), d = x.cols();
  if (mask.size() != L) throw ShapeMismatch("slide_windows: mask length != rows");
  std::vector<WindowView<T>> out;
  const int n = segment_count(static_cast<int>(L), W, S);
  for (int k = 0; k < n; ++k) {
    WindowView<T> w;
    w.values = Tensor<T>::zeros({static_cast<std::size_t>(W), d});
    w.mask.assign(W, 0);
    const std::size_t lo = static_cast<std::size_t>(k) * S;
    for (std::size_t i = 0; i < static_cast<std::size_t>(W) && lo + i < L; ++i) {
      std::copy(x.data.begin() + (lo + i) * d, x.data.begin() + (lo + i + 1) * d,
                w.values.data.begin() + i * d);
      w.mask[i] = mask[lo + i];
    }
    out.push_back(std::move(w));
  }
  return out;
}

// Local-extractor output per window: shared weights, independent windows,
// segment representation = extractor output at the window's first valid
// position. Fully padded windows yield a zero vector with mask false.
// `x` holds the embedded valid prefix (valid tokens always form a prefix),
// so window k is the row range [k*S, min(k*S+W, Lv)).
template <typename T>
struct SegmentsOut {
  typename Tape<T>::Ref values;    // [n_seg x d]
  std::vector<char> segment_mask;  // false = window contained no valid tokens
  int n_valid = 0;
};

template <typename T>
SegmentsOut<T> extract_segments(ParamCtx<T>& ctx, const ModelConfig& cfg, typename Tape<T>::Ref x,
                                bool train, Rng& rng) {
  auto& t = ctx.tape();
  const std::size_t Lv = t.value(x).rows();
  const int n_seg = segment_count(cfg.max_len, cfg.window, cfg.stride);
  const LayerConfig lc = cfg.layer();

  SegmentsOut<T> out;
  std::vector<typename Tape<T>::Ref> rows;
  typename Tape<T>::Ref zero_row;
  for (int k = 0; k < n_seg; ++k) {
    const std::size_t lo = static_cast<std::size_t>(k) * cfg.stride;
    if (lo < Lv) {
      const std::size_t hi = std::min(lo + cfg.window, Lv);
      auto w = t.slice_rows(x, lo, hi);
      std::vector<char> keymask(hi - lo, 1);
      Rng wrng = rng.split("window" + std::to_string(k));
      for (int l = 0; l < cfg.extractor_layers; ++l)
        w = transformer_encoder_layer(ctx, "extractor.layer" + std::to_string(l), w, keymask, lc, train,
                                      wrng);
      rows.push_back(t.slice_rows(w, 0, 1));
      out.segment_mask.push_back(1);
      ++out.n_valid;
    } else {
      if (!zero_row.valid())
        zero_row = t.constant(Tensor<T>::zeros({1, static_cast<std::size_t>(cfg.hidden)}));
      rows.push_back(zero_row);
      out.segment_mask.push_back(0);
    }
  }
  out.values = t.concat_rows(rows);
  return out;
}

// Prepend the learned CLS segment, aggregate, pool CLS through tanh
// projection, emit the risk logit. Only the valid-segment prefix takes part
// in the computation; masked segments cannot influence the output.
template <typename T>
typename Tape<T>::Ref aggregate_and_predict(ParamCtx<T>& ctx, const ModelConfig& cfg,
                                            const SegmentsOut<T>& segments, bool train, Rng& rng) {
  auto& t = ctx.tape();
  if (segments.n_valid < 1) throw NoValidSegments();
  const LayerConfig lc = cfg.layer();
  auto seg_prefix = t.slice_rows(segments.values, 0, segments.n_valid);
  auto h = t.concat_rows({ctx("embed.cls"), seg_prefix});
  std::vector<char> keymask(1 + segments.n_valid, 1);
  Rng arng = rng.split("aggregator");
  for (int l = 0; l < cfg.aggregator_layers; ++l)
    h = transformer_encoder_layer(ctx, "aggregator.layer" + std::to_string(l), h, keymask, lc, train, arng);
  auto pooled = t.tanh_op(linear(ctx, "head.pool", t.slice_rows(h, 0, 1)));
  return linear(ctx, "head.out", pooled);  // [1x1] logit
}

// Hierarchical encoder end to end: embed, window, extract, aggregate.
template <typename T>
typename Tape<T>::Ref hibehrt_forward(ParamCtx<T>& ctx, const ModelConfig& cfg, const EncodedSequence& seq,
                                      bool train, Rng& rng) {
  const std::size_t Lv = seq.valid_len();
  if (Lv == 0) throw EmptySequence();
  auto x = embed(ctx, cfg, seq, Lv);
  auto segs = extract_segments(ctx, cfg, x, train, rng);
  return aggregate_and_predict(ctx, cfg, segs, train, rng);
}

// Flat truncating baseline: CLS token prepended, single encoder stack,
// first-timestep pooling.
template <typename T>
typename Tape<T>::Ref behrt_forward(ParamCtx<T>& ctx, const ModelConfig& cfg, const EncodedSequence& seq,
                                    bool train, Rng& rng) {
  auto& t = ctx.tape();
  const std::size_t Lv = seq.valid_len();
  if (Lv == 0) throw EmptySequence();
  const LayerConfig lc = cfg.layer();
  auto h = t.concat_rows({ctx("embed.cls"), embed(ctx, cfg, seq, Lv)});
  std::vector<char> keymask(Lv + 1, 1);
  Rng erng = rng.split("encoder");
  for (int l = 0; l < cfg.flat_layers; ++l)
    h = transformer_encoder_layer(ctx, "encoder.layer" + std::to_string(l), h, keymask, lc, train, erng);
  auto pooled = t.tanh_op(linear(ctx, "head.pool", t.slice_rows(h, 0, 1)));
  return linear(ctx, "head.out", pooled);
}

template <typename T>
typename Tape<T>::Ref model_forward(ParamCtx<T>& ctx, const ModelConfig& cfg, ModelKind kind,
                                    const EncodedSequence& seq, bool train, Rng& rng) {
  return kind == ModelKind::Hierarchical ? hibehrt_forward(ctx, cfg, seq, train, rng)
                                         : behrt_forward(ctx, cfg, seq, train, rng);
}

// Inference convenience: eval-mode forward with frozen weights.
template <typename T>
double predict_prob(ParameterStore<T>& store, const ModelConfig& cfg, ModelKind kind,
                    const EncodedSequence& seq) {
  Tape<T> tape;
  ParamCtx<T> ctx(tape, store, /*frozen=*/true);
  Rng rng(0);  // unused in eval mode
  auto logit = model_forward(ctx, cfg, kind, seq, /*train=*/false, rng);
  const double z = static_cast<double>(tape.value(logit).data[0]);
  return 1.0 / (1.0 + std::exp(-z));
}

}  // namespace hibehrt
