#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hibehrt/model.hpp"
#include "hibehrt/optim.hpp"

namespace hibehrt {

struct AugmentationConfig {
  double crop_prob = 0.5;          // P_c
  double mask_prob = 0.2;          // P_m
  double segment_aug_prob = 0.5;   // per-segment Bernoulli
  double mask_vs_noise = 0.85;     // P(zero-mask | augmented); else Gaussian noise
  double noise_std = 0.1;
  double crop_min_fraction = 0.5;

  void validate() const {
    for (double p : {crop_prob, mask_prob, segment_aug_prob, mask_vs_noise, crop_min_fraction})
      if (p < 0 || p > 1) throw ConfigMismatch("augmentation: probabilities must lie in [0,1]");
    if (noise_std < 0) throw ConfigMismatch("augmentation: noise_std must be >= 0");
  }
};

// Random crop (probability P_c) to a contiguous sub-span of the valid
// prefix with positions/segments recomputed from the cropped first visit,
// then independent token masking (probability P_m) that replaces token ids
// with MASK while leaving age/segment/position ids untouched.
inline EncodedSequence ehr_augment(const EncodedSequence& seq, const AugmentationConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t L = seq.valid_len();
  if (L == 0) throw EmptySequence();
  const std::size_t max_len = seq.length();

  std::size_t start = 0, keep = L;
  if (rng.bernoulli(cfg.crop_prob)) {
    const std::size_t min_keep =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.crop_min_fraction * L)));
    keep = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(min_keep),
                                                    static_cast<std::int64_t>(L)));
    start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(L - keep)));
  }

  EncodedSequence out;
  const std::int64_t pos0 = seq.position_ids[start];
  for (std::size_t i = start; i < start + keep; ++i) {
    const std::int64_t tok = rng.bernoulli(cfg.mask_prob) ? Vocabulary::MASK : seq.token_ids[i];
    const std::int64_t pos = seq.position_ids[i] - pos0;
    out.token_ids.push_back(tok);
    out.age_ids.push_back(seq.age_ids[i]);
    out.segment_ids.push_back(pos % 2);
    out.position_ids.push_back(pos);
    out.mask.push_back(1);
  }
  while (out.token_ids.size() < max_len) {
    out.token_ids.push_back(Vocabulary::PAD);
    out.age_ids.push_back(out.age_ids[keep - 1]);
    out.segment_ids.push_back(out.segment_ids[keep - 1]);
    out.position_ids.push_back(out.position_ids[keep - 1]);
    out.mask.push_back(0);
  }
  return out;
}

// Online-branch corruption of extracted segment vectors: each valid
// segment independently selected with probability segment_aug_prob; a
// selected segment is zeroed (probability mask_vs_noise) or perturbed with
// i.i.d. Gaussian noise. Returns the augmented node and the selection
// flags over the valid-segment prefix.
template <typename T>
typename Tape<T>::Ref segment_augment(Tape<T>& t, typename Tape<T>::Ref valid_segments,
                                      const AugmentationConfig& cfg, Rng& rng,
                                      std::vector<char>& augmented_positions) {
  cfg.validate();
  const std::size_t n = t.value(valid_segments).rows();
  const std::size_t d = t.value(valid_segments).cols();
  augmented_positions.assign(n, 0);
  std::vector<T> rowscale(n, T(1));
  Tensor<T> noise = Tensor<T>::zeros({n, d});
  bool any = false;
  for (std::size_t r = 0; r < n; ++r) {
    if (!rng.bernoulli(cfg.segment_aug_prob)) continue;
    augmented_positions[r] = 1;
    any = true;
    if (rng.bernoulli(cfg.mask_vs_noise)) {
      rowscale[r] = 0;
    } else {
      for (std::size_t c = 0; c < d; ++c) noise.at(r, c) = static_cast<T>(rng.normal(0.0, cfg.noise_std));
    }
  }
  if (!any) return valid_segments;
  return t.add(t.scale_rows(valid_segments, rowscale), t.constant(noise));
}

// Mean over positions of the normalized squared distance
// ||q/||q|| - z/||z||||^2 = 2 - 2 cos(q, z), bounded by [0, 4].
template <typename T>
typename Tape<T>::Ref byol_loss(Tape<T>& t, typename Tape<T>::Ref online_pred,
                                typename Tape<T>::Ref target_proj) {
  const std::size_t k = t.value(online_pred).rows();
  if (k == 0 || t.value(target_proj).rows() != k)
    throw ShapeMismatch("byol_loss: branch row counts differ or are zero");
  auto q = t.normalize_rows(online_pred);
  auto z = t.normalize_rows(target_proj);
  auto diff = t.sub(q, z);
  return t.scale(t.sum_all(t.mul(diff, diff)), 1.0 / static_cast<double>(k));
}

// Online network: encoder + projector + predictor. Target network: the
// same encoder + projector names, EMA-tracked, never receiving gradients.
template <typename T>
struct ByolState {
  ParameterStore<T> online;
  ParameterStore<T> target;
  double tau = 0.996;
};

template <typename T>
void init_byol_state(ByolState<T>& state, const ModelConfig& cfg, Rng& rng) {
  init_encoder_params(state.online, cfg, ModelKind::Hierarchical, rng);
  Rng pr = rng.split("projector");
  init_mlp(state.online, "projector", cfg.hidden, 150, 150, pr);
  Rng qr = rng.split("predictor");
  init_mlp(state.online, "predictor", 150, 150, 150, qr);
  // Target = copy of the online encoder + projector (no predictor).
  for (const auto& [name, p] : state.online)
    if (name.rfind("predictor.", 0) != 0) state.target.add(name, p.value);
}

// zeta <- tau * zeta + (1 - tau) * theta for every target parameter.
template <typename T>
void ema_update(ParameterStore<T>& target, const ParameterStore<T>& online, double tau) {
  for (auto& [name, zp] : target) {
    const Parameter<T>& op = online.get(name);
    if (op.value.shape != zp.value.shape) throw ShapeMismatch("ema_update: shape mismatch for " + name);
    for (std::size_t k = 0; k < zp.value.size(); ++k)
      zp.value.data[k] = static_cast<T>(tau * zp.value.data[k] + (1.0 - tau) * op.value.data[k]);
  }
}

struct PretrainStepOutput {
  double loss = 0;                          // batch mean of per-sequence position sums
  int num_augmented_positions = 0;
  std::vector<double> per_position_losses;  // concatenated across the batch
};

// Aggregator pass that keeps every position: [CLS; segments] -> hidden
// rows. Row r+1 corresponds to segment r.
template <typename T>
typename Tape<T>::Ref aggregate_positions(ParamCtx<T>& ctx, const ModelConfig& cfg,
                                          typename Tape<T>::Ref valid_segments, bool train, Rng& rng) {
  auto& t = ctx.tape();
  const LayerConfig lc = cfg.layer();
  auto h = t.concat_rows({ctx("embed.cls"), valid_segments});
  std::vector<char> keymask(t.value(h).rows(), 1);
  Rng arng = rng.split("aggregator");
  for (int l = 0; l < cfg.aggregator_layers; ++l)
    h = transformer_encoder_layer(ctx, "aggregator.layer" + std::to_string(l), h, keymask, lc, train, arng);
  return h;
}

// One BYOL step over a batch: shared EHR augmentation feeds both branches;
// only the online branch gets segment augmentation; loss is the positional
// similarity at augmented segments (per-sequence sum, batch mean over
// sequences with >= 1 augmented position); gradients flow into the online
// network only; the target then takes one EMA step.
// Dropout stays off in both branches so that the two branches differ only
// by their weights and the segment augmentation.
template <typename T>
PretrainStepOutput pretrain_step(ByolState<T>& state, const std::vector<EncodedSequence>& batch,
                                 const ModelConfig& cfg, const AugmentationConfig& acfg,
                                 Optimizer<T>& opt, double lr, Rng& rng) {
  state.online.zero_grads();
  state.target.zero_grads();
  PretrainStepOutput out;

  std::vector<std::unique_ptr<ParamCtx<T>>> ctxs;
  std::vector<std::pair<Tape<T>*, typename Tape<T>::Ref>> losses;
  std::vector<std::unique_ptr<Tape<T>>> tapes;

  for (std::size_t bi = 0; bi < batch.size(); ++bi) {
    Rng srng = rng.split("seq" + std::to_string(bi));
    EncodedSequence aug = ehr_augment(batch[bi], acfg, srng);

    auto tape = std::make_unique<Tape<T>>();
    Tape<T>& t = *tape;
    auto on = std::make_unique<ParamCtx<T>>(t, state.online);
    ParamCtx<T> tg(t, state.target, /*frozen=*/true);
    Rng fwd_rng = srng.split("fwd");

    // Online branch.
    auto x_on = embed(*on, cfg, aug, aug.valid_len());
    Rng ext_rng = fwd_rng.split("extract");
    auto segs_on = extract_segments(*on, cfg, x_on, /*train=*/false, ext_rng);
    auto valid_on = t.slice_rows(segs_on.values, 0, segs_on.n_valid);
    std::vector<char> augmented;
    Rng seg_rng = srng.split("segaug");
    auto aug_on = segment_augment(t, valid_on, acfg, seg_rng, augmented);
    std::vector<std::int64_t> aug_rows;  // aggregator rows (CLS offset +1)
    for (std::size_t r = 0; r < augmented.size(); ++r)
      if (augmented[r]) aug_rows.push_back(static_cast<std::int64_t>(r) + 1);
    if (aug_rows.empty()) continue;  // contributes 0, excluded from the mean

    Rng agg_rng = fwd_rng.split("agg");
    auto h_on = aggregate_positions(*on, cfg, aug_on, /*train=*/false, agg_rng);
    auto q = mlp(*on, "predictor", mlp(*on, "projector", t.gather_rows(h_on, aug_rows)));

    // Target branch: same augmented sequence, no segment augmentation.
    auto x_tg = embed(tg, cfg, aug, aug.valid_len());
    Rng ext_rng2 = fwd_rng.split("extract");
    auto segs_tg = extract_segments(tg, cfg, x_tg, /*train=*/false, ext_rng2);
    auto valid_tg = t.slice_rows(segs_tg.values, 0, segs_tg.n_valid);
    Rng agg_rng2 = fwd_rng.split("agg");
    auto h_tg = aggregate_positions(tg, cfg, valid_tg, /*train=*/false, agg_rng2);
    auto z = mlp(tg, "projector", t.gather_rows(h_tg, aug_rows));

    const auto k = static_cast<double>(aug_rows.size());
    auto loss_sum = t.scale(byol_loss(t, q, z), k);

    // Per-position values for reporting.
    {
      auto qn = t.normalize_rows(q);
      auto zn = t.normalize_rows(z);
      const Tensor<T>& qv = t.value(qn);
      const Tensor<T>& zv = t.value(zn);
      for (std::size_t r = 0; r < aug_rows.size(); ++r) {
        double s = 0;
        for (std::size_t c = 0; c < qv.cols(); ++c) {
          const double d = static_cast<double>(qv.at(r, c)) - static_cast<double>(zv.at(r, c));
          s += d * d;
        }
        out.per_position_losses.push_back(s);
      }
    }
    out.num_augmented_positions += static_cast<int>(aug_rows.size());
    losses.emplace_back(&t, loss_sum);
    ctxs.push_back(std::move(on));
    tapes.push_back(std::move(tape));
  }

  if (!losses.empty()) {
    const double inv_n = 1.0 / static_cast<double>(losses.size());
    double total = 0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
      auto [t, loss] = losses[i];
      total += static_cast<double>(t->value(loss).data[0]);
      t->backward(loss);
      ctxs[i]->accumulate_grads(inv_n);
    }
    out.loss = total * inv_n;
    opt.apply(state.online, lr);
  }
  ema_update(state.target, state.online, state.tau);
  return out;
}

// Copy the pretrained online encoder (embeddings, extractor, aggregator)
// into a fresh supervised parameter store; the risk head keeps its fresh
// initialization and the projector/predictor are discarded.
template <typename T>
void transfer_weights(const ParameterStore<T>& online, ParameterStore<T>& supervised) {
  for (auto& [name, p] : supervised) {
    if (name.rfind("head.", 0) == 0) continue;
    if (!online.contains(name)) throw ConfigMismatch("transfer: pretrained model lacks " + name);
    const Parameter<T>& src = online.get(name);
    if (src.value.shape != p.value.shape)
      throw ConfigMismatch("transfer: shape mismatch for " + name);
    p.value.data = src.value.data;
  }
}

}  // namespace hibehrt
