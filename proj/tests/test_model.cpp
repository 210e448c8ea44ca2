#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>

#include "doctest.h"
#include "gradcheck.hpp"
#include "hibehrt/model.hpp"

using namespace hibehrt;

namespace {

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.intermediate = 12;
  cfg.extractor_layers = 1;
  cfg.aggregator_layers = 1;
  cfg.flat_layers = 1;
  cfg.dropout = 0.0;
  cfg.attn_dropout = 0.0;
  cfg.max_len = 12;
  cfg.flat_max_len = 6;
  cfg.window = 4;
  cfg.stride = 2;
  cfg.position_vocab = 12;
  cfg.vocab_size = 16;
  return cfg;
}

EncodedSequence toy_sequence(const ModelConfig& cfg, std::size_t valid, std::uint64_t seed) {
  Rng rng(seed);
  EncodedSequence seq;
  std::int64_t pos = 0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.max_len); ++i) {
    const bool real = i < valid;
    if (real && i > 0 && rng.bernoulli(0.4)) ++pos;
    seq.token_ids.push_back(real ? rng.uniform_int(4, cfg.vocab_size - 1) : Vocabulary::PAD);
    seq.age_ids.push_back(50 + pos);
    seq.segment_ids.push_back(pos % 2);
    seq.position_ids.push_back(pos);
    seq.mask.push_back(real ? 1 : 0);
  }
  return seq;
}

}  // namespace

TEST_CASE("segment_count: enumeration rule") {
  CHECK(segment_count(1220, 50, 30) == 40);
  CHECK(segment_count(256, 50, 30) == 7);
  CHECK(segment_count(50, 50, 30) == 1);
  CHECK(segment_count(10, 50, 30) == 1);  // shorter than one window
  CHECK(segment_count(100, 50, 50) == 2);
  CHECK_THROWS_AS(segment_count(100, 0, 10), ConfigMismatch);
}

TEST_CASE("cost model: paper operating point") {
  CHECK(attention_cost(1220, 150).space == 1671400);
  const HierCost h = hierarchical_cost(1220, 50, 30, 150);
  CHECK(h.n_seg == 40);
  CHECK(h.space == 407831);
  // Hierarchical memory wins for every L >= 256 at the default geometry.
  for (int L = 256; L <= 4096; L += 64)
    CHECK(hierarchical_cost(L, 50, 30, 150).space < attention_cost(L, 150).space);
}

TEST_CASE("embed: identical id tuples give identical rows") {
  ModelConfig cfg = toy_config();
  ParameterStore<double> store;
  Rng rng(1);
  init_model_params(store, cfg, ModelKind::Hierarchical, rng);
  EncodedSequence seq = toy_sequence(cfg, 6, 2);
  seq.token_ids[1] = seq.token_ids[4];
  seq.age_ids[1] = seq.age_ids[4];
  seq.segment_ids[1] = seq.segment_ids[4];
  seq.position_ids[1] = seq.position_ids[4];
  Tape<double> t;
  ParamCtx<double> ctx(t, store);
  auto x = t.value(embed(ctx, cfg, seq, 6));
  for (std::size_t c = 0; c < x.cols(); ++c) CHECK(x.at(1, c) == x.at(4, c));
}

TEST_CASE("extract_segments: identical windows give identical segment vectors") {
  ModelConfig cfg = toy_config();
  cfg.window = 4;
  cfg.stride = 4;  // non-overlapping
  ParameterStore<double> store;
  Rng rng(3);
  init_model_params(store, cfg, ModelKind::Hierarchical, rng);

  Tensor<double> x = Tensor<double>::zeros({8, 8});
  Rng drng(4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 8; ++c) {
      x.at(i, c) = drng.normal(0, 1);
      x.at(i + 4, c) = x.at(i, c);  // window 1 repeats window 0
    }
  Tape<double> t;
  ParamCtx<double> ctx(t, store);
  Rng frng(5);
  auto segs = extract_segments(ctx, cfg, t.constant(x), false, frng);
  CHECK(segs.n_valid == 2);
  const auto& v = t.value(segs.values);
  for (std::size_t c = 0; c < 8; ++c) CHECK(v.at(0, c) == v.at(1, c));
  // Fully padded trailing windows are zero with mask false.
  for (std::size_t r = 2; r < v.rows(); ++r) {
    CHECK(!segs.segment_mask[r]);
    for (std::size_t c = 0; c < 8; ++c) CHECK(v.at(r, c) == 0.0);
  }
}

TEST_CASE("extract_segments: permuting one window leaves the others bit-identical") {
  ModelConfig cfg = toy_config();
  cfg.window = 4;
  cfg.stride = 4;
  ParameterStore<double> store;
  Rng rng(7);
  init_model_params(store, cfg, ModelKind::Hierarchical, rng);

  Tensor<double> x = Tensor<double>::zeros({8, 8});
  Rng drng(8);
  for (double& v : x.data) v = drng.normal(0, 1);
  Tensor<double> xp = x;
  for (std::size_t c = 0; c < 8; ++c) {  // swap rows 4 and 6 (inside window 1)
    std::swap(xp.at(4, c), xp.at(6, c));
  }
  Tape<double> t;
  ParamCtx<double> ctx(t, store);
  Rng f1(9), f2(9);
  auto a = extract_segments(ctx, cfg, t.constant(x), false, f1);
  auto b = extract_segments(ctx, cfg, t.constant(xp), false, f2);
  for (std::size_t c = 0; c < 8; ++c) CHECK(t.value(a.values).at(0, c) == t.value(b.values).at(0, c));
}

TEST_CASE("aggregate_and_predict: invalid-segment content cannot reach the logit") {
  ModelConfig cfg = toy_config();
  ParameterStore<double> store;
  Rng rng(11);
  init_model_params(store, cfg, ModelKind::Hierarchical, rng);
  Tape<double> t;
  ParamCtx<double> ctx(t, store);

  Tensor<double> vals = Tensor<double>::zeros({5, 8});
  Rng drng(12);
  for (std::size_t c = 0; c < 8; ++c) {
    vals.at(0, c) = drng.normal(0, 1);
    vals.at(1, c) = drng.normal(0, 1);
  }
  Tensor<double> vals2 = vals;
  for (std::size_t r = 2; r < 5; ++r)
    for (std::size_t c = 0; c < 8; ++c) vals2.at(r, c) = 99.0;  // invalid segments

  SegmentsOut<double> sa{t.constant(vals), {1, 1, 0, 0, 0}, 2};
  SegmentsOut<double> sb{t.constant(vals2), {1, 1, 0, 0, 0}, 2};
  Rng r1(13), r2(13);
  auto la = aggregate_and_predict(ctx, cfg, sa, false, r1);
  auto lb = aggregate_and_predict(ctx, cfg, sb, false, r2);
  CHECK(t.value(la).data[0] == t.value(lb).data[0]);

  SegmentsOut<double> none{t.constant(vals), {0, 0, 0, 0, 0}, 0};
  Rng r3(13);
  CHECK_THROWS_AS(aggregate_and_predict(ctx, cfg, none, false, r3), NoValidSegments);
}

TEST_CASE("forward passes: determinism, probability range, padded-tail independence") {
  ModelConfig cfg = toy_config();
  ParameterStore<double> store;
  Rng rng(15);
  init_model_params(store, cfg, ModelKind::Hierarchical, rng);
  EncodedSequence seq = toy_sequence(cfg, 7, 16);

  const double p1 = predict_prob(store, cfg, ModelKind::Hierarchical, seq);
  const double p2 = predict_prob(store, cfg, ModelKind::Hierarchical, seq);
  CHECK(p1 == p2);
  CHECK(p1 > 0.0);
  CHECK(p1 < 1.0);

  // Padded-tail token ids are dead weight: change them, nothing moves.
  EncodedSequence seq2 = seq;
  for (std::size_t i = seq.valid_len(); i < seq.length(); ++i) seq2.token_ids[i] = 5;
  CHECK(predict_prob(store, cfg, ModelKind::Hierarchical, seq2) == p1);

  ParameterStore<double> flat;
  Rng rng2(17);
  init_model_params(flat, cfg, ModelKind::Flat, rng2);
  const double q = predict_prob(flat, cfg, ModelKind::Flat, seq);
  CHECK(q > 0.0);
  CHECK(q < 1.0);
  CHECK(predict_prob(flat, cfg, ModelKind::Flat, seq2) == q);
}

TEST_CASE("truncation equivalence: short patient encodes to the same valid content") {
  std::vector<PatientRecord> corpus(1);
  PatientRecord& r = corpus[0];
  r.patient_id = "p";
  for (int v = 0; v < 20; ++v) {
    Visit visit{40 + v / 4, v * 30, {}};
    for (int e = 0; e < 3; ++e)
      visit.events.push_back({Modality::DIAG, "C" + std::to_string(v * 3 + e), std::nullopt});
    r.visits.push_back(visit);
  }
  auto vocab = build_vocabulary(corpus);
  auto flat = encode_patient(r, vocab, 256);
  auto hier = encode_patient(r, vocab, 1220);
  const std::size_t L = flat.valid_len();
  REQUIRE(L == hier.valid_len());
  for (std::size_t i = 0; i < L; ++i) {
    CHECK(flat.token_ids[i] == hier.token_ids[i]);
    CHECK(flat.age_ids[i] == hier.age_ids[i]);
    CHECK(flat.segment_ids[i] == hier.segment_ids[i]);
    CHECK(flat.position_ids[i] == hier.position_ids[i]);
  }
}

TEST_CASE("full hierarchical model: backward matches finite differences") {
  ModelConfig cfg = toy_config();
  ParameterStore<double> store;
  Rng rng(21);
  init_model_params(store, cfg, ModelKind::Hierarchical, rng);
  EncodedSequence seq = toy_sequence(cfg, 9, 22);

  auto build = [&](Tape<double>& t, ParamCtx<double>& ctx) {
    Rng frng(23);
    auto logit = hibehrt_forward(ctx, cfg, seq, false, frng);
    return t.bce_with_logits(logit, 1.0);
  };
  auto fwd = [&]() {
    Tape<double> t;
    ParamCtx<double> ctx(t, store);
    return t.value(build(t, ctx)).data[0];
  };
  auto bwd = [&]() {
    store.zero_grads();
    Tape<double> t;
    ParamCtx<double> ctx(t, store);
    auto loss = build(t, ctx);
    t.backward(loss);
    ctx.accumulate_grads();
  };
  Rng probe_rng(24);
  auto res = hibehrt::testing::finite_difference_check(store, fwd, bwd, probe_rng, 5);
  INFO(res.worst);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("flat baseline: backward matches finite differences") {
  ModelConfig cfg = toy_config();
  ParameterStore<double> store;
  Rng rng(31);
  init_model_params(store, cfg, ModelKind::Flat, rng);
  EncodedSequence seq = toy_sequence(cfg, 6, 32);

  auto build = [&](Tape<double>& t, ParamCtx<double>& ctx) {
    Rng frng(33);
    auto logit = behrt_forward(ctx, cfg, seq, false, frng);
    return t.bce_with_logits(logit, 0.0);
  };
  auto fwd = [&]() {
    Tape<double> t;
    ParamCtx<double> ctx(t, store);
    return t.value(build(t, ctx)).data[0];
  };
  auto bwd = [&]() {
    store.zero_grads();
    Tape<double> t;
    ParamCtx<double> ctx(t, store);
    auto loss = build(t, ctx);
    t.backward(loss);
    ctx.accumulate_grads();
  };
  Rng probe_rng(34);
  auto res = hibehrt::testing::finite_difference_check(store, fwd, bwd, probe_rng, 5);
  INFO(res.worst);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("config validation") {
  ModelConfig cfg = toy_config();
  cfg.heads = 3;  // 8 % 3 != 0
  CHECK_THROWS_AS(cfg.validate(), ConfigMismatch);
  cfg = toy_config();
  cfg.stride = cfg.window + 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigMismatch);
  cfg = toy_config();
  cfg.vocab_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigMismatch);
}
