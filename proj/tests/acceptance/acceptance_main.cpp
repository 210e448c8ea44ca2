// Acceptance suite: one check per criterion, each printing a single
// "PASS criterion N: ..." / "FAIL criterion N: ..." line. Exit code is the
// number of failed criteria. --fast skips the long training runs (1, 2, 12);
// --criterion N runs only criterion N.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "hibehrt.h"
#include "hibehrt/byol.hpp"
#include "hibehrt/checkpoint.hpp"
#include "hibehrt/metrics.hpp"
#include "hibehrt/model.hpp"
#include "hibehrt/optim.hpp"
#include "hibehrt/synth.hpp"
#include "hibehrt/train.hpp"

namespace fs = std::filesystem;
using namespace hibehrt;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

// Toy architecture used by the desk-scale training criteria: d=32, 4 heads,
// 2+2 layers, W=50/S=30, receptive field 1220 vs flat truncation at 256.
ModelConfig toy_benchmark_config(std::int64_t vocab_size) {
  ModelConfig cfg;
  cfg.hidden = 32;
  cfg.heads = 4;
  cfg.intermediate = 64;
  cfg.extractor_layers = 2;
  cfg.aggregator_layers = 2;
  cfg.flat_layers = 4;
  cfg.dropout = 0.0;
  cfg.attn_dropout = 0.0;
  cfg.max_len = 1220;
  cfg.flat_max_len = 256;
  cfg.window = 50;
  cfg.stride = 30;
  cfg.position_vocab = 1220;
  cfg.vocab_size = vocab_size;
  return cfg;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Spearman rank correlation (average ranks for ties).
double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(x), ry = ranks(y);
  const double mx = mean(rx), my = mean(ry);
  double num = 0, dx = 0, dy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  return num / std::sqrt(dx * dy);
}

fs::path scratch_dir(const std::string& leaf) {
  fs::path dir = fs::temp_directory_path() / ("hibehrt_acceptance_" + leaf);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

double validation_auroc(const TrainResult& res, const ModelConfig& mcfg, ModelKind kind,
                        const std::vector<LabeledSequence>& val_set) {
  ParameterStore<float> params = res.params;
  auto scored = score_patients(params, mcfg, kind, val_set);
  return evaluate_scores("all", scored).auroc;
}

// ---- criterion 1: long-range advantage --------------------------------

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  GeneratorConfig gcfg;  // default benchmark: 10^4 patients
  const OracleAuroc oracle = bayes_optimal_auroc(gcfg);

  std::vector<double> hi_aurocs, flat_aurocs;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    auto records = generate_cohort(gcfg, seed);
    const Vocabulary vocab = build_vocabulary(records);
    const ModelConfig mcfg = toy_benchmark_config(vocab.size());
    auto split = split_dataset(records, {0.6, 0.1, 0.3}, seed);

    TrainConfig tcfg;
    tcfg.max_epochs = 6;
    tcfg.batch_size = 64;
    tcfg.peak_lr = 1e-3;
    tcfg.patience = 6;
    tcfg.seed = seed;
    tcfg.train_dropout = false;

    for (ModelKind kind : {ModelKind::Hierarchical, ModelKind::Flat}) {
      const std::size_t L = kind == ModelKind::Hierarchical
                                ? static_cast<std::size_t>(mcfg.max_len)
                                : static_cast<std::size_t>(mcfg.flat_max_len);
      auto train_set = encode_all(split.train, vocab, L);
      auto tune_set = encode_all(split.tune, vocab, L);
      auto val_set = encode_all(split.validation, vocab, L);
      TrainConfig t = tcfg;
      t.kind = kind;
      TrainResult res = train_supervised(train_set, tune_set, mcfg, t);
      const double a = validation_auroc(res, mcfg, kind, val_set);
      (kind == ModelKind::Hierarchical ? hi_aurocs : flat_aurocs).push_back(a);
    }
  }
  const double hi = mean(hi_aurocs), flat = mean(flat_aurocs);
  const double minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;

  std::ostringstream msg;
  msg << "hierarchical AUROC " << hi << " vs flat " << flat << " (gap " << hi - flat
      << ", full oracle " << oracle.full << ", truncated oracle " << oracle.truncated << ", "
      << minutes << " min)";
  const bool ok = (hi - flat >= 0.05) && (hi >= oracle.full - 0.05) &&
                  (flat <= oracle.truncated + 0.03) && (minutes <= 60.0);
  report(1, ok, msg.str());
}

// ---- criterion 2: pretraining transfer --------------------------------

void criterion_2() {
  GeneratorConfig gcfg;
  gcfg.n_patients = 6000;  // desk-scale corpus; same planted rule
  auto records = generate_cohort(gcfg, 5);
  const Vocabulary vocab = build_vocabulary(records);
  const ModelConfig mcfg = toy_benchmark_config(vocab.size());
  auto split = split_dataset(records, {0.6, 0.1, 0.3}, 5);
  const auto L = static_cast<std::size_t>(mcfg.max_len);
  auto train_set = encode_all(split.train, vocab, L);
  auto tune_set = encode_all(split.tune, vocab, L);
  auto val_set = encode_all(split.validation, vocab, L);
  // Early stopping probes a fixed tune subset to keep per-epoch cost low.
  const std::vector<LabeledSequence> tune_small(tune_set.begin(),
                                                tune_set.begin() + std::min<std::size_t>(100, tune_set.size()));

  // BYOL pretraining on the full corpus, unlabeled.
  auto corpus = encode_all(records, vocab, L);
  AugmentationConfig acfg;
  PretrainConfig pcfg;
  pcfg.epochs = 10;
  pcfg.batch_size = 64;
  pcfg.peak_lr = 2e-4;
  pcfg.warmup_epochs = 1;
  pcfg.tau = 0.985;  // faster EMA suits the short desk-scale schedule
  pcfg.seed = 7;
  PretrainResult pre = pretrain_byol(corpus, mcfg, acfg, pcfg);
  ParameterStore<float> init;
  for (const auto& [name, p] : pre.state.online)
    if (name.rfind("projector.", 0) != 0 && name.rfind("predictor.", 0) != 0)
      init.add(name, p.value);

  TrainConfig tcfg;
  tcfg.max_epochs = 8;
  tcfg.batch_size = 16;
  tcfg.peak_lr = 1e-3;
  tcfg.patience = 6;
  tcfg.train_dropout = false;

  // 5% labeled subset (of the corpus, drawn from the training split),
  // 3 seeds, fine-tune vs from-scratch.
  std::vector<double> pre_auprc, scratch_auprc;
  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng srng = Rng(seed).split("subset5");
    std::shuffle(order.begin(), order.end(), srng.engine());
    const auto keep = std::max<std::size_t>(2, records.size() / 20);
    std::vector<LabeledSequence> subset;
    for (std::size_t i = 0; i < keep; ++i) subset.push_back(train_set[order[i]]);

    for (bool use_init : {true, false}) {
      TrainConfig t = tcfg;
      t.seed = seed;
      TrainResult res = train_supervised(subset, tune_small, mcfg, t, use_init ? &init : nullptr);
      ParameterStore<float> params = res.params;
      auto scored = score_patients(params, mcfg, t.kind, val_set);
      const double a = evaluate_scores("all", scored).auprc;
      (use_init ? pre_auprc : scratch_auprc).push_back(a);
    }
  }
  const bool transfer_ok = mean(pre_auprc) >= mean(scratch_auprc);

  // Fraction sweep {1,5,10,20,50,100}%, pretrained initialization. Larger
  // fractions supply many more optimizer steps, so fewer epochs suffice.
  TrainConfig scfg = tcfg;
  scfg.max_epochs = 4;
  scfg.batch_size = 32;
  scfg.peak_lr = 1e-3;
  const std::vector<double> fractions = {1, 5, 10, 20, 50, 100};
  auto rows = training_fraction_sweep(train_set, tune_small, val_set, mcfg, scfg, fractions,
                                      {21ull, 22ull}, &init);
  std::vector<double> frac_mean;
  for (double f : fractions) {
    double s = 0;
    int n = 0;
    for (const auto& r : rows)
      if (r.fraction == f) s += r.auroc, ++n;
    frac_mean.push_back(s / n);
  }
  const double rho = spearman(fractions, frac_mean);

  std::ostringstream msg;
  msg << "AUPRC with pretraining " << mean(pre_auprc) << " vs scratch " << mean(scratch_auprc)
      << "; fraction-sweep Spearman rho " << rho;
  report(2, transfer_ok && rho > 0, msg.str());
}

// ---- criterion 3: gradient correctness --------------------------------

ModelConfig gradcheck_config() {
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

EncodedSequence gradcheck_sequence(const ModelConfig& cfg, std::size_t valid, std::uint64_t seed) {
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

void criterion_3() {
  const ModelConfig cfg = gradcheck_config();
  double worst = 0;
  std::string worst_name;

  auto check_model = [&](ModelKind kind, std::size_t valid, std::uint64_t seed) {
    ParameterStore<double> store;
    Rng rng(seed);
    init_model_params(store, cfg, kind, rng);
    EncodedSequence seq = gradcheck_sequence(cfg, valid, seed + 1);
    auto build = [&](Tape<double>& t, ParamCtx<double>& ctx) {
      Rng frng(seed + 2);
      auto logit = model_forward(ctx, cfg, kind, seq, false, frng);
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
    Rng probe_rng(seed + 3);
    auto res = hibehrt::testing::finite_difference_check(store, fwd, bwd, probe_rng, 20);
    if (res.max_rel_err > worst) worst = res.max_rel_err, worst_name = res.worst;
  };

  check_model(ModelKind::Hierarchical, 9, 41);
  check_model(ModelKind::Flat, 5, 51);

  // Individual layers: encoder layer and MLP head on random input.
  {
    ParameterStore<double> store;
    Rng rng(61);
    const LayerConfig lc = cfg.layer();
    init_encoder_layer(store, "layer0", lc, rng);
    Tensor<double> x = truncated_normal<double>({6, 8}, 1.0, rng);
    std::vector<char> keymask = {1, 1, 1, 1, 1, 0};
    auto build = [&](Tape<double>& t, ParamCtx<double>& ctx) {
      Rng frng(62);
      auto h = transformer_encoder_layer(ctx, "layer0", t.constant(x), keymask, lc, false, frng);
      return t.mean_all(t.mul(h, h));
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
    Rng probe_rng(63);
    auto res = hibehrt::testing::finite_difference_check(store, fwd, bwd, probe_rng, 20);
    if (res.max_rel_err > worst) worst = res.max_rel_err, worst_name = res.worst;
  }

  std::ostringstream msg;
  msg << "max relative error " << worst << " (" << worst_name << ") at tol 1e-4, 20 probes/tensor";
  report(3, worst < 1e-4, msg.str());
}

// ---- criterion 4: EMA law ---------------------------------------------

void criterion_4() {
  const ModelConfig cfg = gradcheck_config();
  ByolState<float> state;
  Rng rng(71);
  init_byol_state(state, cfg, rng);
  state.tau = 0.996;

  auto dist = [&]() {
    double s = 0;
    for (const auto& [name, zp] : state.target) {
      const auto& op = state.online.get(name).value;
      for (std::size_t k = 0; k < zp.value.size(); ++k) {
        const double d = static_cast<double>(zp.value.data[k]) - static_cast<double>(op.data[k]);
        s += d * d;
      }
    }
    return std::sqrt(s);
  };

  // Perturb the target so the initial distance is nonzero, then hold the
  // online network fixed.
  Rng prng(72);
  for (auto& [name, zp] : state.target)
    for (float& v : zp.value.data) v += static_cast<float>(prng.normal(0, 0.05));

  const double d0 = dist();
  double max_err = 0;
  for (int k = 1; k <= 100; ++k) {
    ema_update(state.target, state.online, state.tau);
    const double expected = std::pow(state.tau, k);
    max_err = std::max(max_err, std::abs(dist() / d0 - expected));
  }
  std::ostringstream msg;
  msg << "max |ratio - tau^k| = " << max_err << " over k <= 100, tau 0.996";
  report(4, max_err <= 1e-6, msg.str());
}

// ---- criterion 5: stop-gradient ---------------------------------------

void criterion_5() {
  const ModelConfig cfg = gradcheck_config();
  ByolState<float> state;
  Rng rng(81);
  init_byol_state(state, cfg, rng);

  std::vector<EncodedSequence> batch;
  for (std::uint64_t s = 0; s < 6; ++s) batch.push_back(gradcheck_sequence(cfg, 8, 82 + s));
  AugmentationConfig acfg;
  Optimizer<float> opt(OptimizerKind::Adam);
  Rng step_rng(83);
  auto out = pretrain_step(state, batch, cfg, acfg, opt, 1e-3, step_rng);

  double l1 = 0;
  for (const auto& [name, p] : state.target)
    for (float g : p.grad.data) l1 += std::abs(static_cast<double>(g));
  std::ostringstream msg;
  msg << "target-network gradient L1 norm " << l1 << " after a pretrain step (loss " << out.loss
      << ", " << out.num_augmented_positions << " augmented positions)";
  report(5, l1 == 0.0, msg.str());
}

// ---- criterion 6: loss bounds -----------------------------------------

void criterion_6() {
  Rng rng(91);
  bool in_bounds = true;
  double lo = 4, hi = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 1000;  // 100 x 1000 = 10^5 random pairs
    Tensor<float> a = Tensor<float>::zeros({static_cast<std::size_t>(n), 8});
    Tensor<float> b = Tensor<float>::zeros({static_cast<std::size_t>(n), 8});
    for (float& v : a.data) v = static_cast<float>(rng.normal(0, 1));
    for (float& v : b.data) v = static_cast<float>(rng.normal(0, 1));
    for (int r = 0; r < n; ++r) {
      Tape<float> t;
      auto q = t.slice_rows(t.constant(a), r, r + 1);
      auto z = t.slice_rows(t.constant(b), r, r + 1);
      const double v = t.value(byol_loss(t, q, z)).data[0];
      in_bounds = in_bounds && v >= 0.0 && v <= 4.0;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }

  auto pair_loss = [](std::vector<float> u, std::vector<float> v) {
    Tensor<float> a = Tensor<float>::zeros({1, u.size()});
    Tensor<float> b = Tensor<float>::zeros({1, v.size()});
    a.data = u;
    b.data = v;
    Tape<float> t;
    return static_cast<double>(t.value(byol_loss(t, t.constant(a), t.constant(b))).data[0]);
  };
  const double parallel = pair_loss({1, 0}, {1, 0});
  const double orthogonal = pair_loss({1, 0}, {0, 1});
  const double antipodal = pair_loss({1, 0}, {-1, 0});

  std::ostringstream msg;
  msg << "10^5 random pairs in [" << lo << ", " << hi << "]; parallel/orthogonal/antipodal = "
      << parallel << "/" << orthogonal << "/" << antipodal;
  const bool ok = in_bounds && std::abs(parallel) < 1e-6 && std::abs(orthogonal - 2) < 1e-5 &&
                  std::abs(antipodal - 4) < 1e-5;
  report(6, ok, msg.str());
}

// ---- criterion 7: metric oracles --------------------------------------

double auroc_oracle(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!(y[i] == 1 && y[j] == 0)) continue;
      den += 1;
      if (s[i] > s[j])
        num += 1;
      else if (s[i] == s[j])
        num += 0.5;
    }
  return num / den;
}

double auprc_oracle(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  double sum = 0;
  int tp = 0, pos = 0;
  for (int v : y) pos += v;
  for (std::size_t r = 0; r < order.size(); ++r)
    if (y[order[r]] == 1) {
      ++tp;
      sum += static_cast<double>(tp) / static_cast<double>(r + 1);
    }
  return sum / pos;
}

void criterion_7() {
  Rng rng(101);
  int mismatches = 0;
  for (int rep = 0; rep < 10000; ++rep) {
    const int n = static_cast<int>(rng.uniform_int(2, 12));
    std::vector<double> s(n);
    std::vector<int> y(n);
    int pos = 0;
    for (int i = 0; i < n; ++i) {
      s[i] = rng.uniform_int(0, 4) / 4.0;  // coarse grid forces ties
      y[i] = rng.bernoulli(0.5) ? 1 : 0;
      pos += y[i];
    }
    if (pos == 0) y[0] = 1, pos = 1;
    if (pos == n) y[0] = 0;
    if (std::abs(auroc(s, y) - auroc_oracle(s, y)) > 1e-10) ++mismatches;
    if (std::abs(auprc(s, y) - auprc_oracle(s, y)) > 1e-10) ++mismatches;
  }
  const double a = auroc({0.9, 0.8, 0.3, 0.2}, {1, 0, 1, 0});
  const double p = auprc({0.9, 0.8, 0.3, 0.2}, {1, 0, 1, 0});
  std::ostringstream msg;
  msg << mismatches << " oracle mismatches over 10^4 instances; worked example AUROC " << a
      << ", AUPRC " << p;
  const bool ok =
      mismatches == 0 && std::abs(a - 0.75) < 1e-12 && std::abs(p - 5.0 / 6.0) < 1e-12;
  report(7, ok, msg.str());
}

// ---- criterion 8: schedule --------------------------------------------

void criterion_8() {
  const ScheduleConfig cfg{3e-4, 10000};
  const double eta = cfg.peak_lr;
  const auto T = cfg.total_steps;
  bool ok = std::abs(lr_at(T / 10, cfg) - eta) < 1e-12 &&
            std::abs(lr_at(3 * T / 4, cfg) - 0.5 * eta) < 1e-12 && lr_at(T, cfg) == 0.0;
  // Continuity: adjacent steps never jump by more than a few warmup slopes.
  double max_jump = 0;
  for (std::int64_t s = 1; s <= T; ++s)
    max_jump = std::max(max_jump, std::abs(lr_at(s, cfg) - lr_at(s - 1, cfg)));
  const double warmup_slope = eta / (0.1 * static_cast<double>(T));
  ok = ok && max_jump <= warmup_slope + 1e-15;
  std::ostringstream msg;
  msg << "lr(0.1T)=" << lr_at(T / 10, cfg) << ", lr(0.75T)=" << lr_at(3 * T / 4, cfg)
      << ", lr(T)=" << lr_at(T, cfg) << ", max step-to-step jump " << max_jump;
  report(8, ok, msg.str());
}

// ---- criterion 9: complexity table ------------------------------------

void criterion_9() {
  const AttnCost flat = attention_cost(1220, 150);
  const HierCost hier = hierarchical_cost(1220, 50, 30, 150);
  bool ok = flat.space == 1671400 && hier.space == 407831;
  bool hier_smaller = true;
  for (int L = 256; L <= 4096; L += 64)
    if (hierarchical_cost(L, 50, 30, 150).space >= attention_cost(L, 150).space)
      hier_smaller = false;
  std::ostringstream msg;
  msg << "flat space " << flat.space << ", hierarchical space " << hier.space
      << "; hierarchical < flat for all L in [256, 4096]: " << (hier_smaller ? "yes" : "no");
  report(9, ok && hier_smaller, msg.str());
}

// ---- criterion 10: binning counts -------------------------------------

void criterion_10() {
  const int sbp = default_binning(Modality::SBP).bin_count();
  const int dbp = default_binning(Modality::DBP).bin_count();
  const int bmi = default_binning(Modality::BMI).bin_count();
  std::ostringstream msg;
  msg << "SBP " << sbp << ", BMI " << bmi << ", DBP " << dbp
      << " (DBP derives to 18 from the 50-140/5 range; documented against the reported 17)";
  report(10, sbp == 24 && bmi == 34 && dbp == 18, msg.str());
}

// ---- criterion 11: persistence ----------------------------------------

void criterion_11() {
  const ModelConfig cfg = gradcheck_config();
  ParameterStore<float> store;
  Rng rng(111);
  init_model_params(store, cfg, ModelKind::Hierarchical, rng);
  EncodedSequence seq = gradcheck_sequence(cfg, 9, 112);
  const double before = predict_prob(store, cfg, ModelKind::Hierarchical, seq);

  const fs::path dir = scratch_dir("persist");
  const fs::path path = dir / "model.ckpt";
  Checkpoint ckpt;
  ckpt.config["train.model"] = "hierarchical";
  ckpt.params = store;
  save_checkpoint(ckpt, path.string());

  Checkpoint loaded = load_checkpoint(path.string());
  ParameterStore<float> fresh;
  Rng rng2(999);  // different seed: values must come from the file alone
  init_model_params(fresh, cfg, ModelKind::Hierarchical, rng2);
  load_params_into(loaded, fresh);
  const double after = predict_prob(fresh, cfg, ModelKind::Hierarchical, seq);
  bool tensors_identical = true;
  for (const auto& [name, p] : store)
    if (std::memcmp(p.value.data.data(), fresh.get(name).value.data.data(),
                    p.value.size() * sizeof(float)) != 0)
      tensors_identical = false;
  const bool bit_identical =
      tensors_identical && std::memcmp(&before, &after, sizeof(double)) == 0;

  // Corruptions must raise the documented errors.
  int caught = 0;
  {
    std::ofstream(dir / "magic.ckpt", std::ios::binary) << "XXXXXXXX";
    try {
      load_checkpoint((dir / "magic.ckpt").string());
    } catch (const BadMagic&) {
      ++caught;
    }
  }
  {
    std::ifstream in(path, std::ios::binary);
    std::stringstream full;
    full << in.rdbuf();
    const std::string bytes = full.str();
    std::ofstream(dir / "trunc.ckpt", std::ios::binary)
        << bytes.substr(0, bytes.size() / 2);
    try {
      load_checkpoint((dir / "trunc.ckpt").string());
    } catch (const TruncatedFile&) {
      ++caught;
    }
    std::ofstream(dir / "trail.ckpt", std::ios::binary) << bytes << "extra";
    try {
      load_checkpoint((dir / "trail.ckpt").string());
    } catch (const TruncatedFile&) {
      ++caught;
    }
  }
  std::ostringstream msg;
  msg << "forward bit-identical after save/load: " << (bit_identical ? "yes" : "no") << "; "
      << caught << "/3 corruption cases raised the documented errors";
  report(11, bit_identical && caught == 3, msg.str());
}

// ---- criterion 12: window/stride grid ---------------------------------

void criterion_12() {
  const fs::path dir = scratch_dir("grid");
  hib_config* cfg = hib_config_create();
  // Desk-scale model + cohort so five full runs stay tractable; the grid
  // itself is exercised verbatim.
  const char* kv[][2] = {
      {"model.hidden", "16"},       {"model.heads", "2"},
      {"model.intermediate", "24"}, {"model.extractor_layers", "1"},
      {"model.aggregator_layers", "1"}, {"model.dropout", "0"},
      {"model.attn_dropout", "0"},  {"train.dropout_enabled", "0"},
      {"train.max_epochs", "1"},    {"train.batch_size", "64"},
      {"gen.n_patients", "600"},
  };
  bool ok = true;
  for (const auto& p : kv) ok = ok && hib_config_set(cfg, p[0], p[1]) == 0;

  std::string detail;
  if (ok && hib_cmd_gen_data(cfg, 3, dir.string().c_str()) == 0 &&
      hib_cmd_build_vocab(cfg, (dir / "dataset.jsonl").string().c_str(),
                          (dir / "vocab.txt").string().c_str()) == 0) {
    const int rc = hib_cmd_sweep(cfg, (dir / "dataset.jsonl").string().c_str(),
                                 (dir / "vocab.txt").string().c_str(), "1",
                                 "50:30,50:50,100:50,100:100,150:150",
                                 (dir / "grid.csv").string().c_str());
    if (rc != 0) {
      ok = false;
      detail = std::string("sweep failed: ") + hib_last_error();
    } else {
      std::ifstream in(dir / "grid.csv");
      std::string line;
      int rows = 0;
      bool finite = true;
      std::getline(in, line);  // header
      while (std::getline(in, line)) {
        ++rows;
        finite = finite && line.find("nan") == std::string::npos;
      }
      ok = rows == 5 && finite;
      detail = "grid produced " + std::to_string(rows) + " rows, all metrics finite: " +
               (finite ? "yes" : "no");
    }
  } else if (ok) {
    ok = false;
    detail = std::string("setup failed: ") + hib_last_error();
  }
  hib_config_destroy(cfg);
  report(12, ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
  bool fast = false;
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--fast") == 0) fast = true;
    else if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
  }

  const std::function<void()> criteria[] = {criterion_1, criterion_2,  criterion_3,  criterion_4,
                                            criterion_5, criterion_6,  criterion_7,  criterion_8,
                                            criterion_9, criterion_10, criterion_11, criterion_12};
  for (int n = 1; n <= 12; ++n) {
    if (only != 0 && n != only) continue;
    if (only == 0 && fast && (n == 1 || n == 2 || n == 12)) {
      std::printf("SKIP criterion %d: long training run (use --criterion %d)\n", n, n);
      continue;
    }
    criteria[n - 1]();
  }
  return g_failures;
}
