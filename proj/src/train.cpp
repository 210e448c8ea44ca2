#include "hibehrt/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hibehrt {

std::vector<LabeledSequence> encode_all(const std::vector<PatientRecord>& records,
                                        const Vocabulary& vocab, std::size_t max_len) {
  std::vector<LabeledSequence> out;
  out.reserve(records.size());
  for (const PatientRecord& r : records) {
    LabeledSequence ls;
    ls.seq = encode_patient(r, vocab, max_len);
    ls.label = r.label ? *r.label : -1;
    ls.patient_id = r.patient_id;
    ls.event_count = total_event_count(r);
    ls.baseline_age = r.visits.empty() ? 0 : r.visits.back().age_years;
    out.push_back(std::move(ls));
  }
  return out;
}

namespace {

// Mean gradient of the batch BCE, accumulated into the store.
double batch_backward(ParameterStore<float>& params, const ModelConfig& mcfg, ModelKind kind,
                      const std::vector<const LabeledSequence*>& batch, bool train_dropout, Rng& rng) {
  params.zero_grads();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double total = 0;
  for (const LabeledSequence* ls : batch) {
    Tape<float> t;
    ParamCtx<float> ctx(t, params);
    Rng frng = rng.split(ls->patient_id);
    auto logit = model_forward(ctx, mcfg, kind, ls->seq, train_dropout, frng);
    auto loss = t.bce_with_logits(logit, static_cast<double>(ls->label));
    total += static_cast<double>(t.value(loss).data[0]);
    t.backward(loss);
    ctx.accumulate_grads(inv_n);
  }
  return total * inv_n;
}

std::vector<const LabeledSequence*> labeled_only(const std::vector<LabeledSequence>& data) {
  std::vector<const LabeledSequence*> out;
  for (const auto& ls : data)
    if (ls.label >= 0) out.push_back(&ls);
  return out;
}

}  // namespace

double mean_bce(ParameterStore<float>& params, const ModelConfig& mcfg, ModelKind kind,
                const std::vector<LabeledSequence>& data) {
  auto labeled = labeled_only(data);
  if (labeled.empty()) throw DataError("mean_bce: no labeled records");
  double total = 0;
  for (const LabeledSequence* ls : labeled) {
    const double p = predict_prob(params, mcfg, kind, ls->seq);
    const double y = ls->label;
    const double eps = 1e-12;
    total += -(y * std::log(std::max(p, eps)) + (1 - y) * std::log(std::max(1 - p, eps)));
  }
  return total / static_cast<double>(labeled.size());
}

TrainResult train_supervised(const std::vector<LabeledSequence>& train_set,
                             const std::vector<LabeledSequence>& tune_set, const ModelConfig& mcfg,
                             const TrainConfig& tcfg, const ParameterStore<float>* init) {
  auto train_ptrs = labeled_only(train_set);
  if (train_ptrs.empty()) throw DataError("train_supervised: no labeled training records");

  ParameterStore<float> params;
  Rng init_rng(tcfg.seed);
  init_model_params(params, mcfg, tcfg.kind, init_rng);
  if (init) {
    for (auto& [name, p] : params) {
      if (name.rfind("head.", 0) == 0) continue;  // head stays fresh
      if (!init->contains(name)) continue;
      const auto& src = init->get(name);
      if (src.value.shape != p.value.shape)
        throw ConfigMismatch("train: initialization shape mismatch for " + name);
      p.value.data = src.value.data;
    }
  }

  const auto n = static_cast<long long>(train_ptrs.size());
  const long long steps_per_epoch = (n + tcfg.batch_size - 1) / tcfg.batch_size;
  const ScheduleConfig sched{tcfg.peak_lr, std::max<long long>(1, tcfg.max_epochs * steps_per_epoch)};

  Optimizer<float> opt(tcfg.optimizer);
  EarlyStopping stopper(tcfg.patience);
  Rng epoch_rng = Rng(tcfg.seed).split("epochs");

  TrainResult res;
  res.params = params;

  std::vector<std::size_t> order(train_ptrs.size());
  std::iota(order.begin(), order.end(), 0);
  long long step = 0;
  for (int epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
    Rng erng = epoch_rng.split(static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), erng.engine());

    double epoch_loss = 0;
    long long batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += tcfg.batch_size) {
      std::vector<const LabeledSequence*> batch;
      for (std::size_t i = lo; i < std::min(order.size(), lo + tcfg.batch_size); ++i)
        batch.push_back(train_ptrs[order[i]]);
      const double lr = lr_at(std::min(step, sched.total_steps), sched);
      Rng brng = erng.split(static_cast<std::uint64_t>(lo));
      epoch_loss += batch_backward(params, mcfg, tcfg.kind, batch, tcfg.train_dropout, brng);
      opt.apply(params, lr);
      ++step;
      ++batches;
    }

    EpochRow row;
    row.epoch = epoch;
    row.lr = lr_at(std::min(step, sched.total_steps), sched);
    row.train_loss = epoch_loss / static_cast<double>(batches);
    row.tune_loss = mean_bce(params, mcfg, tcfg.kind, tune_set);
    row.improved = stopper.observe(row.tune_loss);
    if (row.improved) res.params = params;
    res.history.push_back(row);
    res.stopped_epoch = epoch;
    if (stopper.should_stop()) break;
  }
  res.best_tune_loss = stopper.best();
  return res;
}

std::vector<ScoredPatient> score_patients(ParameterStore<float>& params, const ModelConfig& mcfg,
                                          ModelKind kind, const std::vector<LabeledSequence>& data) {
  std::vector<ScoredPatient> out;
  for (const auto& ls : data) {
    if (ls.label < 0) continue;
    ScoredPatient sp;
    sp.patient_id = ls.patient_id;
    sp.score = predict_prob(params, mcfg, kind, ls.seq);
    sp.label = ls.label;
    sp.event_count = ls.event_count;
    sp.baseline_age = ls.baseline_age;
    out.push_back(std::move(sp));
  }
  // Deterministic reduction order regardless of caller ordering.
  std::sort(out.begin(), out.end(),
            [](const ScoredPatient& a, const ScoredPatient& b) { return a.patient_id < b.patient_id; });
  return out;
}

MetricsReport evaluate_scores(const std::string& stratum, const std::vector<ScoredPatient>& scored) {
  std::vector<double> s;
  std::vector<int> y;
  for (const auto& p : scored) {
    s.push_back(p.score);
    y.push_back(p.label);
  }
  return compute_report(stratum, s, y);
}

namespace {

MetricsReport downsampled_report(const std::string& stratum, const std::vector<ScoredPatient>& scored,
                                 double target_prevalence, int reps, Rng rng) {
  std::vector<const ScoredPatient*> pos, neg;
  for (const auto& p : scored) (p.label ? pos : neg).push_back(&p);
  MetricsReport base;
  base.stratum = stratum;
  base.n = scored.size();
  base.positives = pos.size();
  if (pos.empty() || neg.empty()) {
    base.defined = false;
    base.note = "single class";
    return base;
  }
  // Keep every negative; draw positives to hit the target prevalence.
  const auto want = static_cast<std::size_t>(
      std::round(target_prevalence * static_cast<double>(neg.size()) / (1.0 - target_prevalence)));
  const std::size_t k = std::max<std::size_t>(1, std::min(pos.size(), want));
  double sum_auroc = 0, sum_auprc = 0;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<const ScoredPatient*> chosen = pos;
    std::shuffle(chosen.begin(), chosen.end(), rng.engine());
    chosen.resize(k);
    std::vector<double> s;
    std::vector<int> y;
    for (const auto* p : chosen) {
      s.push_back(p->score);
      y.push_back(1);
    }
    for (const auto* p : neg) {
      s.push_back(p->score);
      y.push_back(0);
    }
    sum_auroc += auroc(s, y);
    sum_auprc += auprc(s, y);
  }
  base.defined = true;
  base.auroc = sum_auroc / reps;
  base.auprc = sum_auprc / reps;
  base.n = neg.size() + k;
  base.positives = k;
  return base;
}

}  // namespace

std::vector<MetricsReport> stratified_eval(const std::vector<ScoredPatient>& scored,
                                           const StrataOptions& opts) {
  std::vector<std::pair<std::string, std::vector<ScoredPatient>>> strata;
  strata.emplace_back("all", scored);
  if (opts.by_length) {
    std::vector<ScoredPatient> short_s, long_s;
    for (const auto& p : scored)
      (p.event_count <= opts.length_threshold ? short_s : long_s).push_back(p);
    strata.emplace_back("length:0-" + std::to_string(opts.length_threshold), std::move(short_s));
    strata.emplace_back("length:>" + std::to_string(opts.length_threshold), std::move(long_s));
  }
  for (const auto& [lo, hi] : opts.age_bands) {
    std::vector<ScoredPatient> band;
    for (const auto& p : scored)
      if (p.baseline_age >= lo && p.baseline_age < hi) band.push_back(p);
    strata.emplace_back("age:" + std::to_string(lo) + "-" + std::to_string(hi), std::move(band));
  }

  std::vector<MetricsReport> out;
  for (auto& [name, subset] : strata) {
    if (opts.match_prevalence >= 0)
      out.push_back(downsampled_report(name, subset, opts.match_prevalence, opts.downsample_reps,
                                       Rng(opts.seed).split(name)));
    else
      out.push_back(evaluate_scores(name, subset));
  }
  return out;
}

MetricsReport modality_subset_eval(ParameterStore<float>& params, const ModelConfig& mcfg,
                                   ModelKind kind, const std::vector<PatientRecord>& records,
                                   const Vocabulary& vocab, std::size_t max_len,
                                   const std::vector<Modality>& keep) {
  std::string name = "modality:";
  for (std::size_t i = 0; i < keep.size(); ++i) name += std::string(i ? "+" : "") + modality_name(keep[i]);

  std::vector<double> s;
  std::vector<int> y;
  for (const PatientRecord& r : records) {
    if (!r.label) continue;
    PatientRecord filtered = filter_modalities(r, keep);
    if (total_event_count(filtered) == 0) continue;  // nothing left to encode
    s.push_back(predict_prob(params, mcfg, kind, encode_patient(filtered, vocab, max_len)));
    y.push_back(*r.label);
  }
  return compute_report(name, s, y);
}

std::vector<SweepRow> training_fraction_sweep(const std::vector<LabeledSequence>& train_set,
                                              const std::vector<LabeledSequence>& tune_set,
                                              const std::vector<LabeledSequence>& validation_set,
                                              const ModelConfig& mcfg, const TrainConfig& tcfg,
                                              const std::vector<double>& fractions_percent,
                                              const std::vector<std::uint64_t>& seeds,
                                              const ParameterStore<float>* init) {
  std::vector<SweepRow> rows;
  for (double frac : fractions_percent) {
    if (frac <= 0 || frac > 100) throw ConfigMismatch("sweep: fraction must lie in (0, 100]");
    for (std::uint64_t seed : seeds) {
      // Deterministic subsample keyed by (fraction, seed).
      std::vector<std::size_t> order(train_set.size());
      std::iota(order.begin(), order.end(), 0);
      Rng srng = Rng(seed).split("fraction" + std::to_string(frac));
      std::shuffle(order.begin(), order.end(), srng.engine());
      const auto keep = std::max<std::size_t>(
          2, static_cast<std::size_t>(std::llround(train_set.size() * frac / 100.0)));
      std::vector<LabeledSequence> subset;
      for (std::size_t i = 0; i < std::min(keep, order.size()); ++i)
        subset.push_back(train_set[order[i]]);

      TrainConfig run = tcfg;
      run.seed = seed;
      TrainResult res = train_supervised(subset, tune_set, mcfg, run, init);
      auto scored = score_patients(res.params, mcfg, run.kind, validation_set);
      MetricsReport rep = evaluate_scores("all", scored);
      SweepRow row;
      row.fraction = frac;
      row.seed = seed;
      row.auroc = rep.defined ? rep.auroc : 0.5;
      row.auprc = rep.defined ? rep.auprc : 0.0;
      rows.push_back(row);
    }
  }
  return rows;
}

PretrainResult pretrain_byol(const std::vector<LabeledSequence>& corpus, const ModelConfig& mcfg,
                             const AugmentationConfig& acfg, const PretrainConfig& pcfg) {
  if (corpus.empty()) throw DataError("pretrain: empty corpus");
  PretrainResult res;
  res.state.tau = pcfg.tau;
  Rng init_rng(pcfg.seed);
  init_byol_state(res.state, mcfg, init_rng);

  const auto n = static_cast<long long>(corpus.size());
  const long long steps_per_epoch = (n + pcfg.batch_size - 1) / pcfg.batch_size;
  const PretrainScheduleConfig sched{pcfg.peak_lr, pcfg.warmup_epochs * steps_per_epoch,
                                     std::max<long long>(1, pcfg.epochs * steps_per_epoch)};
  Optimizer<float> opt(OptimizerKind::Adam);
  Rng epoch_rng = Rng(pcfg.seed).split("pretrain");

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  long long step = 0;
  for (int epoch = 0; epoch < pcfg.epochs; ++epoch) {
    Rng erng = epoch_rng.split(static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), erng.engine());
    double total = 0;
    long long batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += pcfg.batch_size) {
      std::vector<EncodedSequence> batch;
      for (std::size_t i = lo; i < std::min(order.size(), lo + pcfg.batch_size); ++i)
        batch.push_back(corpus[order[i]].seq);
      const double lr = pretrain_lr_at(std::min(step, sched.total_steps), sched);
      Rng brng = erng.split(static_cast<std::uint64_t>(lo));
      auto out = pretrain_step(res.state, batch, mcfg, acfg, opt, lr, brng);
      total += out.loss;
      ++step;
      ++batches;
    }
    res.epoch_losses.push_back(total / static_cast<double>(batches));
  }
  return res;
}

}  // namespace hibehrt
