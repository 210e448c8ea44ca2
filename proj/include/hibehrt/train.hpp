#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hibehrt/byol.hpp"
#include "hibehrt/metrics.hpp"
#include "hibehrt/model.hpp"
#include "hibehrt/optim.hpp"

namespace hibehrt {

struct TrainConfig {
  ModelKind kind = ModelKind::Hierarchical;
  int max_epochs = 30;
  int batch_size = 128;
  double peak_lr = 1e-4;
  OptimizerKind optimizer = OptimizerKind::Adam;
  int patience = 6;
  std::uint64_t seed = 0;
  bool train_dropout = true;  // off for the deterministic desk-scale runs
};

struct EpochRow {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double tune_loss = 0;
  bool improved = false;
};

struct TrainResult {
  ParameterStore<float> params;  // best-tune-loss snapshot
  std::vector<EpochRow> history;
  double best_tune_loss = 0;
  int stopped_epoch = 0;
};

// Per-patient sequence with its supervised label; unlabeled records carry
// label -1 and are skipped by the supervised losses.
struct LabeledSequence {
  EncodedSequence seq;
  int label = -1;
  std::string patient_id;
  std::size_t event_count = 0;  // pre-truncation event total
  int baseline_age = 0;         // age at the latest visit
};

std::vector<LabeledSequence> encode_all(const std::vector<PatientRecord>& records,
                                        const Vocabulary& vocab, std::size_t max_len);

// Supervised training with the three-phase schedule and early stopping.
// When `init` is non-null its tensors seed the model (transfer learning /
// fine-tuning); otherwise weights are freshly initialized from the seed.
TrainResult train_supervised(const std::vector<LabeledSequence>& train_set,
                             const std::vector<LabeledSequence>& tune_set, const ModelConfig& mcfg,
                             const TrainConfig& tcfg, const ParameterStore<float>* init = nullptr);

double mean_bce(ParameterStore<float>& params, const ModelConfig& mcfg, ModelKind kind,
                const std::vector<LabeledSequence>& data);

struct ScoredPatient {
  std::string patient_id;
  double score = 0;
  int label = 0;
  std::size_t event_count = 0;
  int baseline_age = 0;
};

std::vector<ScoredPatient> score_patients(ParameterStore<float>& params, const ModelConfig& mcfg,
                                          ModelKind kind, const std::vector<LabeledSequence>& data);

MetricsReport evaluate_scores(const std::string& stratum, const std::vector<ScoredPatient>& scored);

struct StrataOptions {
  bool by_length = false;
  std::size_t length_threshold = 256;
  std::vector<std::pair<int, int>> age_bands;  // half-open [lo, hi)
  double match_prevalence = -1;                // <0 disables downsampling
  int downsample_reps = 10;
  std::uint64_t seed = 0;
};

// Length / age strata over precomputed scores, with optional positive-case
// downsampling to a target prevalence (all negatives kept, positives
// resampled `downsample_reps` times, mean metrics reported). Strata where
// a class is absent come back with defined=false rather than throwing.
std::vector<MetricsReport> stratified_eval(const std::vector<ScoredPatient>& scored,
                                           const StrataOptions& opts);

// Modality-subset ablation: drop excluded modalities before encoding,
// rescore, and report one row per subset.
MetricsReport modality_subset_eval(ParameterStore<float>& params, const ModelConfig& mcfg,
                                   ModelKind kind, const std::vector<PatientRecord>& records,
                                   const Vocabulary& vocab, std::size_t max_len,
                                   const std::vector<Modality>& keep);

struct SweepRow {
  double fraction = 0;  // percent of the training set
  std::uint64_t seed = 0;
  double auroc = 0;
  double auprc = 0;
};

// Training-fraction learning curve: each fraction subsamples the training
// set per seed, trains from scratch (or from `init`), and reports
// validation metrics; the CLI averages rows per fraction.
std::vector<SweepRow> training_fraction_sweep(const std::vector<LabeledSequence>& train_set,
                                              const std::vector<LabeledSequence>& tune_set,
                                              const std::vector<LabeledSequence>& validation_set,
                                              const ModelConfig& mcfg, const TrainConfig& tcfg,
                                              const std::vector<double>& fractions_percent,
                                              const std::vector<std::uint64_t>& seeds,
                                              const ParameterStore<float>* init = nullptr);

struct PretrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double peak_lr = 1e-4;
  int warmup_epochs = 10;
  double tau = 0.996;
  std::uint64_t seed = 0;
};

struct PretrainResult {
  ByolState<float> state;
  std::vector<double> epoch_losses;
};

PretrainResult pretrain_byol(const std::vector<LabeledSequence>& corpus, const ModelConfig& mcfg,
                             const AugmentationConfig& acfg, const PretrainConfig& pcfg);

}  // namespace hibehrt
