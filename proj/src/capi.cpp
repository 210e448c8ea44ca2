#include "hibehrt.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hibehrt/checkpoint.hpp"
#include "hibehrt/runconfig.hpp"
#include "hibehrt/synth.hpp"
#include "hibehrt/train.hpp"

namespace {

thread_local std::string g_last_error;

int to_status(const std::exception& e) {
  g_last_error = e.what();
  if (const auto* err = dynamic_cast<const hibehrt::Error*>(&e))
    return static_cast<int>(err->kind());
  return 4;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return 0;
  } catch (const std::exception& e) {
    return to_status(e);
  }
}

void require_arg(const char* p, const char* what) {
  if (!p) throw hibehrt::ConfigMismatch(std::string("missing required argument: ") + what);
}

std::filesystem::path ensure_dir(const char* out_dir) {
  require_arg(out_dir, "out_dir");
  std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw hibehrt::DataError("cannot write " + p.string());
  return out;
}

}  // namespace

struct hib_config {
  hibehrt::RunConfig cfg;
  std::string text_buf;
};

extern "C" {

const char* hib_version(void) { return "1.0.0"; }

const char* hib_last_error(void) { return g_last_error.c_str(); }

hib_config* hib_config_create(void) { return new hib_config(); }

void hib_config_destroy(hib_config* cfg) { delete cfg; }

int hib_config_load_file(hib_config* cfg, const char* path) {
  return guarded([&] {
    require_arg(path, "path");
    cfg->cfg = hibehrt::RunConfig::from_file(path);
  });
}

int hib_config_set(hib_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require_arg(key, "key");
    require_arg(value, "value");
    cfg->cfg.set(key, value);
  });
}

int hib_config_get(const hib_config* cfg, const char* key, char* buf, size_t buflen) {
  return guarded([&] {
    require_arg(key, "key");
    require_arg(buf, "buf");
    const std::string& v = cfg->cfg.get(key);
    std::snprintf(buf, buflen, "%s", v.c_str());
  });
}

const char* hib_config_text(hib_config* cfg) {
  cfg->text_buf = cfg->cfg.canonical_text();
  return cfg->text_buf.c_str();
}

int hib_cmd_gen_data(hib_config* cfg, unsigned long long seed, const char* out_dir) {
  return guarded([&] {
    const auto dir = ensure_dir(out_dir);
    const hibehrt::GeneratorConfig gcfg = cfg->cfg.generator_config();
    auto records = hibehrt::generate_cohort(gcfg, seed);
    hibehrt::save_dataset(records, (dir / "dataset.jsonl").string());
    open_out(dir / "manifest.json") << hibehrt::cohort_manifest(gcfg, seed) << "\n";
  });
}

int hib_cmd_build_vocab(hib_config*, const char* dataset_path, const char* vocab_out) {
  return guarded([&] {
    require_arg(dataset_path, "dataset_path");
    require_arg(vocab_out, "vocab_out");
    auto records = hibehrt::load_dataset(dataset_path);
    hibehrt::build_vocabulary(records).save(vocab_out);
  });
}

namespace {

using namespace hibehrt;

struct LoadedData {
  std::vector<PatientRecord> records;
  Vocabulary vocab;
};

LoadedData load_data(const char* dataset_path, const char* vocab_path) {
  require_arg(dataset_path, "dataset_path");
  require_arg(vocab_path, "vocab_path");
  return {load_dataset(dataset_path), Vocabulary::load(vocab_path)};
}

std::size_t input_len(const ModelConfig& m, ModelKind kind) {
  return kind == ModelKind::Hierarchical ? static_cast<std::size_t>(m.max_len)
                                         : static_cast<std::size_t>(m.flat_max_len);
}

std::map<std::string, std::string> checkpoint_config(const RunConfig& rc, std::int64_t vocab_size,
                                                     unsigned long long seed) {
  std::map<std::string, std::string> c(rc.entries().begin(), rc.entries().end());
  c["vocab_size"] = std::to_string(vocab_size);
  c["rng_state"] = std::to_string(seed);
  return c;
}

// Reconstruct the run configuration stored inside a checkpoint.
RunConfig config_from_checkpoint(const Checkpoint& ckpt) {
  RunConfig rc;
  for (const auto& [k, v] : ckpt.config)
    if (k != "vocab_size" && k != "rng_state") rc.set(k, v);
  return rc;
}

// Turn a checkpoint into an initialization store: a pretraining checkpoint
// (online.* / target.*) contributes its online encoder; a supervised one
// contributes its tensors directly.
ParameterStore<float> init_store_from(const Checkpoint& ckpt) {
  bool has_online = false;
  for (const auto& [name, p] : ckpt.params)
    if (name.rfind("online.", 0) == 0) has_online = true;
  ParameterStore<float> out;
  for (const auto& [name, p] : ckpt.params) {
    if (has_online) {
      if (name.rfind("online.", 0) == 0) out.add(name.substr(7), p.value);
    } else {
      out.add(name, p.value);
    }
  }
  return out;
}

void write_reports_csv(std::ofstream& out, const std::string& task,
                       const std::vector<MetricsReport>& reports, unsigned long long seed) {
  out << "task,stratum,n,positives,auroc,auprc,seed\n";
  for (const auto& r : reports) {
    out << task << ',' << r.stratum << ',' << r.n << ',' << r.positives << ',';
    if (r.defined)
      out << r.auroc << ',' << r.auprc;
    else
      out << "nan,nan";
    out << ',' << seed << "\n";
  }
}

void run_training(hib_config* cfg, const char* dataset_path, const char* vocab_path,
                  unsigned long long seed, const char* init_checkpoint, double fraction,
                  const char* out_dir) {
  const auto dir = ensure_dir(out_dir);
  if (fraction <= 0 || fraction > 100)
    throw ConfigMismatch("train fraction must lie in (0, 100]");
  LoadedData data = load_data(dataset_path, vocab_path);
  RunConfig& rc = cfg->cfg;
  TrainConfig tcfg = rc.train_config();
  tcfg.seed = seed;
  const ModelConfig mcfg = rc.model_config(data.vocab.size());
  mcfg.validate();

  auto split = split_dataset(data.records, rc.split_ratios(), seed);
  const std::size_t L = input_len(mcfg, tcfg.kind);
  auto train_set = encode_all(split.train, data.vocab, L);
  auto tune_set = encode_all(split.tune, data.vocab, L);
  auto val_set = encode_all(split.validation, data.vocab, L);

  if (fraction < 100) {
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng srng = Rng(seed).split("fraction" + std::to_string(fraction));
    std::shuffle(order.begin(), order.end(), srng.engine());
    const auto keep = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::llround(train_set.size() * fraction / 100.0)));
    std::vector<LabeledSequence> subset;
    for (std::size_t i = 0; i < std::min(keep, order.size()); ++i)
      subset.push_back(std::move(train_set[order[i]]));
    train_set = std::move(subset);
  }

  ParameterStore<float> init;
  const ParameterStore<float>* init_ptr = nullptr;
  if (init_checkpoint) {
    init = init_store_from(load_checkpoint(init_checkpoint));
    init_ptr = &init;
  }

  // Peak learning rate: a literal value, or "auto" to pick the best of
  // train.lr_sweep by tune loss.
  std::vector<double> lr_candidates;
  if (rc.get("train.peak_lr") == "auto")
    lr_candidates = rc.lr_sweep();
  else
    lr_candidates = {rc.get_double("train.peak_lr")};

  TrainResult best;
  double best_loss = std::numeric_limits<double>::infinity();
  double best_lr = lr_candidates.front();
  for (double lr : lr_candidates) {
    TrainConfig t = tcfg;
    t.peak_lr = lr;
    TrainResult res = train_supervised(train_set, tune_set, mcfg, t, init_ptr);
    if (res.best_tune_loss < best_loss) {
      best_loss = res.best_tune_loss;
      best = std::move(res);
      best_lr = lr;
    }
  }

  {
    auto out = open_out(dir / "train_metrics.csv");
    out << "epoch,lr,train_loss,tune_loss,improved\n";
    for (const auto& row : best.history)
      out << row.epoch << ',' << row.lr << ',' << row.train_loss << ',' << row.tune_loss << ','
          << (row.improved ? 1 : 0) << "\n";
  }

  Checkpoint ckpt;
  ckpt.config = checkpoint_config(rc, data.vocab.size(), seed);
  ckpt.config["train.peak_lr"] = std::to_string(best_lr);
  ckpt.params = best.params;
  save_checkpoint(ckpt, (dir / "model.ckpt").string());

  auto scored = score_patients(best.params, mcfg, tcfg.kind, val_set);
  auto out = open_out(dir / "eval.csv");
  write_reports_csv(out, "validation", {evaluate_scores("all", scored)}, seed);
}

StrataOptions parse_strata(const std::string& spec, std::vector<std::vector<Modality>>& subsets) {
  StrataOptions opts;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ';')) {
    if (part.empty()) continue;
    const std::size_t colon = part.find(':');
    if (colon == std::string::npos) throw ConfigMismatch("bad stratum spec: " + part);
    const std::string kind = part.substr(0, colon);
    const std::string arg = part.substr(colon + 1);
    if (kind == "length") {
      opts.by_length = true;
      opts.length_threshold = static_cast<std::size_t>(std::stoull(arg));
    } else if (kind == "age") {
      std::stringstream bands(arg);
      std::string band;
      while (std::getline(bands, band, ',')) {
        const std::size_t dash = band.find('-');
        if (dash == std::string::npos) throw ConfigMismatch("bad age band: " + band);
        opts.age_bands.emplace_back(std::stoi(band.substr(0, dash)), std::stoi(band.substr(dash + 1)));
      }
    } else if (kind == "modality") {
      std::vector<Modality> keep;
      std::stringstream mods(arg);
      std::string m;
      while (std::getline(mods, m, '+')) keep.push_back(modality_from_name(m));
      subsets.push_back(std::move(keep));
    } else {
      throw ConfigMismatch("unknown stratum kind: " + kind);
    }
  }
  return opts;
}

const std::vector<PatientRecord>& pick_split(const std::string& which, const DatasetSplit& split,
                                             const std::vector<PatientRecord>& all) {
  if (which == "all") return all;
  if (which == "train") return split.train;
  if (which == "tune") return split.tune;
  if (which == "validation") return split.validation;
  throw ConfigMismatch("split must be all|train|tune|validation, got: " + which);
}

}  // namespace

int hib_cmd_train(hib_config* cfg, const char* dataset_path, const char* vocab_path,
                  unsigned long long seed, const char* init_checkpoint,
                  double train_fraction_percent, const char* out_dir) {
  return guarded([&] {
    run_training(cfg, dataset_path, vocab_path, seed, init_checkpoint, train_fraction_percent,
                 out_dir);
  });
}

int hib_cmd_finetune(hib_config* cfg, const char* dataset_path, const char* vocab_path,
                     unsigned long long seed, const char* init_checkpoint,
                     double train_fraction_percent, const char* out_dir) {
  return guarded([&] {
    require_arg(init_checkpoint, "init_checkpoint");
    run_training(cfg, dataset_path, vocab_path, seed, init_checkpoint, train_fraction_percent,
                 out_dir);
  });
}

int hib_cmd_pretrain(hib_config* cfg, const char* dataset_path, const char* vocab_path,
                     unsigned long long seed, const char* out_dir) {
  return guarded([&] {
    const auto dir = ensure_dir(out_dir);
    LoadedData data = load_data(dataset_path, vocab_path);
    RunConfig& rc = cfg->cfg;
    const ModelConfig mcfg = rc.model_config(data.vocab.size());
    mcfg.validate();
    PretrainConfig pcfg = rc.pretrain_config();
    pcfg.seed = seed;
    const AugmentationConfig acfg = rc.augmentation_config();

    auto corpus = encode_all(data.records, data.vocab, static_cast<std::size_t>(mcfg.max_len));
    PretrainResult res = pretrain_byol(corpus, mcfg, acfg, pcfg);

    {
      auto out = open_out(dir / "pretrain_loss.csv");
      out << "epoch,loss\n";
      for (std::size_t e = 0; e < res.epoch_losses.size(); ++e)
        out << e << ',' << res.epoch_losses[e] << "\n";
    }
    Checkpoint ckpt;
    ckpt.config = checkpoint_config(rc, data.vocab.size(), seed);
    for (const auto& [name, p] : res.state.online) ckpt.params.add("online." + name, p.value);
    for (const auto& [name, p] : res.state.target) ckpt.params.add("target." + name, p.value);
    save_checkpoint(ckpt, (dir / "pretrain.ckpt").string());
  });
}

int hib_cmd_evaluate(hib_config* cfg, const char* dataset_path, const char* vocab_path,
                     const char* checkpoint_path, const char* split, unsigned long long split_seed,
                     const char* strata, double match_prevalence, unsigned long long seed,
                     const char* out_csv) {
  return guarded([&] {
    require_arg(checkpoint_path, "checkpoint_path");
    require_arg(out_csv, "out_csv");
    LoadedData data = load_data(dataset_path, vocab_path);
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    RunConfig rc = config_from_checkpoint(ckpt);

    auto it = ckpt.config.find("vocab_size");
    if (it != ckpt.config.end() && std::stoll(it->second) != data.vocab.size())
      throw ConfigMismatch("checkpoint vocabulary size " + it->second + " != vocabulary file size " +
                           std::to_string(data.vocab.size()));
    const ModelConfig mcfg = rc.model_config(data.vocab.size());
    const ModelKind kind = rc.train_config().kind;

    ParameterStore<float> params;
    Rng rng(0);
    init_model_params(params, mcfg, kind, rng);
    load_params_into(ckpt, params);

    auto ds = split_dataset(data.records, cfg->cfg.split_ratios(), split_seed);
    const auto& records = pick_split(split ? split : "validation", ds, data.records);
    if (records.empty()) throw DataError("evaluate: selected split is empty");

    std::vector<std::vector<Modality>> subsets;
    StrataOptions opts = strata ? parse_strata(strata, subsets) : StrataOptions{};
    opts.match_prevalence = match_prevalence;
    opts.seed = seed;

    const std::size_t L = input_len(mcfg, kind);
    auto encoded = encode_all(records, data.vocab, L);
    auto scored = score_patients(params, mcfg, kind, encoded);
    auto reports = stratified_eval(scored, opts);
    for (const auto& keep : subsets)
      reports.push_back(modality_subset_eval(params, mcfg, kind, records, data.vocab, L, keep));

    auto out = open_out(out_csv);
    write_reports_csv(out, "evaluate", reports, seed);
  });
}

int hib_cmd_sweep(hib_config* cfg, const char* dataset_path, const char* vocab_path,
                  const char* seeds_csv, const char* window_stride, const char* out_csv) {
  return guarded([&] {
    require_arg(seeds_csv, "seeds_csv");
    require_arg(out_csv, "out_csv");
    LoadedData data = load_data(dataset_path, vocab_path);
    RunConfig& rc = cfg->cfg;
    const std::vector<std::uint64_t> seeds = parse_seed_list(seeds_csv);
    TrainConfig tcfg = rc.train_config();
    if (rc.get("train.peak_lr") != "auto") tcfg.peak_lr = rc.get_double("train.peak_lr");

    auto out = open_out(out_csv);
    if (!window_stride) {
      // Learning-curve sweep over training fractions.
      const ModelConfig mcfg = rc.model_config(data.vocab.size());
      mcfg.validate();
      auto ds = split_dataset(data.records, rc.split_ratios(), seeds.front());
      const std::size_t L = input_len(mcfg, tcfg.kind);
      auto train_set = encode_all(ds.train, data.vocab, L);
      auto tune_set = encode_all(ds.tune, data.vocab, L);
      auto val_set = encode_all(ds.validation, data.vocab, L);
      auto rows = training_fraction_sweep(train_set, tune_set, val_set, mcfg, tcfg,
                                          rc.fraction_list(), seeds);
      out << "task,fraction,seed,auroc,auprc\n";
      for (const auto& r : rows)
        out << "fraction_sweep," << r.fraction << ',' << r.seed << ',' << r.auroc << ',' << r.auprc
            << "\n";
      // Mean rows per fraction.
      for (double f : rc.fraction_list()) {
        double sa = 0, sp = 0;
        int n = 0;
        for (const auto& r : rows)
          if (r.fraction == f) {
            sa += r.auroc;
            sp += r.auprc;
            ++n;
          }
        out << "fraction_sweep_mean," << f << ",mean," << sa / n << ',' << sp / n << "\n";
      }
    } else {
      // Window/stride grid: one full run per W:S pair.
      out << "task,window,stride,segments,seed,auroc,auprc\n";
      std::stringstream ss(window_stride);
      std::string pair;
      while (std::getline(ss, pair, ',')) {
        if (pair.empty()) continue;
        const std::size_t colon = pair.find(':');
        if (colon == std::string::npos)
          throw ConfigMismatch("bad window:stride pair: " + pair);
        RunConfig grid = rc;
        grid.set("model.window", pair.substr(0, colon));
        grid.set("model.stride", pair.substr(colon + 1));
        const ModelConfig mcfg = grid.model_config(data.vocab.size());
        mcfg.validate();
        auto ds = split_dataset(data.records, grid.split_ratios(), seeds.front());
        const std::size_t L = input_len(mcfg, tcfg.kind);
        auto train_set = encode_all(ds.train, data.vocab, L);
        auto tune_set = encode_all(ds.tune, data.vocab, L);
        auto val_set = encode_all(ds.validation, data.vocab, L);
        TrainConfig t = tcfg;
        t.seed = seeds.front();
        TrainResult res = train_supervised(train_set, tune_set, mcfg, t);
        auto scored = score_patients(res.params, mcfg, t.kind, val_set);
        auto rep = evaluate_scores("all", scored);
        out << "window_stride," << mcfg.window << ',' << mcfg.stride << ','
            << segment_count(mcfg.max_len, mcfg.window, mcfg.stride) << ',' << seeds.front() << ',';
        if (rep.defined)
          out << rep.auroc << ',' << rep.auprc;
        else
          out << "nan,nan";
        out << "\n";
      }
    }
  });
}

int hib_cmd_complexity(hib_config* cfg, int l_min, int l_max, int l_step, const char* out_csv) {
  return guarded([&] {
    require_arg(out_csv, "out_csv");
    if (l_min < 1 || l_max < l_min || l_step < 1)
      throw ConfigMismatch("complexity: require 1 <= l_min <= l_max, l_step >= 1");
    RunConfig& rc = cfg->cfg;
    const int d = static_cast<int>(rc.get_int("model.hidden"));
    const int W = static_cast<int>(rc.get_int("model.window"));
    const int S = static_cast<int>(rc.get_int("model.stride"));
    auto out = open_out(out_csv);
    out << "L,d,window,stride,segments,flat_space,flat_time,hier_space,hier_time\n";
    for (int L = l_min; L <= l_max; L += l_step) {
      const AttnCost flat = attention_cost(L, d);
      const HierCost hier = hierarchical_cost(L, W, S, d);
      out << L << ',' << d << ',' << W << ',' << S << ',' << hier.n_seg << ',' << flat.space << ','
          << flat.time << ',' << hier.space << ',' << hier.time << "\n";
    }
  });
}

}  // extern "C"
