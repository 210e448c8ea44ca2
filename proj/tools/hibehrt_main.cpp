// hibehrt command-line interface. Thin shell over the C API: every
// subcommand builds a config handle from --config / --set and forwards to
// the matching hib_cmd_* entry point; the process exit code is the API
// status code (0 ok, 2 config, 3 data, 4 numeric).
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hibehrt.h"

namespace {

struct ConfigDeleter {
  void operator()(hib_config* c) const { hib_config_destroy(c); }
};
using ConfigHandle = std::unique_ptr<hib_config, ConfigDeleter>;

int fail(int status) {
  std::fprintf(stderr, "error status=%d message=%s\n", status, hib_last_error());
  return status;
}

// Apply --config then --set overrides (flags win over the file).
int build_config(const ConfigHandle& cfg, const std::string& config_file,
                 const std::vector<std::string>& sets) {
  if (!config_file.empty()) {
    if (int rc = hib_config_load_file(cfg.get(), config_file.c_str())) return rc;
  }
  for (const std::string& kv : sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      // Route through the API so the message/status stay uniform.
      return hib_config_set(cfg.get(), kv.c_str(), nullptr);
    }
    if (int rc = hib_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()))
      return rc;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hibehrt: hierarchical transformer toolkit for long coded-event sequences"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(hib_version()));

  std::string config_file;
  std::vector<std::string> sets;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "key=value config file");
    sub->add_option("--set", sets, "config override, key=value (repeatable; wins over --config)");
  };

  // gen-data
  std::string out_dir;
  unsigned long long seed = 0;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic cohort (dataset.jsonl + manifest.json)");
  add_common(gen);
  gen->add_option("--seed", seed, "generator seed")->capture_default_str();
  gen->add_option("--out", out_dir, "output directory")->required();

  // build-vocab
  std::string dataset, vocab_path;
  auto* bv = app.add_subcommand("build-vocab", "build a vocabulary file from a dataset");
  add_common(bv);
  bv->add_option("--dataset", dataset, "dataset .jsonl path")->required();
  bv->add_option("--out", vocab_path, "vocabulary output path")->required();

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "self-supervised pretraining (pretrain.ckpt + pretrain_loss.csv)");
  add_common(pre);
  pre->add_option("--dataset", dataset, "dataset .jsonl path")->required();
  pre->add_option("--vocab", vocab_path, "vocabulary path")->required();
  pre->add_option("--seed", seed, "training seed")->capture_default_str();
  pre->add_option("--out", out_dir, "output directory")->required();

  // train / finetune
  std::string init_ckpt;
  double fraction = 100.0;
  auto add_train_opts = [&](CLI::App* sub, bool init_required) {
    add_common(sub);
    sub->add_option("--dataset", dataset, "dataset .jsonl path")->required();
    sub->add_option("--vocab", vocab_path, "vocabulary path")->required();
    sub->add_option("--seed", seed, "training seed")->capture_default_str();
    auto* o = sub->add_option("--init", init_ckpt, "initial checkpoint (pretrained or supervised)");
    if (init_required) o->required();
    sub->add_option("--fraction", fraction, "percent of the training split to use, (0,100]")
        ->capture_default_str();
    sub->add_option("--out", out_dir, "output directory")->required();
  };
  auto* tr = app.add_subcommand("train", "supervised training (model.ckpt + train_metrics.csv + eval.csv)");
  add_train_opts(tr, false);
  auto* ft = app.add_subcommand("finetune", "supervised training from an initial checkpoint");
  add_train_opts(ft, true);

  // evaluate
  std::string checkpoint, split = "validation", strata, out_csv;
  unsigned long long split_seed = 0;
  double match_prev = -1;
  auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint; writes a CSV metrics table");
  add_common(ev);
  ev->add_option("--dataset", dataset, "dataset .jsonl path")->required();
  ev->add_option("--vocab", vocab_path, "vocabulary path")->required();
  ev->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  ev->add_option("--split", split, "all|train|tune|validation")->capture_default_str();
  ev->add_option("--split-seed", split_seed, "seed used for the train/tune/validation split")
      ->capture_default_str();
  ev->add_option("--strata", strata,
                 "';'-separated strata: length:<T>; age:<lo>-<hi>,...; modality:<M>+<M>");
  ev->add_option("--match-prevalence", match_prev,
                 "downsample positives to this prevalence (<0 disables)")
      ->capture_default_str();
  ev->add_option("--seed", seed, "downsampling seed")->capture_default_str();
  ev->add_option("--out", out_csv, "output CSV path")->required();

  // sweep
  std::string seeds_csv = "0", window_stride;
  auto* sw = app.add_subcommand("sweep",
                                "training-fraction learning curve, or --window-stride grid sweep");
  add_common(sw);
  sw->add_option("--dataset", dataset, "dataset .jsonl path")->required();
  sw->add_option("--vocab", vocab_path, "vocabulary path")->required();
  sw->add_option("--seeds", seeds_csv, "comma-separated seeds")->capture_default_str();
  sw->add_option("--window-stride", window_stride,
                 "comma-separated W:S pairs, e.g. 50:30,50:50,100:50,100:100,150:150");
  sw->add_option("--out", out_csv, "output CSV path")->required();

  // complexity
  int l_min = 50, l_max = 1220, l_step = 50;
  auto* cx = app.add_subcommand("complexity", "flat vs hierarchical attention cost table");
  add_common(cx);
  cx->add_option("--l-min", l_min, "smallest sequence length")->capture_default_str();
  cx->add_option("--l-max", l_max, "largest sequence length")->capture_default_str();
  cx->add_option("--l-step", l_step, "length increment")->capture_default_str();
  cx->add_option("--out", out_csv, "output CSV path")->required();

  // config-keys
  auto* ck = app.add_subcommand("config-keys", "print every config key with its default/current value");
  add_common(ck);

  CLI11_PARSE(app, argc, argv);

  ConfigHandle cfg(hib_config_create());
  if (int rc = build_config(cfg, config_file, sets)) return fail(rc);

  int rc = 0;
  if (gen->parsed()) {
    rc = hib_cmd_gen_data(cfg.get(), seed, out_dir.c_str());
  } else if (bv->parsed()) {
    rc = hib_cmd_build_vocab(cfg.get(), dataset.c_str(), vocab_path.c_str());
  } else if (pre->parsed()) {
    rc = hib_cmd_pretrain(cfg.get(), dataset.c_str(), vocab_path.c_str(), seed, out_dir.c_str());
  } else if (tr->parsed()) {
    rc = hib_cmd_train(cfg.get(), dataset.c_str(), vocab_path.c_str(), seed,
                       init_ckpt.empty() ? nullptr : init_ckpt.c_str(), fraction, out_dir.c_str());
  } else if (ft->parsed()) {
    rc = hib_cmd_finetune(cfg.get(), dataset.c_str(), vocab_path.c_str(), seed, init_ckpt.c_str(),
                          fraction, out_dir.c_str());
  } else if (ev->parsed()) {
    rc = hib_cmd_evaluate(cfg.get(), dataset.c_str(), vocab_path.c_str(), checkpoint.c_str(),
                          split.c_str(), split_seed, strata.empty() ? nullptr : strata.c_str(),
                          match_prev, seed, out_csv.c_str());
  } else if (sw->parsed()) {
    rc = hib_cmd_sweep(cfg.get(), dataset.c_str(), vocab_path.c_str(), seeds_csv.c_str(),
                       window_stride.empty() ? nullptr : window_stride.c_str(), out_csv.c_str());
  } else if (cx->parsed()) {
    rc = hib_cmd_complexity(cfg.get(), l_min, l_max, l_step, out_csv.c_str());
  } else if (ck->parsed()) {
    std::fputs(hib_config_text(cfg.get()), stdout);
  }
  if (rc != 0) return fail(rc);
  return 0;
}
