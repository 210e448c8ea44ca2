// End-to-end tests for the C API: status codes, config handles, and a tiny
// generate -> vocab -> train -> evaluate pipeline driven entirely through
// the extern "C" surface.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "hibehrt.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  fs::path dir = fs::temp_directory_path() / "hibehrt_capi_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(static_cast<bool>(in));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Shrink the model and generator so the pipeline runs in seconds.
void make_tiny(hib_config* cfg) {
  const char* kv[][2] = {
      {"model.hidden", "12"},        {"model.heads", "2"},
      {"model.intermediate", "16"},  {"model.extractor_layers", "1"},
      {"model.aggregator_layers", "1"}, {"model.flat_layers", "1"},
      {"model.max_len", "24"},       {"model.flat_max_len", "12"},
      {"model.window", "8"},         {"model.stride", "4"},
      {"model.position_vocab", "24"}, {"model.dropout", "0"},
      {"model.attn_dropout", "0"},   {"train.dropout_enabled", "0"},
      {"train.max_epochs", "2"},     {"train.batch_size", "16"},
      {"train.patience", "2"},       {"gen.n_patients", "80"},
      {"gen.max_events", "24"},      {"gen.log_mean_events", "2.5"},
      {"gen.log_std_events", "0.6"}, {"gen.boundary", "12"},
      {"gen.n_diag", "10"},          {"gen.n_med", "5"},
      {"gen.n_proc", "4"},           {"gen.n_test", "4"},
  };
  for (const auto& p : kv) REQUIRE(hib_config_set(cfg, p[0], p[1]) == 0);
}

}  // namespace

TEST_CASE("version and config handle basics") {
  CHECK(std::strlen(hib_version()) > 0);
  hib_config* cfg = hib_config_create();
  REQUIRE(cfg != nullptr);

  SUBCASE("set/get round trip") {
    CHECK(hib_config_set(cfg, "model.hidden", "96") == 0);
    char buf[32];
    CHECK(hib_config_get(cfg, "model.hidden", buf, sizeof buf) == 0);
    CHECK(std::string(buf) == "96");
  }
  SUBCASE("unknown key is a config error (2) with a message") {
    CHECK(hib_config_set(cfg, "model.nope", "1") == 2);
    CHECK(std::strlen(hib_last_error()) > 0);
    CHECK(hib_config_get(cfg, "model.nope", nullptr, 0) == 2);
  }
  SUBCASE("missing config file is a data error (3)") {
    CHECK(hib_config_load_file(cfg, "/nonexistent/run.cfg") == 3);
  }
  SUBCASE("config text contains every section") {
    std::string text = hib_config_text(cfg);
    for (const char* k : {"model.hidden=", "aug.crop_prob=", "gen.n_patients=",
                          "train.peak_lr=", "pretrain.tau=", "split.train="})
      CHECK(text.find(k) != std::string::npos);
  }
  hib_config_destroy(cfg);
}

TEST_CASE("config file loading honors overrides") {
  fs::path dir = scratch_dir();
  std::ofstream(dir / "run.cfg") << "# comment\nmodel.hidden = 48\ntrain.patience=3\n";
  hib_config* cfg = hib_config_create();
  REQUIRE(hib_config_load_file(cfg, (dir / "run.cfg").string().c_str()) == 0);
  char buf[16];
  REQUIRE(hib_config_get(cfg, "model.hidden", buf, sizeof buf) == 0);
  CHECK(std::string(buf) == "48");

  std::ofstream(dir / "bad.cfg") << "model.hidden 48\n";
  CHECK(hib_config_load_file(cfg, (dir / "bad.cfg").string().c_str()) == 3);
  hib_config_destroy(cfg);
}

TEST_CASE("complexity table has the reference operating point row") {
  fs::path dir = scratch_dir();
  hib_config* cfg = hib_config_create();
  const fs::path csv = dir / "complexity.csv";
  REQUIRE(hib_cmd_complexity(cfg, 1220, 1220, 1, csv.string().c_str()) == 0);
  const std::string text = slurp(csv);
  CHECK(text.find("1220,150,50,30,40,1671400,") != std::string::npos);
  CHECK(text.find(",407831,") != std::string::npos);

  CHECK(hib_cmd_complexity(cfg, 100, 50, 1, csv.string().c_str()) == 2);
  hib_config_destroy(cfg);
}

TEST_CASE("tiny pipeline: gen-data -> build-vocab -> train -> evaluate") {
  fs::path dir = scratch_dir();
  hib_config* cfg = hib_config_create();
  make_tiny(cfg);

  REQUIRE(hib_cmd_gen_data(cfg, 7, dir.string().c_str()) == 0);
  const fs::path dataset = dir / "dataset.jsonl";
  CHECK(fs::exists(dataset));
  CHECK(slurp(dir / "manifest.json").find("oracle") != std::string::npos);

  const fs::path vocab = dir / "vocab.txt";
  REQUIRE(hib_cmd_build_vocab(cfg, dataset.string().c_str(), vocab.string().c_str()) == 0);
  CHECK(fs::exists(vocab));

  const fs::path run = dir / "run1";
  REQUIRE(hib_cmd_train(cfg, dataset.string().c_str(), vocab.string().c_str(), 3, nullptr, 100.0,
                        run.string().c_str()) == 0);
  CHECK(fs::exists(run / "model.ckpt"));
  CHECK(slurp(run / "train_metrics.csv").find("epoch,lr,train_loss,tune_loss,improved") == 0);
  CHECK(slurp(run / "eval.csv").find("task,stratum,n,positives,auroc,auprc,seed") == 0);

  SUBCASE("evaluate with strata") {
    const fs::path out = dir / "eval_full.csv";
    REQUIRE(hib_cmd_evaluate(cfg, dataset.string().c_str(), vocab.string().c_str(),
                             (run / "model.ckpt").string().c_str(), "validation", 3,
                             "length:12;modality:DIAG+MED", -1, 0, out.string().c_str()) == 0);
    const std::string text = slurp(out);
    CHECK(text.find("evaluate,all,") != std::string::npos);
    CHECK(text.find("length:0-12") != std::string::npos);
    CHECK(text.find("length:>12") != std::string::npos);
    CHECK(text.find("modality:DIAG+MED") != std::string::npos);
  }

  SUBCASE("fine-tuning from the supervised checkpoint runs") {
    const fs::path run2 = dir / "run2";
    REQUIRE(hib_cmd_finetune(cfg, dataset.string().c_str(), vocab.string().c_str(), 4,
                             (run / "model.ckpt").string().c_str(), 100.0,
                             run2.string().c_str()) == 0);
    CHECK(fs::exists(run2 / "model.ckpt"));
  }

  SUBCASE("bad inputs map to the documented status codes") {
    // Unreadable dataset -> 3.
    CHECK(hib_cmd_build_vocab(cfg, (dir / "missing.jsonl").string().c_str(),
                              vocab.string().c_str()) == 3);
    // Fraction outside (0,100] -> 2.
    CHECK(hib_cmd_train(cfg, dataset.string().c_str(), vocab.string().c_str(), 3, nullptr, 0.0,
                        (dir / "runf").string().c_str()) == 2);
    // Corrupt checkpoint -> 3.
    const fs::path corrupt = dir / "corrupt.ckpt";
    std::ofstream(corrupt, std::ios::binary) << "NOTACKPT";
    CHECK(hib_cmd_evaluate(cfg, dataset.string().c_str(), vocab.string().c_str(),
                           corrupt.string().c_str(), "validation", 3, nullptr, -1, 0,
                           (dir / "x.csv").string().c_str()) == 3);
    // Bad split name -> 2.
    CHECK(hib_cmd_evaluate(cfg, dataset.string().c_str(), vocab.string().c_str(),
                           (run / "model.ckpt").string().c_str(), "holdout", 3, nullptr, -1, 0,
                           (dir / "x.csv").string().c_str()) == 2);
  }

  hib_config_destroy(cfg);
}

TEST_CASE("pretrain writes a transferable checkpoint") {
  fs::path dir = scratch_dir();
  hib_config* cfg = hib_config_create();
  make_tiny(cfg);
  REQUIRE(hib_config_set(cfg, "gen.n_patients", "24") == 0);
  REQUIRE(hib_config_set(cfg, "pretrain.epochs", "1") == 0);
  REQUIRE(hib_config_set(cfg, "pretrain.batch_size", "8") == 0);
  REQUIRE(hib_config_set(cfg, "pretrain.warmup_epochs", "1") == 0);

  REQUIRE(hib_cmd_gen_data(cfg, 11, dir.string().c_str()) == 0);
  const fs::path dataset = dir / "dataset.jsonl";
  const fs::path vocab = dir / "vocab.txt";
  REQUIRE(hib_cmd_build_vocab(cfg, dataset.string().c_str(), vocab.string().c_str()) == 0);

  const fs::path pre = dir / "pre";
  REQUIRE(hib_cmd_pretrain(cfg, dataset.string().c_str(), vocab.string().c_str(), 5,
                           pre.string().c_str()) == 0);
  CHECK(fs::exists(pre / "pretrain.ckpt"));
  CHECK(slurp(pre / "pretrain_loss.csv").find("epoch,loss") == 0);

  const fs::path run = dir / "ft";
  REQUIRE(hib_cmd_finetune(cfg, dataset.string().c_str(), vocab.string().c_str(), 6,
                           (pre / "pretrain.ckpt").string().c_str(), 100.0,
                           run.string().c_str()) == 0);
  CHECK(fs::exists(run / "model.ckpt"));
}

TEST_CASE("fraction sweep CSV via the C API") {
  fs::path dir = scratch_dir();
  hib_config* cfg = hib_config_create();
  make_tiny(cfg);
  REQUIRE(hib_config_set(cfg, "train.max_epochs", "1") == 0);
  REQUIRE(hib_config_set(cfg, "train.fraction_list", "50,100") == 0);

  REQUIRE(hib_cmd_gen_data(cfg, 13, dir.string().c_str()) == 0);
  const fs::path dataset = dir / "dataset.jsonl";
  const fs::path vocab = dir / "vocab.txt";
  REQUIRE(hib_cmd_build_vocab(cfg, dataset.string().c_str(), vocab.string().c_str()) == 0);

  const fs::path csv = dir / "sweep.csv";
  REQUIRE(hib_cmd_sweep(cfg, dataset.string().c_str(), vocab.string().c_str(), "1,2", nullptr,
                        csv.string().c_str()) == 0);
  const std::string text = slurp(csv);
  CHECK(text.find("task,fraction,seed,auroc,auprc") == 0);
  CHECK(text.find("fraction_sweep,50,1,") != std::string::npos);
  CHECK(text.find("fraction_sweep,100,2,") != std::string::npos);
  CHECK(text.find("fraction_sweep_mean,50,mean,") != std::string::npos);

  CHECK(hib_cmd_sweep(cfg, dataset.string().c_str(), vocab.string().c_str(), "1,x", nullptr,
                      csv.string().c_str()) == 2);
  hib_config_destroy(cfg);
}
