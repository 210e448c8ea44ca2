#include "hibehrt/runconfig.hpp"

#include <fstream>
#include <sstream>

#include "hibehrt/checkpoint.hpp"

namespace hibehrt {

RunConfig::RunConfig() {
  // Model geometry and regularization (reference operating point).
  kv_["model.hidden"] = "150";
  kv_["model.heads"] = "6";
  kv_["model.intermediate"] = "108";
  kv_["model.extractor_layers"] = "4";
  kv_["model.aggregator_layers"] = "4";
  kv_["model.flat_layers"] = "8";
  kv_["model.dropout"] = "0.2";
  kv_["model.attn_dropout"] = "0.3";
  kv_["model.max_len"] = "1220";
  kv_["model.flat_max_len"] = "256";
  kv_["model.window"] = "50";
  kv_["model.stride"] = "30";
  kv_["model.age_vocab"] = "121";
  kv_["model.position_vocab"] = "1220";
  // Augmentation.
  kv_["aug.crop_prob"] = "0.5";
  kv_["aug.mask_prob"] = "0.2";
  kv_["aug.segment_aug_prob"] = "0.5";
  kv_["aug.mask_vs_noise"] = "0.85";
  kv_["aug.noise_std"] = "0.1";
  kv_["aug.crop_min_fraction"] = "0.5";
  // Generator.
  kv_["gen.n_patients"] = "10000";
  kv_["gen.log_mean_events"] = "5.39";
  kv_["gen.log_std_events"] = "0.8";
  kv_["gen.max_events"] = "1220";
  kv_["gen.events_per_visit"] = "4";
  kv_["gen.n_diag"] = "60";
  kv_["gen.n_med"] = "30";
  kv_["gen.n_proc"] = "20";
  kv_["gen.n_test"] = "20";
  kv_["gen.measurement_prob"] = "0.15";
  kv_["gen.boundary"] = "256";
  kv_["gen.p_early"] = "0.25";
  kv_["gen.p_late"] = "0.95";
  kv_["gen.p_hi"] = "0.9";
  kv_["gen.p_lo"] = "0.1";
  kv_["gen.trigger_density"] = "0.05";
  // Supervised training.
  kv_["train.model"] = "hierarchical";  // hierarchical | flat
  kv_["train.max_epochs"] = "100";
  kv_["train.batch_size"] = "128";
  kv_["train.peak_lr"] = "1e-4";
  kv_["train.optimizer"] = "adam";  // adam | sgd
  kv_["train.patience"] = "6";
  kv_["train.dropout_enabled"] = "1";
  kv_["train.lr_sweep"] = "5e-5,1e-4,5e-4";
  kv_["train.fraction_list"] = "1,5,10,20,50,100";
  // Pretraining.
  kv_["pretrain.epochs"] = "35";
  kv_["pretrain.batch_size"] = "256";
  kv_["pretrain.peak_lr"] = "1e-4";
  kv_["pretrain.warmup_epochs"] = "10";
  kv_["pretrain.tau"] = "0.996";
  // Split ratios.
  kv_["split.train"] = "0.6";
  kv_["split.tune"] = "0.1";
  kv_["split.validation"] = "0.3";
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path);
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Trim trailing carriage returns and surrounding whitespace.
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    if (line[start] == '#') continue;
    const std::size_t eq = line.find('=', start);
    if (eq == std::string::npos) throw ParseError(line_no, "config line missing '='");
    std::string key = line.substr(start, eq - start);
    std::string value = line.substr(eq + 1);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    const std::size_t vstart = value.find_first_not_of(" \t");
    value = vstart == std::string::npos ? std::string() : value.substr(vstart);
    try {
      cfg.set(key, value);
    } catch (const ConfigMismatch& e) {
      throw ConfigMismatch(std::string(e.what()) + " (line " + std::to_string(line_no) + ")");
    }
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigMismatch("unknown config key: " + key);
  it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigMismatch("unknown config key: " + key);
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigMismatch("config key " + key + ": not a number: " + v);
  }
}

long long RunConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigMismatch("config key " + key + ": not an integer: " + v);
  }
}

std::string RunConfig::canonical_text() const {
  std::map<std::string, std::string> m(kv_.begin(), kv_.end());
  return canonical_config_text(m);
}

std::uint64_t RunConfig::config_hash() const { return hash_str(canonical_text()); }

ModelConfig RunConfig::model_config(std::int64_t vocab_size) const {
  ModelConfig m;
  m.hidden = static_cast<int>(get_int("model.hidden"));
  m.heads = static_cast<int>(get_int("model.heads"));
  m.intermediate = static_cast<int>(get_int("model.intermediate"));
  m.extractor_layers = static_cast<int>(get_int("model.extractor_layers"));
  m.aggregator_layers = static_cast<int>(get_int("model.aggregator_layers"));
  m.flat_layers = static_cast<int>(get_int("model.flat_layers"));
  m.dropout = get_double("model.dropout");
  m.attn_dropout = get_double("model.attn_dropout");
  m.max_len = static_cast<int>(get_int("model.max_len"));
  m.flat_max_len = static_cast<int>(get_int("model.flat_max_len"));
  m.window = static_cast<int>(get_int("model.window"));
  m.stride = static_cast<int>(get_int("model.stride"));
  m.age_vocab = static_cast<int>(get_int("model.age_vocab"));
  m.position_vocab = static_cast<int>(get_int("model.position_vocab"));
  m.vocab_size = vocab_size;
  return m;
}

AugmentationConfig RunConfig::augmentation_config() const {
  AugmentationConfig a;
  a.crop_prob = get_double("aug.crop_prob");
  a.mask_prob = get_double("aug.mask_prob");
  a.segment_aug_prob = get_double("aug.segment_aug_prob");
  a.mask_vs_noise = get_double("aug.mask_vs_noise");
  a.noise_std = get_double("aug.noise_std");
  a.crop_min_fraction = get_double("aug.crop_min_fraction");
  return a;
}

GeneratorConfig RunConfig::generator_config() const {
  GeneratorConfig g;
  g.n_patients = static_cast<int>(get_int("gen.n_patients"));
  g.log_mean_events = get_double("gen.log_mean_events");
  g.log_std_events = get_double("gen.log_std_events");
  g.max_events = static_cast<int>(get_int("gen.max_events"));
  g.events_per_visit = get_double("gen.events_per_visit");
  g.n_diag = static_cast<int>(get_int("gen.n_diag"));
  g.n_med = static_cast<int>(get_int("gen.n_med"));
  g.n_proc = static_cast<int>(get_int("gen.n_proc"));
  g.n_test = static_cast<int>(get_int("gen.n_test"));
  g.measurement_prob = get_double("gen.measurement_prob");
  g.boundary = static_cast<int>(get_int("gen.boundary"));
  g.p_early = get_double("gen.p_early");
  g.p_late = get_double("gen.p_late");
  g.p_hi = get_double("gen.p_hi");
  g.p_lo = get_double("gen.p_lo");
  g.trigger_density = get_double("gen.trigger_density");
  return g;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  const std::string& kind = get("train.model");
  if (kind == "hierarchical")
    t.kind = ModelKind::Hierarchical;
  else if (kind == "flat")
    t.kind = ModelKind::Flat;
  else
    throw ConfigMismatch("train.model must be 'hierarchical' or 'flat', got: " + kind);
  t.max_epochs = static_cast<int>(get_int("train.max_epochs"));
  t.batch_size = static_cast<int>(get_int("train.batch_size"));
  t.peak_lr = get_double("train.peak_lr");
  const std::string& o = get("train.optimizer");
  if (o == "adam")
    t.optimizer = OptimizerKind::Adam;
  else if (o == "sgd")
    t.optimizer = OptimizerKind::SgdMomentum;
  else
    throw ConfigMismatch("train.optimizer must be 'adam' or 'sgd', got: " + o);
  t.patience = static_cast<int>(get_int("train.patience"));
  t.train_dropout = get_int("train.dropout_enabled") != 0;
  return t;
}

PretrainConfig RunConfig::pretrain_config() const {
  PretrainConfig p;
  p.epochs = static_cast<int>(get_int("pretrain.epochs"));
  p.batch_size = static_cast<int>(get_int("pretrain.batch_size"));
  p.peak_lr = get_double("pretrain.peak_lr");
  p.warmup_epochs = static_cast<int>(get_int("pretrain.warmup_epochs"));
  p.tau = get_double("pretrain.tau");
  return p;
}

std::array<double, 3> RunConfig::split_ratios() const {
  return {get_double("split.train"), get_double("split.tune"), get_double("split.validation")};
}

std::vector<double> RunConfig::lr_sweep() const { return parse_double_list(get("train.lr_sweep")); }

std::vector<double> RunConfig::fraction_list() const {
  return parse_double_list(get("train.fraction_list"));
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigMismatch("not a number in list: " + item);
    }
  }
  if (out.empty()) throw ConfigMismatch("empty numeric list");
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw ConfigMismatch("not a seed in list: " + item);
    }
  }
  if (out.empty()) throw ConfigMismatch("empty seed list");
  return out;
}

}  // namespace hibehrt
