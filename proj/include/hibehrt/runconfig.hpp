#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hibehrt/byol.hpp"
#include "hibehrt/model.hpp"
#include "hibehrt/synth.hpp"
#include "hibehrt/train.hpp"

namespace hibehrt {

// Flat key=value run configuration. Every key has a default equal to the
// reference operating point; unknown keys are rejected; the canonical
// serialization is sorted, one pair per line.
class RunConfig {
 public:
  RunConfig();  // defaults

  static RunConfig from_file(const std::string& path);
  void set(const std::string& key, const std::string& value);  // ConfigMismatch on unknown key
  const std::string& get(const std::string& key) const;

  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;

  std::string canonical_text() const;
  std::uint64_t config_hash() const;
  const std::map<std::string, std::string>& entries() const { return kv_; }

  ModelConfig model_config(std::int64_t vocab_size) const;
  AugmentationConfig augmentation_config() const;
  GeneratorConfig generator_config() const;
  TrainConfig train_config() const;
  PretrainConfig pretrain_config() const;
  std::array<double, 3> split_ratios() const;
  std::vector<double> lr_sweep() const;
  std::vector<double> fraction_list() const;

 private:
  std::map<std::string, std::string> kv_;
};

std::vector<double> parse_double_list(const std::string& csv);
std::vector<std::uint64_t> parse_seed_list(const std::string& csv);

}  // namespace hibehrt
