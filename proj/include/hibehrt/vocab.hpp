#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "hibehrt/events.hpp"

namespace hibehrt {

// Token <-> id bijection with four fixed reserved ids. Corpus tokens start
// at id 4 and are assigned in sorted token-text order, so vocabulary
// construction is order-independent.
class Vocabulary {
 public:
  static constexpr std::int64_t PAD = 0;
  static constexpr std::int64_t UNK = 1;
  static constexpr std::int64_t MASK = 2;
  static constexpr std::int64_t CLS = 3;
  static constexpr std::int64_t kFirstCorpusId = 4;

  Vocabulary();

  // Unknown tokens map to UNK.
  std::int64_t lookup(const std::string& token) const;
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::string& token(std::int64_t id) const;
  Modality modality_of(std::int64_t id) const;

  std::int64_t size() const { return static_cast<std::int64_t>(tokens_.size()); }

  void add(const std::string& token, Modality m);  // next free id, must be presorted by caller

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;     // id -> text
  std::vector<Modality> modalities_;    // id -> modality (reserved ids report DIAG, unused)
  std::unordered_map<std::string, std::int64_t> ids_;
};

// One token per distinct (modality, code-or-bin) across the corpus,
// deterministic id assignment by sorted token text.
Vocabulary build_vocabulary(const std::vector<PatientRecord>& corpus);

}  // namespace hibehrt
