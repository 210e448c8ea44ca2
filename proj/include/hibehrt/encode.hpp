#pragma once

#include <cstdint>
#include <vector>

#include "hibehrt/events.hpp"
#include "hibehrt/vocab.hpp"

namespace hibehrt {

// Parallel fixed-length id arrays for one patient. Valid tokens form a
// prefix (mask true); the padded tail carries token PAD and repeats the
// last valid age/segment/position ids.
struct EncodedSequence {
  std::vector<std::int64_t> token_ids;
  std::vector<std::int64_t> age_ids;
  std::vector<std::int64_t> segment_ids;   // {0,1}, alternating per visit
  std::vector<std::int64_t> position_ids;  // retained-visit index, constant within a visit
  std::vector<char> mask;                  // true = real token

  std::size_t length() const { return token_ids.size(); }
  std::size_t valid_len() const;
};

// Flattens the record in visit order, keeps the latest max_len tokens when
// longer (suffix truncation), and pads the tail. Out-of-range measurement
// values are dropped. Segment ids restart at 0 for the earliest retained
// visit; position ids are the retained-visit index.
EncodedSequence encode_patient(const PatientRecord& record, const Vocabulary& vocab, std::size_t max_len);

// Drop all events whose modality is not in `keep` (modality-subset
// ablation); visits left empty are removed.
PatientRecord filter_modalities(const PatientRecord& record, const std::vector<Modality>& keep);

std::size_t total_event_count(const PatientRecord& record);

}  // namespace hibehrt
