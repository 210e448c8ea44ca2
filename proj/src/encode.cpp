#include "hibehrt/encode.hpp"

#include <algorithm>

namespace hibehrt {

std::size_t EncodedSequence::valid_len() const {
  std::size_t n = 0;
  while (n < mask.size() && mask[n]) ++n;
  return n;
}

EncodedSequence encode_patient(const PatientRecord& record, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 1) throw ConfigMismatch("encode_patient: max_len must be >= 1");

  struct Flat {
    std::int64_t token;
    std::int64_t age;
    std::size_t visit;
  };
  std::vector<Flat> flat;
  for (std::size_t vi = 0; vi < record.visits.size(); ++vi) {
    const Visit& visit = record.visits[vi];
    const std::int64_t age = std::clamp(visit.age_years, 0, 120);
    for (const RawEvent& e : visit.events) {
      if (modality_is_valued(e.modality) && e.value) {
        const BinningSpec spec = default_binning(e.modality);
        if (*e.value < spec.min || *e.value > spec.max) continue;
      }
      flat.push_back({vocab.lookup(event_token(e)), age, vi});
    }
  }
  if (flat.empty()) throw EmptySequence();

  const std::size_t start = flat.size() > max_len ? flat.size() - max_len : 0;
  const std::size_t valid = flat.size() - start;

  EncodedSequence seq;
  seq.token_ids.reserve(max_len);
  // Retained visits are renumbered densely from 0, so position ids stay
  // consecutive even when value-dropping left gaps in the raw visit indices.
  std::size_t prev_visit = flat[start].visit;
  std::int64_t pos = 0;
  for (std::size_t i = start; i < flat.size(); ++i) {
    if (flat[i].visit != prev_visit) {
      ++pos;
      prev_visit = flat[i].visit;
    }
    seq.token_ids.push_back(flat[i].token);
    seq.age_ids.push_back(flat[i].age);
    seq.segment_ids.push_back(pos % 2);
    seq.position_ids.push_back(pos);
    seq.mask.push_back(1);
  }
  while (seq.token_ids.size() < max_len) {
    seq.token_ids.push_back(Vocabulary::PAD);
    seq.age_ids.push_back(seq.age_ids[valid - 1]);
    seq.segment_ids.push_back(seq.segment_ids[valid - 1]);
    seq.position_ids.push_back(seq.position_ids[valid - 1]);
    seq.mask.push_back(0);
  }
  return seq;
}

PatientRecord filter_modalities(const PatientRecord& record, const std::vector<Modality>& keep) {
  PatientRecord out;
  out.patient_id = record.patient_id;
  out.label = record.label;
  for (const Visit& visit : record.visits) {
    Visit v;
    v.age_years = visit.age_years;
    v.days_since_first = visit.days_since_first;
    for (const RawEvent& e : visit.events)
      if (std::find(keep.begin(), keep.end(), e.modality) != keep.end()) v.events.push_back(e);
    if (!v.events.empty()) out.visits.push_back(std::move(v));
  }
  return out;
}

std::size_t total_event_count(const PatientRecord& record) {
  std::size_t n = 0;
  for (const Visit& v : record.visits) n += v.events.size();
  return n;
}

}  // namespace hibehrt
