#pragma once

#include <array>
#include <string>
#include <vector>

#include "hibehrt/events.hpp"

namespace hibehrt {

// Line-delimited dataset: one JSON object per line with fields
// patient_id, label (0/1/null), visits[{age_years, days_since_first,
// events[{modality, code?|value?}]}]. serialize/load round-trip is
// byte-identical for canonical files.
std::vector<PatientRecord> load_dataset(const std::string& path);
void save_dataset(const std::vector<PatientRecord>& records, const std::string& path);
std::string serialize_record(const PatientRecord& record);
PatientRecord parse_record_line(const std::string& line, int line_no);

struct DatasetSplit {
  std::vector<PatientRecord> train, tune, validation;
};

// Membership is a deterministic function of (patient_id, seed): patients
// are ordered by a per-patient hash and partitioned at exact ratio
// boundaries (largest-remainder rounding), so the split is exhaustive,
// disjoint, and stable across runs and record order.
DatasetSplit split_dataset(const std::vector<PatientRecord>& records,
                           std::array<double, 3> ratios, std::uint64_t seed);

}  // namespace hibehrt
