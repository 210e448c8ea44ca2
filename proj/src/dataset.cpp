#include "hibehrt/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "hibehrt/rng.hpp"
#include "json.hpp"

namespace hibehrt {

using ojson = nlohmann::ordered_json;

std::string serialize_record(const PatientRecord& record) {
  ojson j;
  j["patient_id"] = record.patient_id;
  if (record.label)
    j["label"] = *record.label;
  else
    j["label"] = nullptr;
  ojson visits = ojson::array();
  for (const Visit& v : record.visits) {
    ojson jv;
    jv["age_years"] = v.age_years;
    jv["days_since_first"] = v.days_since_first;
    ojson events = ojson::array();
    for (const RawEvent& e : v.events) {
      ojson je;
      je["modality"] = modality_name(e.modality);
      if (e.code) je["code"] = *e.code;
      if (e.value) je["value"] = *e.value;
      events.push_back(std::move(je));
    }
    jv["events"] = std::move(events);
    visits.push_back(std::move(jv));
  }
  j["visits"] = std::move(visits);
  return j.dump();
}

PatientRecord parse_record_line(const std::string& line, int line_no) {
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line_no, e.what());
  }
  try {
    PatientRecord r;
    r.patient_id = j.at("patient_id").get<std::string>();
    if (!j.at("label").is_null()) {
      const int lab = j.at("label").get<int>();
      if (lab != 0 && lab != 1) throw ParseError(line_no, "label must be 0, 1, or null");
      r.label = lab;
    }
    int prev_days = -1;
    int prev_age = -1;
    for (const auto& jv : j.at("visits")) {
      Visit v;
      v.age_years = jv.at("age_years").get<int>();
      v.days_since_first = jv.at("days_since_first").get<int>();
      if (v.days_since_first < 0) throw ParseError(line_no, "days_since_first must be non-negative");
      if (v.days_since_first <= prev_days) throw ParseError(line_no, "visits must be strictly ordered by days_since_first");
      if (v.age_years < prev_age) throw ParseError(line_no, "age_years must be non-decreasing");
      prev_days = v.days_since_first;
      prev_age = v.age_years;
      for (const auto& je : jv.at("events")) {
        RawEvent e;
        e.modality = modality_from_name(je.at("modality").get<std::string>());
        if (je.contains("code")) e.code = je.at("code").get<std::string>();
        if (je.contains("value")) e.value = je.at("value").get<double>();
        const bool valued = modality_is_valued(e.modality);
        if (valued && (!e.value || e.code)) throw ParseError(line_no, "valued modality needs value only");
        if (!valued && (!e.code || e.value)) throw ParseError(line_no, "categorical modality needs code only");
        v.events.push_back(std::move(e));
      }
      r.visits.push_back(std::move(v));
    }
    if (r.visits.empty()) throw ParseError(line_no, "record has no visits");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line_no, e.what());
  }
}

std::vector<PatientRecord> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFound(path);
  std::vector<PatientRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    out.push_back(parse_record_line(line, line_no));
  }
  return out;
}

void save_dataset(const std::vector<PatientRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileNotFound(path);
  for (const PatientRecord& r : records) out << serialize_record(r) << '\n';
}

DatasetSplit split_dataset(const std::vector<PatientRecord>& records, std::array<double, 3> ratios,
                           std::uint64_t seed) {
  double sum = 0;
  for (double r : ratios) {
    if (r < 0) throw BadRatios("split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw BadRatios("split ratios must sum to 1");

  const std::size_t n = records.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::uint64_t> hash(n);
  for (std::size_t i = 0; i < n; ++i)
    hash[i] = splitmix64(hash_str(records[i].patient_id) ^ splitmix64(seed));
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (hash[a] != hash[b]) return hash[a] < hash[b];
    return records[a].patient_id < records[b].patient_id;
  });

  // Largest-remainder rounding keeps the partition exhaustive at exact sizes.
  std::array<std::size_t, 3> sizes;
  std::array<double, 3> rema;
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = ratios[k] * static_cast<double>(n);
    sizes[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rema[k] = exact - static_cast<double>(sizes[k]);
    assigned += sizes[k];
  }
  while (assigned < n) {
    int best = 0;
    for (int k = 1; k < 3; ++k)
      if (rema[k] > rema[best]) best = k;
    ++sizes[best];
    rema[best] = -1;
    ++assigned;
  }

  DatasetSplit split;
  std::size_t idx = 0;
  for (std::size_t i = 0; i < sizes[0]; ++i) split.train.push_back(records[order[idx++]]);
  for (std::size_t i = 0; i < sizes[1]; ++i) split.tune.push_back(records[order[idx++]]);
  for (std::size_t i = 0; i < sizes[2]; ++i) split.validation.push_back(records[order[idx++]]);
  return split;
}

}  // namespace hibehrt
