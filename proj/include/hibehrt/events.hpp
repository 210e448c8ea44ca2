#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hibehrt/error.hpp"

namespace hibehrt {

enum class Modality { DIAG, MED, PROC, TEST, SBP, DBP, BMI, SMOKE, ALCOHOL };

inline constexpr Modality kAllModalities[] = {Modality::DIAG, Modality::MED,  Modality::PROC,
                                              Modality::TEST, Modality::SBP,  Modality::DBP,
                                              Modality::BMI,  Modality::SMOKE, Modality::ALCOHOL};

const char* modality_name(Modality m);
Modality modality_from_name(const std::string& name);  // throws UnknownModality
bool modality_is_valued(Modality m);                   // SBP, DBP, BMI carry a numeric value

// One coded or measured record. Categorical modalities carry a code,
// value-bearing modalities (SBP mmHg, DBP mmHg, BMI kg/m^2) carry a number.
struct RawEvent {
  Modality modality = Modality::DIAG;
  std::optional<std::string> code;
  std::optional<double> value;
};

struct Visit {
  int age_years = 0;           // clamped to [0,120] at encoding time
  int days_since_first = 0;
  std::vector<RawEvent> events;
};

struct PatientRecord {
  std::string patient_id;
  std::optional<int> label;  // 0/1; absent for pretraining-only records
  std::vector<Visit> visits;
};

// Half-open bins [min + k*step, min + (k+1)*step); a value equal to max is
// clamped into the last bin.
struct BinningSpec {
  double min = 0;
  double max = 0;
  double step = 1;

  int bin_count() const;
  void validate() const;  // (max-min) must be an integral multiple of step > 0
};

BinningSpec default_binning(Modality m);  // throws UnknownModality for non-valued modalities

struct BinResult {
  int index;
  std::string token;
};

// Throws ValueOutOfRange when value is outside [min, max]; the caller
// decides whether to drop the event.
BinResult bin_value(Modality m, double value, const BinningSpec& spec);
BinResult bin_value(Modality m, double value);  // default spec for m

// Vocabulary token text for an event ("DIAG_<code>" or e.g. "SBP_90_95").
std::string event_token(const RawEvent& e);

}  // namespace hibehrt
