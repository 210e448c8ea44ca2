#include "hibehrt/events.hpp"

#include <cmath>
#include <cstdio>

namespace hibehrt {

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::DIAG: return "DIAG";
    case Modality::MED: return "MED";
    case Modality::PROC: return "PROC";
    case Modality::TEST: return "TEST";
    case Modality::SBP: return "SBP";
    case Modality::DBP: return "DBP";
    case Modality::BMI: return "BMI";
    case Modality::SMOKE: return "SMOKE";
    case Modality::ALCOHOL: return "ALCOHOL";
  }
  return "?";
}

Modality modality_from_name(const std::string& name) {
  for (Modality m : kAllModalities)
    if (name == modality_name(m)) return m;
  throw UnknownModality("unknown modality: " + name);
}

bool modality_is_valued(Modality m) {
  return m == Modality::SBP || m == Modality::DBP || m == Modality::BMI;
}

int BinningSpec::bin_count() const {
  validate();
  return static_cast<int>(std::llround((max - min) / step));
}

void BinningSpec::validate() const {
  if (step <= 0) throw ConfigMismatch("binning: step must be > 0");
  if (max <= min) throw ConfigMismatch("binning: max must exceed min");
  const double k = (max - min) / step;
  if (std::abs(k - std::llround(k)) > 1e-9)
    throw ConfigMismatch("binning: (max - min) must be an integral multiple of step");
}

BinningSpec default_binning(Modality m) {
  switch (m) {
    case Modality::SBP: return {80, 200, 5};   // 24 bins
    case Modality::DBP: return {50, 140, 5};   // 18 bins
    case Modality::BMI: return {16, 50, 1};    // 34 bins
    default: throw UnknownModality(std::string("no binning for modality ") + modality_name(m));
  }
}

namespace {
std::string fmt_bound(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}
}  // namespace

BinResult bin_value(Modality m, double value, const BinningSpec& spec) {
  spec.validate();
  if (value < spec.min || value > spec.max)
    throw ValueOutOfRange(std::string(modality_name(m)) + " value " + std::to_string(value) +
                          " outside [" + fmt_bound(spec.min) + "," + fmt_bound(spec.max) + "]");
  int k = static_cast<int>(std::floor((value - spec.min) / spec.step));
  const int last = spec.bin_count() - 1;
  if (k > last) k = last;  // value == max clamps into the last bin
  const double lo = spec.min + k * spec.step;
  const double hi = lo + spec.step;
  return {k, std::string(modality_name(m)) + "_" + fmt_bound(lo) + "_" + fmt_bound(hi)};
}

BinResult bin_value(Modality m, double value) { return bin_value(m, value, default_binning(m)); }

std::string event_token(const RawEvent& e) {
  if (modality_is_valued(e.modality)) {
    if (!e.value) throw UnknownModality(std::string(modality_name(e.modality)) + " event missing value");
    return bin_value(e.modality, *e.value).token;
  }
  if (!e.code) throw UnknownModality(std::string(modality_name(e.modality)) + " event missing code");
  return std::string(modality_name(e.modality)) + "_" + *e.code;
}

}  // namespace hibehrt
