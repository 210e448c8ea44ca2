#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hibehrt/dataset.hpp"
#include "hibehrt/rng.hpp"

namespace hibehrt {

// Synthetic longitudinal-EHR generator with a planted long-range label
// rule: a patient is "conditioned" when an early trigger token sits in the
// portion of the history that truncation at `boundary` removes AND a late
// modifier token sits inside the kept suffix. Labels are then drawn with
// p_hi for conditioned patients and p_lo otherwise, so only a model that
// sees beyond the suffix can approach the full-information ceiling.
struct GeneratorConfig {
  int n_patients = 10000;

  // Total event count per patient: round(exp(N(log_mean_events,
  // log_std_events))), clamped to [1, max_events].
  double log_mean_events = 5.39;  // ~ exp(5.39) = 219 events
  double log_std_events = 0.8;
  int max_events = 1220;

  double events_per_visit = 4.0;  // Poisson mean (>= 1 event per visit)

  // Categorical vocabulary sizes per modality.
  int n_diag = 60;
  int n_med = 30;
  int n_proc = 20;
  int n_test = 20;
  double measurement_prob = 0.15;  // chance an event is a valued SBP/DBP/BMI

  // Label rule.
  int boundary = 256;     // B: suffix length a truncating model can see
  double p_early = 0.25;  // P(early trigger | length > B)
  double p_late = 0.95;   // P(late modifier), any length
  double p_hi = 0.9;
  double p_lo = 0.1;

  // When a trigger fires, each event in its region independently becomes
  // the trigger code with this probability (at least one is always
  // planted). The condition indicator -- and therefore the label law and
  // both oracle ceilings -- depends only on presence, not multiplicity.
  double trigger_density = 0.05;

  void validate() const;
};

inline constexpr const char* kEarlyTriggerCode = "TRIG_EARLY";
inline constexpr const char* kLateTriggerCode = "TRIG_LATE";

// True planted condition, recomputable from the record alone.
bool has_condition(const PatientRecord& record, int boundary);

std::vector<PatientRecord> generate_cohort(const GeneratorConfig& cfg, std::uint64_t seed);

struct OracleAuroc {
  double full = 0.5;        // oracle that knows the true condition
  double truncated = 0.5;   // oracle restricted to the suffix of length B
  double p_long = 0;        // P(event count > boundary)
  double condition_prevalence = 0;
};

// Closed-form AUROC ceilings from the label rule and the discretized
// log-normal length distribution.
OracleAuroc bayes_optimal_auroc(const GeneratorConfig& cfg);

// Empirical oracle AUROC over a concrete set of labeled records: the full
// oracle scores by the true condition; the truncated oracle scores by the
// best suffix-only predictor (late modifier present AND length > B).
struct EmpiricalOracle {
  double full = 0.5;
  double truncated = 0.5;
};
EmpiricalOracle empirical_oracle_auroc(const std::vector<PatientRecord>& records, int boundary,
                                       double p_early);

// Discrete length distribution P(n_events = k), k in [1, max_events].
std::vector<double> length_pmf(const GeneratorConfig& cfg);

// Sidecar manifest describing one generated cohort.
std::string cohort_manifest(const GeneratorConfig& cfg, std::uint64_t seed);

}  // namespace hibehrt
