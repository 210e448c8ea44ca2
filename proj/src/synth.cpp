#include "hibehrt/synth.hpp"

#include <cmath>
#include <random>

#include "hibehrt/metrics.hpp"
#include "json.hpp"

namespace hibehrt {

void GeneratorConfig::validate() const {
  if (n_patients < 0) throw ConfigMismatch("generator: n_patients must be >= 0");
  if (max_events < 1) throw ConfigMismatch("generator: max_events must be >= 1");
  if (log_std_events <= 0) throw ConfigMismatch("generator: log_std_events must be > 0");
  if (events_per_visit < 1) throw ConfigMismatch("generator: events_per_visit must be >= 1");
  if (n_diag < 1 || n_med < 1 || n_proc < 1 || n_test < 1)
    throw ConfigMismatch("generator: vocabulary sizes must be >= 1");
  if (boundary < 1 || boundary >= max_events)
    throw ConfigMismatch("generator: require 1 <= boundary < max_events");
  for (double p : {measurement_prob, p_early, p_late, p_hi, p_lo, trigger_density})
    if (p < 0 || p > 1) throw ConfigMismatch("generator: probabilities must lie in [0,1]");
  if (p_hi < p_lo) throw ConfigMismatch("generator: p_hi must be >= p_lo");
}

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// AUROC of the Bayes-optimal scorer over a discrete family of observation
// types, each with mass `prob` and positive rate `p1` (the optimal score
// is p1 itself); ties between equal scores count one half.
struct ScoreType {
  double prob;
  double p1;
};

double discrete_auroc(const std::vector<ScoreType>& types) {
  double wp_total = 0, wn_total = 0;
  for (const auto& t : types) {
    wp_total += t.prob * t.p1;
    wn_total += t.prob * (1 - t.p1);
  }
  if (wp_total <= 0 || wn_total <= 0) return 0.5;
  double num = 0;
  for (const auto& pos : types) {
    const double wp = pos.prob * pos.p1;
    for (const auto& neg : types) {
      const double wn = neg.prob * (1 - neg.p1);
      if (pos.p1 > neg.p1)
        num += wp * wn;
      else if (pos.p1 == neg.p1)
        num += 0.5 * wp * wn;
    }
  }
  return num / (wp_total * wn_total);
}

}  // namespace

std::vector<double> length_pmf(const GeneratorConfig& cfg) {
  const double mu = cfg.log_mean_events, sigma = cfg.log_std_events;
  std::vector<double> pmf(static_cast<std::size_t>(cfg.max_events) + 1, 0.0);
  for (int k = 1; k <= cfg.max_events; ++k) {
    const double lo = k == 1 ? -INFINITY : (std::log(k - 0.5) - mu) / sigma;
    const double hi = k == cfg.max_events ? INFINITY : (std::log(k + 0.5) - mu) / sigma;
    pmf[static_cast<std::size_t>(k)] =
        (hi == INFINITY ? 1.0 : normal_cdf(hi)) - (lo == -INFINITY ? 0.0 : normal_cdf(lo));
  }
  return pmf;
}

OracleAuroc bayes_optimal_auroc(const GeneratorConfig& cfg) {
  cfg.validate();
  const std::vector<double> pmf = length_pmf(cfg);
  double p_long = 0, p_at_b = 0;
  for (int k = 1; k <= cfg.max_events; ++k) {
    if (k > cfg.boundary) p_long += pmf[static_cast<std::size_t>(k)];
    if (k == cfg.boundary) p_at_b = pmf[static_cast<std::size_t>(k)];
  }

  OracleAuroc out;
  out.p_long = p_long;
  out.condition_prevalence = p_long * cfg.p_early * cfg.p_late;

  // Full oracle: knows the condition bit.
  out.full = discrete_auroc({{out.condition_prevalence, cfg.p_hi},
                             {1.0 - out.condition_prevalence, cfg.p_lo}});

  // Truncated oracle: observes (suffix filled to B, late modifier present).
  // A filled suffix means length >= B; the condition additionally needs
  // length > B and the early trigger, neither of which is visible.
  const double p_full_suffix = p_long + p_at_b;
  const double w_long = p_full_suffix > 0 ? p_long / p_full_suffix : 0.0;
  const double p1_seen = w_long * cfg.p_early * (cfg.p_hi - cfg.p_lo) + cfg.p_lo;
  out.truncated = discrete_auroc({{p_full_suffix * cfg.p_late, p1_seen},
                                  {1.0 - p_full_suffix * cfg.p_late, cfg.p_lo}});
  return out;
}

bool has_condition(const PatientRecord& record, int boundary) {
  std::vector<const RawEvent*> flat;
  for (const Visit& v : record.visits)
    for (const RawEvent& e : v.events) flat.push_back(&e);
  const auto L = static_cast<long long>(flat.size());
  if (L <= boundary) return false;
  bool early = false, late = false;
  for (long long i = 0; i < L; ++i) {
    const RawEvent& e = *flat[static_cast<std::size_t>(i)];
    if (e.modality != Modality::DIAG || !e.code) continue;
    if (i < L - boundary && *e.code == kEarlyTriggerCode) early = true;
    if (i >= L - boundary && *e.code == kLateTriggerCode) late = true;
  }
  return early && late;
}

std::vector<PatientRecord> generate_cohort(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng base(seed);
  std::vector<PatientRecord> out;
  out.reserve(static_cast<std::size_t>(cfg.n_patients));

  for (int pi = 0; pi < cfg.n_patients; ++pi) {
    Rng rng = base.split(static_cast<std::uint64_t>(pi));
    PatientRecord rec;
    rec.patient_id = "synth" + std::to_string(pi);

    const double raw = std::exp(rng.normal(cfg.log_mean_events, cfg.log_std_events));
    const long long L =
        std::min<long long>(cfg.max_events, std::max<long long>(1, std::llround(raw)));

    // Visit skeleton.
    const int age_start = static_cast<int>(rng.uniform_int(30, 70));
    std::poisson_distribution<int> visit_size(std::max(0.0, cfg.events_per_visit - 1.0));
    long long placed = 0;
    int days = 0;
    while (placed < L) {
      Visit v;
      days += static_cast<int>(rng.uniform_int(1, 60));
      v.days_since_first = days;
      v.age_years = std::min(120, age_start + days / 365);
      const long long n = std::min<long long>(L - placed, 1 + visit_size(rng.engine()));
      for (long long e = 0; e < n; ++e) {
        RawEvent ev;
        if (rng.bernoulli(cfg.measurement_prob)) {
          const int which = static_cast<int>(rng.uniform_int(0, 2));
          ev.modality = which == 0 ? Modality::SBP : which == 1 ? Modality::DBP : Modality::BMI;
          const BinningSpec spec = default_binning(ev.modality);
          ev.value = spec.min + rng.uniform() * (spec.max - spec.min);
        } else {
          const double u = rng.uniform();
          if (u < 0.50) {
            ev.modality = Modality::DIAG;
            ev.code = "D" + std::to_string(rng.uniform_int(0, cfg.n_diag - 1));
          } else if (u < 0.70) {
            ev.modality = Modality::MED;
            ev.code = "M" + std::to_string(rng.uniform_int(0, cfg.n_med - 1));
          } else if (u < 0.85) {
            ev.modality = Modality::PROC;
            ev.code = "P" + std::to_string(rng.uniform_int(0, cfg.n_proc - 1));
          } else if (u < 0.95) {
            ev.modality = Modality::TEST;
            ev.code = "T" + std::to_string(rng.uniform_int(0, cfg.n_test - 1));
          } else {
            static const char* kStatus[] = {"current", "ex", "non"};
            ev.modality = rng.bernoulli(0.5) ? Modality::SMOKE : Modality::ALCOHOL;
            ev.code = kStatus[rng.uniform_int(0, 2)];
          }
        }
        v.events.push_back(std::move(ev));
        ++placed;
      }
      rec.visits.push_back(std::move(v));
    }

    // Plant the triggers by flat event index; the early trigger only ever
    // lands in the region that truncation at `boundary` removes.
    auto event_at = [&rec](long long idx) -> RawEvent& {
      for (Visit& v : rec.visits) {
        if (idx < static_cast<long long>(v.events.size()))
          return v.events[static_cast<std::size_t>(idx)];
        idx -= static_cast<long long>(v.events.size());
      }
      throw ShapeMismatch("generator: event index out of range");
    };
    auto plant = [&](long long lo, long long hi, const char* code) {
      const long long idx = rng.uniform_int(lo, hi);  // guaranteed occurrence
      event_at(idx) = {Modality::DIAG, std::string(code), std::nullopt};
      for (long long i = lo; i <= hi; ++i)
        if (i != idx && rng.bernoulli(cfg.trigger_density))
          event_at(i) = {Modality::DIAG, std::string(code), std::nullopt};
    };
    bool early = false, late = false;
    if (L > cfg.boundary && rng.bernoulli(cfg.p_early)) {
      plant(0, L - cfg.boundary - 1, kEarlyTriggerCode);
      early = true;
    }
    if (rng.bernoulli(cfg.p_late)) {
      plant(std::max<long long>(0, L - cfg.boundary), L - 1, kLateTriggerCode);
      late = true;
    }
    const bool cond = (L > cfg.boundary) && early && late;
    rec.label = rng.bernoulli(cond ? cfg.p_hi : cfg.p_lo) ? 1 : 0;
    out.push_back(std::move(rec));
  }
  return out;
}

EmpiricalOracle empirical_oracle_auroc(const std::vector<PatientRecord>& records, int boundary,
                                       double p_early) {
  std::vector<double> full_scores, trunc_scores;
  std::vector<int> labels;
  for (const PatientRecord& r : records) {
    if (!r.label) continue;
    labels.push_back(*r.label);
    full_scores.push_back(has_condition(r, boundary) ? 1.0 : 0.0);

    // Suffix view: length >= boundary with the late modifier in the kept
    // window is the only informative pattern; its posterior odds scale
    // with p_early but any monotone two-level score gives the same AUROC.
    std::vector<const RawEvent*> flat;
    for (const Visit& v : r.visits)
      for (const RawEvent& e : v.events) flat.push_back(&e);
    const auto L = static_cast<long long>(flat.size());
    bool late_seen = false;
    for (long long i = std::max<long long>(0, L - boundary); i < L; ++i) {
      const RawEvent& e = *flat[static_cast<std::size_t>(i)];
      if (e.modality == Modality::DIAG && e.code && *e.code == kLateTriggerCode) late_seen = true;
    }
    trunc_scores.push_back((L >= boundary && late_seen) ? p_early : 0.0);
  }
  EmpiricalOracle out;
  out.full = auroc(full_scores, labels);
  out.truncated = auroc(trunc_scores, labels);
  return out;
}

std::string cohort_manifest(const GeneratorConfig& cfg, std::uint64_t seed) {
  const OracleAuroc oracle = bayes_optimal_auroc(cfg);
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["n_patients"] = cfg.n_patients;
  nlohmann::ordered_json c;
  c["log_mean_events"] = cfg.log_mean_events;
  c["log_std_events"] = cfg.log_std_events;
  c["max_events"] = cfg.max_events;
  c["events_per_visit"] = cfg.events_per_visit;
  c["n_diag"] = cfg.n_diag;
  c["n_med"] = cfg.n_med;
  c["n_proc"] = cfg.n_proc;
  c["n_test"] = cfg.n_test;
  c["measurement_prob"] = cfg.measurement_prob;
  c["boundary"] = cfg.boundary;
  c["p_early"] = cfg.p_early;
  c["p_late"] = cfg.p_late;
  c["p_hi"] = cfg.p_hi;
  c["p_lo"] = cfg.p_lo;
  c["trigger_density"] = cfg.trigger_density;
  j["config"] = c;
  j["config_hash"] = hash_str(c.dump());
  j["oracle"] = {{"full_auroc", oracle.full},
                 {"truncated_auroc", oracle.truncated},
                 {"p_long", oracle.p_long},
                 {"condition_prevalence", oracle.condition_prevalence}};
  return j.dump(2);
}

}  // namespace hibehrt
