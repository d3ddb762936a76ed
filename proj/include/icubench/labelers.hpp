#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "icubench/frame.hpp"

namespace icubench::labelers {

struct TimedValue {
    std::int64_t time_min;
    double value;
};
using Series = std::vector<TimedValue>;  // sorted by time

struct AbxEvent {
    std::int64_t time_min;
    double duration_h = 0;  // > 0 marks a prescription span
};

// Sepsis-3 parameters; the defaults reproduce the Seymour-style definition,
// abx_continuity_days = 0 plus abx_only reproduces the Moor-style variant.
struct SepsisDefinition {
    double sofa_delta = 2.0;
    double sofa_lookback_h = 24.0;
    double window_before_h = 48.0;
    double window_after_h = 24.0;
    double culture_after_abx_max_h = 24.0;
    double abx_after_culture_max_h = 72.0;
    double abx_continuity_days = 3.0;  // 0 disables the continuity requirement
    enum class SuspicionMode { abx_and_culture, abx_only };
    SuspicionMode suspicion_mode = SuspicionMode::abx_and_culture;

    void validate() const;
};

struct KdigoInputs {
    Series creatinine;               // mg/dL
    Series urine;                    // mL volumes per measurement
    double weight_kg = kMissing;     // 75 kg assumed when missing
    std::vector<std::int64_t> rrt_times;  // renal replacement therapy starts
};

// Lowest creatinine over the trailing 7 days (t-7d, t]; NaN when the window is empty.
double compute_baseline_creatinine(const Series& creatinine, std::int64_t t);

struct UrineRate {
    std::int64_t time_min;
    double rate;        // mL/kg/h
    double covered_h;   // hours this measurement accounts for
    bool chain_start;   // true when the >24h-gap rule restarted the divisor
};

// Volume divided by hours since the previous measurement (max gap 24 h; larger
// gaps restart with divisor 1, as does the earliest measurement), then by weight
// (75 kg when missing).
std::vector<UrineRate> compute_urine_rate(const Series& urine, double weight_kg);

// KDIGO stage in {0,1,2,3} at time t: max over the creatinine criterion
// (ratio to 7-day baseline; 0.3 mg/dL rise within 48 h; >=4.0 mg/dL with a
// qualifying rise), the urine-rate criterion, and renal replacement therapy.
int kdigo_stage(const KdigoInputs& inputs, std::int64_t t);

struct HourlyLabelParams {
    double horizon_h = 6.0;   // label hour h positive iff onset in (h, h+W]
    bool any_future = false;  // instead: every emitted row of an onset stay is positive
};

struct TaskLabels {
    std::string task;
    std::optional<double> stay_label;        // once-per-stay tasks
    std::vector<double> hourly;              // hourly tasks; index = bin
    std::optional<std::int64_t> onset_min;   // minutes relative to admission
};

// death flag: the dataset must declare mortality recording for missing flags to
// mean survival; callers pass has_death_concept accordingly.
TaskLabels label_mortality(bool death_event_present, bool dataset_records_mortality);

TaskLabels label_aki(const KdigoInputs& inputs, int n_bins, const HourlyLabelParams& params,
                     bool ordinal_stage = false);

std::vector<std::int64_t> qualifying_abx_starts(const std::vector<AbxEvent>& abx, double los_h,
                                                std::optional<std::int64_t> death_min,
                                                const SepsisDefinition& def);

std::vector<std::int64_t> detect_suspicion(const std::vector<AbxEvent>& abx,
                                           const std::vector<std::int64_t>& culture_times, double los_h,
                                           std::optional<std::int64_t> death_min,
                                           const SepsisDefinition& def);

TaskLabels label_sepsis(const Series& sofa, const std::vector<std::int64_t>& suspicion_times, int n_bins,
                        const SepsisDefinition& def, const HourlyLabelParams& params);

// Median creatinine over [24 h, 48 h); NaN when no measurement falls inside.
double label_kidney_function(const Series& creatinine);

// Remaining hours until discharge per bin, capped at 168.
TaskLabels label_remaining_los(double los_h, int n_bins);

// Shared windowing for hourly onset tasks: rows 0..onset_hour-1 (all bins when
// no onset), labeled per HourlyLabelParams.
std::vector<double> hourly_onset_labels(std::optional<std::int64_t> onset_min, int n_bins,
                                        const HourlyLabelParams& params);

}  // namespace icubench::labelers
