#include "icubench/labelers.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace icubench::labelers {

namespace {

constexpr std::int64_t kMinutesPerHour = 60;
constexpr std::int64_t kBaselineWindowMin = 7 * 24 * kMinutesPerHour;
constexpr std::int64_t kRiseWindowMin = 48 * kMinutesPerHour;
constexpr double kDefaultWeightKg = 75.0;
constexpr double kMaxUrineGapH = 24.0;

bool sorted_by_time(const Series& s) {
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i].time_min < s[i - 1].time_min) return false;
    return true;
}

}  // namespace

void SepsisDefinition::validate() const {
    if (sofa_lookback_h < 0 || window_before_h < 0 || window_after_h < 0 ||
        culture_after_abx_max_h < 0 || abx_after_culture_max_h < 0 || abx_continuity_days < 0)
        throw ConfigError("sepsis definition windows must be >= 0");
}

double compute_baseline_creatinine(const Series& creatinine, std::int64_t t) {
    double best = kMissing;
    for (const auto& m : creatinine) {
        if (m.time_min > t) break;
        if (m.time_min <= t - kBaselineWindowMin) continue;
        if (is_missing(best) || m.value < best) best = m.value;
    }
    return best;
}

std::vector<UrineRate> compute_urine_rate(const Series& urine, double weight_kg) {
    if (!sorted_by_time(urine)) throw DataError("urine series not sorted by time");
    double kg = is_missing(weight_kg) ? kDefaultWeightKg : weight_kg;
    std::vector<UrineRate> rates;
    rates.reserve(urine.size());
    for (std::size_t i = 0; i < urine.size(); ++i) {
        if (urine[i].value < 0) throw DataError("negative urine volume");
        UrineRate r;
        r.time_min = urine[i].time_min;
        if (i == 0) {
            r.covered_h = 1.0;
            r.chain_start = true;
        } else {
            double gap_h = static_cast<double>(urine[i].time_min - urine[i - 1].time_min) / 60.0;
            if (gap_h > kMaxUrineGapH) {
                r.covered_h = 1.0;  // divisor restarts at 1 after a >24h gap
                r.chain_start = true;
            } else {
                r.covered_h = gap_h;
                r.chain_start = false;
            }
        }
        double divisor_h = std::max(r.covered_h, 1e-9);
        r.rate = urine[i].value / divisor_h / kg;
        rates.push_back(r);
    }
    return rates;
}

namespace {

int creatinine_stage(const Series& crea, std::int64_t t) {
    // latest value and minima over the trailing windows
    double current = kMissing;
    double base7 = kMissing, min48 = kMissing, current48 = kMissing;
    for (const auto& m : crea) {
        if (m.time_min > t) break;
        if (m.time_min > t - kBaselineWindowMin) {
            current = m.value;
            if (is_missing(base7) || m.value < base7) base7 = m.value;
        }
        if (m.time_min > t - kRiseWindowMin) {
            current48 = m.value;
            if (is_missing(min48) || m.value < min48) min48 = m.value;
        }
    }
    int stage = 0;
    if (!is_missing(current) && !is_missing(base7) && base7 > 0) {
        double ratio = current / base7;
        if (ratio >= 3.0) stage = 3;
        else if (ratio >= 2.0) stage = 2;
        else if (ratio >= 1.5) stage = 1;
    }
    if (!is_missing(current48) && !is_missing(min48)) {
        double rise = current48 - min48;
        if (rise >= 0.3) {
            stage = std::max(stage, 1);
            if (current48 >= 4.0) stage = 3;
        }
    }
    return stage;
}

// Duration (hours) of the low-rate run ending at the last rate measurement <= t.
// Runs break at chain restarts (>24h gaps).
double low_rate_duration(const std::vector<UrineRate>& rates, std::int64_t t, double threshold) {
    std::ptrdiff_t idx = -1;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (rates[i].time_min <= t) idx = static_cast<std::ptrdiff_t>(i);
        else break;
    }
    double dur = 0;
    for (std::ptrdiff_t i = idx; i >= 0; --i) {
        const auto& r = rates[static_cast<std::size_t>(i)];
        if (r.rate >= threshold) break;
        dur += r.covered_h;
        if (r.chain_start) break;
    }
    return dur;
}

int urine_stage(const std::vector<UrineRate>& rates, std::int64_t t) {
    if (rates.empty()) return 0;
    if (low_rate_duration(rates, t, 0.3) >= 24.0) return 3;       // <0.3 for >=24h
    if (low_rate_duration(rates, t, 1e-9) >= 12.0) return 3;      // anuria >=12h
    double low05 = low_rate_duration(rates, t, 0.5);
    if (low05 >= 12.0) return 2;
    if (low05 >= 6.0) return 1;
    return 0;
}

}  // namespace

int kdigo_stage(const KdigoInputs& inputs, std::int64_t t) {
    if (!sorted_by_time(inputs.creatinine)) throw DataError("creatinine series not sorted by time");
    for (const auto& m : inputs.creatinine)
        if (m.value <= 0) throw DataError("creatinine must be > 0");
    int stage = creatinine_stage(inputs.creatinine, t);
    auto rates = compute_urine_rate(inputs.urine, inputs.weight_kg);
    stage = std::max(stage, urine_stage(rates, t));
    for (auto rrt : inputs.rrt_times)
        if (rrt <= t) return 3;
    return stage;
}

std::vector<double> hourly_onset_labels(std::optional<std::int64_t> onset_min, int n_bins,
                                        const HourlyLabelParams& params) {
    int rows = n_bins;
    if (onset_min) {
        int onset_hour = static_cast<int>(*onset_min / kMinutesPerHour);
        rows = std::min(rows, onset_hour);
    }
    rows = std::max(rows, 0);
    std::vector<double> labels(static_cast<std::size_t>(rows), 0.0);
    if (!onset_min) return labels;
    for (int h = 0; h < rows; ++h) {
        if (params.any_future) {
            labels[static_cast<std::size_t>(h)] = 1.0;
        } else {
            std::int64_t lo = static_cast<std::int64_t>(h) * kMinutesPerHour;
            auto hi = static_cast<std::int64_t>((static_cast<double>(h) + params.horizon_h) * 60.0);
            if (*onset_min > lo && *onset_min <= hi) labels[static_cast<std::size_t>(h)] = 1.0;
        }
    }
    return labels;
}

TaskLabels label_mortality(bool death_event_present, bool dataset_records_mortality) {
    if (!death_event_present && !dataset_records_mortality)
        throw DataError("mortality label unavailable: dataset does not record ICU death");
    TaskLabels out;
    out.task = "mortality";
    out.stay_label = death_event_present ? 1.0 : 0.0;
    return out;
}

TaskLabels label_aki(const KdigoInputs& inputs, int n_bins, const HourlyLabelParams& params,
                     bool ordinal_stage) {
    // candidate evaluation times: every event that can change the stage
    std::set<std::int64_t> times;
    for (const auto& m : inputs.creatinine) times.insert(m.time_min);
    for (const auto& m : inputs.urine) times.insert(m.time_min);
    for (auto t : inputs.rrt_times) times.insert(t);

    // onset may precede admission (negative t); task exclusions depend on that
    std::optional<std::int64_t> onset;
    std::vector<std::pair<std::int64_t, int>> stages;  // (time, stage) at in-stay events
    for (auto t : times) {
        int s = kdigo_stage(inputs, t);
        if (t >= 0) stages.emplace_back(t, s);
        if (s >= 1 && !onset) onset = t;
    }

    TaskLabels out;
    out.task = ordinal_stage ? "kdigo" : "aki";
    out.onset_min = onset;
    if (ordinal_stage) {
        // per-bin max stage, carried forward between events
        out.hourly.assign(static_cast<std::size_t>(n_bins), 0.0);
        int carry = 0;
        std::size_t e = 0;
        for (int h = 0; h < n_bins; ++h) {
            int stage_h = carry;
            while (e < stages.size() && stages[e].first < (static_cast<std::int64_t>(h) + 1) * 60) {
                stage_h = std::max(stage_h, stages[e].second);
                carry = stages[e].second;
                ++e;
            }
            out.hourly[static_cast<std::size_t>(h)] = stage_h;
        }
    } else {
        out.hourly = hourly_onset_labels(onset, n_bins, params);
    }
    return out;
}

std::vector<std::int64_t> qualifying_abx_starts(const std::vector<AbxEvent>& abx, double los_h,
                                                std::optional<std::int64_t> death_min,
                                                const SepsisDefinition& def) {
    std::vector<AbxEvent> sorted = abx;
    std::sort(sorted.begin(), sorted.end(),
              [](const AbxEvent& a, const AbxEvent& b) { return a.time_min < b.time_min; });
    std::vector<std::int64_t> starts;
    double need_min = def.abx_continuity_days * 24.0 * 60.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (def.abx_continuity_days == 0) {
            starts.push_back(sorted[i].time_min);
            continue;
        }
        // prescription spanning the whole ICU stay qualifies on its own
        if (sorted[i].duration_h > 0 && sorted[i].time_min <= 0 &&
            static_cast<double>(sorted[i].time_min) + sorted[i].duration_h * 60.0 >= los_h * 60.0) {
            starts.push_back(sorted[i].time_min);
            continue;
        }
        // walk the q24h chain from this start
        std::int64_t last = sorted[i].time_min;
        for (std::size_t j = i + 1; j < sorted.size(); ++j) {
            if (sorted[j].time_min - last > 24 * 60) break;
            last = sorted[j].time_min;
        }
        double coverage_min = static_cast<double>(last - sorted[i].time_min);
        bool until_death = death_min && *death_min >= last && *death_min - last <= 24 * 60;
        if (coverage_min >= need_min || until_death) starts.push_back(sorted[i].time_min);
    }
    std::sort(starts.begin(), starts.end());
    starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
    return starts;
}

std::vector<std::int64_t> detect_suspicion(const std::vector<AbxEvent>& abx,
                                           const std::vector<std::int64_t>& culture_times, double los_h,
                                           std::optional<std::int64_t> death_min,
                                           const SepsisDefinition& def) {
    def.validate();
    auto abx_starts = qualifying_abx_starts(abx, los_h, death_min, def);
    std::set<std::int64_t> suspicions;
    if (def.suspicion_mode == SepsisDefinition::SuspicionMode::abx_only) {
        suspicions.insert(abx_starts.begin(), abx_starts.end());
    } else {
        for (auto a : abx_starts) {
            for (auto c : culture_times) {
                double culture_after = static_cast<double>(c - a) / 60.0;
                double abx_after = static_cast<double>(a - c) / 60.0;
                bool pair = (culture_after >= 0 && culture_after <= def.culture_after_abx_max_h) ||
                            (abx_after >= 0 && abx_after <= def.abx_after_culture_max_h);
                if (pair) suspicions.insert(std::min(a, c));
            }
        }
    }
    return {suspicions.begin(), suspicions.end()};
}

TaskLabels label_sepsis(const Series& sofa, const std::vector<std::int64_t>& suspicion_times, int n_bins,
                        const SepsisDefinition& def, const HourlyLabelParams& params) {
    def.validate();
    if (!sorted_by_time(sofa)) throw DataError("sofa series not sorted by time");
    if (sofa.empty()) {
        // a stay without any sofa measurement cannot show organ dysfunction;
        // dataset-level sofa availability is enforced upstream
        TaskLabels out;
        out.task = "sepsis";
        out.hourly = hourly_onset_labels(std::nullopt, n_bins, params);
        return out;
    }

    // hourly SOFA: last value per bin, forward-filled
    std::vector<double> hourly(static_cast<std::size_t>(std::max(n_bins, 0)), kMissing);
    for (const auto& m : sofa) {
        std::int64_t h = m.time_min / 60;
        if (m.time_min < 0) continue;
        if (h >= n_bins) break;
        hourly[static_cast<std::size_t>(h)] = m.value;
    }
    for (std::size_t h = 1; h < hourly.size(); ++h)
        if (is_missing(hourly[h])) hourly[h] = hourly[h - 1];

    int lookback = static_cast<int>(std::lround(def.sofa_lookback_h));
    std::optional<std::int64_t> onset;
    for (int h = 0; h < n_bins; ++h) {
        double cur = hourly[static_cast<std::size_t>(h)];
        if (is_missing(cur)) continue;
        double lowest = cur;
        for (int back = std::max(0, h - lookback + 1); back <= h; ++back) {
            double v = hourly[static_cast<std::size_t>(back)];
            if (!is_missing(v)) lowest = std::min(lowest, v);
        }
        if (cur - lowest < def.sofa_delta) continue;
        // organ dysfunction at hour h; sepsis onset iff inside a suspicion window
        std::int64_t t = static_cast<std::int64_t>(h) * 60;
        for (auto s : suspicion_times) {
            double before = static_cast<double>(s) - def.window_before_h * 60.0;
            double after = static_cast<double>(s) + def.window_after_h * 60.0;
            if (static_cast<double>(t) >= before && static_cast<double>(t) <= after) {
                onset = t;
                break;
            }
        }
        if (onset) break;
    }

    TaskLabels out;
    out.task = "sepsis";
    out.onset_min = onset;
    out.hourly = hourly_onset_labels(onset, n_bins, params);
    return out;
}

double label_kidney_function(const Series& creatinine) {
    std::vector<double> window;
    for (const auto& m : creatinine) {
        if (m.time_min >= 24 * 60 && m.time_min < 48 * 60) window.push_back(m.value);
    }
    if (window.empty()) return kMissing;
    std::sort(window.begin(), window.end());
    std::size_t n = window.size();
    if (n % 2 == 1) return window[n / 2];
    return (window[n / 2 - 1] + window[n / 2]) / 2.0;
}

TaskLabels label_remaining_los(double los_h, int n_bins) {
    TaskLabels out;
    out.task = "los";
    out.hourly.resize(static_cast<std::size_t>(std::max(n_bins, 0)));
    for (int h = 0; h < n_bins; ++h)
        out.hourly[static_cast<std::size_t>(h)] = std::min(los_h - h, 168.0);
    return out;
}

}  // namespace icubench::labelers
