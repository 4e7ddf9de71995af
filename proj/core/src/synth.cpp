#include "dopplerkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dopplerkit/errors.hpp"
#include "dopplerkit/measure.hpp"
#include "dopplerkit/rng.hpp"

namespace dopplerkit {

namespace {

constexpr std::uint64_t kSpeckleTag = 0x5350434bULL;  // per-pixel speckle stream
constexpr std::uint64_t kNoiseTag = 0x4e4f4953ULL;    // per-pixel background stream
constexpr std::uint64_t kCaseTag = 0x43415345ULL;
constexpr std::uint64_t kAssignTag = 0x41534e47ULL;

constexpr double kFillBright = 210.0;
constexpr double kBgSigma = 9.0;
constexpr double kBgMean = 14.0;
// fraction of the record left clear of cycles (split between both edges)
constexpr double kEdgeClearance = 0.08;

double speckle_factor(const CaseSpec& spec, int r, int c) {
    const std::uint64_t key =
        mix_u64(mix_u64(spec.seed, kSpeckleTag), static_cast<std::uint64_t>(r) * spec.cols + c);
    Rng rng(key);
    return 1.0 - 0.5 * spec.noise_level * rng.uniform();
}

double background_noise(const CaseSpec& spec, int r, int c) {
    const std::uint64_t key =
        mix_u64(mix_u64(spec.seed, kNoiseTag), static_cast<std::uint64_t>(r) * spec.cols + c);
    Rng rng(key);
    return spec.noise_level * (rng.gauss12() * kBgSigma + kBgMean);
}

std::uint8_t clamp_byte(double v) {
    const long x = std::lround(v);
    return static_cast<std::uint8_t>(std::clamp(x, 0L, 255L));
}

double fwd_multiplier(const FlowTypeProfile& p) {
    double m = 0.0;
    for (const Lobe& l : p.lobes)
        if (l.polarity > 0) m = std::max(m, l.peak);
    return m;
}

double rev_multiplier(const FlowTypeProfile& p) {
    double m = 0.0;
    for (const Lobe& l : p.lobes)
        if (l.polarity < 0) m = std::max(m, l.peak);
    return m;
}

}  // namespace

double Lobe::area() const {
    if (half_sine) return 2.0 * peak * width() / std::numbers::pi;
    return 0.5 * peak * width();
}

double Lobe::value_at(double t) const {
    if (t < t0 || t >= t1) return 0.0;
    const double u = (t - t0) / width();
    const double mag = half_sine ? peak * std::sin(std::numbers::pi * u)
                                 : peak * (1.0 - std::abs(2.0 * u - 1.0));
    return polarity * mag;
}

double Lobe::max_abs_in(double a, double b) const {
    const double lo = std::max(a, t0);
    const double hi = std::min(b, t1);
    if (lo >= hi) return 0.0;
    // both shapes peak at the midpoint; the max over [lo, hi] sits at the
    // clamped apex
    const double ua = (lo - t0) / width();
    const double ub = (hi - t0) / width();
    const double u = std::clamp(0.5, ua, ub);
    return half_sine ? peak * std::sin(std::numbers::pi * u)
                     : peak * (1.0 - std::abs(2.0 * u - 1.0));
}

const FlowTypeProfile& flow_type_profile(FlowType type) {
    // Period-fraction lobe layouts. Within-direction lobes abut so that each
    // cardiac cycle rasterizes into one beat per direction.
    static const FlowTypeProfile av_inflow{
        {{0.03, 0.41, 1.00, +1, true},   // E wave
         {0.41, 0.68, 0.62, +1, true}},  // A wave
        0.68, 45, 140, 50, 130, false};
    static const FlowTypeProfile av_regurg{
        {{0.05, 0.47, 1.00, -1, true}},  // long systolic regurgitant jet
        0.05, 45, 160, 150, 350, false};
    static const FlowTypeProfile var_ejection{
        {{0.08, 0.44, 1.00, +1, true}},  // systolic ejection
        0.08, 45, 170, 80, 200, false};
    static const FlowTypeProfile var_regurg{
        {{0.40, 0.97, 1.00, -1, true}},  // prolonged diastolic decay
        0.97, 40, 130, 120, 300, false};
    static const FlowTypeProfile tdi_annulus{
        {{0.05, 0.33, 0.70, -1, true},   // s'
         {0.40, 0.64, 1.00, +1, true},   // e'
         {0.64, 0.88, 0.70, +1, true}},  // a'
        0.88, 45, 130, 6, 18, false};
    static const FlowTypeProfile venous_pw{
        {{0.03, 0.37, 1.00, +1, true},    // S wave
         {0.37, 0.71, 0.80, +1, true},    // D wave
         {0.78, 0.94, 0.35, -1, false}},  // atrial reversal
        0.71, 45, 110, 20, 60, false};
    static const FlowTypeProfile outflow_pw{
        {{0.10, 0.46, 1.00, +1, true}},
        0.10, 45, 170, 60, 150, true};

    switch (type) {
        case FlowType::AV_INFLOW: return av_inflow;
        case FlowType::AV_REGURG: return av_regurg;
        case FlowType::VAR_EJECTION: return var_ejection;
        case FlowType::VAR_REGURG: return var_regurg;
        case FlowType::TDI_ANNULUS: return tdi_annulus;
        case FlowType::VENOUS_PW: return venous_pw;
        case FlowType::OUTFLOW_PW: return outflow_pw;
    }
    throw ConfigError("unknown flow type");
}

std::vector<Lobe> case_lobes(const CaseSpec& spec) {
    const FlowTypeProfile& profile = flow_type_profile(spec.flow_type);
    const double T = spec.period_seconds();
    const double t_start = 0.5 * (spec.record_seconds() - spec.n_beats * T);
    std::vector<Lobe> lobes;
    lobes.reserve(profile.lobes.size() * static_cast<std::size_t>(spec.n_beats));
    for (int c = 0; c < spec.n_beats; ++c) {
        for (const Lobe& rel : profile.lobes) {
            Lobe l = rel;
            l.t0 = t_start + (c + rel.t0) * T;
            l.t1 = t_start + (c + rel.t1) * T;
            l.peak = rel.peak * spec.peak_velocity;
            lobes.push_back(l);
        }
    }
    return lobes;
}

double envelope_velocity(const CaseSpec& spec, double t) {
    double v = 0.0;
    for (const Lobe& l : case_lobes(spec)) v += l.value_at(t);
    return v;
}

std::vector<double> envelope_signal(const CaseSpec& spec) {
    const std::vector<Lobe> lobes = case_lobes(spec);
    std::vector<double> v(static_cast<std::size_t>(spec.cols), 0.0);
    for (int c = 0; c < spec.cols; ++c) {
        const double a = c * spec.calibration.sec_per_col;
        const double b = (c + 1) * spec.calibration.sec_per_col;
        double best = 0.0;
        int polarity = +1;
        for (const Lobe& l : lobes) {
            const double m = l.max_abs_in(a, b);
            if (m > best) {
                best = m;
                polarity = l.polarity;
            }
        }
        v[c] = polarity * best;
    }
    return v;
}

void validate_case_spec(const CaseSpec& spec) {
    if (spec.rows < 8 || spec.cols < 8) throw ConfigError("case: image must be at least 8x8");
    if (spec.heart_rate < 30.0 || spec.heart_rate > 180.0)
        throw ConfigError("case: heart rate must lie in [30, 180] bpm");
    if (spec.n_beats < 1) throw ConfigError("case: need at least one beat");
    if (spec.peak_velocity <= 0.0) throw ConfigError("case: peak velocity must be positive");
    if (spec.noise_level < 0.0 || spec.noise_level > 1.0)
        throw ConfigError("case: noise level must lie in [0, 1]");
    if (spec.calibration.sec_per_col <= 0.0 || spec.calibration.cmps_per_row <= 0.0)
        throw ConfigError("case: calibration scales must be positive");
    if (spec.calibration.baseline_row < 0 || spec.calibration.baseline_row >= spec.rows)
        throw ConfigError("case: baseline row outside the image");
    if (spec.n_beats * spec.period_seconds() > spec.record_seconds() + 1e-12)
        throw ConfigError("case: cycles do not fit in the record");
    for (const Lobe& l : case_lobes(spec)) {
        const long extent = std::llround(l.peak / spec.calibration.cmps_per_row);
        const long room = l.polarity > 0 ? spec.calibration.baseline_row
                                         : spec.rows - 1 - spec.calibration.baseline_row;
        if (extent > room) throw ConfigError("case: envelope exceeds the representable velocity range");
    }
}

SegMask rasterize_mask(const CaseSpec& spec, const std::vector<double>& env) {
    SegMask mask = make_mask(spec.rows, spec.cols);
    for (int c = 0; c < spec.cols; ++c) {
        const double v = env[c];
        const long extent = std::llround(std::abs(v) / spec.calibration.cmps_per_row);
        if (extent < 1) continue;
        const std::uint8_t cls = v > 0.0 ? kClassForward : kClassReverse;
        const int dir = v > 0.0 ? -1 : +1;  // forward velocities render above the baseline
        for (long d = 1; d <= extent; ++d) {
            const int r = spec.calibration.baseline_row + dir * static_cast<int>(d);
            mask.at(r, c) = cls;
        }
    }
    return mask;
}

std::vector<std::uint8_t> render_spectrogram(const CaseSpec& spec, const std::vector<double>& env) {
    const FlowTypeProfile& profile = flow_type_profile(spec.flow_type);
    std::vector<std::uint8_t> img(static_cast<std::size_t>(spec.rows) * spec.cols, 0);
    for (int c = 0; c < spec.cols; ++c) {
        const double v = env[c];
        const double vel_rows = std::abs(v) / spec.calibration.cmps_per_row;
        const long extent = std::llround(vel_rows);
        const int dir = v > 0.0 ? -1 : +1;
        for (int r = 0; r < spec.rows; ++r) {
            double fill = 0.0;
            const long d = static_cast<long>(dir * (r - spec.calibration.baseline_row));
            if (extent >= 1 && d >= 1 && d <= extent) {
                // the outermost pixel carries the envelope's sub-pixel coverage,
                // so intensity falls off right at the envelope edge
                double cov = 1.0;
                if (d == extent) cov = std::clamp(vel_rows - (extent - 0.5), 0.0, 1.0);
                double shape = 1.0;
                if (profile.narrow_band) {
                    const double rel = static_cast<double>(d) / static_cast<double>(extent);
                    shape = 0.30 + 0.70 * rel * rel;
                }
                fill = kFillBright * shape * cov * speckle_factor(spec, r, c);
            }
            img[static_cast<std::size_t>(r) * spec.cols + c] =
                clamp_byte(fill + background_noise(spec, r, c));
        }
    }
    return img;
}

namespace {

std::vector<Measurement> analytic_measurements(const CaseSpec& spec, const std::vector<Beat>& beats,
                                               const std::vector<Lobe>& lobes) {
    std::vector<Measurement> out;
    out.reserve(beats.size());
    const double spc = spec.calibration.sec_per_col;
    for (const Beat& b : beats) {
        const double bs = b.start_col * spc;
        const double be = (b.end_col + 1) * spc;
        double vmax = 0.0, vti = 0.0;
        for (const Lobe& l : lobes) {
            const bool same_dir = (l.polarity > 0) == (b.direction == FlowDirection::forward);
            if (!same_dir) continue;
            if (std::max(l.t0, bs) < std::min(l.t1, be)) {
                vmax = std::max(vmax, l.peak);
                vti += l.area();
            }
        }
        out.push_back({b, vmax, vti});
    }
    return out;
}

}  // namespace

SynthCase generate_case(const CaseSpec& spec) {
    validate_case_spec(spec);
    const std::vector<double> env = envelope_signal(spec);
    const std::vector<Lobe> lobes = case_lobes(spec);

    SynthCase out;
    out.spec = spec;
    out.calibration = spec.calibration;
    out.flow_type = spec.flow_type;
    out.gt_mask = rasterize_mask(spec, env);
    out.gt_beats = extract_beats(out.gt_mask, spec.calibration);
    out.gt_measurements = analytic_measurements(spec, out.gt_beats, lobes);

    const double T = spec.period_seconds();
    const double t_start = 0.5 * (spec.record_seconds() - spec.n_beats * T);
    const double ed_frac = flow_type_profile(spec.flow_type).ed_frac;
    for (int c = 0; c < spec.n_beats; ++c) out.gt_ed_times.push_back(t_start + (c + ed_frac) * T);

    out.image = render_spectrogram(spec, env);
    return out;
}

SynthCase apply_baseline_shift(const SynthCase& c, int delta_rows) {
    const int rows = c.spec.rows, cols = c.spec.cols;
    if (std::abs(delta_rows) >= rows) throw ContractError("baseline shift exceeds the image height");
    if (delta_rows == 0) return c;

    int min_r = rows, max_r = -1;
    for (int r = 0; r < rows; ++r)
        for (int col = 0; col < cols; ++col)
            if (c.gt_mask.at(r, col) != kClassBackground) {
                min_r = std::min(min_r, r);
                max_r = std::max(max_r, r);
            }
    const int base = c.calibration.baseline_row;
    const int lo = std::min(min_r, base), hi = std::max(max_r, base);
    if (lo + delta_rows < 0 || hi + delta_rows >= rows)
        throw ContractError("baseline shift clips the envelope");

    SynthCase out = c;
    out.calibration.baseline_row += delta_rows;
    out.spec.calibration.baseline_row += delta_rows;
    out.gt_mask = make_mask(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const int src = r - delta_rows;
        for (int col = 0; col < cols; ++col) {
            if (src >= 0 && src < rows) {
                out.gt_mask.at(r, col) = c.gt_mask.at(src, col);
                out.image[static_cast<std::size_t>(r) * cols + col] =
                    c.image[static_cast<std::size_t>(src) * cols + col];
            } else {
                out.gt_mask.at(r, col) = kClassBackground;
                out.image[static_cast<std::size_t>(r) * cols + col] =
                    clamp_byte(background_noise(c.spec, r, col));
            }
        }
    }
    return out;
}

std::vector<FlowType> dataset_type_assignment(const DatasetConfig& config) {
    std::map<FlowType, double> mix = config.type_mix;
    if (mix.empty())
        for (FlowType t : all_flow_types()) mix[t] = 1.0 / kNumFlowTypes;
    double total = 0.0;
    for (const auto& [t, f] : mix) {
        if (f < 0.0) throw ConfigError("type mix fractions must be non-negative");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("type mix fractions must sum to 1");

    // largest-remainder apportionment
    std::vector<std::pair<FlowType, double>> entries(mix.begin(), mix.end());
    std::vector<int> counts(entries.size());
    std::vector<std::pair<double, std::size_t>> rema;
    int assigned = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const double exact = entries[i].second * config.n_cases;
        counts[i] = static_cast<int>(std::floor(exact));
        assigned += counts[i];
        rema.push_back({exact - counts[i], i});
    }
    std::stable_sort(rema.begin(), rema.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int k = 0; k < config.n_cases - assigned; ++k) counts[rema[k % rema.size()].second] += 1;

    std::vector<FlowType> assignment;
    assignment.reserve(static_cast<std::size_t>(config.n_cases));
    for (std::size_t i = 0; i < entries.size(); ++i)
        for (int k = 0; k < counts[i]; ++k) assignment.push_back(entries[i].first);
    Rng rng(mix_u64(config.seed, kAssignTag));
    rng.shuffle(assignment);
    return assignment;
}

CaseSpec dataset_case_spec(const DatasetConfig& config, FlowType type, std::uint64_t case_seed) {
    const FlowTypeProfile& profile = flow_type_profile(type);
    Rng rng(case_seed);
    CaseSpec spec;
    spec.flow_type = type;
    spec.rows = config.rows;
    spec.cols = config.cols;
    spec.seed = case_seed;
    spec.heart_rate = rng.uniform(profile.hr_lo, profile.hr_hi);
    spec.peak_velocity = rng.uniform(profile.velocity_lo, profile.velocity_hi);
    spec.noise_level = rng.uniform(config.noise_lo, config.noise_hi);

    const double record = config.record_seconds;
    const double T = 60.0 / spec.heart_rate;
    spec.n_beats = std::max(1, static_cast<int>(std::floor((1.0 - kEdgeClearance) * record / T)));

    spec.calibration.sec_per_col = record / config.cols;
    const double fwd = fwd_multiplier(profile);
    const double rev = rev_multiplier(profile);
    const int margin = config.max_abs_shift_rows;
    const int usable = config.rows - 2 * margin;
    if (usable < 10) throw ConfigError("dataset: shift margin leaves too few usable rows");
    int fwd_rows, rev_rows;
    if (rev == 0.0) {
        fwd_rows = usable - 1;
        rev_rows = 0;
    } else if (fwd == 0.0) {
        fwd_rows = 0;
        rev_rows = usable - 1;
    } else {
        fwd_rows = std::max(3, static_cast<int>(std::llround((usable - 1) * fwd / (fwd + rev))));
        fwd_rows = std::min(fwd_rows, usable - 1 - 3);
        rev_rows = usable - 1 - fwd_rows;
    }
    spec.calibration.baseline_row = margin + fwd_rows;
    double cpr = 0.0;
    if (fwd > 0.0) cpr = std::max(cpr, fwd * spec.peak_velocity / (0.92 * fwd_rows));
    if (rev > 0.0) cpr = std::max(cpr, rev * spec.peak_velocity / (0.92 * rev_rows));
    spec.calibration.cmps_per_row = cpr;
    return spec;
}

std::vector<SynthCase> make_dataset(const DatasetConfig& config) {
    if (config.n_cases < 1) throw ConfigError("dataset: need at least one case");
    const std::vector<FlowType> assignment = dataset_type_assignment(config);
    std::vector<SynthCase> cases;
    cases.reserve(assignment.size());
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        const std::uint64_t case_seed = mix_u64(mix_u64(config.seed, kCaseTag), i);
        cases.push_back(generate_case(dataset_case_spec(config, assignment[i], case_seed)));
    }
    return cases;
}

}  // namespace dopplerkit
