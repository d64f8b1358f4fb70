#include "gmetro/lasers.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "gmetro/error.hpp"

namespace gmetro::lasers {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double frac(double x) { return x - std::floor(x); }

}  // namespace

// ---- validation ----

void MemsVcselModel::validate() const {
  if (!(n_eff > 0.0) || !(length_min_um > 0.0) || !(length_min_um < length_max_um) || !(gain_bandwidth_thz > 0.0)) {
    throw Error(ErrorCode::InvalidModel, "MEMS VCSEL parameters out of domain");
  }
  const double fsr = kLightUmThz / (2.0 * n_eff * length_max_um);
  if (fsr <= gain_bandwidth_thz) {
    throw Error(ErrorCode::InvalidModel, "cavity too long: more than one mode fits the gain band");
  }
}

void ThermalDbrModel::validate() const {
  if (!(dlambda_dt_nm_per_k > 0.0)) throw Error(ErrorCode::InvalidModel, "dlambda_dT must be positive");
  if (!(cavity_fsr_ghz > 0.0) || !(reflection_bandwidth_ghz > 0.0)) {
    throw Error(ErrorCode::InvalidModel, "cavity FSR and reflection bandwidth must be positive");
  }
  if (!(reflection_bandwidth_ghz < cavity_fsr_ghz)) {
    throw Error(ErrorCode::InvalidModel, "reflection bandwidth must be narrower than the cavity mode spacing");
  }
  if (!(temp_min_k < temp_max_k)) throw Error(ErrorCode::InvalidModel, "empty temperature range");
}

double ThermalDbrModel::bragg_wavelength_nm() const {
  return bragg_wavelength_ref_nm + dlambda_dt_nm_per_k * (grating_temp_k - t_ref_k);
}

double ThermalDbrModel::bragg_frequency_thz() const { return kLightNmThz / bragg_wavelength_nm(); }

double VernierModel::power_dbm() const {
  const double mw = std::max(slope_mw_per_ma * (gain_current_ma - threshold_current_ma), 1e-6);
  return 10.0 * std::log10(mw);
}

void VernierModel::validate() const {
  if (!(fsr_front_ghz > 0.0) || !(fsr_back_ghz > 0.0)) throw Error(ErrorCode::InvalidModel, "comb FSRs must be positive");
  if (fsr_front_ghz == fsr_back_ghz) throw Error(ErrorCode::InvalidModel, "Vernier combs need different FSRs");
  if (!(band_low_thz < band_high_thz)) throw Error(ErrorCode::InvalidModel, "empty gain band");
  if (vernier_range_ghz(fsr_front_ghz, fsr_back_ghz) < (band_high_thz - band_low_thz) * 1e3) {
    throw Error(ErrorCode::InvalidModel, "Vernier range does not cover the gain band");
  }
  if (!(comb_linewidth_ghz > 0.0) || !(cavity_fsr_ghz > 0.0)) {
    throw Error(ErrorCode::InvalidModel, "comb linewidth and cavity FSR must be positive");
  }
}

std::string_view family_name(const Laser& laser) {
  return std::visit(Overloaded{[](const MemsVcselModel&) { return std::string_view("mems"); },
                               [](const ThermalDbrModel&) { return std::string_view("dbr"); },
                               [](const VernierModel&) { return std::string_view("vernier"); }},
                    laser);
}

// ---- emission ----

EmissionState mems_emission(const MemsVcselModel& m) {
  if (m.cavity_length_um < m.length_min_um || m.cavity_length_um > m.length_max_um) {
    throw Error(ErrorCode::OutOfRange, "cavity length outside the actuator range");
  }
  const double fsr = kLightUmThz / (2.0 * m.n_eff * m.cavity_length_um);
  const double lo = m.gain_center_thz - 0.5 * m.gain_bandwidth_thz;
  const double hi = m.gain_center_thz + 0.5 * m.gain_bandwidth_thz;
  const auto first = static_cast<long>(std::ceil(lo / fsr));
  const auto last = static_cast<long>(std::floor(hi / fsr));
  if (first > last || last < 1) throw Error(ErrorCode::NoModeInBand, "no cavity resonance inside the gain band");
  long best = first;
  for (long order = first; order <= last; ++order) {
    if (std::abs(order * fsr - m.gain_center_thz) < std::abs(best * fsr - m.gain_center_thz)) best = order;
  }
  EmissionState e;
  e.frequency_thz = static_cast<double>(best) * fsr + m.frequency_error_ghz * 1e-3;
  e.power_dbm = m.power_dbm;
  e.single_mode = first == last;
  e.mode_index = best;
  return e;
}

EmissionState dbr_emission(const ThermalDbrModel& m) {
  if (m.grating_temp_k < m.temp_min_k || m.grating_temp_k > m.temp_max_k) {
    throw Error(ErrorCode::OutOfRange, "grating temperature outside the heater range");
  }
  const double peak_ghz = (m.bragg_frequency_thz() - m.comb_origin_thz) * 1e3;
  // Cavity modes at origin + (k + phase)·FSR; the one nearest the Bragg peak lases.
  const double pos = peak_ghz / m.cavity_fsr_ghz - m.phase_shift;
  const auto k = static_cast<long>(std::llround(pos));
  const double mode_ghz = (static_cast<double>(k) + m.phase_shift) * m.cavity_fsr_ghz;
  const long runner = (pos > static_cast<double>(k)) ? k + 1 : k - 1;
  const double runner_ghz = (static_cast<double>(runner) + m.phase_shift) * m.cavity_fsr_ghz;
  EmissionState e;
  e.frequency_thz = m.comb_origin_thz + mode_ghz * 1e-3 + m.frequency_error_ghz * 1e-3;
  e.power_dbm = m.power_dbm;
  e.single_mode = std::abs(runner_ghz - peak_ghz) > 0.5 * m.reflection_bandwidth_ghz;
  e.mode_index = k;
  return e;
}

double vernier_range_ghz(double f1, double f2) { return f1 * f2 / std::abs(f1 - f2); }

std::vector<Supermode> vernier_supermodes(const VernierModel& m, double lo_thz, double hi_thz) {
  const double f1 = m.fsr_front_ghz, f2 = m.fsr_back_ghz, df = f2 - f1;
  const double lo = (lo_thz - m.comb_origin_thz) * 1e3;
  const double hi = (hi_thz - m.comb_origin_thz) * 1e3;
  // |envelope - front peak| = |d|·F1/|ΔF| <= linewidth·F1/|ΔF|
  const double reach = m.comb_linewidth_ghz * f1 / std::abs(df) + f1;
  const auto i_lo = static_cast<long>(std::floor((lo - reach - m.comb_offset_front_ghz) / f1));
  const auto i_hi = static_cast<long>(std::ceil((hi + reach - m.comb_offset_front_ghz) / f1));
  std::vector<Supermode> found;
  for (long i = i_lo; i <= i_hi; ++i) {
    const double p = m.comb_offset_front_ghz + static_cast<double>(i) * f1;
    const double j = std::round((p - m.comb_offset_back_ghz) / f2);
    const double q = m.comb_offset_back_ghz + j * f2;
    const double d = q - p;
    if (std::abs(d) > m.comb_linewidth_ghz) continue;
    const double x = p - d * f1 / df;
    if (x < lo || x > hi) continue;
    found.push_back({m.comb_origin_thz + x * 1e-3, d, i});
  }
  std::sort(found.begin(), found.end(), [](const Supermode& a, const Supermode& b) {
    return a.frequency_thz < b.frequency_thz;
  });
  std::vector<Supermode> merged;
  for (const auto& s : found) {
    if (!merged.empty() && std::abs(s.frequency_thz - merged.back().frequency_thz) < 1e-9) {
      if (std::abs(s.mismatch_ghz) < std::abs(merged.back().mismatch_ghz)) merged.back() = s;
    } else {
      merged.push_back(s);
    }
  }
  return merged;
}

EmissionState vernier_emission(const VernierModel& m) {
  const auto modes = vernier_supermodes(m, m.band_low_thz, m.band_high_thz);
  if (modes.empty()) throw Error(ErrorCode::NoCoincidence, "no comb coincidence inside the gain band");
  const auto best = std::min_element(modes.begin(), modes.end(), [](const Supermode& a, const Supermode& b) {
    return std::abs(a.mismatch_ghz) < std::abs(b.mismatch_ghz);
  });
  const double x = (best->frequency_thz - m.comb_origin_thz) * 1e3;
  const auto k = static_cast<long>(std::llround(x / m.cavity_fsr_ghz - m.phase_shift));
  const double mode_ghz = (static_cast<double>(k) + m.phase_shift) * m.cavity_fsr_ghz;
  EmissionState e;
  e.frequency_thz = m.comb_origin_thz + (mode_ghz + m.frequency_error_ghz) * 1e-3;
  e.power_dbm = m.power_dbm();
  e.single_mode = modes.size() == 1;
  e.mode_index = k;
  return e;
}

EmissionState emission(const Laser& laser) {
  return std::visit(Overloaded{[](const MemsVcselModel& m) { return mems_emission(m); },
                               [](const ThermalDbrModel& m) { return dbr_emission(m); },
                               [](const VernierModel& m) { return vernier_emission(m); }},
                    laser);
}

// ---- knobs ----

std::size_t knob_count(const Laser& laser) {
  return std::visit(Overloaded{[](const MemsVcselModel&) { return std::size_t{1}; },
                               [](const ThermalDbrModel&) { return std::size_t{2}; },
                               [](const VernierModel&) { return std::size_t{3}; }},
                    laser);
}

std::vector<KnobRange> knob_ranges(const Laser& laser) {
  return std::visit(
      Overloaded{
          [](const MemsVcselModel& m) {
            // An eighth of the mode spacing, expressed as a length step.
            const double mid = 0.5 * (m.length_min_um + m.length_max_um);
            const double step = mid / 8.0 / (m.gain_center_thz / (kLightUmThz / (2.0 * m.n_eff * mid)));
            return std::vector<KnobRange>{{m.length_min_um, m.length_max_um, step}};
          },
          [](const ThermalDbrModel& m) {
            const double lambda = m.bragg_wavelength_ref_nm;
            const double ghz_per_k = kLightNmThz * 1e3 * m.dlambda_dt_nm_per_k / (lambda * lambda);
            return std::vector<KnobRange>{{m.temp_min_k, m.temp_max_k, m.cavity_fsr_ghz / 8.0 / ghz_per_k},
                                          {0.0, 1.0, 1.0 / 8.0}};
          },
          [](const VernierModel& m) {
            const double step = std::abs(m.fsr_back_ghz - m.fsr_front_ghz) / 8.0;
            return std::vector<KnobRange>{{-0.5 * m.fsr_front_ghz, 0.5 * m.fsr_front_ghz, step},
                                          {-0.5 * m.fsr_back_ghz, 0.5 * m.fsr_back_ghz, step},
                                          {0.0, 1.0, 1.0 / 8.0}};
          }},
      laser);
}

std::vector<double> knobs(const Laser& laser) {
  return std::visit(
      Overloaded{[](const MemsVcselModel& m) { return std::vector<double>{m.cavity_length_um}; },
                 [](const ThermalDbrModel& m) { return std::vector<double>{m.grating_temp_k, m.phase_shift}; },
                 [](const VernierModel& m) {
                   return std::vector<double>{m.comb_offset_front_ghz, m.comb_offset_back_ghz, m.phase_shift};
                 }},
      laser);
}

EmissionState apply_tuning(Laser& laser, std::span<const double> k) {
  if (k.size() != knob_count(laser)) {
    throw Error(ErrorCode::KnobDimensionMismatch, std::string(family_name(laser)) + " takes " +
                                                      std::to_string(knob_count(laser)) + " knobs, got " +
                                                      std::to_string(k.size()));
  }
  std::visit(Overloaded{[&](MemsVcselModel& m) { m.cavity_length_um = k[0]; },
                        [&](ThermalDbrModel& m) {
                          m.grating_temp_k = k[0];
                          m.phase_shift = k[1];
                        },
                        [&](VernierModel& m) {
                          m.comb_offset_front_ghz = k[0];
                          m.comb_offset_back_ghz = k[1];
                          m.phase_shift = k[2];
                        }},
             laser);
  return emission(laser);
}

std::vector<double> nominal_knobs(const Laser& laser, double target_thz) {
  return std::visit(
      Overloaded{
          [&](const MemsVcselModel& m) {
            const double mid = 0.5 * (m.length_min_um + m.length_max_um);
            const double order = std::round(target_thz * 2.0 * m.n_eff * mid / kLightUmThz);
            return std::vector<double>{order * kLightUmThz / (2.0 * m.n_eff * target_thz)};
          },
          [&](const ThermalDbrModel& m) {
            const double lambda = kLightNmThz / target_thz;
            const double temp = m.t_ref_k + (lambda - m.bragg_wavelength_ref_nm) / m.dlambda_dt_nm_per_k;
            const double phase = frac((target_thz - m.comb_origin_thz) * 1e3 / m.cavity_fsr_ghz);
            return std::vector<double>{temp, phase};
          },
          [&](const VernierModel& m) {
            const double x = (target_thz - m.comb_origin_thz) * 1e3;
            const double o1 = x - std::round(x / m.fsr_front_ghz) * m.fsr_front_ghz;
            const double o2 = x - std::round(x / m.fsr_back_ghz) * m.fsr_back_ghz;
            return std::vector<double>{o1, o2, frac(x / m.cavity_fsr_ghz)};
          }},
      laser);
}

std::int64_t settle_time_us(const Laser& laser) {
  return std::holds_alternative<MemsVcselModel>(laser) ? 1'000 : 100'000;
}

// ---- calibration ----

std::string CalibrationTable::serialize() const {
  std::string out;
  char buf[64];
  for (const auto& [ch, entry] : entries) {
    out += std::to_string(ch);
    out += '\t';
    for (std::size_t i = 0; i < entry.knobs.size(); ++i) {
      if (i) out += ',';
      std::snprintf(buf, sizeof buf, "%.17g", entry.knobs[i]);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "\t%.17g\n", entry.residual_ghz);
    out += buf;
  }
  return out;
}

CalibrationTable CalibrationTable::parse(std::string_view text) {
  CalibrationTable table;
  std::size_t line_no = 0;
  auto parse_double = [&](std::string_view s) {
    double v = 0.0;
    const std::string tmp(s);
    char* end = nullptr;
    v = std::strtod(tmp.c_str(), &end);
    if (tmp.empty() || end != tmp.c_str() + tmp.size()) {
      throw Error(ErrorCode::ParseError, "bad number '" + tmp + "'", line_no);
    }
    return v;
  };
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos) throw Error(ErrorCode::ParseError, "expected three tab-separated fields", line_no);
    std::size_t ch = 0;
    const auto field = line.substr(0, t1);
    if (std::from_chars(field.data(), field.data() + field.size(), ch).ec != std::errc{}) {
      throw Error(ErrorCode::ParseError, "bad channel index", line_no);
    }
    CalibrationEntry entry;
    std::string_view ks = line.substr(t1 + 1, t2 - t1 - 1);
    while (true) {
      const auto comma = ks.find(',');
      entry.knobs.push_back(parse_double(ks.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      ks.remove_prefix(comma + 1);
    }
    entry.residual_ghz = parse_double(line.substr(t2 + 1));
    table.entries[ch] = std::move(entry);
  }
  return table;
}

namespace {

double residual_ghz(const Laser& laser, std::span<const double> k, double target_thz) {
  Laser probe = laser;
  try {
    const auto e = apply_tuning(probe, k);
    if (!e.single_mode) return kInf;
    return std::abs(e.frequency_thz - target_thz) * 1e3;
  } catch (const Error&) {
    return kInf;
  }
}

void grid_search(const Laser& laser, const std::vector<KnobRange>& ranges, double target, std::vector<double>& cur,
                 std::size_t axis, std::vector<double>& best, double& best_res) {
  if (axis == ranges.size()) {
    const double r = residual_ghz(laser, cur, target);
    if (r < best_res) {
      best_res = r;
      best = cur;
    }
    return;
  }
  const auto& range = ranges[axis];
  const auto steps = static_cast<long>(std::floor((range.max - range.min) / range.coarse_step + 1e-9));
  for (long s = 0; s <= steps; ++s) {
    cur[axis] = range.min + static_cast<double>(s) * range.coarse_step;
    grid_search(laser, ranges, target, cur, axis + 1, best, best_res);
  }
}

}  // namespace

CalibrationTable calibrate(const Laser& laser, const FrequencyPlan& plan, const CalibrationOptions& options) {
  const auto ranges = knob_ranges(laser);
  CalibrationTable table;
  table.tolerance_ghz = options.tolerance_ghz;
  constexpr double kGolden = 0.6180339887498949;
  for (std::size_t ch = 0; ch < plan.channel_count; ++ch) {
    const double target = plan.center_thz(ch);
    std::vector<double> cur(ranges.size(), 0.0), best;
    double best_res = kInf;
    grid_search(laser, ranges, target, cur, 0, best, best_res);
    if (best.empty()) {
      throw Error(ErrorCode::ChannelUnreachable, "channel " + std::to_string(ch) + " has no valid knob setting", ch);
    }
    for (int round = 0; round < options.refine_rounds; ++round) {
      for (std::size_t axis = 0; axis < ranges.size(); ++axis) {
        double a = std::max(ranges[axis].min, best[axis] - ranges[axis].coarse_step);
        double b = std::min(ranges[axis].max, best[axis] + ranges[axis].coarse_step);
        auto eval = [&](double x) {
          std::vector<double> probe = best;
          probe[axis] = x;
          return residual_ghz(laser, probe, target);
        };
        double c = b - kGolden * (b - a), d = a + kGolden * (b - a);
        double fc = eval(c), fd = eval(d);
        for (int it = 0; it < options.golden_iterations; ++it) {
          if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kGolden * (b - a);
            fc = eval(c);
          } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kGolden * (b - a);
            fd = eval(d);
          }
        }
        const double x = fc <= fd ? c : d;
        const double fx = std::min(fc, fd);
        if (fx < best_res) {
          best_res = fx;
          best[axis] = x;
        }
      }
    }
    if (best_res > options.unreachable_ghz) {
      throw Error(ErrorCode::ChannelUnreachable,
                  "channel " + std::to_string(ch) + " residual " + std::to_string(best_res) + " GHz", ch);
    }
    table.entries[ch] = {best, best_res};
  }
  return table;
}

// ---- drift ----

double step_drift(double offset_ghz, double dt_s, const DriftModel& drift, Rng& rng) {
  if (!(dt_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "drift step needs dt > 0");
  double next = offset_ghz + drift.ramp_ghz_per_s * dt_s;
  if (drift.sigma_rw_ghz_per_sqrt_s > 0.0) next += drift.sigma_rw_ghz_per_sqrt_s * std::sqrt(dt_s) * rng.normal();
  return std::clamp(next, -drift.bound_ghz, drift.bound_ghz);
}

}  // namespace gmetro::lasers
