#pragma once

// Parametric tunable-laser models: knob settings in, emitted frequency and
// power out. Three families with one, two and three frequency-tuning knobs.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gmetro/plan.hpp"
#include "gmetro/rng.hpp"

namespace gmetro::lasers {

struct EmissionState {
  double frequency_thz = 0.0;
  double power_dbm = 0.0;
  bool single_mode = true;
  long mode_index = 0;
};

/// MEMS-tuned VCSEL: one movable mirror sets the cavity length, and the
/// cavity is short enough that a single longitudinal mode sits in the gain
/// band. Knob: cavity_length_um.
struct MemsVcselModel {
  double n_eff = 3.2;
  double cavity_length_um = 0.97;
  double length_min_um = 0.945;
  double length_max_um = 1.0;
  double gain_center_thz = 193.0;
  double gain_bandwidth_thz = 12.5;
  double power_dbm = 3.0;
  /// Unit-to-unit deviation from the design law, added to the emission.
  double frequency_error_ghz = 0.0;

  void validate() const;
  bool operator==(const MemsVcselModel&) const = default;
};

/// Thermally tuned Bragg reflector plus phase section. Knobs: grating
/// temperature and phase shift (fraction of the cavity mode spacing).
struct ThermalDbrModel {
  double bragg_wavelength_ref_nm = 1545.0;
  double t_ref_k = 300.0;
  double dlambda_dt_nm_per_k = 0.1;
  /// Heater efficiency of the polymer-waveguide variant.
  double tuning_efficiency_nm_per_mw = 0.52;
  double grating_temp_k = 300.0;
  double temp_min_k = 300.0;
  double temp_max_k = 500.0;
  double phase_shift = 0.0;
  /// Cavity mode spacing and grating reflection width. No published values
  /// exist for these; the defaults are placeholders that satisfy
  /// reflection_bandwidth < cavity_fsr.
  double cavity_fsr_ghz = 50.0;
  double reflection_bandwidth_ghz = 35.0;
  double comb_origin_thz = 193.0;
  double power_dbm = 3.0;
  double frequency_error_ghz = 0.0;

  double bragg_wavelength_nm() const;
  double bragg_frequency_thz() const;
  /// Temperature change needed for a Bragg shift of `shift_nm`.
  double temperature_for_shift(double shift_nm) const { return shift_nm / dlambda_dt_nm_per_k; }
  double bragg_shift_nm(double delta_t_k) const { return dlambda_dt_nm_per_k * delta_t_k; }
  /// Heater power for a Bragg shift of `shift_nm` (polymer variant).
  double heater_power_mw(double shift_nm) const { return shift_nm / tuning_efficiency_nm_per_mw; }

  void validate() const;
  bool operator==(const ThermalDbrModel&) const = default;
};

/// Sampled-grating Vernier laser: two reflector combs with slightly
/// different periods plus a phase section. Frequency knobs: front comb
/// offset, back comb offset, phase shift. Gain current sets the power.
struct VernierModel {
  double fsr_front_ghz = 100.0;
  double fsr_back_ghz = 106.0;
  double comb_offset_front_ghz = 0.0;
  double comb_offset_back_ghz = 0.0;
  double phase_shift = 0.0;
  double gain_current_ma = 60.0;
  double threshold_current_ma = 10.0;
  double slope_mw_per_ma = 0.04;
  double comb_linewidth_ghz = 3.0;
  double comb_origin_thz = 192.85;
  double cavity_fsr_ghz = 20.0;
  double band_low_thz = 192.0;
  double band_high_thz = 193.7;
  double frequency_error_ghz = 0.0;

  double power_dbm() const;
  void validate() const;
  bool operator==(const VernierModel&) const = default;
};

using Laser = std::variant<MemsVcselModel, ThermalDbrModel, VernierModel>;

std::string_view family_name(const Laser& laser);

EmissionState mems_emission(const MemsVcselModel& model);
EmissionState dbr_emission(const ThermalDbrModel& model);
EmissionState vernier_emission(const VernierModel& model);
EmissionState emission(const Laser& laser);

/// Unambiguous Vernier tuning range F1·F2/|F1−F2| in GHz.
double vernier_range_ghz(double fsr_front_ghz, double fsr_back_ghz);

struct Supermode {
  double frequency_thz = 0.0;  // envelope peak where the two combs align
  double mismatch_ghz = 0.0;   // back peak minus front peak of the aligned pair
  long front_index = 0;
};

/// Comb coincidences whose envelope peak lies in [lo_thz, hi_thz], sorted by
/// frequency, one entry per supermode.
std::vector<Supermode> vernier_supermodes(const VernierModel& model, double lo_thz, double hi_thz);

struct KnobRange {
  double min = 0.0;
  double max = 0.0;
  double coarse_step = 0.0;
};

std::size_t knob_count(const Laser& laser);
std::vector<KnobRange> knob_ranges(const Laser& laser);
std::vector<double> knobs(const Laser& laser);
/// Sets the frequency knobs (MEMS 1, DBR 2, Vernier 3) and returns the new
/// emission. Throws KnobDimensionMismatch or the model's own errors.
EmissionState apply_tuning(Laser& laser, std::span<const double> knob_values);

/// Knobs from the design law alone, ignoring unit deviation. This is what an
/// uncalibrated transceiver can do.
std::vector<double> nominal_knobs(const Laser& laser, double target_thz);

/// Time for knob changes to settle: thermal knobs 100 ms, MEMS 1 ms.
std::int64_t settle_time_us(const Laser& laser);

struct CalibrationEntry {
  std::vector<double> knobs;
  double residual_ghz = 0.0;
  bool operator==(const CalibrationEntry&) const = default;
};

struct CalibrationTable {
  std::map<std::size_t, CalibrationEntry> entries;
  double tolerance_ghz = 1.0;

  std::string serialize() const;
  static CalibrationTable parse(std::string_view text);
  bool operator==(const CalibrationTable&) const = default;
};

struct CalibrationOptions {
  double tolerance_ghz = 1.0;
  double unreachable_ghz = 5.0;
  int refine_rounds = 3;
  int golden_iterations = 60;
};

/// Factory characterisation: coarse grid over the knob box, then
/// axis-by-axis golden-section refinement. Throws ChannelUnreachable(ch).
CalibrationTable calibrate(const Laser& laser, const FrequencyPlan& plan, const CalibrationOptions& options = {});

struct DriftModel {
  double sigma_rw_ghz_per_sqrt_s = 0.05;
  double ramp_ghz_per_s = 0.0;
  double bound_ghz = 25.0;
  bool operator==(const DriftModel&) const = default;
};

/// Random-walk plus ramp frequency drift, clamped to ±bound.
double step_drift(double offset_ghz, double dt_s, const DriftModel& drift, Rng& rng);

}  // namespace gmetro::lasers
