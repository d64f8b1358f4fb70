#pragma once

#include <cstddef>

namespace gmetro {

/// Speed of light in nm·THz: λ[nm] = kLightNmThz / f[THz].
inline constexpr double kLightNmThz = 299792.458;
/// Speed of light in μm·THz.
inline constexpr double kLightUmThz = 299.792458;

/// Fixed-grid DWDM channel plan.
struct FrequencyPlan {
  std::size_t channel_count = 16;
  double spacing_ghz = 100.0;
  double first_center_thz = 192.1;

  double center_thz(std::size_t channel) const {
    return first_center_thz + static_cast<double>(channel) * spacing_ghz * 1e-3;
  }
  double last_center_thz() const { return center_thz(channel_count == 0 ? 0 : channel_count - 1); }
  double band_low_thz() const { return first_center_thz - spacing_ghz * 0.5e-3; }
  double band_high_thz() const { return last_center_thz() + spacing_ghz * 0.5e-3; }

  bool operator==(const FrequencyPlan&) const = default;
};

}  // namespace gmetro
