#pragma once

// Tuning protocol: RU and CO state machines for direct (calibration table)
// and sweep-with-feedback tuning, the frequency-hold loop, and pairwise
// primary/dependent tuning. Machines are pure: they map (state, event) to
// (state', actions) and never execute anything themselves.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gmetro/codec.hpp"
#include "gmetro/lasers.hpp"
#include "gmetro/plan.hpp"

namespace gmetro::protocol {

// ---- link-budget helpers ----

/// Link loss from the CO launch power and the power the RU received.
/// Throws NoReport when no report exists yet.
double estimate_link_loss(double co_tx_power_dbm, std::optional<double> ru_reported_rx_dbm);

struct SweepPower {
  double power_dbm = 0.0;
  bool capped = false;
};

/// Lowest launch power that still reaches the CO management receiver:
/// sensitivity + loss + margin, capped at full launch power.
SweepPower sweep_power(double loss_est_db, const codec::MgmtChannelConfig& cfg, double margin_db = 3.0,
                       double full_power_dbm = 3.0);

enum class SweepDirection { Up, Down };

struct SweepPlan {
  double f_start_thz = 0.0;
  double f_stop_thz = 0.0;
  double step_ghz = 12.5;
  double dwell_ms = 50.0;
  SweepDirection direction = SweepDirection::Up;

  std::size_t point_count() const;
  double point_thz(std::size_t index) const;
  double worst_case_s() const { return static_cast<double>(point_count()) * dwell_ms * 1e-3; }
  bool operator==(const SweepPlan&) const = default;
};

/// step = min(12.5 GHz, B/2); dwell = max(50 ms, 2·latency); the sweep covers
/// the whole plan band including half a spacing beyond the edge channels.
SweepPlan plan_sweep(const FrequencyPlan& band, double filter_b3_ghz, double latency_worst_ms);

struct HoldParams {
  double deadband_ghz = 1.0;
  double step_gain = 0.5;
  double max_step_ghz = 2.0;
  bool operator==(const HoldParams&) const = default;
};

/// Knob correction for an offset estimate: zero inside the deadband, else
/// -gain·offset saturated at ±max_step.
double hold_step(double offset_est_ghz, const HoldParams& params = {});

// ---- payload layouts ----
//
// TUNE_REQ, CHAN_ASSIGN, SWEEP_DETECTED, LOCK_CONFIRM: channel index, 1 byte.
// LOSS_REPORT and HELLO: power as int16 in 0.1 dBm, big-endian (a CO HELLO
// carries its launch power, an RU HELLO the power it last received).
// HOLD_CORRECT: offset step as int16 in 0.1 GHz, big-endian.

std::vector<std::uint8_t> encode_channel(std::size_t channel);
std::size_t decode_channel(std::span<const std::uint8_t> payload);
std::vector<std::uint8_t> encode_tenths(double value);
double decode_tenths(std::span<const std::uint8_t> payload);

codec::MgmtFrame make_frame(codec::MsgType type, std::vector<std::uint8_t> payload = {});

// ---- RU machine ----

enum class RuState { Init, AwaitAssign, DirectTuning, Sweep, FineTune, Locked, Hold };
enum class Role { Standalone, Primary, Dependent };

std::string_view to_string(RuState state);
std::string_view to_string(Role role);

struct RuConfig {
  codec::MgmtChannelConfig mgmt;
  double full_power_dbm = 3.0;
  double sweep_margin_db = 3.0;
  SweepPlan sweep;
  std::int64_t settle_us = 1'000;       // coarse knobs
  std::int64_t trim_settle_us = 1'000;  // phase / fine section
  std::int64_t hello_period_us = 20'000;
  std::int64_t fine_timeout_us = 1'000'000;
  std::int64_t assign_repeat_us = 1'000'000;
  std::int64_t latency_worst_us = 3'000;
  HoldParams hold;
  bool operator==(const RuConfig&) const = default;
};

enum class SweepPhase { Settling, Listening };

struct RuMachine {
  RuState state = RuState::Init;
  Role role = Role::Standalone;
  RuConfig config;
  /// Design-law model used to compute knob settings.
  lasers::Laser laser;
  std::optional<lasers::CalibrationTable> calibration;
  bool calibration_trusted = true;
  double current_offset_est = 0.0;

  std::optional<std::size_t> channel;
  std::optional<std::size_t> pending_assign;
  std::size_t sweep_index = 0;
  std::size_t sweep_passes = 0;
  SweepPhase sweep_phase = SweepPhase::Settling;
  std::vector<double> knobs;
  double trim_ghz = 0.0;
  double tx_power_dbm = 0.0;
  std::optional<double> loss_est_db;
  std::optional<double> last_rx_dbm;
  bool pair_confirmed = false;
  std::uint32_t timer_token = 0;

  bool can_direct_tune() const { return calibration.has_value() && calibration_trusted; }
  bool operator==(const RuMachine&) const = default;
};

namespace ru_event {
struct PowerOn {};
struct Msg {
  codec::MgmtFrame frame;
  double rx_dbm = 0.0;
};
struct DwellTimer {
  std::uint32_t token = 0;
};
struct DriftTick {
  double offset_est_ghz = 0.0;
};
struct LinkDown {};
/// Network-management channel input; only a PRIMARY accepts it.
struct NmsAssign {
  std::size_t channel = 0;
};
}  // namespace ru_event

using RuEvent = std::variant<ru_event::PowerOn, ru_event::Msg, ru_event::DwellTimer, ru_event::DriftTick,
                             ru_event::LinkDown, ru_event::NmsAssign>;

inline constexpr std::size_t kRuEventKinds = std::variant_size_v<RuEvent>;
std::string_view ru_event_name(std::size_t kind);

namespace action {
struct SetKnobs {
  std::vector<double> knobs;
  double trim_ghz = 0.0;
  bool operator==(const SetKnobs&) const = default;
};
struct SetPower {
  double power_dbm = 0.0;
  bool operator==(const SetPower&) const = default;
};
struct Send {
  int port = 0;  // CO port; ignored for RU sends
  codec::MgmtFrame frame;
  bool operator==(const Send&) const = default;
};
struct ArmTimer {
  int port = 0;
  std::int64_t delay_us = 0;
  std::uint32_t token = 0;
  bool operator==(const ArmTimer&) const = default;
};
struct RaiseAlarm {
  int port = 0;
  std::string reason;
  bool warning = false;
  bool operator==(const RaiseAlarm&) const = default;
};
}  // namespace action

using Action = std::variant<action::SetKnobs, action::SetPower, action::Send, action::ArmTimer, action::RaiseAlarm>;

struct RuTransition {
  RuMachine machine;
  std::vector<Action> actions;
};

/// Whether `kind` (index into RuEvent) is legal in `state` for `role`.
bool ru_event_legal(RuState state, Role role, std::size_t kind);

/// Throws InvalidEvent for events impossible in the current state.
RuTransition ru_transition(const RuMachine& machine, const RuEvent& event);

/// RU machine with its sweep plan and settle times derived from the laser.
RuMachine make_ru_machine(const lasers::Laser& design_law, std::optional<lasers::CalibrationTable> calibration,
                          const FrequencyPlan& plan, double filter_b3_ghz, Role role = Role::Standalone,
                          RuConfig config = {});

// ---- CO machine ----

enum class PortState { Idle, WaitDetect, Confirming, Monitor };
std::string_view to_string(PortState state);

struct CoConfig {
  codec::MgmtChannelConfig mgmt;
  double tx_power_dbm = 0.0;
  std::int64_t beacon_period_us = 100'000;
  std::int64_t detect_timeout_us = 200'000;
  std::int64_t confirm_interval_us = 20'000;
  int confirm_samples = 16;
  int max_confirm_rounds = 20;
  double fine_tolerance_ghz = 0.3;
  /// A measured carrier further than this from the port center is leakage
  /// from a neighbouring channel, not the port's own RU.
  double max_offset_ghz = 25.0;
  std::int64_t monitor_period_us = 1'000'000;
  HoldParams hold;
  bool send_tune_req = true;
  bool operator==(const CoConfig&) const = default;
};

struct CoPort {
  PortState state = PortState::Idle;
  std::size_t channel = 0;
  std::uint32_t timer_token = 0;
  int confirm_rounds = 0;
  bool ru_stopped = false;
  std::optional<double> last_power_dbm;
  std::optional<double> reported_rx_dbm;
  std::optional<double> loss_est_db;
  bool pair_confirmed = false;
  bool operator==(const CoPort&) const = default;
};

struct CoMachine {
  CoConfig config;
  std::map<int, CoPort> ports;
  bool operator==(const CoMachine&) const = default;
};

struct Measurement {
  bool signal = false;
  double power_dbm = -200.0;
  double offset_est_ghz = 0.0;
};

namespace co_event {
struct NmsAssign {
  int port = 0;
  std::size_t channel = 0;
};
struct PortPower {
  int port = 0;
  double power_dbm = 0.0;
};
struct Msg {
  int port = 0;
  codec::MgmtFrame frame;
  double rx_dbm = 0.0;
};
struct Timer {
  int port = 0;
  std::uint32_t token = 0;
  Measurement measurement;
};
}  // namespace co_event

using CoEvent = std::variant<co_event::NmsAssign, co_event::PortPower, co_event::Msg, co_event::Timer>;

struct CoTransition {
  CoMachine machine;
  std::vector<Action> actions;
};

/// Throws InvalidEvent for events on ports that were never assigned.
CoTransition co_transition(const CoMachine& machine, const CoEvent& event);

// ---- closed-loop hold simulation ----

struct HoldLoopConfig {
  lasers::DriftModel drift;
  double measurement_sigma_ghz = 0.5;
  double period_s = 1.0;
  HoldParams hold;
  bool enabled = true;
  double initial_offset_ghz = 0.0;
};

struct HoldLoopResult {
  double max_abs_offset_ghz = 0.0;
  double final_offset_ghz = 0.0;
  std::size_t steps = 0;
  std::size_t corrections = 0;
};

/// Drift, CO offset measurement and HOLD_CORRECT step (quantised to the
/// 0.1 GHz wire unit) once per period.
HoldLoopResult simulate_hold_loop(const HoldLoopConfig& config, double duration_s, std::uint64_t seed);

}  // namespace gmetro::protocol
