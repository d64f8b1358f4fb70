#pragma once

// Deterministic discrete-event core. Wires lasers, the optical plant, the
// management-channel codec and the protocol machines onto one integer
// microsecond timeline.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gmetro/codec.hpp"
#include "gmetro/lasers.hpp"
#include "gmetro/link.hpp"
#include "gmetro/plan.hpp"
#include "gmetro/protocol.hpp"

namespace gmetro::engine {

struct RuSpec {
  std::string name;
  std::size_t port = 0;  // channel index of the demux port the RU hangs off
  /// The unit as built, including its deviation from the design law.
  lasers::Laser laser = lasers::MemsVcselModel{};
  bool calibrated = false;
  double start_ms = 0.0;
  double launch_power_dbm = 3.0;
  std::optional<double> drop_km;
  protocol::Role role = protocol::Role::Standalone;
  /// RU measures its own offset and sends DRIFT_TICK to its machine.
  bool local_monitor = false;
  bool operator==(const RuSpec&) const = default;
};

struct CoSpec {
  std::string name;
  double tx_power_dbm = 0.0;
  /// Ports managed by the CO; empty means one per configured RU port.
  std::vector<std::size_t> ports;
  /// Pairwise primary: the CO end has its own tunable laser and receives
  /// the single network-management channel input.
  bool primary = false;
  std::optional<lasers::Laser> laser;
  bool calibrated = true;
  std::size_t nms_channel = 0;
  bool operator==(const CoSpec&) const = default;
};

enum class FaultKind { FiberCut, FiberRestore, BerSet };

struct Fault {
  std::int64_t at_us = 0;
  FaultKind kind = FaultKind::FiberCut;
  std::string span;
  double ber = 0.0;
  bool operator==(const Fault&) const = default;
};

enum class StopCondition { AllLocked, Horizon };

struct Scenario {
  FrequencyPlan plan;
  link::TopologyKind topology = link::TopologyKind::Tree;
  link::PlantParams plant;  // its plan is overwritten with `plan`
  std::vector<CoSpec> cos;
  std::vector<RuSpec> rus;
  codec::MgmtChannelConfig mgmt;
  double ber = 0.0;
  lasers::DriftModel drift;
  double drift_tick_ms = 1000.0;
  double measurement_sigma_ghz = 0.5;
  protocol::HoldParams hold;
  bool hold_enabled = true;
  int max_retries = 3;
  double sweep_margin_db = 3.0;
  double crosstalk_floor_db = 25.0;
  std::vector<Fault> faults;
  StopCondition stop = StopCondition::AllLocked;
  double horizon_s = 60.0;
  std::uint64_t seed = 1;

  bool operator==(const Scenario&) const = default;
};

/// Plant built from the scenario's topology section and RU placement.
link::Topology build_topology(const Scenario& scenario);

/// Throws ValidationError naming the first failing rule, UnknownSpan for a
/// fault on a span that does not exist.
void validate(const Scenario& scenario);

/// Copy of the scenario with `fault` scheduled at `at_us`.
Scenario inject_fault(const Scenario& scenario, std::int64_t at_us, Fault fault);

struct TraceRecord {
  std::int64_t time_us = 0;
  std::string entity;
  std::string kind;
  std::string details;
};

/// `time_us<TAB>entity<TAB>kind<TAB>details`, no newline.
std::string trace_emit(const TraceRecord& record);

struct RuMetrics {
  std::string name;
  std::size_t port = 0;
  std::optional<double> time_to_lock_s;
  std::size_t lock_count = 0;
  double max_abs_offset_locked_ghz = 0.0;
  std::string final_state;
  std::optional<std::size_t> locked_channel;
  double final_frequency_thz = 0.0;
  double final_offset_ghz = 0.0;
  std::string serving_co;
};

struct Metrics {
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_delivered = 0;
  std::uint64_t frames_lost = 0;
  std::uint64_t frames_in_flight = 0;
  std::uint64_t frames_corrected = 0;
  std::uint64_t blocks_corrected = 0;
  std::uint64_t retries = 0;
  std::uint64_t abandoned = 0;
  std::uint64_t hold_corrections = 0;
  std::uint64_t operator_events = 0;
  std::uint64_t safety_violations = 0;
  std::uint64_t events = 0;
  std::optional<double> min_crosstalk_margin_db;
  std::optional<double> protection_time_s;
  std::optional<double> restore_time_s;
  std::optional<double> max_time_to_lock_s;
  double max_abs_offset_locked_ghz = 0.0;
  bool all_locked = false;
  double sim_time_s = 0.0;
  std::vector<RuMetrics> rus;
};

std::string to_key_value(const Metrics& metrics);
std::string to_json(const Metrics& metrics);

struct RunResult {
  std::vector<std::string> trace;
  Metrics metrics;
  std::vector<std::string> violations;
};

struct RunOptions {
  /// Lines are also streamed here as they are produced.
  std::ostream* trace_stream = nullptr;
  /// Keep trace lines in RunResult::trace.
  bool keep_trace = true;
};

/// Validates, then executes events until the stop condition. Throws
/// ValidationError, Deadlock, or ChannelUnreachable from factory
/// calibration of a calibrated unit.
RunResult run(const Scenario& scenario, const RunOptions& options = {});

struct PairwiseTranscript {
  bool converged = false;
  std::optional<double> primary_lock_s;
  std::optional<double> dependent_lock_s;
  std::size_t channel = 0;
  std::vector<std::string> lock_confirms;
  std::uint64_t operator_events = 0;
  std::uint64_t retries = 0;
  RunResult run;
};

/// Runs a primary/dependent scenario; throws Timeout when either side has
/// not locked by the horizon.
PairwiseTranscript pairwise_self_tune(const Scenario& scenario, const RunOptions& options = {});

}  // namespace gmetro::engine
