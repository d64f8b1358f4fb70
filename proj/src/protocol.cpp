#include "gmetro/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gmetro/error.hpp"

namespace gmetro::protocol {

using codec::MgmtFrame;
using codec::MsgType;

double estimate_link_loss(double co_tx_power_dbm, std::optional<double> ru_reported_rx_dbm) {
  if (!ru_reported_rx_dbm) throw Error(ErrorCode::NoReport, "no received-power report yet");
  return co_tx_power_dbm - *ru_reported_rx_dbm;
}

SweepPower sweep_power(double loss_est_db, const codec::MgmtChannelConfig& cfg, double margin_db,
                       double full_power_dbm) {
  const double wanted = cfg.rx_sensitivity_dbm + loss_est_db + margin_db;
  if (wanted > full_power_dbm) return {full_power_dbm, true};
  return {wanted, false};
}

std::size_t SweepPlan::point_count() const {
  if (!(step_ghz > 0.0) || f_stop_thz < f_start_thz) return 0;
  const double span_ghz = (f_stop_thz - f_start_thz) * 1e3;
  return static_cast<std::size_t>(std::floor(span_ghz / step_ghz + 1e-9)) + 1;
}

double SweepPlan::point_thz(std::size_t index) const {
  const double d = static_cast<double>(index) * step_ghz * 1e-3;
  return direction == SweepDirection::Up ? f_start_thz + d : f_stop_thz - d;
}

SweepPlan plan_sweep(const FrequencyPlan& band, double filter_b3_ghz, double latency_worst_ms) {
  if (!(filter_b3_ghz > 0.0)) throw Error(ErrorCode::InvalidArgument, "filter bandwidth must be positive");
  SweepPlan plan;
  plan.f_start_thz = band.band_low_thz();
  plan.f_stop_thz = band.band_high_thz();
  plan.step_ghz = std::min(12.5, filter_b3_ghz / 2.0);
  plan.dwell_ms = std::max(50.0, 2.0 * latency_worst_ms);
  return plan;
}

double hold_step(double offset_est_ghz, const HoldParams& params) {
  if (std::abs(offset_est_ghz) <= params.deadband_ghz) return 0.0;
  return std::clamp(-params.step_gain * offset_est_ghz, -params.max_step_ghz, params.max_step_ghz);
}

// ---- payloads ----

std::vector<std::uint8_t> encode_channel(std::size_t channel) {
  if (channel > 0xFF) throw Error(ErrorCode::InvalidArgument, "channel index does not fit one byte");
  return {static_cast<std::uint8_t>(channel)};
}

std::size_t decode_channel(std::span<const std::uint8_t> payload) {
  if (payload.size() != 1) throw Error(ErrorCode::InvalidArgument, "channel payload must be 1 byte");
  return payload[0];
}

std::vector<std::uint8_t> encode_tenths(double value) {
  const double scaled = std::round(value * 10.0);
  const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
  const auto u = static_cast<std::uint16_t>(v);
  return {static_cast<std::uint8_t>(u >> 8), static_cast<std::uint8_t>(u & 0xFF)};
}

double decode_tenths(std::span<const std::uint8_t> payload) {
  if (payload.size() != 2) throw Error(ErrorCode::InvalidArgument, "16-bit payload expected");
  const auto u = static_cast<std::uint16_t>((payload[0] << 8) | payload[1]);
  return static_cast<std::int16_t>(u) / 10.0;
}

MgmtFrame make_frame(MsgType type, std::vector<std::uint8_t> payload) {
  MgmtFrame f;
  f.type = type;
  f.payload = std::move(payload);
  return f;
}

// ---- names ----

std::string_view to_string(RuState state) {
  switch (state) {
    case RuState::Init: return "INIT";
    case RuState::AwaitAssign: return "AWAIT_ASSIGN";
    case RuState::DirectTuning: return "DIRECT_TUNING";
    case RuState::Sweep: return "SWEEP";
    case RuState::FineTune: return "FINE_TUNE";
    case RuState::Locked: return "LOCKED";
    case RuState::Hold: return "HOLD";
  }
  return "?";
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Standalone: return "STANDALONE";
    case Role::Primary: return "PRIMARY";
    case Role::Dependent: return "DEPENDENT";
  }
  return "?";
}

std::string_view to_string(PortState state) {
  switch (state) {
    case PortState::Idle: return "IDLE";
    case PortState::WaitDetect: return "WAIT_DETECT";
    case PortState::Confirming: return "CONFIRMING";
    case PortState::Monitor: return "MONITOR";
  }
  return "?";
}

std::string_view ru_event_name(std::size_t kind) {
  static constexpr std::string_view names[] = {"POWER_ON", "MSG", "DWELL_TIMER", "DRIFT_TICK", "LINK_DOWN",
                                               "NMS_ASSIGN"};
  return kind < std::size(names) ? names[kind] : "?";
}

// ---- RU machine ----

bool ru_event_legal(RuState state, Role role, std::size_t kind) {
  const bool init = state == RuState::Init;
  switch (kind) {
    case 0: return init;                       // POWER_ON
    case 1: return true;                       // MSG
    case 2: case 3: case 4: return !init;      // timers, drift, link down
    case 5: return role == Role::Primary;      // NMS_ASSIGN
    default: return false;
  }
}

namespace {

struct RuStep {
  RuMachine m;
  std::vector<Action> out;

  void arm(std::int64_t delay_us) {
    ++m.timer_token;
    out.push_back(action::ArmTimer{0, delay_us, m.timer_token});
  }
  void send(MsgType type, std::vector<std::uint8_t> payload = {}) {
    out.push_back(action::Send{0, make_frame(type, std::move(payload))});
  }
  void knobs() { out.push_back(action::SetKnobs{m.knobs, m.trim_ghz}); }
  void power(double dbm) {
    m.tx_power_dbm = dbm;
    out.push_back(action::SetPower{dbm});
  }
  void alarm(std::string reason, bool warning) {
    out.push_back(action::RaiseAlarm{0, std::move(reason), warning});
  }
  void hello() {
    if (m.last_rx_dbm) send(MsgType::Hello, encode_tenths(*m.last_rx_dbm));
    else send(MsgType::Hello);
  }

  std::int64_t dwell_us() const {
    const auto dwell = static_cast<std::int64_t>(std::llround(m.config.sweep.dwell_ms * 1e3));
    return std::max(dwell, m.config.settle_us + 2 * m.config.latency_worst_us);
  }

  void start_direct(std::size_t ch) {
    const auto it = m.calibration->entries.find(ch);
    if (it == m.calibration->entries.end()) {
      alarm("CHANNEL_NOT_IN_TABLE ch=" + std::to_string(ch), false);
      return;
    }
    m.channel = ch;
    m.pending_assign.reset();
    m.knobs = it->second.knobs;
    m.trim_ghz = 0.0;
    m.state = RuState::DirectTuning;
    m.sweep_passes = 0;
    knobs();
    power(m.config.full_power_dbm);
    arm(m.config.settle_us);
  }

  void sweep_point() {
    m.knobs = lasers::nominal_knobs(m.laser, m.config.sweep.point_thz(m.sweep_index));
    m.sweep_phase = SweepPhase::Settling;
    knobs();
    arm(m.config.settle_us);
  }

  void start_sweep() {
    const SweepPower sp =
        sweep_power(*m.loss_est_db, m.config.mgmt, m.config.sweep_margin_db, m.config.full_power_dbm);
    if (sp.capped) alarm("SWEEP_POWER_CAPPED", true);
    m.state = RuState::Sweep;
    m.channel.reset();
    m.sweep_index = 0;
    m.sweep_passes = 0;
    m.trim_ghz = 0.0;
    power(sp.power_dbm);
    sweep_point();
  }

  void advance_sweep() {
    ++m.sweep_index;
    if (m.sweep_index >= m.config.sweep.point_count()) {
      m.sweep_index = 0;
      ++m.sweep_passes;
      alarm("SWEEP_WRAPPED", true);
    }
    sweep_point();
  }

  // Tuning entry for a RU that has a channel to go for (TUNE_REQ or
  // CHAN_ASSIGN) or has just learnt the link loss.
  void begin_tuning(std::optional<std::size_t> ch) {
    if (m.can_direct_tune()) {
      if (ch) start_direct(*ch);
      return;
    }
    if (!m.loss_est_db) {
      if (ch) m.pending_assign = ch;
      return;
    }
    start_sweep();
  }

  void relock() {
    m.state = RuState::DirectTuning;
    hello();
    arm(m.config.hello_period_us);
  }

  void on_msg(const ru_event::Msg& e) {
    const MgmtFrame& f = e.frame;
    m.last_rx_dbm = e.rx_dbm;
    const bool idle = m.state == RuState::Init || m.state == RuState::AwaitAssign;
    if (m.state == RuState::Init) m.state = RuState::AwaitAssign;

    switch (f.type) {
      case MsgType::Hello: {
        if (m.role == Role::Primary) return;
        if (f.payload.size() == 2) m.loss_est_db = estimate_link_loss(decode_tenths(f.payload), e.rx_dbm);
        if (!idle || m.can_direct_tune()) return;
        if (m.role == Role::Standalone || m.pending_assign) begin_tuning(m.pending_assign);
        return;
      }
      case MsgType::TuneReq:
        if (m.role != Role::Standalone || !idle) return;
        begin_tuning(decode_channel(f.payload));
        return;
      case MsgType::ChanAssign: {
        if (m.role != Role::Dependent) return;
        const std::size_t ch = decode_channel(f.payload);
        if (!idle) return;
        begin_tuning(ch);
        return;
      }
      case MsgType::SweepDetected: {
        if (m.role == Role::Primary) return;
        const std::size_t ch = decode_channel(f.payload);
        if (m.state == RuState::Sweep || m.state == RuState::DirectTuning) {
          m.channel = ch;
          if (m.state == RuState::Sweep) m.sweep_passes = 0;
          m.state = RuState::FineTune;
          send(MsgType::LockConfirm, encode_channel(ch));
          arm(m.config.fine_timeout_us);
        } else if (m.state == RuState::FineTune) {
          send(MsgType::LockConfirm, encode_channel(ch));
        }
        return;
      }
      case MsgType::HoldCorrect: {
        const double step = decode_tenths(f.payload);
        if (m.state == RuState::FineTune) {
          m.trim_ghz += step;
          knobs();
          arm(m.config.fine_timeout_us);
        } else if (m.state == RuState::Locked || m.state == RuState::Hold) {
          m.trim_ghz += step;
          m.state = RuState::Hold;
          knobs();
          arm(m.config.trim_settle_us);
        }
        return;
      }
      case MsgType::LockConfirm:
        if (m.role == Role::Primary) {
          m.pair_confirmed = true;
          return;
        }
        if (m.state == RuState::FineTune) {
          m.state = RuState::Locked;
          m.current_offset_est = 0.0;
          ++m.timer_token;  // cancels the fine-tune timeout
          power(m.config.full_power_dbm);
          if (m.last_rx_dbm) send(MsgType::LossReport, encode_tenths(*m.last_rx_dbm));
        }
        return;
      default:
        return;
    }
  }

  void on_timer(const ru_event::DwellTimer& e) {
    if (e.token != m.timer_token) return;  // stale
    switch (m.state) {
      case RuState::DirectTuning:
        if (m.role == Role::Primary) {
          m.state = RuState::Locked;
          send(MsgType::ChanAssign, encode_channel(*m.channel));
          arm(m.config.assign_repeat_us);
        } else {
          hello();
          arm(m.config.hello_period_us);
        }
        return;
      case RuState::Sweep:
        if (m.sweep_phase == SweepPhase::Settling) {
          m.sweep_phase = SweepPhase::Listening;
          hello();
          arm(dwell_us() - m.config.settle_us);
        } else {
          advance_sweep();
        }
        return;
      case RuState::FineTune:
        alarm("FINE_TUNE_TIMEOUT", true);
        if (m.can_direct_tune()) {
          relock();
        } else {
          m.state = RuState::Sweep;
          m.trim_ghz = 0.0;
          advance_sweep();
        }
        return;
      case RuState::Locked:
        if (m.role == Role::Primary && !m.pair_confirmed) {
          send(MsgType::ChanAssign, encode_channel(*m.channel));
          arm(m.config.assign_repeat_us);
        }
        return;
      case RuState::Hold:
        m.state = RuState::Locked;
        return;
      default:
        return;
    }
  }

  void on_drift(const ru_event::DriftTick& e) {
    m.current_offset_est = e.offset_est_ghz;
    if (m.state != RuState::Locked) return;
    const double c = hold_step(e.offset_est_ghz, m.config.hold);
    if (c == 0.0) return;
    m.trim_ghz += c;
    m.state = RuState::Hold;
    knobs();
    arm(m.config.trim_settle_us);
  }

  void on_link_down() {
    alarm("LINK_DOWN", false);
    if (m.role == Role::Primary) return;
    switch (m.state) {
      case RuState::FineTune:
      case RuState::Locked:
      case RuState::Hold:
        relock();
        return;
      default:
        return;
    }
  }

  void on_assign(const ru_event::NmsAssign& e) {
    if (m.state == RuState::Init) m.state = RuState::AwaitAssign;
    if (!m.can_direct_tune()) {
      alarm("PRIMARY_UNCALIBRATED", false);
      return;
    }
    m.pair_confirmed = false;
    start_direct(e.channel);
  }
};

}  // namespace

RuTransition ru_transition(const RuMachine& machine, const RuEvent& event) {
  if (!ru_event_legal(machine.state, machine.role, event.index())) {
    throw Error(ErrorCode::InvalidEvent, std::string(to_string(machine.state)) + " does not accept " +
                                             std::string(ru_event_name(event.index())));
  }
  RuStep s{machine, {}};
  std::visit(
      [&](const auto& e) {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, ru_event::PowerOn>) s.m.state = RuState::AwaitAssign;
        else if constexpr (std::is_same_v<E, ru_event::Msg>) s.on_msg(e);
        else if constexpr (std::is_same_v<E, ru_event::DwellTimer>) s.on_timer(e);
        else if constexpr (std::is_same_v<E, ru_event::DriftTick>) s.on_drift(e);
        else if constexpr (std::is_same_v<E, ru_event::LinkDown>) s.on_link_down();
        else s.on_assign(e);
      },
      event);
  return {std::move(s.m), std::move(s.out)};
}

RuMachine make_ru_machine(const lasers::Laser& design_law, std::optional<lasers::CalibrationTable> calibration,
                          const FrequencyPlan& plan, double filter_b3_ghz, Role role, RuConfig config) {
  RuMachine m;
  m.role = role;
  m.laser = design_law;
  m.calibration = std::move(calibration);
  config.settle_us = lasers::settle_time_us(design_law);
  config.sweep = plan_sweep(plan, filter_b3_ghz, static_cast<double>(config.latency_worst_us) * 1e-3);
  m.config = config;
  m.knobs = lasers::knobs(design_law);
  return m;
}

// ---- CO machine ----

namespace {

struct CoStep {
  CoMachine m;
  std::vector<Action> out;

  void send(int port, MsgType type, std::vector<std::uint8_t> payload = {}) {
    out.push_back(action::Send{port, make_frame(type, std::move(payload))});
  }
  void arm(int port, CoPort& p, std::int64_t delay_us) {
    ++p.timer_token;
    out.push_back(action::ArmTimer{port, delay_us, p.timer_token});
  }
  void beacon(int port, CoPort& p) {
    p.state = PortState::WaitDetect;
    p.confirm_rounds = 0;
    p.ru_stopped = false;
    send(port, MsgType::Hello, encode_tenths(m.config.tx_power_dbm));
    if (m.config.send_tune_req) send(port, MsgType::TuneReq, encode_channel(p.channel));
    arm(port, p, m.config.beacon_period_us);
  }
  void detected(int port, CoPort& p) {
    p.state = PortState::Confirming;
    p.confirm_rounds = 0;
    p.ru_stopped = false;
    send(port, MsgType::SweepDetected, encode_channel(p.channel));
    arm(port, p, m.config.detect_timeout_us);
  }
  void lost(int port, CoPort& p, std::string reason) {
    out.push_back(action::RaiseAlarm{port, std::move(reason), false});
    beacon(port, p);
  }

  CoPort& port(int id) {
    const auto it = m.ports.find(id);
    if (it == m.ports.end()) {
      throw Error(ErrorCode::InvalidEvent, "port " + std::to_string(id) + " was never assigned");
    }
    return it->second;
  }

  void on(const co_event::NmsAssign& e) {
    CoPort& p = m.ports[e.port];
    const std::uint32_t token = p.timer_token;
    p = CoPort{};
    p.timer_token = token;
    p.channel = e.channel;
    beacon(e.port, p);
  }

  void on(const co_event::PortPower& e) {
    CoPort& p = port(e.port);
    p.last_power_dbm = e.power_dbm;
    if (p.state == PortState::Monitor && e.power_dbm < m.config.mgmt.rx_sensitivity_dbm) {
      lost(e.port, p, "LOSS_OF_SIGNAL");
    }
  }

  void on(const co_event::Msg& e) {
    CoPort& p = port(e.port);
    if (p.state == PortState::Idle) return;
    const bool audible = e.rx_dbm >= m.config.mgmt.rx_sensitivity_dbm;
    p.last_power_dbm = e.rx_dbm;
    const MgmtFrame& f = e.frame;
    switch (f.type) {
      case MsgType::Hello:
        if (!audible) return;
        if (f.payload.size() == 2) p.reported_rx_dbm = decode_tenths(f.payload);
        if (p.state == PortState::WaitDetect || p.state == PortState::Monitor) detected(e.port, p);
        else if (p.state == PortState::Confirming && !p.ru_stopped)
          send(e.port, MsgType::SweepDetected, encode_channel(p.channel));
        return;
      case MsgType::LockConfirm:
        p.pair_confirmed = true;
        if (!audible) return;
        if (p.state == PortState::Monitor) {
          send(e.port, MsgType::LockConfirm, encode_channel(p.channel));
        } else if (!p.ru_stopped) {
          p.state = PortState::Confirming;
          p.ru_stopped = true;
          p.confirm_rounds = 0;
          arm(e.port, p, m.config.confirm_interval_us);
        }
        return;
      case MsgType::LossReport:
        if (f.payload.size() != 2) return;
        p.reported_rx_dbm = decode_tenths(f.payload);
        p.loss_est_db = estimate_link_loss(m.config.tx_power_dbm, p.reported_rx_dbm);
        return;
      default:
        return;
    }
  }

  void on(const co_event::Timer& e) {
    CoPort& p = port(e.port);
    if (e.token != p.timer_token) return;
    const Measurement& meas = e.measurement;
    switch (p.state) {
      case PortState::Idle:
        return;
      case PortState::WaitDetect:
        beacon(e.port, p);
        return;
      case PortState::Confirming:
        if (!p.ru_stopped) {
          beacon(e.port, p);
          return;
        }
        if (!meas.signal) {
          lost(e.port, p, "LOSS_OF_SIGNAL");
          return;
        }
        if (std::abs(meas.offset_est_ghz) > m.config.max_offset_ghz) {
          lost(e.port, p, "OFF_PORT_SIGNAL");
          return;
        }
        if (std::abs(meas.offset_est_ghz) <= m.config.fine_tolerance_ghz) {
          p.state = PortState::Monitor;
          send(e.port, MsgType::LockConfirm, encode_channel(p.channel));
          arm(e.port, p, m.config.monitor_period_us);
          return;
        }
        if (++p.confirm_rounds > m.config.max_confirm_rounds) {
          lost(e.port, p, "FINE_TUNE_NOT_CONVERGING");
          return;
        }
        send(e.port, MsgType::HoldCorrect, encode_tenths(-meas.offset_est_ghz));
        arm(e.port, p, m.config.confirm_interval_us);
        return;
      case PortState::Monitor: {
        if (!meas.signal || std::abs(meas.offset_est_ghz) > m.config.max_offset_ghz) {
          lost(e.port, p, meas.signal ? "OFF_PORT_SIGNAL" : "LOSS_OF_SIGNAL");
          return;
        }
        const auto step = encode_tenths(hold_step(meas.offset_est_ghz, m.config.hold));
        if (decode_tenths(step) != 0.0) send(e.port, MsgType::HoldCorrect, step);
        arm(e.port, p, m.config.monitor_period_us);
        return;
      }
    }
  }
};

}  // namespace

CoTransition co_transition(const CoMachine& machine, const CoEvent& event) {
  CoStep s{machine, {}};
  std::visit([&](const auto& e) { s.on(e); }, event);
  return {std::move(s.m), std::move(s.out)};
}

// ---- closed loop ----

HoldLoopResult simulate_hold_loop(const HoldLoopConfig& config, double duration_s, std::uint64_t seed) {
  Rng drift_rng = Rng::derive(seed, "drift");
  Rng meas_rng = Rng::derive(seed, "measure");
  HoldLoopResult r;
  double drift = config.initial_offset_ghz;
  double trim = 0.0;
  const auto steps = static_cast<std::size_t>(std::floor(duration_s / config.period_s + 1e-9));
  for (std::size_t i = 0; i < steps; ++i) {
    drift = lasers::step_drift(drift, config.period_s, config.drift, drift_rng);
    double offset = drift + trim;
    r.max_abs_offset_ghz = std::max(r.max_abs_offset_ghz, std::abs(offset));
    if (config.enabled) {
      const double est = offset + meas_rng.normal(0.0, config.measurement_sigma_ghz);
      const double c = decode_tenths(encode_tenths(hold_step(est, config.hold)));
      if (c != 0.0) {
        trim += c;
        ++r.corrections;
      }
    }
    ++r.steps;
  }
  r.final_offset_ghz = drift + trim;
  return r;
}

}  // namespace gmetro::protocol
