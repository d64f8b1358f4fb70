#include <doctest.h>

#include <cmath>
#include <vector>

#include "gmetro/codec.hpp"
#include "gmetro/error.hpp"
#include "gmetro/lasers.hpp"
#include "gmetro/protocol.hpp"

using namespace gmetro;
using namespace gmetro::protocol;
using codec::MsgType;

namespace {

const FrequencyPlan kPlan;

RuMachine ru(bool calibrated, Role role = Role::Standalone) {
  const lasers::Laser laser = lasers::MemsVcselModel{};
  std::optional<lasers::CalibrationTable> table;
  if (calibrated) table = lasers::calibrate(laser, kPlan);
  return make_ru_machine(laser, table, kPlan, 50.0, role);
}

template <class T>
std::vector<T> only(const std::vector<Action>& actions) {
  std::vector<T> out;
  for (const auto& a : actions)
    if (const auto* p = std::get_if<T>(&a)) out.push_back(*p);
  return out;
}

std::vector<MsgType> sent(const std::vector<Action>& actions) {
  std::vector<MsgType> out;
  for (const auto& s : only<action::Send>(actions)) out.push_back(s.frame.type);
  return out;
}

ru_event::Msg msg(MsgType type, std::vector<std::uint8_t> payload = {}, double rx = -20.0) {
  return {make_frame(type, std::move(payload)), rx};
}

CoMachine co_with_port(int port, std::size_t ch) {
  CoMachine m;
  return co_transition(m, co_event::NmsAssign{port, ch}).machine;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("link loss estimate") {
  CHECK(estimate_link_loss(0.0, -20.0) == 20.0);
  CHECK(estimate_link_loss(3.0, -40.0) == 43.0);
  CHECK(code_of([] { estimate_link_loss(0.0, std::nullopt); }) == ErrorCode::NoReport);
}

TEST_CASE("sweep power") {
  const codec::MgmtChannelConfig cfg;
  CHECK(sweep_power(20.0, cfg).power_dbm == -17.0);
  CHECK_FALSE(sweep_power(20.0, cfg).capped);
  CHECK(sweep_power(0.0, cfg).power_dbm == -37.0);
  const auto capped = sweep_power(45.0, cfg, 3.0, 3.0);
  CHECK(capped.power_dbm == 3.0);
  CHECK(capped.capped);
}

TEST_CASE("sweep power cap raises a warning") {
  auto m = ru(false);
  m = ru_transition(m, ru_event::PowerOn{}).machine;
  const auto t = ru_transition(m, msg(MsgType::Hello, encode_tenths(0.0), -45.0));
  const auto alarms = only<action::RaiseAlarm>(t.actions);
  REQUIRE(alarms.size() == 1);
  CHECK(alarms[0].reason == "SWEEP_POWER_CAPPED");
  CHECK(alarms[0].warning);
  CHECK(t.machine.tx_power_dbm == 3.0);
}

TEST_CASE("plan_sweep arithmetic") {
  const auto s = plan_sweep(kPlan, 50.0, 3.0);
  CHECK(s.step_ghz == 12.5);
  CHECK(s.dwell_ms == 50.0);
  // Band 192.05..193.65 THz: 1600 GHz / 12.5 GHz + 1.
  CHECK(s.point_count() == 129);
  CHECK(s.worst_case_s() == doctest::Approx(6.45));
  CHECK(plan_sweep(kPlan, 20.0, 3.0).step_ghz == 10.0);
  CHECK(plan_sweep(kPlan, 50.0, 40.0).dwell_ms == 80.0);
}

TEST_CASE("sweep never skips a passband") {
  for (double b : {20.0, 37.0, 50.0, 80.0}) {
    const auto s = plan_sweep(kPlan, b, 3.0);
    for (std::size_t ch = 0; ch < kPlan.channel_count; ++ch) {
      double best = 1e9;
      for (std::size_t i = 0; i < s.point_count(); ++i)
        best = std::min(best, std::abs(s.point_thz(i) - kPlan.center_thz(ch)) * 1e3);
      REQUIRE(best <= b / 4.0 + 1e-9);
    }
  }
}

TEST_CASE("hold step") {
  CHECK(hold_step(0.5) == 0.0);
  CHECK(hold_step(4.0) == -2.0);
  CHECK(hold_step(-4.0) == 2.0);
  CHECK(hold_step(10.0) == -2.0);
  CHECK(hold_step(1.5) == -0.75);
}

TEST_CASE("payload layouts") {
  CHECK(encode_channel(5) == std::vector<std::uint8_t>{0x05});
  CHECK(decode_channel(encode_channel(200)) == 200);
  CHECK(encode_tenths(-2.0) == std::vector<std::uint8_t>{0xFF, 0xEC});
  CHECK(encode_tenths(-23.4) == std::vector<std::uint8_t>{0xFF, 0x16});
  CHECK(decode_tenths(encode_tenths(12.3)) == doctest::Approx(12.3));
  CHECK(code_of([] { encode_channel(256); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("RU: calibrated TUNE_REQ goes to direct tuning with table knobs") {
  const auto m = ru(true);
  const auto t = ru_transition(m, msg(MsgType::TuneReq, encode_channel(5)));
  CHECK(t.machine.state == RuState::DirectTuning);
  const auto k = only<action::SetKnobs>(t.actions);
  REQUIRE(k.size() == 1);
  CHECK(k[0].knobs == m.calibration->entries.at(5).knobs);
  CHECK(t.machine.channel == 5u);
}

TEST_CASE("RU: SWEEP_DETECTED stops the sweep and confirms") {
  auto m = ru(false);
  m = ru_transition(m, ru_event::PowerOn{}).machine;
  m = ru_transition(m, msg(MsgType::Hello, encode_tenths(0.0), -10.0)).machine;
  REQUIRE(m.state == RuState::Sweep);
  CHECK(m.tx_power_dbm == doctest::Approx(-40.0 + 10.0 + 3.0));
  const auto t = ru_transition(m, msg(MsgType::SweepDetected, encode_channel(7)));
  CHECK(t.machine.state == RuState::FineTune);
  CHECK(t.machine.channel == 7u);
  const auto s = only<action::Send>(t.actions);
  REQUIRE(s.size() == 1);
  CHECK(s[0].frame.type == MsgType::LockConfirm);
  CHECK(decode_channel(s[0].frame.payload) == 7);
}

TEST_CASE("RU: drift beyond the deadband while locked trims toward zero") {
  auto m = ru(true);
  m.state = RuState::Locked;
  m.channel = 3;
  m.knobs = m.calibration->entries.at(3).knobs;
  const auto t = ru_transition(m, ru_event::DriftTick{4.0});
  CHECK(t.machine.state == RuState::Hold);
  const auto k = only<action::SetKnobs>(t.actions);
  REQUIRE(k.size() == 1);
  CHECK(k[0].trim_ghz == -2.0);
  const auto quiet = ru_transition(m, ru_event::DriftTick{0.4});
  CHECK(quiet.machine.state == RuState::Locked);
  CHECK(quiet.actions.empty());
}

TEST_CASE("RU: full lock sequence under sweep") {
  auto m = ru(false);
  m = ru_transition(m, ru_event::PowerOn{}).machine;
  m = ru_transition(m, msg(MsgType::Hello, encode_tenths(0.0), -8.0)).machine;
  m = ru_transition(m, msg(MsgType::SweepDetected, encode_channel(2))).machine;
  auto t = ru_transition(m, msg(MsgType::HoldCorrect, encode_tenths(-1.5)));
  CHECK(t.machine.trim_ghz == doctest::Approx(-1.5));
  t = ru_transition(t.machine, msg(MsgType::LockConfirm, encode_channel(2), -8.0));
  CHECK(t.machine.state == RuState::Locked);
  CHECK(t.machine.tx_power_dbm == 3.0);
  CHECK(sent(t.actions) == std::vector<MsgType>{MsgType::LossReport});
}

TEST_CASE("RU: stale timers are ignored") {
  auto m = ru(true);
  m = ru_transition(m, msg(MsgType::TuneReq, encode_channel(1))).machine;
  const auto t = ru_transition(m, ru_event::DwellTimer{m.timer_token - 1});
  CHECK(t.machine == m);
  CHECK(t.actions.empty());
}

TEST_CASE("RU: dependent waits for CHAN_ASSIGN") {
  auto m = ru(true, Role::Dependent);
  m = ru_transition(m, ru_event::PowerOn{}).machine;
  auto t = ru_transition(m, msg(MsgType::TuneReq, encode_channel(4)));
  CHECK(t.machine.state == RuState::AwaitAssign);
  t = ru_transition(m, msg(MsgType::ChanAssign, encode_channel(7)));
  CHECK(t.machine.state == RuState::DirectTuning);
  CHECK(t.machine.channel == 7u);
}

TEST_CASE("RU: uncalibrated dependent holds the assignment until the loss is known") {
  auto m = ru(false, Role::Dependent);
  m = ru_transition(m, ru_event::PowerOn{}).machine;
  m = ru_transition(m, msg(MsgType::ChanAssign, encode_channel(7))).machine;
  CHECK(m.state == RuState::AwaitAssign);
  CHECK(m.pending_assign == 7u);
  m = ru_transition(m, msg(MsgType::Hello, encode_tenths(0.0), -9.0)).machine;
  CHECK(m.state == RuState::Sweep);
}

TEST_CASE("RU: only a primary accepts NMS input") {
  CHECK(code_of([] { ru_transition(ru(true), ru_event::NmsAssign{3}); }) == ErrorCode::InvalidEvent);
  auto p = ru(true, Role::Primary);
  p = ru_transition(p, ru_event::PowerOn{}).machine;
  const auto t = ru_transition(p, ru_event::NmsAssign{3});
  CHECK(t.machine.state == RuState::DirectTuning);
  const auto done = ru_transition(t.machine, ru_event::DwellTimer{t.machine.timer_token});
  CHECK(done.machine.state == RuState::Locked);
  CHECK(sent(done.actions) == std::vector<MsgType>{MsgType::ChanAssign});
}

TEST_CASE("RU: transition totality and purity") {
  const std::vector<RuState> states = {RuState::Init,   RuState::AwaitAssign, RuState::DirectTuning, RuState::Sweep,
                                       RuState::FineTune, RuState::Locked,    RuState::Hold};
  const std::vector<MsgType> types = {MsgType::Hello,      MsgType::TuneReq,    MsgType::SweepDetected,
                                      MsgType::LockConfirm, MsgType::PowerAdj,  MsgType::LossReport,
                                      MsgType::ChanAssign, MsgType::HoldCorrect, MsgType::Ack, MsgType::Nak};
  auto payload_for = [](MsgType t) -> std::vector<std::uint8_t> {
    switch (t) {
      case MsgType::Hello: case MsgType::LossReport: case MsgType::HoldCorrect: case MsgType::PowerAdj:
        return encode_tenths(-1.0);
      default:
        return encode_channel(3);
    }
  };
  std::size_t legal = 0, illegal = 0;
  for (bool calibrated : {true, false})
    for (Role role : {Role::Standalone, Role::Primary, Role::Dependent})
      for (RuState st : states)
        for (bool known_loss : {true, false}) {
          RuMachine m = ru(calibrated, role);
          m.state = st;
          m.channel = 3;
          if (known_loss) m.loss_est_db = 12.0;
          if (calibrated) m.knobs = m.calibration->entries.at(3).knobs;
          else m.knobs = lasers::nominal_knobs(m.laser, kPlan.center_thz(3));
          std::vector<RuEvent> events = {ru_event::PowerOn{}, ru_event::DwellTimer{m.timer_token},
                                         ru_event::DriftTick{3.0}, ru_event::LinkDown{}, ru_event::NmsAssign{3}};
          for (MsgType ty : types) events.push_back(msg(ty, payload_for(ty)));
          for (const auto& ev : events) {
            if (ru_event_legal(st, role, ev.index())) {
              ++legal;
              const auto a = ru_transition(m, ev);
              const auto b = ru_transition(m, ev);
              REQUIRE(a.machine == b.machine);
              REQUIRE(a.actions == b.actions);
            } else {
              ++illegal;
              REQUIRE(code_of([&] { ru_transition(m, ev); }) == ErrorCode::InvalidEvent);
            }
          }
        }
  CHECK(legal > 0);
  CHECK(illegal > 0);
}

TEST_CASE("RU: legality table") {
  CHECK(ru_event_legal(RuState::Init, Role::Standalone, 0));
  CHECK_FALSE(ru_event_legal(RuState::Locked, Role::Standalone, 0));
  for (std::size_t k = 2; k <= 4; ++k) CHECK_FALSE(ru_event_legal(RuState::Init, Role::Standalone, k));
  CHECK(ru_event_legal(RuState::Sweep, Role::Dependent, 1));
  CHECK(ru_event_legal(RuState::AwaitAssign, Role::Primary, 5));
  CHECK(kRuEventKinds == 6);
}

TEST_CASE("CO: audible HELLO at a waiting port is detected") {
  const auto m = co_with_port(5, 5);
  REQUIRE(m.ports.at(5).state == PortState::WaitDetect);
  const auto t = co_transition(m, co_event::Msg{5, make_frame(MsgType::Hello), -39.0});
  CHECK(t.machine.ports.at(5).state == PortState::Confirming);
  const auto s = only<action::Send>(t.actions);
  REQUIRE(s.size() == 1);
  CHECK(s[0].frame.type == MsgType::SweepDetected);
  CHECK(decode_channel(s[0].frame.payload) == 5);
  CHECK(s[0].port == 5);
}

TEST_CASE("CO: below-sensitivity input does nothing") {
  const auto m = co_with_port(5, 5);
  const auto p = co_transition(m, co_event::PortPower{5, -45.0});
  CHECK(p.actions.empty());
  CHECK(p.machine.ports.at(5).state == PortState::WaitDetect);
  const auto h = co_transition(m, co_event::Msg{5, make_frame(MsgType::Hello), -45.0});
  CHECK(h.actions.empty());
  CHECK(h.machine.ports.at(5).state == PortState::WaitDetect);
}

TEST_CASE("CO: assignment beacons HELLO and TUNE_REQ") {
  const auto t = co_transition(CoMachine{}, co_event::NmsAssign{2, 2});
  CHECK(sent(t.actions) == std::vector<MsgType>{MsgType::Hello, MsgType::TuneReq});
  CHECK(only<action::ArmTimer>(t.actions).at(0).delay_us == 100'000);
}

TEST_CASE("CO: monitor measurement beyond the deadband sends a signed step") {
  auto m = co_with_port(5, 5);
  m.ports.at(5).state = PortState::Monitor;
  const auto tok = m.ports.at(5).timer_token;
  const auto t = co_transition(m, co_event::Timer{5, tok, {true, -20.0, 3.0}});
  const auto s = only<action::Send>(t.actions);
  REQUIRE(s.size() == 1);
  CHECK(s[0].frame.type == MsgType::HoldCorrect);
  CHECK(decode_tenths(s[0].frame.payload) == doctest::Approx(-1.5));
  const auto q = co_transition(m, co_event::Timer{5, tok, {true, -20.0, 0.5}});
  CHECK(sent(q.actions).empty());
  CHECK(q.machine.ports.at(5).state == PortState::Monitor);
}

TEST_CASE("CO: confirm loop centers, then locks") {
  auto m = co_with_port(1, 1);
  m = co_transition(m, co_event::Msg{1, make_frame(MsgType::Hello), -30.0}).machine;
  m = co_transition(m, co_event::Msg{1, make_frame(MsgType::LockConfirm, encode_channel(1)), -30.0}).machine;
  REQUIRE(m.ports.at(1).ru_stopped);
  auto t = co_transition(m, co_event::Timer{1, m.ports.at(1).timer_token, {true, -30.0, 2.0}});
  CHECK(sent(t.actions) == std::vector<MsgType>{MsgType::HoldCorrect});
  CHECK(decode_tenths(only<action::Send>(t.actions)[0].frame.payload) == doctest::Approx(-2.0));
  t = co_transition(t.machine, co_event::Timer{1, t.machine.ports.at(1).timer_token, {true, -30.0, 0.1}});
  CHECK(sent(t.actions) == std::vector<MsgType>{MsgType::LockConfirm});
  CHECK(t.machine.ports.at(1).state == PortState::Monitor);
}

TEST_CASE("CO: leakage from a neighbouring channel is rejected") {
  auto m = co_with_port(1, 1);
  m.config.max_offset_ghz = 25.0;
  m = co_transition(m, co_event::Msg{1, make_frame(MsgType::Hello), -39.5}).machine;
  m = co_transition(m, co_event::Msg{1, make_frame(MsgType::LockConfirm, encode_channel(1)), -39.5}).machine;
  const auto t = co_transition(m, co_event::Timer{1, m.ports.at(1).timer_token, {true, -39.5, -100.0}});
  CHECK(only<action::RaiseAlarm>(t.actions).at(0).reason == "OFF_PORT_SIGNAL");
  CHECK(t.machine.ports.at(1).state == PortState::WaitDetect);
}

TEST_CASE("CO: unknown ports are invalid") {
  CHECK(code_of([] { co_transition(CoMachine{}, co_event::PortPower{3, -10.0}); }) == ErrorCode::InvalidEvent);
}

TEST_CASE("CO: totality and purity over port states") {
  std::size_t n = 0;
  for (PortState st : {PortState::Idle, PortState::WaitDetect, PortState::Confirming, PortState::Monitor})
    for (bool stopped : {false, true}) {
      auto m = co_with_port(4, 4);
      m.ports.at(4).state = st;
      m.ports.at(4).ru_stopped = stopped;
      const auto tok = m.ports.at(4).timer_token;
      std::vector<CoEvent> events = {co_event::NmsAssign{4, 4}, co_event::PortPower{4, -50.0},
                                     co_event::PortPower{4, -10.0}};
      for (int ty = 0; ty <= 9; ++ty) {
        const auto type = static_cast<MsgType>(ty);
        const auto payload = (type == MsgType::LossReport || type == MsgType::Hello) ? encode_tenths(-12.0)
                                                                                     : encode_channel(4);
        events.push_back(co_event::Msg{4, make_frame(type, payload), -20.0});
      }
      for (double off : {0.0, 0.2, 2.0, 40.0}) events.push_back(co_event::Timer{4, tok, {true, -20.0, off}});
      events.push_back(co_event::Timer{4, tok, {false, -200.0, 0.0}});
      events.push_back(co_event::Timer{4, tok + 7, {true, -20.0, 0.0}});
      for (const auto& ev : events) {
        const auto a = co_transition(m, ev);
        const auto b = co_transition(m, ev);
        REQUIRE(a.machine == b.machine);
        REQUIRE(a.actions == b.actions);
        ++n;
      }
    }
  CHECK(n > 100);
}

TEST_CASE("hold loop keeps 24 h within 7.5 GHz") {
  HoldLoopConfig cfg;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto r = simulate_hold_loop(cfg, 24 * 3600.0, seed);
    CHECK(r.steps == 86400);
    CHECK(r.max_abs_offset_ghz <= 7.5);
  }
}

TEST_CASE("hold loop without correction drifts away") {
  HoldLoopConfig cfg;
  cfg.enabled = false;
  int exceeded = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed)
    if (simulate_hold_loop(cfg, 24 * 3600.0, seed).max_abs_offset_ghz > 7.5) ++exceeded;
  CHECK(exceeded >= 5);
}

TEST_CASE("hold loop is deterministic per seed") {
  HoldLoopConfig cfg;
  const auto a = simulate_hold_loop(cfg, 3600.0, 9);
  const auto b = simulate_hold_loop(cfg, 3600.0, 9);
  CHECK(a.max_abs_offset_ghz == b.max_abs_offset_ghz);
  CHECK(a.final_offset_ghz == b.final_offset_ghz);
  CHECK(a.corrections == b.corrections);
}
