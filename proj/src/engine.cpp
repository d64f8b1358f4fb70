#include "gmetro/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <deque>
#include <limits>
#include <queue>
#include <set>
#include <tuple>

#include "gmetro/error.hpp"
#include "gmetro/rng.hpp"

namespace gmetro::engine {

using codec::MgmtFrame;
using codec::MsgType;
using protocol::PortState;
using protocol::Role;
using protocol::RuState;

namespace {

constexpr double kPropagationUsPerKm = 5.0;
constexpr double kLockToleranceGhz = 1.0;
constexpr double kHoldToleranceGhz = 7.5;

std::string format(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string format(const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

std::int64_t ms_to_us(double ms) { return static_cast<std::int64_t>(std::llround(ms * 1e3)); }

bool locked_state(RuState s) { return s == RuState::Locked || s == RuState::Hold; }

struct RuRt {
  RuSpec spec;
  std::size_t node = 0;
  std::optional<std::size_t> primary_co;  // set for the primary of a pairwise link
  lasers::Laser laser;
  protocol::RuMachine machine;
  bool powered = false;
  bool emitting = false;
  double power_dbm = -200.0;
  double base_thz = 0.0;
  double trim_ghz = 0.0;
  double drift_ghz = 0.0;
  std::size_t tx = 0;
  Rng rx_rng, drift_rng, meas_rng;
  std::optional<std::size_t> serving;  // index into cos
  std::optional<double> time_to_lock_s;
  std::size_t locks = 0;
  double max_locked_offset = 0.0;

  double frequency_thz() const { return base_thz + (trim_ghz + drift_ghz) * 1e-3; }
};

struct CoRt {
  CoSpec spec;
  std::size_t node = 0;
  std::vector<std::size_t> ports;
  protocol::CoMachine machine;
  std::map<int, std::size_t> port_tx;
  std::map<int, Rng> meas_rng;
  std::map<int, Rng> rx_rng;
  std::optional<std::size_t> primary_ru;
};

struct Pending {
  MgmtFrame frame;
  int attempts = 0;
  std::uint32_t token = 0;
};

struct Tx {
  std::string name;
  bool upstream = true;
  std::size_t owner = 0;  // RU index (upstream) or CO index
  int port = 0;
  std::deque<MgmtFrame> queue;
  bool busy = false;
  std::uint8_t next_seq = 0;
  std::uint32_t next_token = 0;
  std::map<std::uint8_t, Pending> pending;
};

struct Delivery {
  std::size_t tx = 0;
  MgmtFrame frame;
  bool to_ru = false;
  std::size_t target = 0;  // RU or CO index
  int port = 0;            // CO port for upstream deliveries
  double rx_dbm = 0.0;
};

enum class EvKind { RuPowerOn, RuTimer, CoTimer, TxDone, Arrival, AckTimeout, DriftTick, Fault, Nms };

struct Ev {
  std::int64_t t = 0;
  std::uint64_t seq = 0;
  EvKind kind = EvKind::RuTimer;
  std::size_t a = 0;
  int b = 0;
  std::uint32_t token = 0;
};

struct EvLater {
  bool operator()(const Ev& x, const Ev& y) const { return std::tie(x.t, x.seq) > std::tie(y.t, y.seq); }
};

lasers::Laser design_law(lasers::Laser laser) {
  std::visit([](auto& m) { m.frequency_error_ghz = 0.0; }, laser);
  return laser;
}

using PathKey = std::tuple<std::size_t, int, std::size_t, int>;

class Sim {
 public:
  Sim(const Scenario& sc, const RunOptions& opt) : sc_(sc), opt_(opt), topo_(build_topology(sc)) {
    ber_ = sc.ber;
    horizon_us_ = static_cast<std::int64_t>(std::llround(sc.horizon_s * 1e6));
    for (const auto& f : sc.faults) last_fault_us_ = std::max(last_fault_us_, f.at_us);
    setup();
  }

  RunResult run() {
    while (!queue_.empty()) {
      const Ev ev = queue_.top();
      if (ev.t > horizon_us_) {
        now_ = horizon_us_;
        emit("ENGINE", "STOP", "reason=HORIZON");
        return finish();
      }
      queue_.pop();
      now_ = ev.t;
      ++metrics_.events;
      dispatch(ev);
      if (stop_reached()) {
        emit("ENGINE", "STOP", "reason=ALL_LOCKED");
        return finish();
      }
    }
    if (!all_locked()) throw Error(ErrorCode::Deadlock, "event queue empty with radio units unlocked");
    emit("ENGINE", "STOP", "reason=QUEUE_EMPTY");
    return finish();
  }

 private:
  // ---- setup ----

  void setup() {
    for (std::size_t c = 0; c < sc_.cos.size(); ++c) {
      CoRt co;
      co.spec = sc_.cos[c];
      co.node = topo_.node_index(co.spec.name);
      co.ports = co.spec.ports;
      if (co.ports.empty() && !co.spec.primary) {
        for (const auto& ru : sc_.rus) co.ports.push_back(ru.port);
        std::sort(co.ports.begin(), co.ports.end());
        co.ports.erase(std::unique(co.ports.begin(), co.ports.end()), co.ports.end());
      }
      protocol::CoConfig cfg;
      cfg.mgmt = sc_.mgmt;
      cfg.tx_power_dbm = co.spec.tx_power_dbm;
      cfg.hold = sc_.hold;
      if (!sc_.hold_enabled) cfg.hold.deadband_ghz = std::numeric_limits<double>::infinity();
      cfg.send_tune_req = !co.spec.primary;
      cfg.max_offset_ghz = sc_.plant.filter.bandwidth_3db_ghz / 2.0;
      co.machine.config = cfg;
      cos_.push_back(std::move(co));
    }
    for (std::size_t c = 0; c < cos_.size(); ++c) {
      for (std::size_t p : cos_[c].ports) ensure_port(c, static_cast<int>(p));
    }

    for (const auto& spec : sc_.rus) add_ru(spec, std::nullopt);
    for (std::size_t c = 0; c < cos_.size(); ++c) {
      if (!cos_[c].spec.primary) continue;
      RuSpec ps;
      ps.name = cos_[c].spec.name;
      ps.port = cos_[c].spec.nms_channel;
      ps.laser = *cos_[c].spec.laser;
      ps.calibrated = cos_[c].spec.calibrated;
      ps.launch_power_dbm = cos_[c].spec.tx_power_dbm;
      ps.role = Role::Primary;
      ensure_port(c, static_cast<int>(ps.port));
      cos_[c].primary_ru = rus_.size();
      add_ru(ps, c);
    }

    // Port assignment for ordinary COs at t = 0, primary input, RU power-on.
    for (std::size_t c = 0; c < cos_.size(); ++c) {
      if (cos_[c].spec.primary) continue;
      for (std::size_t p : cos_[c].ports) schedule(0, EvKind::Nms, c, static_cast<int>(p));
    }
    for (std::size_t i = 0; i < rus_.size(); ++i) {
      schedule(ms_to_us(rus_[i].spec.start_ms), EvKind::RuPowerOn, i);
    }
    for (std::size_t k = 0; k < sc_.faults.size(); ++k) schedule(sc_.faults[k].at_us, EvKind::Fault, k);
  }

  void ensure_port(std::size_t c, int port) {
    CoRt& co = cos_[c];
    if (co.port_tx.count(port)) return;
    Tx tx;
    tx.name = co.spec.name + ".p" + std::to_string(port);
    tx.upstream = false;
    tx.owner = c;
    tx.port = port;
    co.port_tx[port] = txs_.size();
    txs_.push_back(std::move(tx));
    co.meas_rng.emplace(port, Rng::derive(sc_.seed, txs_.back().name + ".meas"));
    co.rx_rng.emplace(port, Rng::derive(sc_.seed, txs_.back().name + ".rx"));
  }

  void add_ru(const RuSpec& spec, std::optional<std::size_t> primary_co) {
    RuRt ru;
    ru.spec = spec;
    ru.primary_co = primary_co;
    ru.node = primary_co ? cos_[*primary_co].node : topo_.node_index(spec.name);
    ru.laser = spec.laser;
    std::optional<lasers::CalibrationTable> table;
    if (spec.calibrated) table = lasers::calibrate(spec.laser, sc_.plan);
    protocol::RuConfig cfg;
    cfg.mgmt = sc_.mgmt;
    cfg.full_power_dbm = spec.launch_power_dbm;
    cfg.sweep_margin_db = sc_.sweep_margin_db;
    cfg.hold = sc_.hold;
    if (!sc_.hold_enabled) cfg.hold.deadband_ghz = std::numeric_limits<double>::infinity();
    ru.machine = protocol::make_ru_machine(design_law(spec.laser), std::move(table), sc_.plan,
                                           sc_.plant.filter.bandwidth_3db_ghz, spec.role, cfg);
    ru.base_thz = lasers::emission(ru.laser).frequency_thz;
    ru.rx_rng = Rng::derive(sc_.seed, spec.name + ".rx");
    ru.drift_rng = Rng::derive(sc_.seed, spec.name + ".drift");
    ru.meas_rng = Rng::derive(sc_.seed, spec.name + ".meas");
    if (!primary_co) {
      ru.serving = serving_co_index(ru.node, spec.port);
      Tx tx;
      tx.name = spec.name;
      tx.upstream = true;
      tx.owner = rus_.size();
      ru.tx = txs_.size();
      txs_.push_back(std::move(tx));
    } else {
      ru.tx = cos_[*primary_co].port_tx.at(static_cast<int>(spec.port));
    }
    rus_.push_back(std::move(ru));
  }

  std::optional<std::size_t> serving_co_index(std::size_t node, std::size_t port) const {
    const auto co_node = link::serving_co(topo_, node, port);
    if (!co_node) return std::nullopt;
    for (std::size_t c = 0; c < cos_.size(); ++c) {
      if (cos_[c].node == *co_node) return c;
    }
    return std::nullopt;
  }

  // ---- queue and trace ----

  void schedule(std::int64_t t, EvKind kind, std::size_t a = 0, int b = 0, std::uint32_t token = 0) {
    queue_.push(Ev{t, next_seq_++, kind, a, b, token});
  }

  void emit(const std::string& entity, const std::string& kind, const std::string& details) {
    std::string line = trace_emit({now_, entity, kind, details});
    if (opt_.trace_stream) *opt_.trace_stream << line << '\n';
    if (opt_.keep_trace) trace_.push_back(std::move(line));
  }

  void violation(const std::string& entity, const std::string& what) {
    ++metrics_.safety_violations;
    emit(entity, "SAFETY_VIOLATION", what);
    if (violations_.size() < 1000) violations_.push_back(format("%lld %s %s", static_cast<long long>(now_),
                                                                entity.c_str(), what.c_str()));
  }

  std::string port_name(std::size_t c, int port) const { return cos_[c].spec.name + ".p" + std::to_string(port); }

  // ---- optics ----

  const std::optional<link::Path>& path(std::size_t from_node, std::optional<int> from_port, std::size_t to_node,
                                        std::optional<int> to_port) {
    const PathKey key{from_node, from_port.value_or(INT32_MIN), to_node, to_port.value_or(INT32_MIN)};
    auto it = paths_.find(key);
    if (it == paths_.end()) {
      it = paths_.emplace(key, link::find_path(topo_, {from_node, from_port}, {to_node, to_port})).first;
    }
    return it->second;
  }

  /// Received power at CO port from an RU, nullopt without a path.
  std::optional<double> upstream_rx(const RuRt& ru, std::size_t c, int port, double* km = nullptr) {
    const auto& p = path(ru.node, std::nullopt, cos_[c].node, port);
    if (!p) return std::nullopt;
    if (km) *km = p->length_km;
    return ru.power_dbm + link::path_gain_db(topo_, *p, ru.frequency_thz());
  }

  double co_frequency(std::size_t c, int port) const {
    const CoRt& co = cos_[c];
    if (co.primary_ru && port == static_cast<int>(co.spec.nms_channel)) return rus_[*co.primary_ru].frequency_thz();
    return sc_.plan.center_thz(static_cast<std::size_t>(port));
  }

  double co_power(std::size_t c, int port) const {
    const CoRt& co = cos_[c];
    if (co.primary_ru && port == static_cast<int>(co.spec.nms_channel)) {
      const RuRt& p = rus_[*co.primary_ru];
      return p.emitting ? p.power_dbm : -200.0;
    }
    return co.spec.tx_power_dbm;
  }

  double offset_ghz(const RuRt& ru) const {
    return (ru.frequency_thz() - sc_.plan.center_thz(ru.spec.port)) * 1e3;
  }

  void set_emission(RuRt& ru, const std::vector<double>& knobs, double trim) {
    std::vector<double> k = knobs;
    const auto ranges = lasers::knob_ranges(ru.laser);
    for (std::size_t i = 0; i < k.size() && i < ranges.size(); ++i) k[i] = std::clamp(k[i], ranges[i].min, ranges[i].max);
    try {
      ru.base_thz = lasers::apply_tuning(ru.laser, k).frequency_thz;
    } catch (const Error& e) {
      emit(ru.spec.name, "WARN", std::string("reason=") + std::string(to_string(e.code())));
    }
    ru.trim_ghz = trim;
  }

  // ---- safety ----

  void check_safety() {
    // Offset bounds for units that are locked.
    for (std::size_t i = 0; i < rus_.size(); ++i) {
      RuRt& ru = rus_[i];
      if (ru.primary_co || !locked_state(ru.machine.state)) continue;
      const double off = std::abs(offset_ghz(ru));
      ru.max_locked_offset = std::max(ru.max_locked_offset, off);
      if (off > kHoldToleranceGhz) violation(ru.spec.name, format("kind=OFFSET off=%.3fGHz", off));
    }
    // Sweepers against every operating victim, at the victim's CO port.
    for (std::size_t s = 0; s < rus_.size(); ++s) {
      RuRt& sw = rus_[s];
      if (!sw.emitting || sw.machine.state != RuState::Sweep) continue;
      for (std::size_t v = 0; v < rus_.size(); ++v) {
        RuRt& vic = rus_[v];
        if (v == s || vic.primary_co || !vic.emitting || !locked_state(vic.machine.state) || !vic.serving) continue;
        const int port = static_cast<int>(vic.spec.port);
        const auto signal = upstream_rx(vic, *vic.serving, port);
        const auto leak = upstream_rx(sw, *vic.serving, port);
        if (!signal || !leak) continue;
        const double margin = *signal - *leak;
        if (!metrics_.min_crosstalk_margin_db || margin < *metrics_.min_crosstalk_margin_db) {
          metrics_.min_crosstalk_margin_db = margin;
        }
        if (margin < sc_.crosstalk_floor_db) {
          violation(sw.spec.name, format("kind=CROSSTALK victim=%s margin=%.2fdB", vic.spec.name.c_str(), margin));
        }
      }
    }
  }

  // ---- machine plumbing ----

  void ru_step(std::size_t i, const protocol::RuEvent& event) {
    RuRt& ru = rus_[i];
    const RuState before = ru.machine.state;
    auto tr = protocol::ru_transition(ru.machine, event);
    ru.machine = std::move(tr.machine);
    bool emission_changed = false;
    for (const auto& act : tr.actions) {
      if (const auto* k = std::get_if<protocol::action::SetKnobs>(&act)) {
        set_emission(ru, k->knobs, k->trim_ghz);
        emission_changed = true;
      } else if (const auto* p = std::get_if<protocol::action::SetPower>(&act)) {
        ru.power_dbm = p->power_dbm;
        ru.emitting = true;
        emission_changed = true;
      } else if (const auto* s = std::get_if<protocol::action::Send>(&act)) {
        enqueue(ru.tx, s->frame);
      } else if (const auto* t = std::get_if<protocol::action::ArmTimer>(&act)) {
        schedule(now_ + t->delay_us, EvKind::RuTimer, i, 0, t->token);
      } else if (const auto* a = std::get_if<protocol::action::RaiseAlarm>(&act)) {
        emit(ru.spec.name, a->warning ? "WARN" : "ALARM", "reason=" + a->reason);
      }
    }
    if (emission_changed) {
      emit(ru.spec.name, "EMIT", format("f=%.6fTHz p=%.1fdBm", ru.frequency_thz(), ru.power_dbm));
    }
    const RuState after = ru.machine.state;
    if (after != before) {
      emit(ru.spec.name, "STATE",
           format("from=%s to=%s", to_string(before).data(), to_string(after).data()));
      if (after == RuState::Locked && before != RuState::Hold) on_lock(i);
    }
    if (emission_changed || after != before) check_safety();
  }

  void on_lock(std::size_t i) {
    RuRt& ru = rus_[i];
    const double off = offset_ghz(ru);
    emit(ru.spec.name, "LOCK",
         format("ch=%zu f=%.6fTHz off=%.1fGHz", ru.spec.port, ru.frequency_thz(), off));
    ++ru.locks;
    if (!ru.time_to_lock_s) ru.time_to_lock_s = static_cast<double>(now_ - ms_to_us(ru.spec.start_ms)) * 1e-6;
    if (!ru.primary_co && std::abs(off) > kLockToleranceGhz) {
      violation(ru.spec.name, format("kind=LOCK_OFFSET off=%.3fGHz", off));
    }
    if (ru.primary_co) {
      const std::size_t c = *ru.primary_co;
      emit(cos_[c].spec.name, "PORT_ENABLE", format("port=%zu ch=%zu", ru.spec.port, ru.spec.port));
      co_step(c, protocol::co_event::NmsAssign{static_cast<int>(ru.spec.port), ru.spec.port});
    }
    for (auto* pending : {&cut_pending_, &restore_pending_}) pending->erase(i);
    settle_protection();
  }

  void co_step(std::size_t c, const protocol::CoEvent& event) {
    CoRt& co = cos_[c];
    std::map<int, PortState> before;
    for (const auto& [port, st] : co.machine.ports) before[port] = st.state;
    auto tr = protocol::co_transition(co.machine, event);
    co.machine = std::move(tr.machine);
    for (const auto& act : tr.actions) {
      if (const auto* s = std::get_if<protocol::action::Send>(&act)) {
        if (s->frame.type == MsgType::HoldCorrect) ++metrics_.hold_corrections;
        enqueue(co.port_tx.at(s->port), s->frame);
      } else if (const auto* t = std::get_if<protocol::action::ArmTimer>(&act)) {
        schedule(now_ + t->delay_us, EvKind::CoTimer, c, t->port, t->token);
      } else if (const auto* a = std::get_if<protocol::action::RaiseAlarm>(&act)) {
        emit(port_name(c, a->port), a->warning ? "WARN" : "ALARM", "reason=" + a->reason);
      }
    }
    for (const auto& [port, st] : co.machine.ports) {
      const auto it = before.find(port);
      const PortState old = it == before.end() ? PortState::Idle : it->second;
      if (old != st.state) {
        emit(port_name(c, port), "STATE",
             format("from=%s to=%s", to_string(old).data(), to_string(st.state).data()));
      }
    }
  }

  // ---- transmitters ----

  std::int64_t airtime_us(const MgmtFrame& f) const {
    const double bits = static_cast<double>(codec::packed_bits(f.payload.size()));
    return static_cast<std::int64_t>(std::ceil(bits * 1e6 / sc_.mgmt.bit_rate));
  }

  void enqueue(std::size_t t, MgmtFrame frame) {
    Tx& tx = txs_[t];
    if (codec::is_reliable(frame.type)) {
      frame.seq = tx.next_seq;
      tx.next_seq = static_cast<std::uint8_t>((tx.next_seq + 1) & 0x0F);
      Pending& p = tx.pending[frame.seq];
      p.frame = frame;
      p.attempts = 0;
      p.token = ++tx.next_token;
    }
    tx.queue.push_back(std::move(frame));
    if (!tx.busy) start_tx(t);
  }

  void start_tx(std::size_t t) {
    Tx& tx = txs_[t];
    if (tx.queue.empty()) {
      tx.busy = false;
      return;
    }
    tx.busy = true;
    const MgmtFrame frame = tx.queue.front();
    tx.queue.pop_front();
    const std::int64_t air = airtime_us(frame);
    schedule(now_ + air, EvKind::TxDone, t);

    double max_km = 0.0;
    std::vector<Delivery> out;
    std::string lost_reason;
    if (tx.upstream) {
      route_upstream(t, frame, out, lost_reason, max_km);
    } else {
      route_downstream(t, frame, out, lost_reason, max_km);
    }

    double tx_power = 0.0, tx_freq = 0.0;
    if (tx.upstream) {
      tx_power = rus_[tx.owner].power_dbm;
      tx_freq = rus_[tx.owner].frequency_thz();
    } else {
      tx_power = co_power(tx.owner, tx.port);
      tx_freq = co_frequency(tx.owner, tx.port);
    }
    emit(tx.name, "TX",
         format("type=%s seq=%u bits=%zu p=%.1fdBm f=%.6fTHz%s", to_string(frame.type).data(), frame.seq,
                codec::packed_bits(frame.payload.size()), tx_power, tx_freq, payload_text(frame).c_str()));

    if (out.empty()) {
      ++metrics_.frames_sent;
      ++metrics_.frames_lost;
      emit(tx.name, "FRAME_LOST", "reason=" + lost_reason);
    }
    for (auto& d : out) {
      ++metrics_.frames_sent;
      const double km = d.to_ru ? downstream_km(d) : upstream_km(d);
      const auto delay = air + static_cast<std::int64_t>(std::llround(km * kPropagationUsPerKm));
      const std::size_t id = next_delivery_++;
      deliveries_.emplace(id, std::move(d));
      schedule(now_ + delay, EvKind::Arrival, id);
    }
    if (codec::is_reliable(frame.type)) {
      const auto it = tx.pending.find(frame.seq);
      if (it != tx.pending.end()) {
        const auto prop = static_cast<std::int64_t>(std::llround(max_km * kPropagationUsPerKm));
        schedule(now_ + air + 4 * air + 2 * prop, EvKind::AckTimeout, t, frame.seq, it->second.token);
      }
    }
  }

  static std::string payload_text(const MgmtFrame& f) {
    if (f.payload.empty()) return {};
    std::string s = " payload=";
    for (auto b : f.payload) s += format("%02X", b);
    return s;
  }

  double downstream_km(const Delivery& d) {
    const Tx& tx = txs_[d.tx];
    const auto& p = path(cos_[tx.owner].node, tx.port, rus_[d.target].node, std::nullopt);
    return p ? p->length_km : 0.0;
  }
  double upstream_km(const Delivery& d) {
    const Tx& tx = txs_[d.tx];
    const auto& p = path(rus_[tx.owner].node, std::nullopt, cos_[d.target].node, d.port);
    return p ? p->length_km : 0.0;
  }

  void route_upstream(std::size_t t, const MgmtFrame& frame, std::vector<Delivery>& out, std::string& lost,
                      double& max_km) {
    const RuRt& ru = rus_[txs_[t].owner];
    lost = "NO_PATH";
    if (!ru.emitting) {
      lost = "TX_OFF";
      return;
    }
    if (!ru.serving) return;
    const std::size_t c = *ru.serving;
    bool any_path = false;
    for (const auto& [port, st] : cos_[c].machine.ports) {
      double km = 0.0;
      const auto rx = upstream_rx(ru, c, port, &km);
      if (!rx) continue;
      any_path = true;
      if (*rx < sc_.mgmt.rx_sensitivity_dbm) continue;
      max_km = std::max(max_km, km);
      out.push_back(Delivery{t, frame, false, c, port, *rx});
    }
    if (out.empty()) lost = any_path ? "BELOW_SENSITIVITY" : (cos_[c].machine.ports.empty() ? "NO_RECEIVER" : "NO_PATH");
  }

  void route_downstream(std::size_t t, const MgmtFrame& frame, std::vector<Delivery>& out, std::string& lost,
                        double& max_km) {
    const Tx& tx = txs_[t];
    const std::size_t c = tx.owner;
    const double f = co_frequency(c, tx.port);
    const double p0 = co_power(c, tx.port);
    lost = "NO_RECEIVER";
    for (std::size_t i = 0; i < rus_.size(); ++i) {
      const RuRt& ru = rus_[i];
      if (ru.primary_co || !ru.powered || ru.serving != c) continue;
      const auto& p = path(cos_[c].node, tx.port, ru.node, std::nullopt);
      if (!p) continue;
      const double rx = p0 + link::path_gain_db(topo_, *p, f);
      if (static_cast<int>(ru.spec.port) != tx.port) {
        if (rx >= sc_.mgmt.rx_sensitivity_dbm) {
          violation(ru.spec.name, format("kind=CROSS_LISTEN port=%d rx=%.1fdBm", tx.port, rx));
        }
        continue;
      }
      if (rx < sc_.mgmt.rx_sensitivity_dbm) {
        lost = "BELOW_SENSITIVITY";
        continue;
      }
      max_km = std::max(max_km, p->length_km);
      out.push_back(Delivery{t, frame, true, i, tx.port, rx});
    }
  }

  void on_ack_timeout(std::size_t t, std::uint8_t seq, std::uint32_t token) {
    Tx& tx = txs_[t];
    const auto it = tx.pending.find(seq);
    if (it == tx.pending.end() || it->second.token != token) return;
    if (it->second.attempts >= sc_.max_retries) {
      ++metrics_.abandoned;
      emit(tx.name, "FRAME_ABANDONED", format("type=%s seq=%u", to_string(it->second.frame.type).data(), seq));
      tx.pending.erase(it);
      return;
    }
    ++it->second.attempts;
    it->second.token = ++tx.next_token;
    ++metrics_.retries;
    emit(tx.name, "RETRY",
         format("type=%s seq=%u attempt=%d", to_string(it->second.frame.type).data(), seq, it->second.attempts));
    tx.queue.push_back(it->second.frame);
    if (!tx.busy) start_tx(t);
  }

  // ---- reception ----

  void on_arrival(std::size_t id) {
    auto node = deliveries_.extract(id);
    const Delivery d = std::move(node.mapped());
    const std::string rx_name = d.to_ru ? rus_[d.target].spec.name : port_name(d.target, d.port);
    Rng& rng = d.to_ru ? rus_[d.target].rx_rng : cos_[d.target].rx_rng.at(d.port);

    const codec::BitVector bits = codec::frame_pack(d.frame);
    const codec::SymbolStream symbols = codec::manchester_encode(bits);
    codec::BitVector line = codec::manchester_decode(symbols);
    if (ber_ > 0.0) line = codec::apply_bit_errors(line, ber_, rng);
    codec::UnpackResult r;
    try {
      r = codec::frame_unpack(line);
    } catch (const Error& e) {
      ++metrics_.frames_lost;
      emit(rx_name, "FRAME_LOST",
           format("reason=%s from=%s bits=%zu", to_string(e.code()).data(), txs_[d.tx].name.c_str(), bits.size()));
      return;
    }
    ++metrics_.frames_delivered;
    if (r.fec.corrected > 0) {
      ++metrics_.frames_corrected;
      metrics_.blocks_corrected += r.fec.corrected;
    }
    const MgmtFrame& f = r.frame;
    emit(rx_name, "RX",
         format("type=%s seq=%u from=%s rx=%.1fdBm corrected=%zu", to_string(f.type).data(), f.seq,
                txs_[d.tx].name.c_str(), d.rx_dbm, r.fec.corrected));

    const std::size_t own_tx = d.to_ru ? rus_[d.target].tx : cos_[d.target].port_tx.at(d.port);
    if (f.type == MsgType::Ack) {
      if (f.payload.size() == 1) txs_[own_tx].pending.erase(f.payload[0]);
      return;
    }
    if (codec::is_reliable(f.type)) {
      enqueue(own_tx, protocol::make_frame(MsgType::Ack, {f.seq}));
      const auto key = std::make_tuple(own_tx, d.tx, static_cast<int>(f.type), static_cast<int>(f.seq));
      const std::int64_t window = (sc_.max_retries + 1) * 6 * airtime_us(f);
      const auto it = dedup_.find(key);
      if (it != dedup_.end() && now_ - it->second <= window) {
        emit(rx_name, "DUPLICATE", format("type=%s seq=%u", to_string(f.type).data(), f.seq));
        return;
      }
      dedup_[key] = now_;
    }

    if (d.to_ru) {
      if (rus_[d.target].machine.state == RuState::Init) return;
      ru_step(d.target, protocol::ru_event::Msg{f, d.rx_dbm});
    } else {
      co_step(d.target, protocol::co_event::Msg{d.port, f, d.rx_dbm});
      if (const auto pr = cos_[d.target].primary_ru; pr && d.port == static_cast<int>(cos_[d.target].spec.nms_channel)) {
        ru_step(*pr, protocol::ru_event::Msg{f, d.rx_dbm});
      }
    }
  }

  protocol::Measurement measure(std::size_t c, int port) {
    protocol::Measurement m;
    const auto pit = cos_[c].machine.ports.find(port);
    if (pit == cos_[c].machine.ports.end()) return m;
    const RuRt* best = nullptr;
    for (const auto& ru : rus_) {
      if (ru.primary_co || !ru.emitting || ru.serving != c) continue;
      const auto rx = upstream_rx(ru, c, port);
      if (rx && *rx > m.power_dbm) {
        m.power_dbm = *rx;
        best = &ru;
      }
    }
    if (!best || m.power_dbm < sc_.mgmt.rx_sensitivity_dbm) return m;
    m.signal = true;
    const int samples = pit->second.state == PortState::Confirming ? cos_[c].machine.config.confirm_samples : 1;
    const double truth = (best->frequency_thz() - sc_.plan.center_thz(static_cast<std::size_t>(port))) * 1e3;
    const double sigma = sc_.measurement_sigma_ghz / std::sqrt(static_cast<double>(samples));
    m.offset_est_ghz = truth + cos_[c].meas_rng.at(port).normal(0.0, sigma);
    return m;
  }

  // ---- faults and protection ----

  void on_fault(std::size_t k) {
    const Fault& f = sc_.faults[k];
    switch (f.kind) {
      case FaultKind::BerSet:
        ber_ = f.ber;
        emit("ENGINE", "BER_SET", format("ber=%g", f.ber));
        return;
      case FaultKind::FiberCut:
        topo_ = link::apply_cut(topo_, f.span);
        emit("ENGINE", "FIBER_CUT", "span=" + f.span);
        break;
      case FaultKind::FiberRestore:
        topo_ = link::restore(topo_, f.span);
        emit("ENGINE", "FIBER_RESTORE", "span=" + f.span);
        break;
    }
    paths_.clear();
    auto& pending = f.kind == FaultKind::FiberCut ? cut_pending_ : restore_pending_;
    auto& started = f.kind == FaultKind::FiberCut ? cut_at_us_ : restore_at_us_;
    for (std::size_t i = 0; i < rus_.size(); ++i) {
      RuRt& ru = rus_[i];
      if (ru.primary_co) continue;
      const auto now_serving = serving_co_index(ru.node, ru.spec.port);
      if (now_serving == ru.serving) continue;
      const std::string from = ru.serving ? cos_[*ru.serving].spec.name : "none";
      const std::string to = now_serving ? cos_[*now_serving].spec.name : "none";
      ru.serving = now_serving;
      emit(ru.spec.name, "SERVING_CO", "from=" + from + " to=" + to);
      if (ru.machine.state == RuState::Init) continue;
      pending.insert(i);
      if (!started) started = now_;
      emit(ru.spec.name, "LINK_DOWN", "span=" + f.span);
      ru_step(i, protocol::ru_event::LinkDown{});
    }
    settle_protection();
  }

  void settle_protection() {
    if (cut_at_us_ && cut_pending_.empty()) {
      const double s = static_cast<double>(now_ - *cut_at_us_) * 1e-6;
      metrics_.protection_time_s = std::max(metrics_.protection_time_s.value_or(0.0), s);
      emit("ENGINE", "PROTECTION", format("time=%.6fs", s));
      cut_at_us_.reset();
    }
    if (restore_at_us_ && restore_pending_.empty()) {
      const double s = static_cast<double>(now_ - *restore_at_us_) * 1e-6;
      metrics_.restore_time_s = std::max(metrics_.restore_time_s.value_or(0.0), s);
      emit("ENGINE", "RESTORED", format("time=%.6fs", s));
      restore_at_us_.reset();
    }
  }

  // ---- dispatch ----

  void dispatch(const Ev& ev) {
    switch (ev.kind) {
      case EvKind::RuPowerOn: {
        RuRt& ru = rus_[ev.a];
        ru.powered = true;
        emit(ru.spec.name, "POWER_ON",
             format("role=%s calibrated=%d", to_string(ru.spec.role).data(), ru.spec.calibrated ? 1 : 0));
        ru_step(ev.a, protocol::ru_event::PowerOn{});
        if (ru.primary_co) {
          ++metrics_.operator_events;
          emit(ru.spec.name, "NMS_COMMAND", format("assign ch=%zu", ru.spec.port));
          ru_step(ev.a, protocol::ru_event::NmsAssign{ru.spec.port});
        } else {
          schedule(now_ + ms_to_us(sc_.drift_tick_ms), EvKind::DriftTick, ev.a);
        }
        return;
      }
      case EvKind::RuTimer:
        ru_step(ev.a, protocol::ru_event::DwellTimer{ev.token});
        return;
      case EvKind::CoTimer: {
        const auto m = measure(ev.a, ev.b);
        co_step(ev.a, protocol::co_event::Timer{ev.b, ev.token, m});
        return;
      }
      case EvKind::TxDone:
        start_tx(ev.a);
        return;
      case EvKind::Arrival:
        on_arrival(ev.a);
        return;
      case EvKind::AckTimeout:
        on_ack_timeout(ev.a, static_cast<std::uint8_t>(ev.b), ev.token);
        return;
      case EvKind::DriftTick: {
        RuRt& ru = rus_[ev.a];
        ru.drift_ghz = lasers::step_drift(ru.drift_ghz, sc_.drift_tick_ms * 1e-3, sc_.drift, ru.drift_rng);
        if (ru.spec.local_monitor && ru.machine.state != RuState::Init) {
          const double est = offset_ghz(ru) + ru.meas_rng.normal(0.0, sc_.measurement_sigma_ghz);
          ru_step(ev.a, protocol::ru_event::DriftTick{est});
        }
        check_safety();
        schedule(now_ + ms_to_us(sc_.drift_tick_ms), EvKind::DriftTick, ev.a);
        return;
      }
      case EvKind::Fault:
        on_fault(ev.a);
        return;
      case EvKind::Nms: {
        const std::size_t ch = static_cast<std::size_t>(ev.b);
        ++metrics_.operator_events;
        emit(port_name(ev.a, ev.b), "NMS_COMMAND", format("assign ch=%zu", ch));
        co_step(ev.a, protocol::co_event::NmsAssign{ev.b, ch});
        return;
      }
    }
  }

  bool all_locked() const {
    return std::all_of(rus_.begin(), rus_.end(), [](const RuRt& r) { return locked_state(r.machine.state); });
  }

  bool stop_reached() const {
    if (sc_.stop != StopCondition::AllLocked) return false;
    if (now_ < last_fault_us_) return false;
    if (!cut_pending_.empty() || !restore_pending_.empty()) return false;
    return all_locked();
  }

  RunResult finish() {
    RunResult r;
    metrics_.frames_in_flight = deliveries_.size();
    metrics_.sim_time_s = static_cast<double>(now_) * 1e-6;
    metrics_.all_locked = all_locked();
    for (const auto& ru : rus_) {
      RuMetrics m;
      m.name = ru.spec.name;
      m.port = ru.spec.port;
      m.time_to_lock_s = ru.time_to_lock_s;
      m.lock_count = ru.locks;
      m.max_abs_offset_locked_ghz = ru.max_locked_offset;
      m.final_state = std::string(to_string(ru.machine.state));
      m.locked_channel = locked_state(ru.machine.state) ? ru.machine.channel : std::nullopt;
      m.final_frequency_thz = ru.frequency_thz();
      m.final_offset_ghz = offset_ghz(ru);
      if (ru.primary_co) m.serving_co = cos_[*ru.primary_co].spec.name;
      else if (ru.serving) m.serving_co = cos_[*ru.serving].spec.name;
      if (m.time_to_lock_s) {
        metrics_.max_time_to_lock_s = std::max(metrics_.max_time_to_lock_s.value_or(0.0), *m.time_to_lock_s);
      }
      metrics_.max_abs_offset_locked_ghz = std::max(metrics_.max_abs_offset_locked_ghz, m.max_abs_offset_locked_ghz);
      metrics_.rus.push_back(std::move(m));
    }
    r.metrics = metrics_;
    r.trace = std::move(trace_);
    r.violations = std::move(violations_);
    return r;
  }

  const Scenario& sc_;
  RunOptions opt_;
  link::Topology topo_;
  std::vector<CoRt> cos_;
  std::vector<RuRt> rus_;
  std::vector<Tx> txs_;
  std::map<std::size_t, Delivery> deliveries_;
  std::size_t next_delivery_ = 0;
  std::map<PathKey, std::optional<link::Path>> paths_;
  std::map<std::tuple<std::size_t, std::size_t, int, int>, std::int64_t> dedup_;
  std::priority_queue<Ev, std::vector<Ev>, EvLater> queue_;
  std::uint64_t next_seq_ = 0;
  std::int64_t now_ = 0;
  std::int64_t horizon_us_ = 0;
  std::int64_t last_fault_us_ = 0;
  double ber_ = 0.0;
  std::set<std::size_t> cut_pending_, restore_pending_;
  std::optional<std::int64_t> cut_at_us_, restore_at_us_;
  Metrics metrics_;
  std::vector<std::string> trace_;
  std::vector<std::string> violations_;
};

}  // namespace

RunResult run(const Scenario& scenario, const RunOptions& options) {
  validate(scenario);
  Sim sim(scenario, options);
  return sim.run();
}

}  // namespace gmetro::engine
