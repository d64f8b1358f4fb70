#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "gmetro/engine.hpp"
#include "gmetro/error.hpp"

namespace gmetro::engine {

namespace {

[[noreturn]] void invalid(const std::string& rule) { throw Error(ErrorCode::ValidationError, rule); }

std::vector<link::RuPlacement> placements(const Scenario& sc) {
  std::vector<link::RuPlacement> out;
  for (const auto& ru : sc.rus) out.push_back({ru.name, ru.port, ru.drop_km});
  return out;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

link::Topology build_topology(const Scenario& sc) {
  link::PlantParams p = sc.plant;
  p.plan = sc.plan;
  const auto rus = placements(sc);
  switch (sc.topology) {
    case link::TopologyKind::Tree: return link::Topology::tree(p, sc.cos.at(0).name, rus);
    case link::TopologyKind::DropLine: return link::Topology::drop_line(p, sc.cos.at(0).name, rus);
    case link::TopologyKind::Horseshoe: return link::Topology::horseshoe(p, sc.cos.at(0).name, sc.cos.at(1).name, rus);
  }
  invalid("unknown topology kind");
}

void validate(const Scenario& sc) {
  if (sc.plan.channel_count == 0) invalid("plan needs at least one channel");
  if (!(sc.plan.spacing_ghz > 0.0)) invalid("channel spacing must be positive");
  try {
    sc.mgmt.validate();
  } catch (const Error& e) {
    invalid(std::string("management channel: ") + e.what());
  }
  if (sc.ber < 0.0 || sc.ber > 0.5) invalid("ber must lie in [0, 0.5]");
  if (!(sc.horizon_s > 0.0)) invalid("horizon must be positive");
  if (!(sc.drift_tick_ms > 0.0)) invalid("drift tick must be positive");
  if (sc.max_retries < 0) invalid("max_retries must be non-negative");
  if (sc.measurement_sigma_ghz < 0.0) invalid("measurement sigma must be non-negative");

  const std::size_t want_cos = sc.topology == link::TopologyKind::Horseshoe ? 2 : 1;
  if (sc.cos.size() != want_cos) {
    invalid(std::string(link::to_string(sc.topology)) + " topology needs " + std::to_string(want_cos) +
            " central office(s), got " + std::to_string(sc.cos.size()));
  }
  if (sc.rus.empty()) invalid("scenario has no radio units");

  std::set<std::string> names;
  for (const auto& co : sc.cos) {
    if (co.name.empty() || !names.insert(co.name).second) invalid("duplicate or empty name '" + co.name + "'");
    for (std::size_t p : co.ports) {
      if (p >= sc.plan.channel_count) invalid("CO " + co.name + " port " + std::to_string(p) + " outside the plan");
    }
  }
  std::set<std::size_t> ports;
  std::size_t dependents = 0;
  for (const auto& ru : sc.rus) {
    if (ru.name.empty() || !names.insert(ru.name).second) invalid("duplicate or empty name '" + ru.name + "'");
    if (ru.port >= sc.plan.channel_count) invalid("RU " + ru.name + " port " + std::to_string(ru.port) + " outside the plan");
    if (!ports.insert(ru.port).second) invalid("port " + std::to_string(ru.port) + " used by two radio units");
    if (ru.start_ms < 0.0) invalid("RU " + ru.name + " start time is negative");
    if (ru.role == protocol::Role::Primary) invalid("RU " + ru.name + ": the primary role belongs to a CO");
    if (ru.role == protocol::Role::Dependent) ++dependents;
    try {
      std::visit([](const auto& m) { m.validate(); }, ru.laser);
    } catch (const Error& e) {
      invalid("RU " + ru.name + " laser: " + e.what());
    }
    if (!ru.calibrated) {
      // The design law must reach the whole sweep range.
      const auto ranges = lasers::knob_ranges(ru.laser);
      for (double f : {sc.plan.band_low_thz(), sc.plan.band_high_thz()}) {
        const auto k = lasers::nominal_knobs(ru.laser, f);
        for (std::size_t i = 0; i < k.size() && i < ranges.size(); ++i) {
          if (k[i] < ranges[i].min - 1e-9 || k[i] > ranges[i].max + 1e-9) {
            invalid("RU " + ru.name + ": plan band outside the laser tuning range");
          }
        }
      }
    }
  }

  std::size_t primaries = 0;
  for (const auto& co : sc.cos) {
    if (!co.primary) continue;
    ++primaries;
    if (sc.topology != link::TopologyKind::Tree) invalid("pairwise tuning needs a tree topology");
    if (!co.laser) invalid("primary " + co.name + " has no laser");
    if (!co.calibrated) invalid("primary " + co.name + " must be calibrated");
    if (co.nms_channel >= sc.plan.channel_count) invalid("primary channel outside the plan");
    std::visit([](const auto& m) { m.validate(); }, *co.laser);
    const bool has_dep = std::any_of(sc.rus.begin(), sc.rus.end(), [&](const RuSpec& r) {
      return r.role == protocol::Role::Dependent && r.port == co.nms_channel;
    });
    if (!has_dep) invalid("primary " + co.name + " has no dependent on channel " + std::to_string(co.nms_channel));
  }
  if (primaries > 1) invalid("at most one primary per link");
  if (dependents > 0 && primaries == 0) invalid("dependent radio unit without a primary");
  if (primaries == 1 && dependents != 1) invalid("a pairwise link has exactly one dependent");

  const link::Topology topo = build_topology(sc);
  const auto horizon_us = static_cast<std::int64_t>(std::llround(sc.horizon_s * 1e6));
  for (const auto& f : sc.faults) {
    if (f.at_us < 0 || f.at_us > horizon_us) invalid("fault at " + std::to_string(f.at_us) + " us is beyond the horizon");
    if (f.kind == FaultKind::BerSet) {
      if (f.ber < 0.0 || f.ber > 0.5) invalid("fault ber must lie in [0, 0.5]");
    } else if (!topo.find_span(f.span)) {
      throw Error(ErrorCode::UnknownSpan, "unknown span '" + f.span + "'");
    }
  }
}

Scenario inject_fault(const Scenario& scenario, std::int64_t at_us, Fault fault) {
  fault.at_us = at_us;
  const auto horizon_us = static_cast<std::int64_t>(std::llround(scenario.horizon_s * 1e6));
  if (at_us < 0 || at_us > horizon_us) invalid("fault time outside the run horizon");
  if (fault.kind != FaultKind::BerSet && !build_topology(scenario).find_span(fault.span)) {
    throw Error(ErrorCode::UnknownSpan, "unknown span '" + fault.span + "'");
  }
  Scenario out = scenario;
  out.faults.push_back(std::move(fault));
  std::stable_sort(out.faults.begin(), out.faults.end(),
                   [](const Fault& a, const Fault& b) { return a.at_us < b.at_us; });
  return out;
}

std::string trace_emit(const TraceRecord& r) {
  return std::to_string(r.time_us) + '\t' + r.entity + '\t' + r.kind + '\t' + r.details;
}

std::string to_key_value(const Metrics& m) {
  std::string out;
  auto kv = [&](const std::string& k, const std::string& v) { out += k + '=' + v + '\n'; };
  auto opt = [&](const std::string& k, const std::optional<double>& v) { kv(k, v ? num(*v) : "none"); };
  kv("frames_sent", std::to_string(m.frames_sent));
  kv("frames_delivered", std::to_string(m.frames_delivered));
  kv("frames_lost", std::to_string(m.frames_lost));
  kv("frames_in_flight", std::to_string(m.frames_in_flight));
  kv("frames_corrected", std::to_string(m.frames_corrected));
  kv("blocks_corrected", std::to_string(m.blocks_corrected));
  kv("retries", std::to_string(m.retries));
  kv("abandoned", std::to_string(m.abandoned));
  kv("hold_corrections", std::to_string(m.hold_corrections));
  kv("operator_events", std::to_string(m.operator_events));
  kv("safety_violations", std::to_string(m.safety_violations));
  kv("events", std::to_string(m.events));
  opt("min_crosstalk_margin_db", m.min_crosstalk_margin_db);
  opt("protection_time_s", m.protection_time_s);
  opt("restore_time_s", m.restore_time_s);
  opt("max_time_to_lock_s", m.max_time_to_lock_s);
  kv("max_abs_offset_locked_ghz", num(m.max_abs_offset_locked_ghz));
  kv("all_locked", m.all_locked ? "true" : "false");
  kv("sim_time_s", num(m.sim_time_s));
  for (const auto& ru : m.rus) {
    const std::string p = "ru." + ru.name + '.';
    kv(p + "port", std::to_string(ru.port));
    opt(p + "time_to_lock_s", ru.time_to_lock_s);
    kv(p + "lock_count", std::to_string(ru.lock_count));
    kv(p + "max_abs_offset_locked_ghz", num(ru.max_abs_offset_locked_ghz));
    kv(p + "final_state", ru.final_state);
    kv(p + "locked_channel", ru.locked_channel ? std::to_string(*ru.locked_channel) : "none");
    kv(p + "final_frequency_thz", num(ru.final_frequency_thz));
    kv(p + "final_offset_ghz", num(ru.final_offset_ghz));
    kv(p + "serving_co", ru.serving_co.empty() ? "none" : ru.serving_co);
  }
  return out;
}

std::string to_json(const Metrics& m) {
  using nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  ordered_json j;
  j["frames_sent"] = m.frames_sent;
  j["frames_delivered"] = m.frames_delivered;
  j["frames_lost"] = m.frames_lost;
  j["frames_in_flight"] = m.frames_in_flight;
  j["frames_corrected"] = m.frames_corrected;
  j["blocks_corrected"] = m.blocks_corrected;
  j["retries"] = m.retries;
  j["abandoned"] = m.abandoned;
  j["hold_corrections"] = m.hold_corrections;
  j["operator_events"] = m.operator_events;
  j["safety_violations"] = m.safety_violations;
  j["events"] = m.events;
  j["min_crosstalk_margin_db"] = opt(m.min_crosstalk_margin_db);
  j["protection_time_s"] = opt(m.protection_time_s);
  j["restore_time_s"] = opt(m.restore_time_s);
  j["max_time_to_lock_s"] = opt(m.max_time_to_lock_s);
  j["max_abs_offset_locked_ghz"] = m.max_abs_offset_locked_ghz;
  j["all_locked"] = m.all_locked;
  j["sim_time_s"] = m.sim_time_s;
  ordered_json rus = ordered_json::object();
  for (const auto& ru : m.rus) {
    ordered_json r;
    r["port"] = ru.port;
    r["time_to_lock_s"] = opt(ru.time_to_lock_s);
    r["lock_count"] = ru.lock_count;
    r["max_abs_offset_locked_ghz"] = ru.max_abs_offset_locked_ghz;
    r["final_state"] = ru.final_state;
    r["locked_channel"] = ru.locked_channel ? ordered_json(*ru.locked_channel) : ordered_json(nullptr);
    r["final_frequency_thz"] = ru.final_frequency_thz;
    r["final_offset_ghz"] = ru.final_offset_ghz;
    r["serving_co"] = ru.serving_co;
    rus[ru.name] = std::move(r);
  }
  j["rus"] = std::move(rus);
  return j.dump(2) + '\n';
}

PairwiseTranscript pairwise_self_tune(const Scenario& scenario, const RunOptions& options) {
  const auto primary = std::find_if(scenario.cos.begin(), scenario.cos.end(), [](const CoSpec& c) { return c.primary; });
  if (primary == scenario.cos.end()) invalid("pairwise run needs a primary");
  PairwiseTranscript t;
  t.channel = primary->nms_channel;
  t.run = run(scenario, options);
  for (const auto& ru : t.run.metrics.rus) {
    if (ru.name == primary->name) t.primary_lock_s = ru.time_to_lock_s;
    else t.dependent_lock_s = ru.time_to_lock_s;
  }
  for (const auto& line : t.run.trace) {
    if (line.find("\tTX\ttype=LOCK_CONFIRM") != std::string::npos) t.lock_confirms.push_back(line);
  }
  t.operator_events = t.run.metrics.operator_events;
  t.retries = t.run.metrics.retries;
  t.converged = t.primary_lock_s && t.dependent_lock_s && t.run.metrics.all_locked;
  if (!t.converged) throw Error(ErrorCode::Timeout, "pairwise link did not lock within the horizon");
  return t;
}

}  // namespace gmetro::engine
