#include "gmetro/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>

namespace gmetro::scenario {

using engine::CoSpec;
using engine::Fault;
using engine::FaultKind;
using engine::RuSpec;
using engine::Scenario;

std::string to_string(const Diagnostic& d) {
  std::string out(gmetro::to_string(d.code));
  if (d.line) out += " line " + std::to_string(d.line);
  if (!d.key.empty()) out += " key '" + d.key + "'";
  if (!d.message.empty()) out += ": " + d.message;
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

struct Entry {
  std::size_t line = 0;
  std::string key;
  std::string value;
  bool used = false;
};

struct Section {
  std::size_t line = 0;
  std::string name;  // full header text, e.g. "ru.RU3"
  std::vector<Entry> entries;
};

enum class Domain { Any, Positive, NonNegative };

class Reader {
 public:
  Reader(Section& s, std::vector<Diagnostic>& errors) : s_(s), errors_(errors) {}

  Entry* find(std::string_view key) {
    for (auto& e : s_.entries) {
      if (e.key == key) return &e;
    }
    return nullptr;
  }

  std::optional<std::string> take(std::string_view key) {
    Entry* e = find(key);
    if (!e) return std::nullopt;
    e->used = true;
    last_ = e;
    return e->value;
  }

  bool real(std::string_view key, double& out, Domain dom = Domain::Any) {
    const auto v = take(key);
    if (!v) return false;
    const char* begin = v->c_str();
    char* end = nullptr;
    const double x = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || !std::isfinite(x)) {
      error(ErrorCode::ParseError, "expected a number, got '" + *v + "'");
      return false;
    }
    if ((dom == Domain::Positive && !(x > 0.0)) || (dom == Domain::NonNegative && x < 0.0)) {
      error(ErrorCode::UnitViolation,
            std::string(dom == Domain::Positive ? "must be positive" : "must be non-negative") + ", got " + *v);
      return false;
    }
    out = x;
    return true;
  }

  bool optional_real(std::string_view key, std::optional<double>& out, Domain dom) {
    double x = 0.0;
    if (!real(key, x, dom)) return false;
    out = x;
    return true;
  }

  template <typename T>
  bool integer(std::string_view key, T& out, T min_value) {
    const auto v = take(key);
    if (!v) return false;
    long long x = 0;
    const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
    if (ec != std::errc() || p != v->data() + v->size()) {
      error(ErrorCode::ParseError, "expected an integer, got '" + *v + "'");
      return false;
    }
    if (x < static_cast<long long>(min_value)) {
      error(ErrorCode::UnitViolation, "must be at least " + std::to_string(min_value) + ", got " + *v);
      return false;
    }
    out = static_cast<T>(x);
    return true;
  }

  bool u64(std::string_view key, std::uint64_t& out) {
    const auto v = take(key);
    if (!v) return false;
    std::uint64_t x = 0;
    const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
    if (ec != std::errc() || p != v->data() + v->size()) {
      error(ErrorCode::ParseError, "expected an unsigned integer, got '" + *v + "'");
      return false;
    }
    out = x;
    return true;
  }

  bool boolean(std::string_view key, bool& out) {
    const auto v = take(key);
    if (!v) return false;
    if (*v == "true" || *v == "1" || *v == "yes") out = true;
    else if (*v == "false" || *v == "0" || *v == "no") out = false;
    else {
      error(ErrorCode::ParseError, "expected true or false, got '" + *v + "'");
      return false;
    }
    return true;
  }

  void error(ErrorCode code, std::string message) {
    errors_.push_back({code, last_ ? last_->line : s_.line, last_ ? last_->key : std::string(), std::move(message)});
  }

  void error_at(const Entry& e, ErrorCode code, std::string message) {
    errors_.push_back({code, e.line, e.key, std::move(message)});
  }

  void finish() {
    for (const auto& e : s_.entries) {
      if (!e.used) errors_.push_back({ErrorCode::UnknownKey, e.line, e.key, "in [" + s_.name + "]"});
    }
  }

  Section& section() { return s_; }

 private:
  Section& s_;
  std::vector<Diagnostic>& errors_;
  Entry* last_ = nullptr;
};

// ---- lasers ----

void read_laser(Reader& r, lasers::Laser& laser) {
  std::string family = "mems";
  if (auto v = r.take("laser")) family = *v;
  if (family == "mems") {
    lasers::MemsVcselModel m;
    r.real("frequency_error_ghz", m.frequency_error_ghz);
    r.real("n_eff", m.n_eff, Domain::Positive);
    r.real("cavity_length_um", m.cavity_length_um, Domain::Positive);
    r.real("length_min_um", m.length_min_um, Domain::Positive);
    r.real("length_max_um", m.length_max_um, Domain::Positive);
    r.real("gain_center_thz", m.gain_center_thz, Domain::Positive);
    r.real("gain_bandwidth_thz", m.gain_bandwidth_thz, Domain::Positive);
    laser = m;
  } else if (family == "dbr") {
    lasers::ThermalDbrModel m;
    r.real("frequency_error_ghz", m.frequency_error_ghz);
    r.real("bragg_wavelength_ref_nm", m.bragg_wavelength_ref_nm, Domain::Positive);
    r.real("dlambda_dt_nm_per_k", m.dlambda_dt_nm_per_k, Domain::Positive);
    r.real("tuning_efficiency_nm_per_mw", m.tuning_efficiency_nm_per_mw, Domain::Positive);
    r.real("temp_min_k", m.temp_min_k, Domain::Positive);
    r.real("temp_max_k", m.temp_max_k, Domain::Positive);
    r.real("cavity_fsr_ghz", m.cavity_fsr_ghz, Domain::Positive);
    r.real("reflection_bandwidth_ghz", m.reflection_bandwidth_ghz, Domain::Positive);
    r.real("comb_origin_thz", m.comb_origin_thz, Domain::Positive);
    m.grating_temp_k = m.temp_min_k;
    laser = m;
  } else if (family == "vernier") {
    lasers::VernierModel m;
    r.real("frequency_error_ghz", m.frequency_error_ghz);
    r.real("fsr_front_ghz", m.fsr_front_ghz, Domain::Positive);
    r.real("fsr_back_ghz", m.fsr_back_ghz, Domain::Positive);
    r.real("comb_linewidth_ghz", m.comb_linewidth_ghz, Domain::Positive);
    r.real("comb_origin_thz", m.comb_origin_thz, Domain::Positive);
    r.real("cavity_fsr_ghz", m.cavity_fsr_ghz, Domain::Positive);
    r.real("band_low_thz", m.band_low_thz, Domain::Positive);
    r.real("band_high_thz", m.band_high_thz, Domain::Positive);
    r.real("gain_current_ma", m.gain_current_ma, Domain::Positive);
    laser = m;
  } else {
    r.error(ErrorCode::ParseError, "laser must be mems, dbr or vernier");
  }
}

void render_real(std::string& out, std::string_view key, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += std::string(key) + " = " + buf + '\n';
}

void render_laser(std::string& out, const lasers::Laser& laser) {
  auto real = [&](std::string_view k, double v) { render_real(out, k, v); };
  if (const auto* m = std::get_if<lasers::MemsVcselModel>(&laser)) {
    out += "laser = mems\n";
    real("frequency_error_ghz", m->frequency_error_ghz);
    real("n_eff", m->n_eff);
    real("cavity_length_um", m->cavity_length_um);
    real("length_min_um", m->length_min_um);
    real("length_max_um", m->length_max_um);
    real("gain_center_thz", m->gain_center_thz);
    real("gain_bandwidth_thz", m->gain_bandwidth_thz);
  } else if (const auto* d = std::get_if<lasers::ThermalDbrModel>(&laser)) {
    out += "laser = dbr\n";
    real("frequency_error_ghz", d->frequency_error_ghz);
    real("bragg_wavelength_ref_nm", d->bragg_wavelength_ref_nm);
    real("dlambda_dt_nm_per_k", d->dlambda_dt_nm_per_k);
    real("tuning_efficiency_nm_per_mw", d->tuning_efficiency_nm_per_mw);
    real("temp_min_k", d->temp_min_k);
    real("temp_max_k", d->temp_max_k);
    real("cavity_fsr_ghz", d->cavity_fsr_ghz);
    real("reflection_bandwidth_ghz", d->reflection_bandwidth_ghz);
    real("comb_origin_thz", d->comb_origin_thz);
  } else if (const auto* v = std::get_if<lasers::VernierModel>(&laser)) {
    out += "laser = vernier\n";
    real("frequency_error_ghz", v->frequency_error_ghz);
    real("fsr_front_ghz", v->fsr_front_ghz);
    real("fsr_back_ghz", v->fsr_back_ghz);
    real("comb_linewidth_ghz", v->comb_linewidth_ghz);
    real("comb_origin_thz", v->comb_origin_thz);
    real("cavity_fsr_ghz", v->cavity_fsr_ghz);
    real("band_low_thz", v->band_low_thz);
    real("band_high_thz", v->band_high_thz);
    real("gain_current_ma", v->gain_current_ma);
  }
}

// ---- sections ----

void read_plan(Reader& r, Scenario& sc) {
  r.integer<std::size_t>("channel_count", sc.plan.channel_count, 1);
  r.real("spacing_ghz", sc.plan.spacing_ghz, Domain::Positive);
  r.real("first_center_thz", sc.plan.first_center_thz, Domain::Positive);
}

void read_topology(Reader& r, Scenario& sc) {
  if (auto v = r.take("kind")) {
    if (*v == "tree") sc.topology = link::TopologyKind::Tree;
    else if (*v == "drop_line") sc.topology = link::TopologyKind::DropLine;
    else if (*v == "horseshoe") sc.topology = link::TopologyKind::Horseshoe;
    else r.error(ErrorCode::ParseError, "kind must be tree, drop_line or horseshoe");
  }
  auto& p = sc.plant;
  r.real("trunk_km", p.trunk_km, Domain::NonNegative);
  r.real("drop_km", p.drop_km, Domain::NonNegative);
  r.real("segment_km", p.segment_km, Domain::NonNegative);
  r.real("loss_db_per_km", p.loss_db_per_km, Domain::NonNegative);
  r.real("connector_loss_db", p.connector_loss_db, Domain::NonNegative);
  r.integer<int>("connectors_per_span", p.connectors_per_span, 0);
  r.real("filter_bandwidth_ghz", p.filter.bandwidth_3db_ghz, Domain::Positive);
  r.integer<int>("filter_order", p.filter.order, 1);
  r.real("isolation_floor_db", p.filter.isolation_floor_db, Domain::Positive);
}

void read_mgmt(Reader& r, Scenario& sc) {
  r.real("bit_rate_bps", sc.mgmt.bit_rate, Domain::Positive);
  r.real("rx_sensitivity_dbm", sc.mgmt.rx_sensitivity_dbm);
  if (r.real("ber", sc.ber, Domain::NonNegative) && sc.ber > 0.5) r.error(ErrorCode::UnitViolation, "ber above 0.5");
  r.real("drift_sigma_ghz_per_sqrt_s", sc.drift.sigma_rw_ghz_per_sqrt_s, Domain::NonNegative);
  r.real("drift_ramp_ghz_per_s", sc.drift.ramp_ghz_per_s);
  r.real("drift_bound_ghz", sc.drift.bound_ghz, Domain::Positive);
  r.real("drift_tick_ms", sc.drift_tick_ms, Domain::Positive);
  r.real("measurement_sigma_ghz", sc.measurement_sigma_ghz, Domain::NonNegative);
  r.real("hold_deadband_ghz", sc.hold.deadband_ghz, Domain::NonNegative);
  r.real("hold_gain", sc.hold.step_gain, Domain::Positive);
  r.real("hold_max_step_ghz", sc.hold.max_step_ghz, Domain::Positive);
  r.boolean("hold_enabled", sc.hold_enabled);
  r.integer<int>("max_retries", sc.max_retries, 0);
  r.real("sweep_margin_db", sc.sweep_margin_db);
  r.real("crosstalk_floor_db", sc.crosstalk_floor_db);
}

void read_run(Reader& r, Scenario& sc) {
  r.u64("seed", sc.seed);
  r.real("horizon_s", sc.horizon_s, Domain::Positive);
  if (auto v = r.take("stop")) {
    if (*v == "all_locked") sc.stop = engine::StopCondition::AllLocked;
    else if (*v == "horizon") sc.stop = engine::StopCondition::Horizon;
    else r.error(ErrorCode::ParseError, "stop must be all_locked or horizon");
  }
}

std::optional<std::vector<std::size_t>> parse_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::string_view s = text;
  while (!s.empty()) {
    const auto comma = s.find(',');
    const std::string_view item = trim(s.substr(0, comma));
    std::size_t x = 0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
    if (item.empty() || ec != std::errc() || p != item.data() + item.size()) return std::nullopt;
    out.push_back(x);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

void read_co(Reader& r, CoSpec& co) {
  r.real("tx_power_dbm", co.tx_power_dbm);
  if (auto v = r.take("ports")) {
    if (auto list = parse_list(*v)) co.ports = *list;
    else r.error(ErrorCode::ParseError, "ports must be a comma-separated list of channel indices");
  }
  r.boolean("primary", co.primary);
  r.integer<std::size_t>("nms_channel", co.nms_channel, 0);
  r.boolean("calibrated", co.calibrated);
  if (r.find("laser")) {
    lasers::Laser laser;
    read_laser(r, laser);
    co.laser = laser;
  }
}

void read_ru(Reader& r, RuSpec& ru) {
  r.integer<std::size_t>("port", ru.port, 0);
  read_laser(r, ru.laser);
  r.boolean("calibrated", ru.calibrated);
  r.real("start_ms", ru.start_ms, Domain::NonNegative);
  r.real("launch_power_dbm", ru.launch_power_dbm);
  r.optional_real("drop_km", ru.drop_km, Domain::NonNegative);
  if (auto v = r.take("role")) {
    if (*v == "standalone") ru.role = protocol::Role::Standalone;
    else if (*v == "dependent") ru.role = protocol::Role::Dependent;
    else r.error(ErrorCode::ParseError, "role must be standalone or dependent");
  }
  r.boolean("local_monitor", ru.local_monitor);
}

void read_faults(Reader& r, Scenario& sc, std::vector<std::pair<std::size_t, std::string>>& span_refs) {
  for (auto& e : r.section().entries) {
    const auto dot = e.key.find('.');
    const std::string head = e.key.substr(0, dot);
    const std::string tail = dot == std::string::npos ? "" : e.key.substr(dot + 1);
    if (tail.empty() || (head != "cut_ms" && head != "restore_ms" && head != "ber_at_ms")) continue;
    e.used = true;
    char* end = nullptr;
    Fault f;
    if (head == "ber_at_ms") {
      const double at = std::strtod(tail.c_str(), &end);
      const double p = std::strtod(e.value.c_str(), nullptr);
      if (*end != '\0' || e.value.empty()) {
        r.error_at(e, ErrorCode::ParseError, "expected ber_at_ms.<time> = <probability>");
        continue;
      }
      if (at < 0.0 || p < 0.0 || p > 0.5) {
        r.error_at(e, ErrorCode::UnitViolation, "time must be non-negative and ber within [0, 0.5]");
        continue;
      }
      f.kind = FaultKind::BerSet;
      f.at_us = static_cast<std::int64_t>(std::llround(at * 1e3));
      f.ber = p;
    } else {
      const double at = std::strtod(e.value.c_str(), &end);
      if (e.value.empty() || *end != '\0') {
        r.error_at(e, ErrorCode::ParseError, "expected a time in ms");
        continue;
      }
      if (at < 0.0) {
        r.error_at(e, ErrorCode::UnitViolation, "time must be non-negative");
        continue;
      }
      f.kind = head == "cut_ms" ? FaultKind::FiberCut : FaultKind::FiberRestore;
      f.at_us = static_cast<std::int64_t>(std::llround(at * 1e3));
      f.span = tail;
      span_refs.emplace_back(e.line, e.key);
    }
    sc.faults.push_back(std::move(f));
  }
  std::stable_sort(sc.faults.begin(), sc.faults.end(), [](const Fault& a, const Fault& b) { return a.at_us < b.at_us; });
}

std::string fmt_ms(std::int64_t us) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(us) * 1e-3);
  return buf;
}

}  // namespace

ParseOutcome parse_scenario(std::string_view text) {
  ParseOutcome out;
  auto& errors = out.errors;
  std::vector<Section> sections;
  std::set<std::string> seen;

  std::size_t lineno = 0;
  while (!text.empty()) {
    ++lineno;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        errors.push_back({ErrorCode::ParseError, lineno, "", "malformed section header"});
        continue;
      }
      const std::string name(trim(line.substr(1, line.size() - 2)));
      if (!seen.insert(name).second) errors.push_back({ErrorCode::ParseError, lineno, "", "duplicate section [" + name + "]"});
      sections.push_back({lineno, name, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      errors.push_back({ErrorCode::ParseError, lineno, "", "expected key = value"});
      continue;
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) {
      errors.push_back({ErrorCode::ParseError, lineno, "", "empty key"});
      continue;
    }
    if (sections.empty()) {
      errors.push_back({ErrorCode::ParseError, lineno, key, "key outside any section"});
      continue;
    }
    auto& entries = sections.back().entries;
    if (std::any_of(entries.begin(), entries.end(), [&](const Entry& e) { return e.key == key; })) {
      errors.push_back({ErrorCode::ParseError, lineno, key, "duplicate key"});
      continue;
    }
    entries.push_back({lineno, key, value, false});
  }

  Scenario sc;
  std::vector<std::size_t> ru_lines, co_lines;
  std::vector<std::pair<std::size_t, std::string>> span_refs;
  std::size_t topology_line = 0;
  for (auto& s : sections) {
    Reader r(s, errors);
    const auto dot = s.name.find('.');
    const std::string kind = s.name.substr(0, dot);
    const std::string id = dot == std::string::npos ? "" : s.name.substr(dot + 1);
    if (s.name == "plan") read_plan(r, sc);
    else if (s.name == "topology") {
      topology_line = s.line;
      read_topology(r, sc);
    } else if (s.name == "mgmt") read_mgmt(r, sc);
    else if (s.name == "run") read_run(r, sc);
    else if (s.name == "faults") read_faults(r, sc, span_refs);
    else if (kind == "co" && !id.empty()) {
      CoSpec co;
      co.name = id;
      read_co(r, co);
      sc.cos.push_back(std::move(co));
      co_lines.push_back(s.line);
    } else if (kind == "ru" && !id.empty()) {
      RuSpec ru;
      ru.name = id;
      read_ru(r, ru);
      sc.rus.push_back(std::move(ru));
      ru_lines.push_back(s.line);
    } else {
      errors.push_back({ErrorCode::UnknownKey, s.line, s.name, "unknown section"});
      for (auto& e : s.entries) e.used = true;
    }
    r.finish();
  }

  // Cross references.
  const std::size_t want_cos = sc.topology == link::TopologyKind::Horseshoe ? 2 : 1;
  if (sc.cos.size() != want_cos) {
    errors.push_back({ErrorCode::CrossRefError, topology_line, "kind",
                      std::string(link::to_string(sc.topology)) + " needs " + std::to_string(want_cos) +
                          " [co.*] section(s), found " + std::to_string(sc.cos.size())});
  }
  for (std::size_t c = 0; c < sc.cos.size(); ++c) {
    for (std::size_t p : sc.cos[c].ports) {
      if (p >= sc.plan.channel_count) {
        errors.push_back({ErrorCode::CrossRefError, co_lines[c], "ports",
                          "port " + std::to_string(p) + " does not exist in a " +
                              std::to_string(sc.plan.channel_count) + "-channel plan"});
      }
    }
    if (sc.cos[c].primary && !sc.cos[c].laser) {
      errors.push_back({ErrorCode::CrossRefError, co_lines[c], "laser", "a primary CO needs a laser"});
    }
  }
  for (std::size_t i = 0; i < sc.rus.size(); ++i) {
    const RuSpec& ru = sc.rus[i];
    if (ru.port >= sc.plan.channel_count) {
      errors.push_back({ErrorCode::CrossRefError, ru_lines[i], "port",
                        "port " + std::to_string(ru.port) + " does not exist in a " +
                            std::to_string(sc.plan.channel_count) + "-channel plan"});
      continue;
    }
    for (std::size_t c = 0; c < sc.cos.size(); ++c) {
      const auto& ports = sc.cos[c].ports;
      const bool served = sc.cos[c].primary ? ru.port == sc.cos[c].nms_channel
                                            : ports.empty() || std::count(ports.begin(), ports.end(), ru.port);
      if (!served) {
        errors.push_back({ErrorCode::CrossRefError, ru_lines[i], "port",
                          "CO " + sc.cos[c].name + " has no port " + std::to_string(ru.port)});
      }
    }
  }
  if (errors.empty() && !span_refs.empty()) {
    try {
      const link::Topology topo = engine::build_topology(sc);
      for (const auto& [line, key] : span_refs) {
        const std::string span = key.substr(key.find('.') + 1);
        if (!topo.find_span(span)) errors.push_back({ErrorCode::CrossRefError, line, key, "no span named '" + span + "'"});
      }
    } catch (const Error& e) {
      errors.push_back({ErrorCode::CrossRefError, topology_line, "", e.what()});
    }
  }

  if (errors.empty()) out.scenario = std::move(sc);
  return out;
}

engine::Scenario parse_scenario_or_throw(std::string_view text) {
  ParseOutcome r = parse_scenario(text);
  if (r.ok()) return std::move(*r.scenario);
  std::string msg;
  for (const auto& d : r.errors) msg += to_string(d) + '\n';
  throw Error(r.errors.front().code, msg, r.errors.front().line);
}

std::string render(const Scenario& sc) {
  std::string out;
  auto real = [&](std::string_view k, double v) { render_real(out, k, v); };
  auto line = [&](std::string_view k, const std::string& v) { out += std::string(k) + " = " + v + '\n'; };
  auto boolean = [&](std::string_view k, bool v) { line(k, v ? "true" : "false"); };

  out += "[plan]\n";
  line("channel_count", std::to_string(sc.plan.channel_count));
  real("spacing_ghz", sc.plan.spacing_ghz);
  real("first_center_thz", sc.plan.first_center_thz);

  out += "\n[topology]\n";
  line("kind", std::string(link::to_string(sc.topology)));
  real("trunk_km", sc.plant.trunk_km);
  real("drop_km", sc.plant.drop_km);
  real("segment_km", sc.plant.segment_km);
  real("loss_db_per_km", sc.plant.loss_db_per_km);
  real("connector_loss_db", sc.plant.connector_loss_db);
  line("connectors_per_span", std::to_string(sc.plant.connectors_per_span));
  real("filter_bandwidth_ghz", sc.plant.filter.bandwidth_3db_ghz);
  line("filter_order", std::to_string(sc.plant.filter.order));
  real("isolation_floor_db", sc.plant.filter.isolation_floor_db);

  out += "\n[mgmt]\n";
  real("bit_rate_bps", sc.mgmt.bit_rate);
  real("rx_sensitivity_dbm", sc.mgmt.rx_sensitivity_dbm);
  real("ber", sc.ber);
  real("drift_sigma_ghz_per_sqrt_s", sc.drift.sigma_rw_ghz_per_sqrt_s);
  real("drift_ramp_ghz_per_s", sc.drift.ramp_ghz_per_s);
  real("drift_bound_ghz", sc.drift.bound_ghz);
  real("drift_tick_ms", sc.drift_tick_ms);
  real("measurement_sigma_ghz", sc.measurement_sigma_ghz);
  real("hold_deadband_ghz", sc.hold.deadband_ghz);
  real("hold_gain", sc.hold.step_gain);
  real("hold_max_step_ghz", sc.hold.max_step_ghz);
  boolean("hold_enabled", sc.hold_enabled);
  line("max_retries", std::to_string(sc.max_retries));
  real("sweep_margin_db", sc.sweep_margin_db);
  real("crosstalk_floor_db", sc.crosstalk_floor_db);

  for (const auto& co : sc.cos) {
    out += "\n[co." + co.name + "]\n";
    real("tx_power_dbm", co.tx_power_dbm);
    if (!co.ports.empty()) {
      std::string list;
      for (std::size_t i = 0; i < co.ports.size(); ++i) list += (i ? "," : "") + std::to_string(co.ports[i]);
      line("ports", list);
    }
    boolean("primary", co.primary);
    line("nms_channel", std::to_string(co.nms_channel));
    boolean("calibrated", co.calibrated);
    if (co.laser) render_laser(out, *co.laser);
  }

  for (const auto& ru : sc.rus) {
    out += "\n[ru." + ru.name + "]\n";
    line("port", std::to_string(ru.port));
    render_laser(out, ru.laser);
    boolean("calibrated", ru.calibrated);
    real("start_ms", ru.start_ms);
    real("launch_power_dbm", ru.launch_power_dbm);
    if (ru.drop_km) real("drop_km", *ru.drop_km);
    line("role", ru.role == protocol::Role::Dependent ? "dependent" : "standalone");
    boolean("local_monitor", ru.local_monitor);
  }

  if (!sc.faults.empty()) {
    out += "\n[faults]\n";
    for (const auto& f : sc.faults) {
      switch (f.kind) {
        case FaultKind::FiberCut: line("cut_ms." + f.span, fmt_ms(f.at_us)); break;
        case FaultKind::FiberRestore: line("restore_ms." + f.span, fmt_ms(f.at_us)); break;
        case FaultKind::BerSet: {
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.17g", f.ber);
          line("ber_at_ms." + fmt_ms(f.at_us), buf);
          break;
        }
      }
    }
  }

  out += "\n[run]\n";
  line("seed", std::to_string(sc.seed));
  real("horizon_s", sc.horizon_s);
  line("stop", sc.stop == engine::StopCondition::AllLocked ? "all_locked" : "horizon");
  return out;
}

}  // namespace gmetro::scenario
