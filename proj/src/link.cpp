#include "gmetro/link.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <set>

#include "gmetro/error.hpp"

namespace gmetro::link {

double filter_attenuation(const FilterModel& f, double f_thz) {
  const double detune = std::abs(f_thz - f.center_thz) * 1e3;
  const double x = 2.0 * detune / f.bandwidth_3db_ghz;
  // 10·log10(e)·ln2 = 10·log10(2): exactly 3.0103 dB at the band edge.
  const double a = 10.0 * std::numbers::log10e * std::numbers::ln2 * std::pow(x, 2.0 * f.order);
  return std::min(f.isolation_floor_db, a);
}

std::string_view to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::Tree: return "tree";
    case TopologyKind::DropLine: return "drop_line";
    case TopologyKind::Horseshoe: return "horseshoe";
  }
  return "?";
}

namespace {

FilterModel port_filter(const PlantParams& p, std::size_t channel) {
  FilterModel f = p.filter;
  f.center_thz = p.plan.center_thz(channel);
  return f;
}

Node mux_node(std::string id, NodeKind kind, const PlantParams& p) {
  Node n{std::move(id), kind, {}, {}};
  for (std::size_t ch = 0; ch < p.plan.channel_count; ++ch) {
    n.filters[static_cast<int>(ch)] = port_filter(p, ch);
    n.connections.emplace_back(kCommonPort, static_cast<int>(ch));
  }
  return n;
}

Span make_span(std::string id, PortRef a, PortRef b, double km, const PlantParams& p) {
  Span s;
  s.id = std::move(id);
  s.a = a;
  s.b = b;
  s.length_km = km;
  s.loss_db_per_km = p.loss_db_per_km;
  s.connectors = p.connectors_per_span;
  s.connector_loss_db = p.connector_loss_db;
  return s;
}

Node oadm_node(const std::string& ru, std::size_t channel, const PlantParams& p, bool east_drop) {
  Node n{"OADM." + ru, NodeKind::RemoteNode, {}, {}};
  const int ch = static_cast<int>(channel);
  n.filters[ch] = port_filter(p, channel);
  n.connections.emplace_back(kCommonPort, kLineEastPort);
  n.connections.emplace_back(kCommonPort, ch);
  if (east_drop) {
    n.filters[kDropEastPort] = port_filter(p, channel);
    n.connections.emplace_back(kLineEastPort, kDropEastPort);
  }
  return n;
}

Topology line_topology(TopologyKind kind, const PlantParams& p, std::string_view west_co,
                       std::string_view east_co, const std::vector<RuPlacement>& rus) {
  Topology t;
  t.kind = kind;
  const bool horseshoe = kind == TopologyKind::Horseshoe;
  t.nodes.push_back(mux_node(std::string(west_co), NodeKind::CentralOffice, p));
  if (horseshoe) t.nodes.push_back(mux_node(std::string(east_co), NodeKind::CentralOffice, p));
  PortRef prev{0, kCommonPort};
  for (std::size_t i = 0; i < rus.size(); ++i) {
    const auto& ru = rus[i];
    const std::size_t oadm = t.nodes.size();
    t.nodes.push_back(oadm_node(ru.name, ru.channel, p, horseshoe));
    const std::size_t ru_idx = t.nodes.size();
    t.nodes.push_back(Node{ru.name, NodeKind::RadioUnit, {}, {}});
    const double seg = i == 0 ? p.trunk_km : p.segment_km;
    t.spans.push_back(make_span("seg." + std::to_string(i), prev, {oadm, kCommonPort}, seg, p));
    const double drop = ru.drop_km.value_or(p.drop_km);
    t.spans.push_back(make_span("tap." + ru.name, {oadm, static_cast<int>(ru.channel)}, {ru_idx, 0}, drop, p));
    if (horseshoe) t.spans.push_back(make_span("tap_e." + ru.name, {oadm, kDropEastPort}, {ru_idx, 1}, drop, p));
    prev = {oadm, kLineEastPort};
  }
  if (horseshoe) {
    t.spans.push_back(make_span("seg." + std::to_string(rus.size()), prev, {1, kCommonPort}, p.trunk_km, p));
  }
  t.validate();
  return t;
}

struct PortIndex {
  std::map<std::pair<std::size_t, int>, std::size_t> span_at;

  explicit PortIndex(const Topology& t) {
    for (std::size_t s = 0; s < t.spans.size(); ++s) {
      span_at[{t.spans[s].a.node, t.spans[s].a.port}] = s;
      span_at[{t.spans[s].b.node, t.spans[s].b.port}] = s;
    }
  }
  std::optional<std::size_t> at(std::size_t node, int port) const {
    const auto it = span_at.find({node, port});
    if (it == span_at.end()) return std::nullopt;
    return it->second;
  }
};

std::vector<int> connected_ports(const Node& n, int port) {
  std::vector<int> out;
  for (const auto& [a, b] : n.connections) {
    if (a == port) out.push_back(b);
    else if (b == port) out.push_back(a);
  }
  return out;
}

void add_filter(const Topology& t, std::vector<Hop>& hops, std::size_t node, int port) {
  if (t.nodes[node].filters.count(port)) hops.push_back({node, port});
}

struct Partial {
  Path path;
  std::size_t node = 0;
  int arrival_port = 0;
  std::set<std::size_t> visited_nodes;
};

}  // namespace

Topology Topology::tree(const PlantParams& p, std::string_view co_name, const std::vector<RuPlacement>& rus) {
  Topology t;
  t.kind = TopologyKind::Tree;
  t.nodes.push_back(mux_node(std::string(co_name), NodeKind::CentralOffice, p));
  t.nodes.push_back(mux_node("RN0", NodeKind::RemoteNode, p));
  t.spans.push_back(make_span("trunk", {0, kCommonPort}, {1, kCommonPort}, p.trunk_km, p));
  for (const auto& ru : rus) {
    const std::size_t idx = t.nodes.size();
    t.nodes.push_back(Node{ru.name, NodeKind::RadioUnit, {}, {}});
    t.spans.push_back(make_span("drop." + ru.name, {1, static_cast<int>(ru.channel)}, {idx, 0},
                                ru.drop_km.value_or(p.drop_km), p));
  }
  t.validate();
  return t;
}

Topology Topology::drop_line(const PlantParams& p, std::string_view co_name, const std::vector<RuPlacement>& rus) {
  return line_topology(TopologyKind::DropLine, p, co_name, {}, rus);
}

Topology Topology::horseshoe(const PlantParams& p, std::string_view west_co, std::string_view east_co,
                             const std::vector<RuPlacement>& rus) {
  return line_topology(TopologyKind::Horseshoe, p, west_co, east_co, rus);
}

std::optional<std::size_t> Topology::find_node(std::string_view id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return i;
  }
  return std::nullopt;
}

std::size_t Topology::node_index(std::string_view id) const {
  if (auto i = find_node(id)) return *i;
  throw Error(ErrorCode::InvalidTopology, "no node named '" + std::string(id) + "'");
}

std::optional<std::size_t> Topology::find_span(std::string_view id) const {
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].id == id) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> Topology::central_offices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].kind == NodeKind::CentralOffice) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Topology::radio_units() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].kind == NodeKind::RadioUnit) out.push_back(i);
  }
  return out;
}

std::vector<int> Topology::ru_ports(std::size_t ru) const {
  std::vector<int> ports;
  for (const auto& s : spans) {
    if (s.a.node == ru) ports.push_back(s.a.port);
    if (s.b.node == ru) ports.push_back(s.b.port);
  }
  std::sort(ports.begin(), ports.end());
  return ports;
}

void Topology::validate() const {
  std::set<std::pair<std::size_t, int>> used;
  std::set<std::string> ids;
  for (const auto& s : spans) {
    if (!ids.insert(s.id).second) throw Error(ErrorCode::InvalidTopology, "duplicate span id '" + s.id + "'");
    for (const auto& end : {s.a, s.b}) {
      if (end.node >= nodes.size()) throw Error(ErrorCode::InvalidTopology, "span '" + s.id + "' names a missing node");
      if (!used.insert({end.node, end.port}).second) {
        throw Error(ErrorCode::InvalidTopology,
                    "port " + std::to_string(end.port) + " of " + nodes[end.node].id + " carries two spans");
      }
    }
    if (s.length_km < 0.0 || s.loss_db_per_km < 0.0 || s.connector_loss_db < 0.0 || s.connectors < 0) {
      throw Error(ErrorCode::InvalidTopology, "span '" + s.id + "' has negative loss parameters");
    }
  }
  if (kind == TopologyKind::Horseshoe) {
    const auto cos = central_offices();
    if (cos.size() != 2) throw Error(ErrorCode::InvalidTopology, "horseshoe needs exactly two central offices");
    for (std::size_t ru : radio_units()) {
      const auto ports = ru_ports(ru);
      const auto& oadm_span = *std::find_if(spans.begin(), spans.end(), [&](const Span& s) {
        return s.b.node == ru || s.a.node == ru;
      });
      const PortRef drop = oadm_span.a.node == ru ? oadm_span.b : oadm_span.a;
      const int channel = drop.port;
      const auto west = find_path(*this, {ru, std::nullopt}, {cos[0], channel});
      const auto east = find_path(*this, {ru, std::nullopt}, {cos[1], channel});
      if (!west || !east) throw Error(ErrorCode::InvalidTopology, nodes[ru].id + " lacks a path to both COs");
      for (std::size_t s : west->spans) {
        if (std::find(east->spans.begin(), east->spans.end(), s) != east->spans.end()) {
          throw Error(ErrorCode::InvalidTopology, nodes[ru].id + ": CO paths share span '" + spans[s].id + "'");
        }
      }
    }
  }
}

std::optional<Path> find_path(const Topology& t, const Endpoint& from, const Endpoint& to) {
  if (from.node >= t.nodes.size() || to.node >= t.nodes.size()) return std::nullopt;
  const auto& src = t.nodes[from.node];
  const auto& dst = t.nodes[to.node];
  if (src.kind == NodeKind::RadioUnit && dst.kind == NodeKind::RadioUnit) return std::nullopt;
  if (from.node == to.node) {
    if (from.port == to.port) return Path{};
    return std::nullopt;
  }
  const PortIndex index(t);
  const std::optional<int> dest_port =
      dst.kind == NodeKind::RadioUnit ? to.port : std::optional<int>(to.port.value_or(kCommonPort));

  std::deque<Partial> queue;
  auto launch = [&](int start_port, int exit_port) {
    const auto s = index.at(from.node, exit_port);
    if (!s || t.spans[*s].cut) return;
    Partial p;
    add_filter(t, p.path.filtered_ports, from.node, start_port);
    if (exit_port != start_port) add_filter(t, p.path.filtered_ports, from.node, exit_port);
    p.visited_nodes.insert(from.node);
    const Span& span = t.spans[*s];
    const PortRef far = (span.a.node == from.node && span.a.port == exit_port) ? span.b : span.a;
    p.path.spans.push_back(*s);
    p.path.span_loss_db = span.loss_db();
    p.path.length_km = span.length_km;
    p.node = far.node;
    p.arrival_port = far.port;
    queue.push_back(std::move(p));
  };

  if (src.kind == NodeKind::RadioUnit) {
    const auto ports = from.port ? std::vector<int>{*from.port} : t.ru_ports(from.node);
    for (int port : ports) launch(port, port);
  } else {
    const int start = from.port.value_or(kCommonPort);
    if (index.at(from.node, start)) launch(start, start);
    for (int q : connected_ports(src, start)) launch(start, q);
  }

  while (!queue.empty()) {
    Partial cur = std::move(queue.front());
    queue.pop_front();
    if (cur.visited_nodes.count(cur.node)) continue;
    const auto& node = t.nodes[cur.node];
    if (cur.node == to.node) {
      if (!dest_port || *dest_port == cur.arrival_port) {
        add_filter(t, cur.path.filtered_ports, cur.node, cur.arrival_port);
        return cur.path;
      }
      const auto conn = connected_ports(node, cur.arrival_port);
      if (std::find(conn.begin(), conn.end(), *dest_port) != conn.end()) {
        add_filter(t, cur.path.filtered_ports, cur.node, cur.arrival_port);
        add_filter(t, cur.path.filtered_ports, cur.node, *dest_port);
        return cur.path;
      }
      continue;
    }
    if (node.kind != NodeKind::RemoteNode) continue;
    for (int q : connected_ports(node, cur.arrival_port)) {
      const auto s = index.at(cur.node, q);
      if (!s || t.spans[*s].cut) continue;
      const Span& span = t.spans[*s];
      const PortRef far = (span.a.node == cur.node && span.a.port == q) ? span.b : span.a;
      Partial next = cur;
      next.visited_nodes.insert(cur.node);
      add_filter(t, next.path.filtered_ports, cur.node, cur.arrival_port);
      add_filter(t, next.path.filtered_ports, cur.node, q);
      next.path.spans.push_back(*s);
      next.path.span_loss_db += span.loss_db();
      next.path.length_km += span.length_km;
      next.node = far.node;
      next.arrival_port = far.port;
      queue.push_back(std::move(next));
    }
  }
  return std::nullopt;
}

double path_gain_db(const Topology& t, const Path& path, double f_thz) {
  double loss = path.span_loss_db;
  for (const auto& hop : path.filtered_ports) loss += filter_attenuation(t.nodes[hop.node].filters.at(hop.port), f_thz);
  return -loss;
}

PathGainResult path_gain(const Topology& t, const Endpoint& from, const Endpoint& to, double f_thz) {
  auto path = find_path(t, from, to);
  if (!path) {
    const auto name = [&](const Endpoint& e) { return e.node < t.nodes.size() ? t.nodes[e.node].id : "?"; };
    throw Error(ErrorCode::NoPath, name(from) + " -> " + name(to));
  }
  PathGainResult r;
  r.gain_db = path_gain_db(t, *path, f_thz);
  r.path = std::move(*path);
  return r;
}

std::optional<std::size_t> serving_co(const Topology& t, std::size_t ru, std::size_t channel) {
  for (std::size_t co : t.central_offices()) {
    if (find_path(t, {ru, std::nullopt}, {co, static_cast<int>(channel)})) return co;
  }
  return std::nullopt;
}

double crosstalk_margin(const Topology& t, const Emitter& sweeper, const Emitter& victim, const Endpoint& receiver) {
  const double signal = victim.power_dbm + path_gain(t, victim.node, receiver, victim.frequency_thz).gain_db;
  const double leak = sweeper.power_dbm + path_gain(t, sweeper.node, receiver, sweeper.frequency_thz).gain_db;
  return signal - leak;
}

Topology apply_cut(const Topology& t, std::string_view span_id) {
  const auto s = t.find_span(span_id);
  if (!s) throw Error(ErrorCode::UnknownSpan, std::string(span_id));
  Topology out = t;
  out.spans[*s].cut = true;
  return out;
}

Topology restore(const Topology& t, std::string_view span_id) {
  const auto s = t.find_span(span_id);
  if (!s) throw Error(ErrorCode::UnknownSpan, std::string(span_id));
  Topology out = t;
  out.spans[*s].cut = false;
  return out;
}

}  // namespace gmetro::link
