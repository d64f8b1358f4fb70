#pragma once

// Optical plant: mux/demux filters, spans and the tree / drop-line /
// horseshoe topologies. Answers path-gain queries between a central office
// port and a radio unit.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gmetro/plan.hpp"

namespace gmetro::link {

struct FilterModel {
  double center_thz = 193.0;
  double bandwidth_3db_ghz = 50.0;
  int order = 2;
  double isolation_floor_db = 35.0;

  bool operator==(const FilterModel&) const = default;
};

/// Super-Gaussian passband attenuation in dB (positive), clamped at the
/// isolation floor.
double filter_attenuation(const FilterModel& filter, double f_thz);

enum class NodeKind { CentralOffice, RemoteNode, RadioUnit };
enum class TopologyKind { Tree, DropLine, Horseshoe };

std::string_view to_string(TopologyKind kind);

/// Port numbering. Channel ports of a central office or remote node use the
/// channel index; the named ports below are negative.
inline constexpr int kCommonPort = -1;    // trunk side / west line side
inline constexpr int kLineEastPort = -2;  // OADM east line side
inline constexpr int kDropEastPort = -3;  // OADM drop port facing east

struct Node {
  std::string id;
  NodeKind kind = NodeKind::RemoteNode;
  std::map<int, FilterModel> filters;               // filtered ports
  std::vector<std::pair<int, int>> connections;     // internal port pairs, both directions
  bool operator==(const Node&) const = default;
};

struct PortRef {
  std::size_t node = 0;
  int port = 0;
  bool operator==(const PortRef&) const = default;
};

struct Span {
  std::string id;
  PortRef a;
  PortRef b;
  double length_km = 0.0;
  double loss_db_per_km = 0.25;
  int connectors = 2;
  double connector_loss_db = 0.5;
  bool cut = false;

  double loss_db() const { return length_km * loss_db_per_km + connectors * connector_loss_db; }
  bool operator==(const Span&) const = default;
};

/// Where a path starts or ends. For a radio unit `port` may be left empty to
/// pick the first of its ports that reaches the other end.
struct Endpoint {
  std::size_t node = 0;
  std::optional<int> port;
  bool operator==(const Endpoint&) const = default;
};

struct Hop {
  std::size_t node = 0;
  int port = 0;
};

struct Path {
  std::vector<std::size_t> spans;   // indices into Topology::spans, in order
  std::vector<Hop> filtered_ports;  // every filtered port traversed
  double span_loss_db = 0.0;
  double length_km = 0.0;
};

struct PathGainResult {
  double gain_db = 0.0;  // negative = loss
  Path path;
};

struct PlantParams {
  FrequencyPlan plan;
  FilterModel filter;  // center is overwritten per port
  double loss_db_per_km = 0.25;
  double connector_loss_db = 0.5;
  int connectors_per_span = 2;
  double trunk_km = 20.0;
  double drop_km = 2.0;
  double segment_km = 5.0;
  bool operator==(const PlantParams&) const = default;
};

/// One radio unit to place: name and the channel (port) it uses.
struct RuPlacement {
  std::string name;
  std::size_t channel = 0;
  std::optional<double> drop_km;
};

class Topology {
 public:
  TopologyKind kind = TopologyKind::Tree;
  std::vector<Node> nodes;
  std::vector<Span> spans;

  static Topology tree(const PlantParams& params, std::string_view co_name, const std::vector<RuPlacement>& rus);
  static Topology drop_line(const PlantParams& params, std::string_view co_name, const std::vector<RuPlacement>& rus);
  static Topology horseshoe(const PlantParams& params, std::string_view west_co, std::string_view east_co,
                            const std::vector<RuPlacement>& rus);

  std::optional<std::size_t> find_node(std::string_view id) const;
  std::size_t node_index(std::string_view id) const;  // throws InvalidTopology
  std::optional<std::size_t> find_span(std::string_view id) const;
  std::vector<std::size_t> central_offices() const;
  std::vector<std::size_t> radio_units() const;
  /// Ports of a radio unit that have a span attached, in port order.
  std::vector<int> ru_ports(std::size_t ru) const;

  /// Structural checks: span ends refer to existing ports, one span per
  /// port, horseshoe CO paths disjoint. Throws InvalidTopology.
  void validate() const;

  bool operator==(const Topology&) const = default;
};

/// Deterministic route between two endpoints, or nullopt. Paths never cross
/// a central office or radio unit and never join two radio units.
std::optional<Path> find_path(const Topology& topology, const Endpoint& from, const Endpoint& to);

/// Net gain at `f_thz`; throws NoPath.
PathGainResult path_gain(const Topology& topology, const Endpoint& from, const Endpoint& to, double f_thz);
double path_gain_db(const Topology& topology, const Path& path, double f_thz);

/// The central office currently serving a radio unit: the first one (in
/// node order) a surviving path reaches on `channel`.
std::optional<std::size_t> serving_co(const Topology& topology, std::size_t ru, std::size_t channel);

inline double received_power(double tx_power_dbm, const PathGainResult& gain) { return tx_power_dbm + gain.gain_db; }

struct Emitter {
  Endpoint node;
  double frequency_thz = 0.0;
  double power_dbm = 0.0;
};

/// Victim signal minus sweeper leakage at the victim's receiver, in dB.
/// `receiver` is the CO port of the victim channel.
double crosstalk_margin(const Topology& topology, const Emitter& sweeper, const Emitter& victim,
                        const Endpoint& receiver);

Topology apply_cut(const Topology& topology, std::string_view span_id);
Topology restore(const Topology& topology, std::string_view span_id);

}  // namespace gmetro::link
