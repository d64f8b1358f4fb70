#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "gmetro/error.hpp"
#include "gmetro/link.hpp"
#include "gmetro/rng.hpp"

using namespace gmetro;
using namespace gmetro::link;

namespace {

std::vector<RuPlacement> placements(std::size_t n) {
  std::vector<RuPlacement> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back({"RU" + std::to_string(i), i, std::nullopt});
  return v;
}

// Two nodes joined by one span; the CO side has a mux port 0 whose filter
// is optional.
Topology single_span(double km, int connectors, bool with_filter) {
  Topology t;
  Node co{"CO", NodeKind::CentralOffice, {}, {{kCommonPort, 0}}};
  if (with_filter) co.filters[0] = FilterModel{193.0, 50.0, 2, 35.0};
  t.nodes.push_back(co);
  t.nodes.push_back(Node{"RU", NodeKind::RadioUnit, {}, {}});
  Span s;
  s.id = "s";
  s.a = {0, kCommonPort};
  s.b = {1, 0};
  s.length_km = km;
  s.connectors = connectors;
  t.spans.push_back(s);
  return t;
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

TEST_CASE("filter: center, band edge and adjacent channel") {
  const FilterModel f{193.0, 50.0, 2, 35.0};
  CHECK(filter_attenuation(f, 193.0) == 0.0);
  CHECK(filter_attenuation(f, 193.025) == doctest::Approx(3.0).epsilon(0.05 / 3.0));
  CHECK(filter_attenuation(f, 192.975) == doctest::Approx(3.0).epsilon(0.05 / 3.0));
  // Unclamped: 3.01·(2·100/50)^4 ≈ 770 dB.
  CHECK(filter_attenuation(f, 193.1) == 35.0);
}

TEST_CASE("filter: symmetric and monotone up to the clamp") {
  Rng rng(2);
  for (int order : {1, 2, 3}) {
    const FilterModel f{193.0, 50.0, order, 35.0};
    double prev = 0.0;
    for (int i = 0; i <= 2000; ++i) {
      const double d = i * 0.1e-3;  // 0.1 GHz steps
      const double a = filter_attenuation(f, 193.0 + d);
      REQUIRE(a == filter_attenuation(f, 193.0 - d));
      REQUIRE(a >= prev);
      REQUIRE(a <= 35.0);
      prev = a;
    }
  }
}

TEST_CASE("path gain: zero-length path without filters") {
  const auto t = single_span(0.0, 0, false);
  CHECK(path_gain(t, {0, 0}, {1, std::nullopt}, 193.0).gain_db == 0.0);
}

TEST_CASE("path gain: 20 km plus two connectors on filter center") {
  const auto t = single_span(20.0, 2, true);
  CHECK(path_gain(t, {0, 0}, {1, std::nullopt}, 193.0).gain_db == doctest::Approx(-6.0));
}

TEST_CASE("path gain: no path between radio units") {
  const auto t = Topology::tree(PlantParams{}, "CO", placements(4));
  const auto ru = t.radio_units();
  CHECK(!find_path(t, {ru[0], std::nullopt}, {ru[1], std::nullopt}));
  CHECK(code_of([&] { path_gain(t, {ru[0], std::nullopt}, {ru[1], std::nullopt}, 192.1); }) == ErrorCode::NoPath);
}

TEST_CASE("received power") {
  PathGainResult g;
  g.gain_db = -6.0;
  CHECK(received_power(0.0, g) == -6.0);
  g.gain_db = -37.0;
  CHECK(received_power(-3.0, g) == -40.0);
}

TEST_CASE("tree: path gain is span losses plus filter attenuations") {
  const PlantParams p;
  const auto t = Topology::tree(p, "CO", placements(16));
  Rng rng(3);
  for (std::size_t ru : t.radio_units()) {
    for (std::size_t ch = 0; ch < 16; ++ch) {
      const auto path = find_path(t, {0, static_cast<int>(ch)}, {ru, std::nullopt});
      const std::size_t own = ru - 2;
      REQUIRE(path);
      const double f = p.plan.center_thz(ch) + rng.uniform(-0.2, 0.2);
      double expect = 0.0;
      for (std::size_t s : path->spans) expect -= t.spans[s].loss_db();
      for (const auto& hop : path->filtered_ports) expect -= filter_attenuation(t.nodes[hop.node].filters.at(hop.port), f);
      REQUIRE(path_gain_db(t, *path, f) == doctest::Approx(expect));
      // Trunk 20 km + drop 2 km, four connectors, two on-center filters;
      // a foreign port adds the isolation floor of the RN filter.
      const double center = path_gain_db(t, *path, p.plan.center_thz(ch));
      REQUIRE(center == doctest::Approx(-(22 * 0.25 + 4 * 0.5) - (ch == own ? 0.0 : 35.0)));
      REQUIRE(path_gain_db(t, *path, f) <= 0.0);
    }
  }
}

TEST_CASE("passivity on all topologies") {
  const PlantParams p;
  Rng rng(4);
  for (const auto& t : {Topology::tree(p, "CO", placements(8)), Topology::drop_line(p, "CO", placements(8)),
                        Topology::horseshoe(p, "W", "E", placements(8))}) {
    for (std::size_t co : t.central_offices())
      for (std::size_t ru : t.radio_units())
        for (int ch = 0; ch < 8; ++ch) {
          if (auto path = find_path(t, {co, ch}, {ru, std::nullopt})) {
            REQUIRE(path_gain_db(t, *path, rng.uniform(192.0, 193.0)) <= 0.0);
          }
        }
  }
}

TEST_CASE("crosstalk margin examples") {
  const PlantParams p;
  const auto t = Topology::tree(p, "CO", placements(4));
  const auto ru = t.radio_units();
  const Endpoint rx{0, 0};
  const Emitter victim{{ru[0], std::nullopt}, p.plan.center_thz(0), 0.0};
  const Emitter same{{ru[0], std::nullopt}, p.plan.center_thz(0), 0.0};
  CHECK(crosstalk_margin(t, same, victim, rx) == doctest::Approx(0.0));
  const Emitter neighbour{{ru[1], std::nullopt}, p.plan.center_thz(1), 0.0};
  CHECK(crosstalk_margin(t, neighbour, victim, rx) == doctest::Approx(35.0));
  Emitter quiet = neighbour;
  quiet.power_dbm -= 10.0;
  CHECK(crosstalk_margin(t, quiet, victim, rx) == doctest::Approx(45.0));
}

TEST_CASE("cut and restore") {
  const PlantParams p;
  const auto tree = Topology::tree(p, "CO", placements(4));
  const auto cut = apply_cut(tree, "trunk");
  for (std::size_t ru : cut.radio_units()) {
    CHECK(!find_path(cut, {0, static_cast<int>(ru - 2)}, {ru, std::nullopt}));
    CHECK(!serving_co(cut, ru, ru - 2));
  }
  CHECK(restore(cut, "trunk") == tree);
  CHECK(code_of([&] { apply_cut(tree, "nope"); }) == ErrorCode::UnknownSpan);
}

TEST_CASE("horseshoe: west cut moves every unit to the east office on the same channel") {
  const PlantParams p;
  const auto t = Topology::horseshoe(p, "W", "E", placements(8));
  const auto cut = apply_cut(t, "seg.0");
  for (std::size_t ru : t.radio_units()) {
    const std::size_t ch = std::stoul(t.nodes[ru].id.substr(2));
    REQUIRE(serving_co(t, ru, ch) == 0u);
    REQUIRE(serving_co(cut, ru, ch) == 1u);
    const auto path = find_path(cut, {1, static_cast<int>(ch)}, {ru, std::nullopt});
    REQUIRE(path);
    // 0 dBm launch stays above the -40 dBm management sensitivity.
    CHECK(path_gain_db(cut, *path, p.plan.center_thz(ch)) > -40.0);
  }
  CHECK(restore(cut, "seg.0") == t);
}

TEST_CASE("horseshoe: the two office paths share no span") {
  const PlantParams p;
  const auto t = Topology::horseshoe(p, "W", "E", placements(8));
  for (std::size_t ru : t.radio_units()) {
    const int ch = std::stoi(t.nodes[ru].id.substr(2));
    const auto w = find_path(t, {0, ch}, {ru, std::nullopt});
    const auto e = find_path(t, {1, ch}, {ru, std::nullopt});
    REQUIRE(w);
    REQUIRE(e);
    std::set<std::size_t> ws(w->spans.begin(), w->spans.end());
    for (std::size_t s : e->spans) CHECK(!ws.count(s));
  }
  CHECK_NOTHROW(t.validate());
}

TEST_CASE("validate rejects two spans on one port") {
  auto t = Topology::tree(PlantParams{}, "CO", placements(2));
  t.spans.push_back(t.spans.back());
  t.spans.back().id = "dup";
  CHECK(code_of([&] { t.validate(); }) == ErrorCode::InvalidTopology);
}
