#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include "gmetro/codec.hpp"
#include "gmetro/engine.hpp"
#include "gmetro/error.hpp"
#include "gmetro/lasers.hpp"
#include "gmetro/protocol.hpp"
#include "gmetro/scenario.hpp"

namespace py = pybind11;
using namespace gmetro;

namespace {

py::dict frame_dict(const codec::UnpackResult& r) {
  py::dict d;
  d["type"] = std::string(codec::to_string(r.frame.type));
  d["seq"] = r.frame.seq;
  d["payload"] = py::bytes(reinterpret_cast<const char*>(r.frame.payload.data()), r.frame.payload.size());
  d["blocks"] = r.fec.blocks;
  d["corrected"] = r.fec.corrected;
  return d;
}

codec::MsgType type_from_name(const std::string& name) {
  for (int t = 0; t <= 9; ++t) {
    const auto type = static_cast<codec::MsgType>(t);
    if (codec::to_string(type) == name) return type;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown message type " + name);
}

}  // namespace

PYBIND11_MODULE(_gmetro, m) {
  m.doc() = "Fronthaul DWDM self-tuning simulator";

  static py::exception<Error> exc(m, "GmetroError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(exc.ptr(), e.what());
    }
  });

  m.def("hamming_encode", &codec::hamming_encode, py::arg("data"));
  m.def(
      "hamming_decode",
      [](std::uint16_t word) {
        const auto r = codec::hamming_decode(word);
        return py::make_tuple(r.data, r.status == codec::DecodeStatus::Corrected);
      },
      py::arg("word"));
  m.def(
      "crc8", [](const py::bytes& b) {
        const std::string s = b;
        std::vector<std::uint8_t> v(s.begin(), s.end());
        return codec::crc8(v);
      },
      py::arg("data"));
  m.def(
      "frame_pack",
      [](const std::string& type, unsigned seq, const py::bytes& payload) {
        codec::MgmtFrame f;
        f.type = type_from_name(type);
        f.seq = static_cast<std::uint8_t>(seq);
        const std::string s = payload;
        f.payload.assign(s.begin(), s.end());
        return codec::frame_pack(f);
      },
      py::arg("type"), py::arg("seq") = 0, py::arg("payload") = py::bytes());
  m.def(
      "frame_unpack", [](const std::vector<std::uint8_t>& bits) { return frame_dict(codec::frame_unpack(bits)); },
      py::arg("bits"));
  m.def(
      "manchester_encode",
      [](const std::vector<std::uint8_t>& bits) {
        std::vector<int> out;
        for (auto s : codec::manchester_encode(bits)) out.push_back(static_cast<int>(s));
        return out;
      },
      py::arg("bits"));
  m.def(
      "manchester_decode",
      [](const std::vector<int>& symbols) {
        codec::SymbolStream s;
        for (int v : symbols) s.push_back(v ? codec::Symbol::Hi : codec::Symbol::Lo);
        return codec::manchester_decode(s);
      },
      py::arg("symbols"));
  m.def(
      "spectral_fraction_in_band",
      [](const std::vector<std::uint8_t>& bits, double bit_rate) {
        codec::MgmtChannelConfig cfg;
        cfg.bit_rate = bit_rate;
        return codec::spectral_occupancy(codec::manchester_encode(bits), cfg.baud_rate(), cfg).fraction_in_band;
      },
      py::arg("bits"), py::arg("bit_rate") = 50'000.0);
  m.def("block_loss_probability", &codec::block_loss_probability, py::arg("p_bit"));
  m.def(
      "message_loss_interval_s",
      [](double p, std::size_t blocks, double bit_rate) {
        codec::MgmtChannelConfig cfg;
        cfg.bit_rate = bit_rate;
        return codec::expected_message_loss_interval(p, blocks, cfg);
      },
      py::arg("p_bit"), py::arg("blocks_per_msg") = 1, py::arg("bit_rate") = 50'000.0);

  m.def("vernier_range_ghz", &lasers::vernier_range_ghz, py::arg("fsr_front_ghz"), py::arg("fsr_back_ghz"));
  m.def(
      "mems_frequency_thz",
      [](double cavity_length_um, double frequency_error_ghz) {
        lasers::MemsVcselModel mdl;
        mdl.cavity_length_um = cavity_length_um;
        mdl.frequency_error_ghz = frequency_error_ghz;
        return lasers::mems_emission(mdl).frequency_thz;
      },
      py::arg("cavity_length_um"), py::arg("frequency_error_ghz") = 0.0);
  m.def(
      "dbr_heater_power_mw",
      [](double shift_nm) { return lasers::ThermalDbrModel{}.heater_power_mw(shift_nm); }, py::arg("shift_nm"));

  m.def(
      "sweep_power",
      [](double loss_db, double margin_db, double full_power_dbm) {
        const auto p = protocol::sweep_power(loss_db, {}, margin_db, full_power_dbm);
        return py::make_tuple(p.power_dbm, p.capped);
      },
      py::arg("loss_db"), py::arg("margin_db") = 3.0, py::arg("full_power_dbm") = 3.0);
  m.def(
      "plan_sweep",
      [](std::size_t channels, double spacing_ghz, double first_thz, double filter_b3_ghz, double latency_ms) {
        const auto s = protocol::plan_sweep(FrequencyPlan{channels, spacing_ghz, first_thz}, filter_b3_ghz, latency_ms);
        py::dict d;
        d["f_start_thz"] = s.f_start_thz;
        d["f_stop_thz"] = s.f_stop_thz;
        d["step_ghz"] = s.step_ghz;
        d["dwell_ms"] = s.dwell_ms;
        d["points"] = s.point_count();
        d["worst_case_s"] = s.worst_case_s();
        return d;
      },
      py::arg("channels"), py::arg("spacing_ghz"), py::arg("first_center_thz"), py::arg("filter_b3_ghz"),
      py::arg("latency_worst_ms"));
  m.def(
      "hold_step",
      [](double est, double deadband, double gain, double max_step) {
        return protocol::hold_step(est, protocol::HoldParams{deadband, gain, max_step});
      },
      py::arg("offset_est_ghz"), py::arg("deadband_ghz") = 1.0, py::arg("gain") = 0.5, py::arg("max_step_ghz") = 2.0);

  m.def(
      "validate_scenario",
      [](const std::string& text) {
        std::vector<std::string> out;
        auto parsed = scenario::parse_scenario(text);
        for (const auto& d : parsed.errors) out.push_back(scenario::to_string(d));
        if (out.empty()) {
          try {
            engine::validate(*parsed.scenario);
          } catch (const Error& e) {
            out.push_back(std::string(e.what()));
          }
        }
        return out;
      },
      py::arg("text"));
  m.def(
      "canonical_scenario", [](const std::string& text) { return scenario::render(scenario::parse_scenario_or_throw(text)); },
      py::arg("text"));
  m.def(
      "run_scenario",
      [](const std::string& text, std::optional<std::uint64_t> seed) {
        auto sc = scenario::parse_scenario_or_throw(text);
        if (seed) sc.seed = *seed;
        engine::RunResult r;
        {
          py::gil_scoped_release release;
          r = engine::run(sc);
        }
        return py::make_tuple(engine::to_json(r.metrics), r.trace, r.violations);
      },
      py::arg("text"), py::arg("seed") = py::none());
}
