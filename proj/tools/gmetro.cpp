// gmetro: run, validate and inspect fronthaul tuning scenarios.
//
// Exit codes: 0 ok, 1 scenario invalid, 2 run-time assertion failure,
// 3 acceptance threshold violated.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "gmetro/codec.hpp"
#include "gmetro/engine.hpp"
#include "gmetro/error.hpp"
#include "gmetro/scenario.hpp"

using namespace gmetro;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kAssertion = 2;
constexpr int kAcceptance = 3;

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

bool is_validation(ErrorCode c) {
  switch (c) {
    case ErrorCode::ValidationError:
    case ErrorCode::UnknownSpan:
    case ErrorCode::InvalidTopology:
    case ErrorCode::InvalidModel:
    case ErrorCode::ChannelUnreachable:
    case ErrorCode::ParseError:
    case ErrorCode::UnknownKey:
    case ErrorCode::UnitViolation:
    case ErrorCode::CrossRefError:
      return true;
    default:
      return false;
  }
}

/// Parses and validates; prints diagnostics. Returns nullopt on failure.
std::optional<engine::Scenario> load(const std::string& path) {
  std::string text;
  if (!read_file(path, text)) {
    std::cerr << "cannot read " << path << '\n';
    return std::nullopt;
  }
  auto parsed = scenario::parse_scenario(text);
  if (!parsed.ok()) {
    for (const auto& d : parsed.errors) std::cerr << path << ": " << scenario::to_string(d) << '\n';
    return std::nullopt;
  }
  try {
    engine::validate(*parsed.scenario);
  } catch (const Error& e) {
    std::cerr << path << ": " << e.what() << '\n';
    return std::nullopt;
  }
  return parsed.scenario;
}

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("GMETRO_SEED");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (*end != '\0') return std::nullopt;
  return s;
}

int cmd_run(const std::string& file, std::optional<std::uint64_t> seed, const std::string& trace_path,
            const std::string& metrics_path, const std::string& json_path) {
  auto sc = load(file);
  if (!sc) return kInvalid;
  if (seed) sc->seed = *seed;
  else if (auto e = env_seed()) sc->seed = *e;

  std::ofstream trace_file;
  engine::RunOptions opt;
  opt.keep_trace = false;
  if (!trace_path.empty()) {
    if (trace_path == "-") {
      opt.trace_stream = &std::cout;
    } else {
      trace_file.open(trace_path, std::ios::binary);
      if (!trace_file) {
        std::cerr << "cannot write " << trace_path << '\n';
        return kInvalid;
      }
      opt.trace_stream = &trace_file;
    }
  }

  engine::RunResult r;
  try {
    r = engine::run(*sc, opt);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return is_validation(e.code()) ? kInvalid : kAssertion;
  }

  const std::string kv = engine::to_key_value(r.metrics);
  if (metrics_path.empty() || metrics_path == "-") {
    std::cout << kv;
  } else {
    std::ofstream(metrics_path, std::ios::binary) << kv;
  }
  if (!json_path.empty()) std::ofstream(json_path, std::ios::binary) << engine::to_json(r.metrics);

  for (const auto& v : r.violations) std::cerr << "violation: " << v << '\n';
  if (!r.violations.empty()) return kAssertion;
  if (sc->stop == engine::StopCondition::AllLocked && !r.metrics.all_locked) {
    std::cerr << "not all radio units locked by the horizon\n";
    return kAcceptance;
  }
  return kOk;
}

int cmd_validate(const std::string& file, bool canonical) {
  auto sc = load(file);
  if (!sc) return kInvalid;
  if (canonical) std::cout << scenario::render(*sc);
  else std::cout << file << ": ok\n";
  return kOk;
}

std::optional<codec::MsgType> parse_type(const std::string& name) {
  for (int t = 0; t <= 9; ++t) {
    const auto type = static_cast<codec::MsgType>(t);
    if (codec::to_string(type) == name) return type;
  }
  return std::nullopt;
}

int cmd_encode(const std::string& type_name, unsigned seq, const std::string& payload_hex) {
  const auto type = parse_type(type_name);
  if (!type) {
    std::cerr << "unknown message type " << type_name << '\n';
    return kInvalid;
  }
  try {
    codec::MgmtFrame f;
    f.type = *type;
    f.seq = static_cast<std::uint8_t>(seq & 0x0F);
    const auto payload_bits = codec::hex_to_bits(payload_hex);
    for (std::size_t i = 0; i + 8 <= payload_bits.size(); i += 8) {
      std::uint8_t b = 0;
      for (std::size_t k = 0; k < 8; ++k) b = static_cast<std::uint8_t>((b << 1) | payload_bits[i + k]);
      f.payload.push_back(b);
    }
    const auto bits = codec::frame_pack(f);
    std::cout << "bits=" << bits.size() << '\n';
    std::cout << "hex=" << codec::bits_to_hex(bits) << '\n';
    std::cout << "binary=" << codec::bits_to_string(bits) << '\n';
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return kInvalid;
  }
  return kOk;
}

int cmd_decode(const std::string& hex, std::size_t bit_count) {
  try {
    const auto bits = codec::hex_to_bits(hex, bit_count);
    const auto r = codec::frame_unpack(bits);
    std::cout << "type=" << codec::to_string(r.frame.type) << '\n';
    std::cout << "seq=" << unsigned(r.frame.seq) << '\n';
    std::string p;
    char buf[4];
    for (auto b : r.frame.payload) {
      std::snprintf(buf, sizeof buf, "%02x", b);
      p += buf;
    }
    std::cout << "payload=" << p << '\n';
    std::cout << "blocks=" << r.fec.blocks << " corrected=" << r.fec.corrected << '\n';
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return kInvalid;
  }
  return kOk;
}

int cmd_stats(double ber, std::size_t blocks_per_msg, std::uint64_t bits, std::uint64_t seed) {
  std::printf("block_loss_probability=%.6e\n", codec::block_loss_probability(ber));
  const double interval = codec::expected_message_loss_interval(ber, blocks_per_msg);
  std::printf("message_loss_interval_s=%.6e\n", interval);
  std::printf("message_loss_interval_h=%.3f\n", interval / 3600.0);
  if (bits > 0) {
    Rng rng(seed);
    const auto mc = codec::simulate_block_losses(ber, bits, rng);
    std::printf("mc_bits=%llu\nmc_lost_blocks=%llu\nmc_block_loss_rate=%.6e\n",
                static_cast<unsigned long long>(mc.bits), static_cast<unsigned long long>(mc.lost_blocks),
                mc.block_loss_rate());
  }
  return kOk;
}

int cmd_sweep_report(const std::string& file, std::uint64_t first_seed, std::size_t seeds) {
  auto sc = load(file);
  if (!sc) return kInvalid;
  if (auto e = env_seed()) first_seed = *e;
  std::printf("seed\tall_locked\tmax_time_to_lock_s\tmin_crosstalk_db\tretries\tviolations\n");
  int status = kOk;
  double worst = 0.0;
  for (std::size_t i = 0; i < seeds; ++i) {
    engine::Scenario s = *sc;
    s.seed = first_seed + i;
    engine::RunOptions opt;
    opt.keep_trace = false;
    engine::RunResult r;
    try {
      r = engine::run(s, opt);
    } catch (const Error& e) {
      std::cerr << "seed " << s.seed << ": " << e.what() << '\n';
      status = kAssertion;
      continue;
    }
    const auto& m = r.metrics;
    std::printf("%llu\t%s\t%.6f\t%s\t%llu\t%zu\n", static_cast<unsigned long long>(s.seed),
                m.all_locked ? "yes" : "no", m.max_time_to_lock_s.value_or(-1.0),
                m.min_crosstalk_margin_db ? std::to_string(*m.min_crosstalk_margin_db).c_str() : "none",
                static_cast<unsigned long long>(m.retries), r.violations.size());
    worst = std::max(worst, m.max_time_to_lock_s.value_or(0.0));
    if (!r.violations.empty()) status = kAssertion;
    else if (!m.all_locked && status == kOk) status = kAcceptance;
  }
  std::printf("worst_time_to_lock_s=%.6f\n", worst);
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fronthaul DWDM tuning simulator"};
  app.require_subcommand(1);

  std::string file, trace_path, metrics_path, json_path;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run a scenario");
  run->add_option("file", file, "Scenario file")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--trace", trace_path, "Write the trace here ('-' for stdout)");
  run->add_option("--metrics", metrics_path, "Write key=value metrics here (default stdout)");
  run->add_option("--json", json_path, "Write metrics as JSON here");

  bool canonical = false;
  auto* val = app.add_subcommand("validate", "Parse and validate a scenario");
  val->add_option("file", file, "Scenario file")->required();
  val->add_flag("--canonical", canonical, "Print the canonical rendering");

  auto* codec_cmd = app.add_subcommand("codec", "Management-channel codec tools");
  codec_cmd->require_subcommand(1);
  std::string type_name = "HELLO", payload_hex, hex;
  unsigned seq = 0;
  std::size_t bit_count = 0;
  auto* enc = codec_cmd->add_subcommand("encode", "Pack a frame");
  enc->add_option("--type", type_name, "Message type name");
  enc->add_option("--seq", seq, "Sequence number 0-15");
  enc->add_option("--payload", payload_hex, "Payload bytes as hex");
  auto* dec = codec_cmd->add_subcommand("decode", "Unpack a frame");
  dec->add_option("hex", hex, "Frame bits as hex")->required();
  dec->add_option("--bits", bit_count, "Number of valid bits");
  double ber = 5e-6;
  std::size_t blocks = 1;
  std::uint64_t mc_bits = 0, mc_seed = 1;
  auto* stats = codec_cmd->add_subcommand("stats", "Loss statistics at a bit error rate");
  stats->add_option("--ber", ber, "Bit error probability");
  stats->add_option("--blocks-per-msg", blocks, "Coded blocks per message");
  stats->add_option("--mc-bits", mc_bits, "Monte-Carlo bits (0 = analytic only)");
  stats->add_option("--seed", mc_seed, "Monte-Carlo seed");

  std::uint64_t first_seed = 1;
  std::size_t seeds = 10;
  auto* rep = app.add_subcommand("sweep-report", "Time-to-lock across seeds");
  rep->add_option("file", file, "Scenario file")->required();
  rep->add_option("--first-seed", first_seed, "First seed");
  rep->add_option("--seeds", seeds, "Number of seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  if (*run) return cmd_run(file, seed, trace_path, metrics_path, json_path);
  if (*val) return cmd_validate(file, canonical);
  if (*enc) return cmd_encode(type_name, seq, payload_hex);
  if (*dec) return cmd_decode(hex, bit_count);
  if (*stats) return cmd_stats(ber, blocks, mc_bits, mc_seed);
  if (*rep) return cmd_sweep_report(file, first_seed, seeds);
  return kInvalid;
}
