#include "gmetro/codec.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "gmetro/error.hpp"

namespace gmetro::codec {

void MgmtChannelConfig::validate() const {
  if (!(bit_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "bit_rate must be positive");
  if (!(spectral_band_low < spectral_band_high))
    throw Error(ErrorCode::InvalidArgument, "spectral band low edge must be below the high edge");
}

std::string_view to_string(MsgType type) {
  switch (type) {
    case MsgType::Hello: return "HELLO";
    case MsgType::TuneReq: return "TUNE_REQ";
    case MsgType::SweepDetected: return "SWEEP_DETECTED";
    case MsgType::LockConfirm: return "LOCK_CONFIRM";
    case MsgType::PowerAdj: return "POWER_ADJ";
    case MsgType::LossReport: return "LOSS_REPORT";
    case MsgType::ChanAssign: return "CHAN_ASSIGN";
    case MsgType::HoldCorrect: return "HOLD_CORRECT";
    case MsgType::Ack: return "ACK";
    case MsgType::Nak: return "NAK";
  }
  return "?";
}

bool is_reliable(MsgType type) {
  switch (type) {
    case MsgType::SweepDetected:
    case MsgType::LockConfirm:
    case MsgType::ChanAssign:
    case MsgType::HoldCorrect:
      return true;
    default:
      return false;
  }
}

// ---- Hamming ----

std::uint16_t hamming_encode(std::uint16_t data) {
  data &= (1u << kDataBits) - 1;
  std::uint8_t parity = 0;
  for (std::size_t j = 0; j < kDataBits; ++j) {
    if ((data >> j) & 1u) parity ^= kHammingColumns[4 + j];
  }
  return static_cast<std::uint16_t>((data << 4) | parity);
}

std::uint8_t hamming_syndrome(std::uint16_t word) {
  std::uint8_t s = 0;
  for (std::size_t i = 0; i < kCodeBits; ++i) {
    if ((word >> i) & 1u) s ^= kHammingColumns[i];
  }
  return s;
}

DecodeResult hamming_decode(std::uint16_t word) {
  word &= (1u << kCodeBits) - 1;
  const std::uint8_t s = hamming_syndrome(word);
  if (s == 0) return {static_cast<std::uint16_t>(word >> 4), DecodeStatus::Ok};
  for (std::size_t i = 0; i < kCodeBits; ++i) {
    if (kHammingColumns[i] == s) {
      word ^= static_cast<std::uint16_t>(1u << i);
      return {static_cast<std::uint16_t>(word >> 4), DecodeStatus::Corrected};
    }
  }
  return {static_cast<std::uint16_t>(word >> 4), DecodeStatus::Uncorrectable};
}

// ---- framing ----

std::uint8_t crc8(std::span<const std::uint8_t> bytes) {
  std::uint8_t crc = 0;
  for (std::uint8_t b : bytes) {
    crc ^= b;
    for (int k = 0; k < 8; ++k) {
      crc = (crc & 0x80) ? static_cast<std::uint8_t>((crc << 1) ^ 0x07) : static_cast<std::uint8_t>(crc << 1);
    }
  }
  return crc;
}

namespace {

void push_bits(BitVector& out, std::uint32_t value, std::size_t width) {
  for (std::size_t i = width; i-- > 0;) out.push_back(static_cast<std::uint8_t>((value >> i) & 1u));
}

std::uint32_t read_bits(std::span<const std::uint8_t> bits, std::size_t at, std::size_t width) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < width; ++i) v = (v << 1) | (bits[at + i] & 1u);
  return v;
}

std::size_t body_blocks(std::size_t payload_len) {
  const std::size_t body = 24 + 8 * payload_len;
  return (body + kDataBits - 1) / kDataBits;
}

}  // namespace

std::size_t packed_bits(std::size_t payload_len) { return kSyncBits + body_blocks(payload_len) * kCodeBits; }

BitVector frame_pack(const MgmtFrame& frame) {
  if (frame.payload.size() > kMaxPayload) {
    throw Error(ErrorCode::PayloadTooLong, "payload of " + std::to_string(frame.payload.size()) + " bytes");
  }
  std::vector<std::uint8_t> bytes;
  bytes.reserve(frame.payload.size() + 3);
  bytes.push_back(static_cast<std::uint8_t>((static_cast<unsigned>(frame.type) << 4) | (frame.seq & 0x0F)));
  bytes.push_back(static_cast<std::uint8_t>(frame.payload.size()));
  bytes.insert(bytes.end(), frame.payload.begin(), frame.payload.end());
  bytes.push_back(crc8(bytes));

  BitVector body;
  for (std::uint8_t b : bytes) push_bits(body, b, 8);
  const std::size_t blocks = body_blocks(frame.payload.size());
  body.resize(blocks * kDataBits, 0);

  BitVector out;
  out.reserve(kSyncBits + blocks * kCodeBits);
  push_bits(out, kSyncWord, kSyncBits);
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto data = static_cast<std::uint16_t>(read_bits(body, b * kDataBits, kDataBits));
    push_bits(out, hamming_encode(data), kCodeBits);
  }
  return out;
}

UnpackResult frame_unpack(std::span<const std::uint8_t> bits) {
  std::size_t sync = bits.size();
  for (std::size_t i = 0; i + kSyncBits <= bits.size(); ++i) {
    if (read_bits(bits, i, kSyncBits) == kSyncWord) {
      sync = i;
      break;
    }
  }
  if (sync == bits.size()) throw Error(ErrorCode::SyncNotFound, "no exact SYNC match");

  UnpackResult result;
  result.sync_offset = sync;
  const std::size_t start = sync + kSyncBits;
  BitVector data;
  auto decode_block = [&](std::size_t index) {
    const std::size_t at = start + index * kCodeBits;
    if (at + kCodeBits > bits.size()) throw Error(ErrorCode::FecFailure, "frame truncated");
    const auto dec = hamming_decode(static_cast<std::uint16_t>(read_bits(bits, at, kCodeBits)));
    ++result.fec.blocks;
    if (dec.status == DecodeStatus::Corrected) ++result.fec.corrected;
    if (dec.status == DecodeStatus::Uncorrectable) {
      ++result.fec.uncorrectable;
      throw Error(ErrorCode::FecFailure, "uncorrectable block " + std::to_string(index));
    }
    push_bits(data, dec.data, kDataBits);
  };

  decode_block(0);
  decode_block(1);
  const std::size_t len = read_bits(data, 8, 8);
  if (len > kMaxPayload) throw Error(ErrorCode::FecFailure, "decoded length " + std::to_string(len));
  const std::size_t blocks = body_blocks(len);
  for (std::size_t b = 2; b < blocks; ++b) decode_block(b);

  const std::size_t body_bits = 24 + 8 * len;
  if (std::any_of(data.begin() + static_cast<std::ptrdiff_t>(body_bits), data.end(), [](auto v) { return v != 0; })) {
    throw Error(ErrorCode::FecFailure, "nonzero block padding");
  }
  std::vector<std::uint8_t> bytes(len + 3);
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<std::uint8_t>(read_bits(data, 8 * i, 8));
  if (crc8(std::span(bytes).first(len + 2)) != bytes.back()) throw Error(ErrorCode::CrcMismatch, "CRC8 check failed");

  const unsigned type = bytes[0] >> 4;
  if (type > static_cast<unsigned>(MsgType::Nak)) throw Error(ErrorCode::FecFailure, "unknown message type");
  result.frame.type = static_cast<MsgType>(type);
  result.frame.seq = bytes[0] & 0x0F;
  result.frame.payload.assign(bytes.begin() + 2, bytes.end() - 1);
  result.bits_consumed = kSyncBits + blocks * kCodeBits;
  return result;
}

// ---- Manchester ----

SymbolStream manchester_encode(std::span<const std::uint8_t> bits) {
  SymbolStream out;
  out.reserve(bits.size() * 2);
  for (std::uint8_t b : bits) {
    if (b & 1u) {
      out.push_back(Symbol::Lo);
      out.push_back(Symbol::Hi);
    } else {
      out.push_back(Symbol::Hi);
      out.push_back(Symbol::Lo);
    }
  }
  return out;
}

BitVector manchester_decode(std::span<const Symbol> symbols) {
  BitVector out;
  out.reserve(symbols.size() / 2);
  std::size_t i = 0;
  for (; i + 1 < symbols.size(); i += 2) {
    if (symbols[i] == symbols[i + 1]) throw Error(ErrorCode::CodingViolation, "no mid-bit transition", i);
    out.push_back(symbols[i] == Symbol::Lo ? 1 : 0);
  }
  if (i < symbols.size()) throw Error(ErrorCode::CodingViolation, "odd symbol count", i);
  return out;
}

// ---- channel model ----

BitVector apply_bit_errors(std::span<const std::uint8_t> bits, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "bit error probability outside [0,1]");
  BitVector out(bits.begin(), bits.end());
  if (p == 0.0) return out;
  for (auto& b : out) {
    if (rng.bernoulli(p)) b ^= 1u;
  }
  return out;
}

SpectralOccupancy spectral_occupancy(std::span<const Symbol> symbols, double baud_rate,
                                     const MgmtChannelConfig& cfg) {
  const std::size_t n = symbols.size();
  if (n < kMinSpectralSymbols) {
    throw Error(ErrorCode::StreamTooShort, std::to_string(n) + " symbols, need " + std::to_string(kMinSpectralSymbols));
  }
  const std::size_t bins = n / 2 + 1;
  std::unique_ptr<double, decltype(&fftw_free)> in(fftw_alloc_real(n), &fftw_free);
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> out(fftw_alloc_complex(bins), &fftw_free);
  for (std::size_t i = 0; i < n; ++i) in.get()[i] = symbols[i] == Symbol::Hi ? 1.0 : -1.0;
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);

  double total = 0.0, ac = 0.0, in_band = 0.0, low = 0.0;
  for (std::size_t k = 0; k < bins; ++k) {
    const double re = out.get()[k][0], im = out.get()[k][1];
    // One-sided spectrum: interior bins stand for both +f and -f.
    const bool edge = (k == 0) || (n % 2 == 0 && k == n / 2);
    const double power = (re * re + im * im) * (edge ? 1.0 : 2.0);
    const double f = static_cast<double>(k) * baud_rate / static_cast<double>(n);
    total += power;
    if (k > 0) ac += power;
    if (k > 0 && f >= cfg.spectral_band_low && f <= cfg.spectral_band_high) in_band += power;
    if (f < 1000.0) low += power;
  }
  SpectralOccupancy occ;
  occ.fraction_in_band = ac > 0.0 ? in_band / ac : 0.0;
  occ.dc_rel_power_db = total > 0.0 && low > 0.0 ? 10.0 * std::log10(low / total)
                                                 : -std::numeric_limits<double>::infinity();
  return occ;
}

double block_loss_probability(double p) {
  // sum_{k>=2} C(15,k) p^k (1-p)^(15-k); summing the tail avoids the
  // cancellation in 1 - P0 - P1 for small p.
  const double q = 1.0 - p;
  double binom = 1.0, sum = 0.0;
  for (int k = 0; k <= 15; ++k) {
    if (k >= 2) sum += binom * std::pow(p, k) * std::pow(q, 15 - k);
    binom = binom * (15 - k) / (k + 1);
  }
  return sum;
}

double expected_message_loss_interval(double p_bit, std::size_t blocks_per_msg, const MgmtChannelConfig& cfg) {
  if (!(p_bit >= 0.0 && p_bit < 1.0)) throw Error(ErrorCode::InvalidArgument, "p_bit must lie in [0,1)");
  if (blocks_per_msg == 0) throw Error(ErrorCode::InvalidArgument, "blocks_per_msg must be >= 1");
  if (p_bit == 0.0) return std::numeric_limits<double>::infinity();
  const double pb = block_loss_probability(p_bit);
  const double b = static_cast<double>(blocks_per_msg);
  const double msg_rate = cfg.bit_rate / (static_cast<double>(kCodeBits) * b);
  // P(message lost) = 1 - (1 - pb)^b
  const double p_msg = -std::expm1(b * std::log1p(-pb));
  const double loss_rate = msg_rate * p_msg;
  return loss_rate > 0.0 ? 1.0 / loss_rate : std::numeric_limits<double>::infinity();
}

MonteCarloLoss simulate_block_losses(double p_bit, std::uint64_t bits, Rng& rng) {
  MonteCarloLoss mc;
  mc.bits = bits;
  mc.blocks = bits / kCodeBits;
  const std::uint64_t limit = mc.blocks * kCodeBits;
  std::uint64_t pos = rng.geometric(p_bit);
  std::uint64_t current_block = std::numeric_limits<std::uint64_t>::max();
  int errors_in_block = 0;
  while (pos < limit) {
    const std::uint64_t block = pos / kCodeBits;
    if (block != current_block) {
      if (errors_in_block >= 2) ++mc.lost_blocks;
      current_block = block;
      errors_in_block = 0;
    }
    ++errors_in_block;
    pos += 1 + rng.geometric(p_bit);
  }
  if (errors_in_block >= 2) ++mc.lost_blocks;
  return mc;
}

// ---- hex helpers ----

std::string bits_to_hex(std::span<const std::uint8_t> bits) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  for (std::size_t i = 0; i < bits.size(); i += 4) {
    unsigned nibble = 0;
    for (std::size_t k = 0; k < 4; ++k) nibble = (nibble << 1) | (i + k < bits.size() ? (bits[i + k] & 1u) : 0u);
    out.push_back(kDigits[nibble]);
  }
  return out;
}

BitVector hex_to_bits(std::string_view hex, std::size_t bit_count) {
  if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
  BitVector out;
  for (char c : hex) {
    unsigned v;
    if (c >= '0' && c <= '9') v = static_cast<unsigned>(c - '0');
    else if (c >= 'a' && c <= 'f') v = static_cast<unsigned>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') v = static_cast<unsigned>(c - 'A' + 10);
    else throw Error(ErrorCode::InvalidArgument, std::string("not a hex digit: ") + c);
    push_bits(out, v, 4);
  }
  if (bit_count != 0) {
    if (bit_count > out.size()) throw Error(ErrorCode::InvalidArgument, "bit count exceeds hex length");
    out.resize(bit_count);
  }
  return out;
}

std::string bits_to_string(std::span<const std::uint8_t> bits) {
  std::string s;
  s.reserve(bits.size());
  for (auto b : bits) s.push_back(b ? '1' : '0');
  return s;
}

}  // namespace gmetro::codec
