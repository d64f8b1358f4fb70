#pragma once

// Management channel codec: framing, Hamming(15,11) FEC, Manchester line
// coding, bit-error injection and the statistics used to size the channel.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gmetro/rng.hpp"

namespace gmetro::codec {

/// One bit per element, values 0 or 1, transmission order.
using BitVector = std::vector<std::uint8_t>;

enum class Symbol : std::uint8_t { Lo = 0, Hi = 1 };
using SymbolStream = std::vector<Symbol>;

struct MgmtChannelConfig {
  double bit_rate = 50'000.0;
  double spectral_band_low = 10'000.0;
  double spectral_band_high = 90'000.0;
  double rx_sensitivity_dbm = -40.0;
  double data_rx_sensitivity_dbm = -30.0;

  double baud_rate() const { return 2.0 * bit_rate; }
  /// Throws InvalidArgument on a non-positive rate or an empty band.
  void validate() const;

  bool operator==(const MgmtChannelConfig&) const = default;
};

enum class MsgType : std::uint8_t {
  Hello = 0,
  TuneReq = 1,
  SweepDetected = 2,
  LockConfirm = 3,
  PowerAdj = 4,
  LossReport = 5,
  ChanAssign = 6,
  HoldCorrect = 7,
  Ack = 8,
  Nak = 9,
};

std::string_view to_string(MsgType type);
/// True for message types that are delivered under ACK/retransmission.
bool is_reliable(MsgType type);

inline constexpr std::size_t kMaxPayload = 16;
inline constexpr std::uint16_t kSyncWord = 0x2B7E;
inline constexpr std::size_t kSyncBits = 16;

struct MgmtFrame {
  MsgType type = MsgType::Hello;
  std::uint8_t seq = 0;  // 0..15
  std::vector<std::uint8_t> payload;

  bool operator==(const MgmtFrame&) const = default;
};

// ---- Hamming(15,11) ----
//
// A codeword is held in the low 15 bits of a uint16: bits 14..4 carry the
// 11 data bits (data bit 10 in bit 14), bits 3..0 the parity. The
// parity-check matrix has the column `kHammingColumns[i]` for codeword bit i:
// parity bit i has column 1<<i, the data bits take the eleven 4-bit values of
// weight >= 2 in ascending order. Codewords go on the wire MSB first.

inline constexpr std::size_t kDataBits = 11;
inline constexpr std::size_t kCodeBits = 15;
inline constexpr std::array<std::uint8_t, kCodeBits> kHammingColumns = {
    1, 2, 4, 8, 3, 5, 6, 7, 9, 10, 11, 12, 13, 14, 15};

enum class DecodeStatus { Ok, Corrected, Uncorrectable };

struct DecodeResult {
  std::uint16_t data = 0;
  DecodeStatus status = DecodeStatus::Ok;
};

std::uint16_t hamming_encode(std::uint16_t data);
std::uint8_t hamming_syndrome(std::uint16_t word);
/// Plain single-error correction. Every nonzero syndrome of a (15,11) code
/// names a column, so Uncorrectable is never produced for 15-bit inputs;
/// two or more errors miscorrect and are caught by the frame CRC.
DecodeResult hamming_decode(std::uint16_t word);

// ---- framing ----

std::uint8_t crc8(std::span<const std::uint8_t> bytes);

struct FecStats {
  std::size_t blocks = 0;
  std::size_t corrected = 0;
  std::size_t uncorrectable = 0;
};

struct UnpackResult {
  MgmtFrame frame;
  FecStats fec;
  std::size_t sync_offset = 0;
  std::size_t bits_consumed = 0;
};

/// SYNC(16) ‖ Hamming-coded [TYPE(4) SEQ(4) LEN(8) PAYLOAD CRC8], body padded
/// with zeros to whole 11-bit blocks.
BitVector frame_pack(const MgmtFrame& frame);
/// Bit length of the packed frame for a payload of `payload_len` bytes.
std::size_t packed_bits(std::size_t payload_len);
/// Scans for the first exact SYNC match, then decodes. Throws SyncNotFound,
/// FecFailure or CrcMismatch.
UnpackResult frame_unpack(std::span<const std::uint8_t> bits);

// ---- Manchester (IEEE 802.3 polarity: 1 = low-to-high) ----

SymbolStream manchester_encode(std::span<const std::uint8_t> bits);
/// Throws CodingViolation with the symbol index of the offending pair.
BitVector manchester_decode(std::span<const Symbol> symbols);

// ---- channel model ----

BitVector apply_bit_errors(std::span<const std::uint8_t> bits, double p, Rng& rng);

struct SpectralOccupancy {
  double fraction_in_band = 0.0;
  double dc_rel_power_db = 0.0;
};

inline constexpr std::size_t kMinSpectralSymbols = 1u << 12;

/// Rectangular-window periodogram of the ±1 symbol sequence sampled once per
/// symbol. Throws StreamTooShort below kMinSpectralSymbols.
SpectralOccupancy spectral_occupancy(std::span<const Symbol> symbols, double baud_rate,
                                     const MgmtChannelConfig& cfg = {});

/// Probability that a 15-bit block carries two or more errors.
double block_loss_probability(double p_bit);

/// Mean time in seconds between lost messages for continuous transmission of
/// messages of `blocks_per_msg` coded blocks each. Infinite at p_bit = 0.
double expected_message_loss_interval(double p_bit, std::size_t blocks_per_msg,
                                      const MgmtChannelConfig& cfg = {});

struct MonteCarloLoss {
  std::uint64_t bits = 0;
  std::uint64_t blocks = 0;
  std::uint64_t lost_blocks = 0;
  double block_loss_rate() const { return blocks ? double(lost_blocks) / double(blocks) : 0.0; }
};

/// Samples error positions over `bits` transmitted bits by geometric gap
/// skipping and counts 15-bit blocks with >= 2 errors.
MonteCarloLoss simulate_block_losses(double p_bit, std::uint64_t bits, Rng& rng);

// ---- hex helpers for the debug CLI ----

std::string bits_to_hex(std::span<const std::uint8_t> bits);
/// Parses hex into bits; `bit_count` trims trailing pad bits when given.
BitVector hex_to_bits(std::string_view hex, std::size_t bit_count = 0);
std::string bits_to_string(std::span<const std::uint8_t> bits);

}  // namespace gmetro::codec
