#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "gmetro/codec.hpp"
#include "gmetro/error.hpp"
#include "gmetro/rng.hpp"

using namespace gmetro;
using namespace gmetro::codec;

namespace {

// Parity-check columns written out by hand: weight-1 for parity bits,
// then the weight>=2 nibbles in ascending order for the data bits.
constexpr std::uint8_t kColumns[15] = {0b0001, 0b0010, 0b0100, 0b1000, 0b0011, 0b0101, 0b0110, 0b0111,
                                        0b1001, 0b1010, 0b1011, 0b1100, 0b1101, 0b1110, 0b1111};

// Generator oracle over GF(2): systematic data in bits 4..14, parity bit i
// is the XOR of data bits whose column has bit i set.
std::uint16_t oracle_encode(std::uint16_t data) {
  std::uint16_t word = static_cast<std::uint16_t>((data & 0x7FF) << 4);
  for (int i = 0; i < 4; ++i) {
    unsigned parity = 0;
    for (int k = 0; k < 11; ++k) {
      if (((data >> k) & 1) && ((kColumns[4 + k] >> i) & 1)) parity ^= 1;
    }
    word |= static_cast<std::uint16_t>(parity << i);
  }
  return word;
}

std::uint8_t oracle_syndrome(std::uint16_t word) {
  std::uint8_t s = 0;
  for (int b = 0; b < 15; ++b)
    if ((word >> b) & 1) s ^= kColumns[b];
  return s;
}

std::uint8_t crc8_reference(const std::vector<std::uint8_t>& bytes) {
  // Straight polynomial long division, MSB first, x^8 + x^2 + x + 1.
  std::uint32_t reg = 0;
  std::vector<int> bits;
  for (auto b : bytes)
    for (int i = 7; i >= 0; --i) bits.push_back((b >> i) & 1);
  for (int i = 0; i < 8; ++i) bits.push_back(0);
  for (int bit : bits) {
    reg = (reg << 1) | static_cast<std::uint32_t>(bit);
    if (reg & 0x100) reg ^= 0x107;
  }
  return static_cast<std::uint8_t>(reg);
}

BitVector random_bits(std::size_t n, Rng& rng) {
  BitVector v(n);
  for (auto& b : v) b = static_cast<std::uint8_t>(rng.next() & 1);
  return v;
}

MgmtFrame random_frame(Rng& rng) {
  MgmtFrame f;
  f.type = static_cast<MsgType>(rng.next() % 10);
  f.seq = static_cast<std::uint8_t>(rng.next() % 16);
  f.payload.resize(rng.next() % (kMaxPayload + 1));
  for (auto& b : f.payload) b = static_cast<std::uint8_t>(rng.next());
  return f;
}

}  // namespace

TEST_CASE("hamming: zero dataword gives zero codeword") { CHECK(hamming_encode(0) == 0); }

TEST_CASE("hamming: all-ones dataword matches the generator oracle") {
  CHECK(hamming_encode(0x7FF) == oracle_encode(0x7FF));
  CHECK(oracle_syndrome(hamming_encode(0x7FF)) == 0);
}

TEST_CASE("hamming: every dataword matches the oracle and has zero syndrome") {
  for (std::uint16_t d = 0; d < 2048; ++d) {
    const auto w = hamming_encode(d);
    REQUIRE(w == oracle_encode(d));
    REQUIRE(hamming_syndrome(w) == 0);
    const auto r = hamming_decode(w);
    REQUIRE(r.data == d);
    REQUIRE(r.status == DecodeStatus::Ok);
  }
}

TEST_CASE("hamming: exhaustive single flips decode CORRECTED") {
  for (std::uint16_t d = 0; d < 2048; ++d) {
    const auto w = hamming_encode(d);
    for (int b = 0; b < 15; ++b) {
      const auto r = hamming_decode(static_cast<std::uint16_t>(w ^ (1u << b)));
      REQUIRE(r.data == d);
      REQUIRE(r.status == DecodeStatus::Corrected);
      REQUIRE(hamming_syndrome(static_cast<std::uint16_t>(w ^ (1u << b))) == kColumns[b]);
    }
  }
}

TEST_CASE("hamming: double flips never decode to the original") {
  Rng rng(11);
  for (int n = 0; n < 100; ++n) {
    const auto d = static_cast<std::uint16_t>(rng.next() & 0x7FF);
    const auto w = hamming_encode(d);
    for (int a = 0; a < 15; ++a)
      for (int b = a + 1; b < 15; ++b) {
        const auto r = hamming_decode(static_cast<std::uint16_t>(w ^ (1u << a) ^ (1u << b)));
        REQUIRE(r.data != d);
      }
  }
}

TEST_CASE("crc8 matches polynomial division") {
  const std::vector<std::uint8_t> check = {'1', '2', '3', '4', '5', '6', '7', '8', '9'};
  CHECK(crc8(check) == 0xF4);
  Rng rng(3);
  for (int n = 0; n < 200; ++n) {
    std::vector<std::uint8_t> v(rng.next() % 20);
    for (auto& b : v) b = static_cast<std::uint8_t>(rng.next());
    REQUIRE(crc8(v) == crc8_reference(v));
  }
}

TEST_CASE("frame_pack: empty HELLO is 61 bits") {
  MgmtFrame f;
  const auto bits = frame_pack(f);
  CHECK(bits.size() == 16 + 3 * 15);
  CHECK(packed_bits(0) == 61);
  // Sync word on the wire, MSB first.
  std::uint32_t sync = 0;
  for (int i = 0; i < 16; ++i) sync = (sync << 1) | bits[i];
  CHECK(sync == 0x2B7E);
}

TEST_CASE("frame_pack: block count follows ceil(8(len+3)/11)") {
  for (std::size_t len = 0; len <= kMaxPayload; ++len) {
    const std::size_t blocks = (8 * (len + 3) + 10) / 11;
    CHECK(packed_bits(len) == 16 + 15 * blocks);
    MgmtFrame f;
    f.payload.assign(len, 0xA5);
    CHECK(frame_pack(f).size() == packed_bits(len));
  }
}

TEST_CASE("frame_pack: 17-byte payload rejected") {
  MgmtFrame f;
  f.payload.assign(17, 0);
  try {
    frame_pack(f);
    FAIL("expected PayloadTooLong");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PayloadTooLong);
  }
}

TEST_CASE("frame round trip for random frames") {
  Rng rng(21);
  for (int n = 0; n < 500; ++n) {
    const auto f = random_frame(rng);
    const auto r = frame_unpack(frame_pack(f));
    REQUIRE(r.frame == f);
    REQUIRE(r.fec.corrected == 0);
  }
}

TEST_CASE("frame_unpack: one error per block is corrected") {
  Rng rng(5);
  for (int n = 0; n < 200; ++n) {
    const auto f = random_frame(rng);
    auto bits = frame_pack(f);
    const std::size_t blocks = (bits.size() - 16) / 15;
    for (std::size_t b = 0; b < blocks; ++b) bits[16 + b * 15 + rng.next() % 15] ^= 1;
    const auto r = frame_unpack(bits);
    REQUIRE(r.frame == f);
    REQUIRE(r.fec.corrected == blocks);
  }
}

TEST_CASE("frame_unpack: any single error in any block never loses the frame") {
  MgmtFrame f;
  f.type = MsgType::HoldCorrect;
  f.seq = 9;
  f.payload = {0xFF, 0xEC};
  const auto clean = frame_pack(f);
  for (std::size_t i = 16; i < clean.size(); ++i) {
    auto bits = clean;
    bits[i] ^= 1;
    REQUIRE(frame_unpack(bits).frame == f);
  }
}

TEST_CASE("frame_unpack: two errors in one block fail FEC or CRC") {
  MgmtFrame f;
  f.type = MsgType::ChanAssign;
  f.payload = {7};
  const auto clean = frame_pack(f);
  const std::size_t blocks = (clean.size() - 16) / 15;
  for (std::size_t blk = 0; blk < blocks; ++blk)
    for (int a = 0; a < 15; ++a)
      for (int b = a + 1; b < 15; ++b) {
        auto bits = clean;
        bits[16 + blk * 15 + a] ^= 1;
        bits[16 + blk * 15 + b] ^= 1;
        try {
          const auto r = frame_unpack(bits);
          // A miscorrection that still passes CRC would have to reproduce f.
          REQUIRE(!(r.frame == f));
          FAIL("accepted a corrupted frame");
        } catch (const Error& e) {
          REQUIRE((e.code() == ErrorCode::FecFailure || e.code() == ErrorCode::CrcMismatch ||
                   e.code() == ErrorCode::SyncNotFound));
        }
      }
}

TEST_CASE("frame_unpack: missing sync") {
  BitVector bits(80, 0);
  CHECK_THROWS_AS(frame_unpack(bits), Error);
  try {
    frame_unpack(bits);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SyncNotFound);
  }
}

TEST_CASE("manchester: conventions") {
  CHECK(manchester_encode(BitVector{}).empty());
  CHECK(manchester_encode(BitVector{1}) == SymbolStream{Symbol::Lo, Symbol::Hi});
  CHECK(manchester_encode(BitVector{0}) == SymbolStream{Symbol::Hi, Symbol::Lo});
  CHECK(manchester_decode(SymbolStream{Symbol::Lo, Symbol::Hi, Symbol::Hi, Symbol::Lo}) == BitVector{1, 0});
}

TEST_CASE("manchester: coding violations carry the symbol index") {
  try {
    manchester_decode(SymbolStream{Symbol::Hi, Symbol::Hi});
    FAIL("expected violation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CodingViolation);
    CHECK(e.position() == 0u);
  }
  try {
    manchester_decode(SymbolStream{Symbol::Lo, Symbol::Hi, Symbol::Lo});
    FAIL("expected violation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CodingViolation);
    CHECK(e.position() == 2u);
  }
}

TEST_CASE("manchester: balanced symbols and round trip") {
  Rng rng(8);
  for (int n = 0; n < 100; ++n) {
    const auto bits = random_bits(rng.next() % 300, rng);
    const auto s = manchester_encode(bits);
    REQUIRE(s.size() == 2 * bits.size());
    REQUIRE(std::count(s.begin(), s.end(), Symbol::Hi) == static_cast<long>(bits.size()));
    REQUIRE(manchester_decode(s) == bits);
  }
}

TEST_CASE("bit errors: p=0 and p=1") {
  Rng rng(1);
  const auto bits = random_bits(1000, rng);
  CHECK(apply_bit_errors(bits, 0.0, rng) == bits);
  const auto flipped = apply_bit_errors(bits, 1.0, rng);
  for (std::size_t i = 0; i < bits.size(); ++i) REQUIRE(flipped[i] == (bits[i] ^ 1));
}

TEST_CASE("bit errors: binomial count at p=0.01") {
  Rng rng(2);
  const BitVector zeros(1'000'000, 0);
  const auto out = apply_bit_errors(zeros, 0.01, rng);
  const double flips = static_cast<double>(std::count(out.begin(), out.end(), 1));
  const double sigma = std::sqrt(1e6 * 0.01 * 0.99);
  CHECK(std::abs(flips - 1e4) <= 5 * sigma);
}

TEST_CASE("bit errors: same seed gives the same stream") {
  Rng a(77), b(77), src(4);
  const auto bits = random_bits(5000, src);
  CHECK(apply_bit_errors(bits, 0.05, a) == apply_bit_errors(bits, 0.05, b));
}

TEST_CASE("spectral occupancy of Manchester traffic") {
  Rng rng(9);
  const auto s = manchester_encode(random_bits(1u << 15, rng));
  const auto occ = spectral_occupancy(s, 100'000.0);
  CHECK(occ.fraction_in_band >= 0.95);
  CHECK(occ.dc_rel_power_db <= -30.0);
}

TEST_CASE("spectral occupancy: alternating bits form a 25 kHz tone") {
  BitVector bits(1u << 13);
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = static_cast<std::uint8_t>((i + 1) % 2);
  const auto occ = spectral_occupancy(manchester_encode(bits), 100'000.0);
  CHECK(occ.fraction_in_band >= 0.99);
}

TEST_CASE("spectral occupancy: constant stream sits at DC") {
  const SymbolStream hi(1u << 13, Symbol::Hi);
  CHECK(spectral_occupancy(hi, 100'000.0).fraction_in_band <= 0.01);
  CHECK_THROWS_AS(spectral_occupancy(SymbolStream(100, Symbol::Hi), 100'000.0), Error);
}

TEST_CASE("message loss interval at 5e-6") {
  // Oracle: P(>=2 errors in 15) from the binomial tail; one 15-bit block
  // every 15/50000 s.
  const double p = 5e-6;
  const double p0 = std::pow(1 - p, 15), p1 = 15 * p * std::pow(1 - p, 14);
  const double p_block = 1 - p0 - p1;
  CHECK(block_loss_probability(p) == doctest::Approx(p_block).epsilon(1e-6));
  const double interval = (15.0 / 50'000.0) / p_block;
  CHECK(expected_message_loss_interval(p, 1) == doctest::Approx(interval).epsilon(1e-6));
  CHECK(interval == doctest::Approx(1.14e5).epsilon(0.01));
  CHECK(interval / 3600 == doctest::Approx(31.7).epsilon(0.01));
}

TEST_CASE("message loss interval decreases with p") {
  double prev = expected_message_loss_interval(1e-9, 1);
  for (double p : {1e-8, 1e-7, 1e-6, 1e-5, 1e-4}) {
    const double v = expected_message_loss_interval(p, 1);
    REQUIRE(v < prev);
    prev = v;
  }
  CHECK(std::isinf(expected_message_loss_interval(0.0, 1)));
}

TEST_CASE("Monte-Carlo block loss agrees with the analytic value") {
  struct Case {
    double p;
    std::uint64_t bits;
  };
  // Bit counts sized for several hundred lost blocks.
  for (const Case c : {Case{1e-5, 1'000'000'000'000ULL}, Case{5e-6, 4'000'000'000'000ULL},
                       Case{1e-6, 100'000'000'000'000ULL}}) {
    Rng rng(static_cast<std::uint64_t>(1 / c.p));
    const auto mc = simulate_block_losses(c.p, c.bits, rng);
    CHECK(mc.block_loss_rate() == doctest::Approx(block_loss_probability(c.p)).epsilon(0.10));
  }
}

TEST_CASE("hex helpers round trip") {
  Rng rng(12);
  const auto bits = random_bits(61, rng);
  CHECK(hex_to_bits(bits_to_hex(bits), 61) == bits);
}
