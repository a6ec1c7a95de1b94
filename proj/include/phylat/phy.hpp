#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "phylat/time.hpp"

namespace phylat {

enum class Modulation : std::uint8_t { BPSK = 0, QPSK = 1, QAM16 = 2, QAM64 = 3 };

inline constexpr std::array<Modulation, 4> kAllModulations = {Modulation::BPSK, Modulation::QPSK,
                                                              Modulation::QAM16, Modulation::QAM64};

inline std::uint32_t bits_per_symbol(Modulation m) {
  switch (m) {
    case Modulation::BPSK: return 1;
    case Modulation::QPSK: return 2;
    case Modulation::QAM16: return 4;
    case Modulation::QAM64: return 6;
  }
  throw std::invalid_argument("unknown modulation");
}

inline const char* to_string(Modulation m) {
  switch (m) {
    case Modulation::BPSK: return "BPSK";
    case Modulation::QPSK: return "QPSK";
    case Modulation::QAM16: return "16QAM";
    case Modulation::QAM64: return "64QAM";
  }
  return "?";
}

/// The four LDPC code rates of the single-carrier PHY, in increasing order.
enum class RateIndex : std::uint8_t { R1_2 = 0, R5_8 = 1, R3_4 = 2, R13_16 = 3 };

inline constexpr std::array<RateIndex, 4> kAllRates = {RateIndex::R1_2, RateIndex::R5_8,
                                                       RateIndex::R3_4, RateIndex::R13_16};

inline Ratio code_rate(RateIndex r) {
  switch (r) {
    case RateIndex::R1_2: return Ratio{1, 2};
    case RateIndex::R5_8: return Ratio{5, 8};
    case RateIndex::R3_4: return Ratio{3, 4};
    case RateIndex::R13_16: return Ratio{13, 16};
  }
  throw std::invalid_argument("unknown code rate");
}

/// Decimal spelling used in configs and plot tables ("0.5" .. "0.8125").
inline const char* rate_string(RateIndex r) {
  switch (r) {
    case RateIndex::R1_2: return "0.5";
    case RateIndex::R5_8: return "0.625";
    case RateIndex::R3_4: return "0.75";
    case RateIndex::R13_16: return "0.8125";
  }
  return "?";
}

inline RateIndex rate_from_string(const std::string& s) {
  for (RateIndex r : kAllRates)
    if (s == rate_string(r)) return r;
  throw std::invalid_argument("unknown code rate '" + s + "' (expected 0.5, 0.625, 0.75 or 0.8125)");
}

/// Modulation and coding scheme. Labels follow the "m.r" convention: m indexes
/// the modulation (0=BPSK .. 3=64QAM) and r the code rate (0=1/2 .. 3=13/16),
/// so "2.0" is 16QAM at rate 1/2 and "3.3" is 64QAM at rate 13/16.
struct Mcs {
  Modulation modulation = Modulation::BPSK;
  RateIndex rate = RateIndex::R1_2;

  std::string label() const {
    return std::to_string(static_cast<int>(modulation)) + "." +
           std::to_string(static_cast<int>(rate));
  }
  Ratio rate_ratio() const { return code_rate(rate); }
  std::uint32_t bps() const { return bits_per_symbol(modulation); }

  bool operator==(const Mcs&) const = default;
};

inline Mcs mcs_from_label(const std::string& label) {
  if (label.size() != 3 || label[1] != '.' || label[0] < '0' || label[0] > '3' || label[2] < '0' ||
      label[2] > '3')
    throw std::invalid_argument("bad MCS label '" + label + "' (expected m.r with m,r in 0..3)");
  return Mcs{static_cast<Modulation>(label[0] - '0'), static_cast<RateIndex>(label[2] - '0')};
}

inline std::vector<Mcs> all_mcs() {
  std::vector<Mcs> v;
  for (Modulation m : kAllModulations)
    for (RateIndex r : kAllRates) v.push_back(Mcs{m, r});
  return v;
}

inline constexpr std::uint32_t kCodewordBits = 672;

/// Channel constants and frame-field durations. The preamble and header
/// defaults come from the single-carrier frame's 3328- and 1024-chip fields at
/// the 1.76 GHz chip rate; set them to zero to isolate payload latency.
struct PhyConstants {
  std::uint64_t symbol_rate_hz = 1'760'000'000;
  std::uint32_t max_payload_bytes = 262'143;
  SimTime preamble_duration = SimTime::ps(1'891'000);
  SimTime header_duration = SimTime::ps(582'000);
  Ratio efficiency{1, 1};
  /// Exact data-rate pins per MCS label, overriding the product formula. The
  /// shipped table pins 64QAM + 13/16 to its headline 8.085 Gbps.
  std::map<std::string, std::uint64_t> rate_overrides_bps = {{"3.3", 8'085'000'000ULL}};

  bool operator==(const PhyConstants&) const = default;
};

inline PhyConstants default_phy_constants() { return PhyConstants{}; }

/// Net data rate in bits per second, exact. Product formula
/// symbol_rate * bits_per_symbol * code_rate * efficiency, unless the rate
/// table pins this MCS to an exact value.
inline Ratio data_rate_bps(const Mcs& mcs, const PhyConstants& c) {
  auto it = c.rate_overrides_bps.find(mcs.label());
  if (it != c.rate_overrides_bps.end()) return Ratio{it->second, 1};
  return Ratio{c.symbol_rate_hz * mcs.bps(), 1}.times(mcs.rate_ratio()).times(c.efficiency);
}

/// Rate at which coded bits leave the transmitter: data rate divided by the
/// code rate. Chunk pacing on the air derives from this.
inline Ratio coded_bit_rate_bps(const Mcs& mcs, const PhyConstants& c) {
  Ratio r = data_rate_bps(mcs, c);
  return Ratio{r.num * mcs.rate_ratio().den, r.den * mcs.rate_ratio().num};
}

inline std::uint32_t data_bits_per_codeword(RateIndex r) {
  Ratio cr = code_rate(r);
  return static_cast<std::uint32_t>(kCodewordBits * cr.num / cr.den);  // 336/420/504/546
}

inline void check_payload(std::uint64_t payload_bytes, const PhyConstants& c) {
  if (payload_bytes < 1 || payload_bytes > c.max_payload_bytes)
    throw std::out_of_range("payload of " + std::to_string(payload_bytes) +
                            " bytes out of range [1, " + std::to_string(c.max_payload_bytes) +
                            "]");
}

inline std::uint32_t codewords_for(std::uint64_t payload_bytes, const Mcs& mcs,
                                   const PhyConstants& c) {
  check_payload(payload_bytes, c);
  std::uint64_t bits = payload_bytes * 8;
  std::uint32_t per_cw = data_bits_per_codeword(mcs.rate);
  return static_cast<std::uint32_t>((bits + per_cw - 1) / per_cw);
}

/// A payload, its MCS and the derived codeword arithmetic.
struct FrameSpec {
  std::uint64_t payload_bytes = 0;
  Mcs mcs;
  std::uint32_t n_codewords = 0;

  std::uint64_t payload_bits() const { return payload_bytes * 8; }
  std::uint32_t data_bits_per_cw() const { return data_bits_per_codeword(mcs.rate); }
  std::uint32_t symbols_per_codeword() const { return kCodewordBits / mcs.bps(); }
};

inline FrameSpec make_frame(std::uint64_t payload_bytes, const Mcs& mcs, const PhyConstants& c) {
  return FrameSpec{payload_bytes, mcs, codewords_for(payload_bytes, mcs, c)};
}

enum class ChunkRole : std::uint8_t { Preamble, Header, Payload };

inline const char* to_string(ChunkRole r) {
  switch (r) {
    case ChunkRole::Preamble: return "preamble";
    case ChunkRole::Header: return "header";
    case ChunkRole::Payload: return "payload";
  }
  return "?";
}

/// One entry of the TX emission schedule: `at` is the instant the chunk's last
/// symbol leaves the transmitter. `units` is the chunk size in symbols.
struct TxEmission {
  SimTime at;
  ChunkRole role = ChunkRole::Payload;
  std::uint64_t units = 0;
  std::uint32_t codeword_index = 0;  // 1-based, payload chunks only
};

/// Emission schedule for a frame at the transmitter's finite rate: preamble,
/// header, then one chunk per codeword. Payload chunk k completes at
/// preamble + header + k * (672 coded bits / coded-bit rate), each product
/// rounded to ticks once so chunk spacing carries no cumulative error.
inline std::vector<TxEmission> serialize_schedule(const FrameSpec& frame, const PhyConstants& c) {
  std::vector<TxEmission> out;
  out.reserve(frame.n_codewords + 2);

  auto symbols_in = [&](SimTime d) {
    std::uint64_t n = muldiv_round_half_up(d.ticks(), c.symbol_rate_hz, kPicosPerSecond);
    return n > 0 ? n : 1;  // keep at least one symbol so estimation stages fire
  };
  SimTime pre = c.preamble_duration;
  SimTime hdr = pre + c.header_duration;
  out.push_back(TxEmission{pre, ChunkRole::Preamble, symbols_in(c.preamble_duration), 0});
  out.push_back(TxEmission{hdr, ChunkRole::Header, symbols_in(c.header_duration), 0});

  Ratio cbr = coded_bit_rate_bps(frame.mcs, c);
  std::uint64_t chunk_symbols = frame.symbols_per_codeword();
  for (std::uint32_t k = 1; k <= frame.n_codewords; ++k) {
    std::uint64_t bits = static_cast<std::uint64_t>(k) * kCodewordBits;
    SimTime at = hdr + ticks_for(bits, cbr);
    out.push_back(TxEmission{at, ChunkRole::Payload, chunk_symbols, k});
  }
  return out;
}

}  // namespace phylat
