#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>

#include "ftnoc/core_model.hpp"

namespace ftnoc {

/// 22-bit SECDED codeword: data in bits [0,16), check bits in [16,22).
using Codeword22 = std::uint32_t;

/// 44-bit packed flit: codeword A in bits [0,22), codeword B in [22,44).
using PackedFlit = std::uint64_t;

inline constexpr int kCodewordBits = 22;
inline constexpr int kCheckBits = 6;
inline constexpr int kFlitBits = 44;
inline constexpr Codeword22 kCodewordMask = (1u << kCodewordBits) - 1;
inline constexpr PackedFlit kFlitMask = (PackedFlit{1} << kFlitBits) - 1;

enum class DecodeStatus : std::uint8_t { Clean = 0, Corrected = 1, DetectedUncorrectable = 2 };

std::string_view to_string(DecodeStatus s);

struct DecodeOutcome {
  DecodeStatus status = DecodeStatus::Clean;
  int bit_index = -1;  // flipped bit when Corrected
  std::uint16_t data = 0;
  Codeword22 corrected = 0;  // codeword after correction (valid unless uncorrectable)

  bool operator==(const DecodeOutcome&) const = default;
};

/// Linear SECDED(22,16) code defined by the 22 columns of its 6x22 parity
/// check matrix. Column i is the syndrome produced by flipping codeword bit i.
class SecdedCode {
 public:
  explicit SecdedCode(const std::array<std::uint8_t, kCodewordBits>& columns);

  /// Canonical Hsiao matrix: data columns are the first 16 weight-3 6-bit
  /// values in ascending order, check columns are the identity.
  static const SecdedCode& hsiao();

  Codeword22 encode(std::uint16_t data) const;
  DecodeOutcome decode(Codeword22 word) const;
  std::uint8_t syndrome(Codeword22 word) const;

  const std::array<std::uint8_t, kCodewordBits>& columns() const { return columns_; }

  /// Distinct, nonzero, odd-weight columns with identity check columns.
  bool structurally_valid() const;

  /// 6 rows x 22 columns of '0'/'1', row r = bit r of every column.
  void print_matrix(std::ostream& os) const;

 private:
  std::array<std::uint8_t, kCodewordBits> columns_;
  std::array<std::int8_t, 64> column_of_syndrome_;
};

Codeword22 secded_encode(std::uint16_t data);
DecodeOutcome secded_decode(Codeword22 w);

/// Header field layout inside codeword A's data bits.
struct HeaderLayout {
  static constexpr int kKindShift = 0;       // 2 bits
  static constexpr int kNextPortShift = 2;   // 3 bits
  static constexpr int kDestShift = 5;       // 3 bits per axis, x then y then z
  static constexpr int kPayloadLoShift = 14; // payload[0..2)
};

/// Packs a flit. With `ecc` the check bits are SECDED parity; without, they
/// carry payload_ext.
PackedFlit flit_pack(const Flit& f, bool ecc = true);

struct UnpackResult {
  Flit flit;
  DecodeStatus status = DecodeStatus::Clean;  // worse of the two codewords
  std::array<DecodeOutcome, 2> halves{};
  PackedFlit corrected = 0;  // word after single-bit corrections
};

UnpackResult flit_unpack(PackedFlit p, bool ecc = true, FlitTag tag = {});

/// Rewrites the next_port field in place. With `ecc` the check bits are
/// patched linearly, so any pre-existing error syndrome is preserved.
PackedFlit merge_next_port(PackedFlit p, Direction old_port, Direction new_port, bool ecc = true);

inline Codeword22 codeword_a(PackedFlit p) { return static_cast<Codeword22>(p & kCodewordMask); }
inline Codeword22 codeword_b(PackedFlit p) {
  return static_cast<Codeword22>((p >> kCodewordBits) & kCodewordMask);
}

}  // namespace ftnoc
