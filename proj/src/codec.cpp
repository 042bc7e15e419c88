#include "ftnoc/codec.hpp"

#include <algorithm>
#include <bit>
#include <ostream>
#include <set>
#include <stdexcept>

namespace ftnoc {

std::string_view to_string(DecodeStatus s) {
  switch (s) {
    case DecodeStatus::Clean: return "clean";
    case DecodeStatus::Corrected: return "corrected";
    case DecodeStatus::DetectedUncorrectable: return "uncorrectable";
  }
  return "?";
}

namespace {

std::array<std::uint8_t, kCodewordBits> hsiao_columns() {
  std::array<std::uint8_t, kCodewordBits> cols{};
  int n = 0;
  for (unsigned v = 0; v < 64 && n < 16; ++v) {
    if (std::popcount(v) == 3) cols[n++] = static_cast<std::uint8_t>(v);
  }
  for (int j = 0; j < kCheckBits; ++j) cols[16 + j] = static_cast<std::uint8_t>(1u << j);
  return cols;
}

}  // namespace

SecdedCode::SecdedCode(const std::array<std::uint8_t, kCodewordBits>& columns)
    : columns_(columns) {
  column_of_syndrome_.fill(-1);
  for (int i = 0; i < kCodewordBits; ++i) {
    auto c = columns_[i] & 0x3F;
    // First column wins on duplicates; structurally_valid() reports those.
    if (column_of_syndrome_[c] < 0) column_of_syndrome_[c] = static_cast<std::int8_t>(i);
  }
}

const SecdedCode& SecdedCode::hsiao() {
  static const SecdedCode code(hsiao_columns());
  return code;
}

std::uint8_t SecdedCode::syndrome(Codeword22 word) const {
  std::uint8_t s = 0;
  word &= kCodewordMask;
  while (word) {
    int i = std::countr_zero(word);
    s ^= columns_[i];
    word &= word - 1;
  }
  return s & 0x3F;
}

Codeword22 SecdedCode::encode(std::uint16_t data) const {
  std::uint8_t check = 0;
  for (int i = 0; i < 16; ++i) {
    if ((data >> i) & 1u) check ^= columns_[i];
  }
  // With identity check columns the syndrome of data|check<<16 is zero.
  return static_cast<Codeword22>(data) | (static_cast<Codeword22>(check & 0x3F) << 16);
}

DecodeOutcome SecdedCode::decode(Codeword22 word) const {
  word &= kCodewordMask;
  DecodeOutcome out;
  auto s = syndrome(word);
  if (s == 0) {
    out.status = DecodeStatus::Clean;
    out.corrected = word;
    out.data = static_cast<std::uint16_t>(word & 0xFFFF);
    return out;
  }
  int bit = column_of_syndrome_[s];
  if (bit >= 0) {
    out.status = DecodeStatus::Corrected;
    out.bit_index = bit;
    out.corrected = word ^ (Codeword22{1} << bit);
    out.data = static_cast<std::uint16_t>(out.corrected & 0xFFFF);
    return out;
  }
  out.status = DecodeStatus::DetectedUncorrectable;
  out.corrected = word;
  out.data = static_cast<std::uint16_t>(word & 0xFFFF);
  return out;
}

bool SecdedCode::structurally_valid() const {
  std::set<std::uint8_t> seen;
  for (int i = 0; i < kCodewordBits; ++i) {
    auto c = columns_[i];
    if (c == 0 || c > 0x3F) return false;
    if (std::popcount(static_cast<unsigned>(c)) % 2 == 0) return false;
    if (!seen.insert(c).second) return false;
  }
  for (int j = 0; j < kCheckBits; ++j) {
    if (columns_[16 + j] != (1u << j)) return false;
  }
  return true;
}

void SecdedCode::print_matrix(std::ostream& os) const {
  for (int r = 0; r < kCheckBits; ++r) {
    for (int i = 0; i < kCodewordBits; ++i) {
      if (i) os << ' ';
      os << ((columns_[i] >> r) & 1u);
    }
    os << '\n';
  }
}

Codeword22 secded_encode(std::uint16_t data) { return SecdedCode::hsiao().encode(data); }
DecodeOutcome secded_decode(Codeword22 w) { return SecdedCode::hsiao().decode(w); }

namespace {

std::uint16_t data_a(const Flit& f) {
  using L = HeaderLayout;
  std::uint32_t v = 0;
  v |= (static_cast<std::uint32_t>(f.kind) & 0x3u) << L::kKindShift;
  v |= (static_cast<std::uint32_t>(f.next_port) & 0x7u) << L::kNextPortShift;
  v |= (static_cast<std::uint32_t>(f.destination.x) & 0x7u) << L::kDestShift;
  v |= (static_cast<std::uint32_t>(f.destination.y) & 0x7u) << (L::kDestShift + 3);
  v |= (static_cast<std::uint32_t>(f.destination.z) & 0x7u) << (L::kDestShift + 6);
  v |= (f.payload & 0x3u) << L::kPayloadLoShift;
  return static_cast<std::uint16_t>(v);
}

std::uint16_t data_b(const Flit& f) { return static_cast<std::uint16_t>((f.payload >> 2) & 0xFFFF); }

Codeword22 raw_codeword(std::uint16_t data, std::uint16_t ext6) {
  return static_cast<Codeword22>(data) | (static_cast<Codeword22>(ext6 & 0x3F) << 16);
}

}  // namespace

PackedFlit flit_pack(const Flit& f, bool ecc) {
  Codeword22 a;
  Codeword22 b;
  if (ecc) {
    a = secded_encode(data_a(f));
    b = secded_encode(data_b(f));
  } else {
    a = raw_codeword(data_a(f), f.payload_ext & 0x3F);
    b = raw_codeword(data_b(f), (f.payload_ext >> 6) & 0x3F);
  }
  return static_cast<PackedFlit>(a) | (static_cast<PackedFlit>(b) << kCodewordBits);
}

UnpackResult flit_unpack(PackedFlit p, bool ecc, FlitTag tag) {
  UnpackResult r;
  Codeword22 a = codeword_a(p);
  Codeword22 b = codeword_b(p);
  std::uint16_t ext = 0;
  if (ecc) {
    r.halves[0] = secded_decode(a);
    r.halves[1] = secded_decode(b);
    r.status = std::max(r.halves[0].status, r.halves[1].status);
    r.corrected = static_cast<PackedFlit>(r.halves[0].corrected) |
                  (static_cast<PackedFlit>(r.halves[1].corrected) << kCodewordBits);
  } else {
    r.halves[0] = DecodeOutcome{DecodeStatus::Clean, -1, static_cast<std::uint16_t>(a & 0xFFFF), a};
    r.halves[1] = DecodeOutcome{DecodeStatus::Clean, -1, static_cast<std::uint16_t>(b & 0xFFFF), b};
    ext = static_cast<std::uint16_t>(((a >> 16) & 0x3F) | (((b >> 16) & 0x3F) << 6));
    r.corrected = p & kFlitMask;
  }
  using L = HeaderLayout;
  std::uint32_t da = r.halves[0].data;
  std::uint32_t db = r.halves[1].data;
  Flit& f = r.flit;
  f.kind = static_cast<FlitKind>((da >> L::kKindShift) & 0x3u);
  // 7 is not a port; it survives only as a corrupted value and is kept raw.
  f.next_port = static_cast<Direction>((da >> L::kNextPortShift) & 0x7u);
  f.destination = {static_cast<int>((da >> L::kDestShift) & 0x7u),
                   static_cast<int>((da >> (L::kDestShift + 3)) & 0x7u),
                   static_cast<int>((da >> (L::kDestShift + 6)) & 0x7u)};
  f.payload = ((da >> L::kPayloadLoShift) & 0x3u) | (db << 2);
  f.payload_ext = ext;
  f.tag = tag;
  return r;
}

PackedFlit merge_next_port(PackedFlit p, Direction old_port, Direction new_port, bool ecc) {
  auto delta_bits = static_cast<std::uint16_t>(
      ((static_cast<unsigned>(old_port) ^ static_cast<unsigned>(new_port)) & 0x7u)
      << HeaderLayout::kNextPortShift);
  Codeword22 delta = ecc ? secded_encode(delta_bits) : Codeword22{delta_bits};
  return p ^ static_cast<PackedFlit>(delta);
}

}  // namespace ftnoc
