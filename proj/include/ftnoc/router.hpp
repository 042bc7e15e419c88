#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ftnoc/codec.hpp"
#include "ftnoc/core_model.hpp"

namespace ftnoc {

/// Stuck-at defect over a set of wires of a 44-bit word.
struct StuckAt {
  PackedFlit mask = 0;
  bool value = false;

  PackedFlit apply(PackedFlit w) const { return value ? (w | mask) : (w & ~mask); }
  bool operator==(const StuckAt&) const = default;
};

inline PackedFlit apply_all(PackedFlit w, std::span<const StuckAt> faults) {
  for (const auto& f : faults) w = f.apply(w);
  return w;
}

// ---------------------------------------------------------------------------
// Random Access Buffer

enum class SlotState : std::uint8_t { Free, Stored, InFlight };

struct RabSlot {
  SlotState state = SlotState::Free;
  bool fault_flag = false;
  PackedFlit word = 0;
  Flit flit{};
  std::uint64_t write_cycle = 0;
};

/// Input buffer whose cursors skip flagged slots. Flits leave in arrival
/// order; a slot stays InFlight after crossbar traversal until the
/// downstream acknowledges it.
class RabBuffer {
 public:
  explicit RabBuffer(int depth = 4);

  int depth() const { return static_cast<int>(slots_.size()); }

  /// Stores into the next healthy free slot at or after the write cursor.
  /// Throws std::logic_error on overflow (flow control must prevent it).
  int write(const Flit& f, PackedFlit word, std::uint64_t cycle);

  /// Oldest Stored slot written strictly before `now`, skipping InFlight ones.
  std::optional<int> head(std::uint64_t now) const;

  void mark_in_flight(int slot);
  void revert_to_stored(int slot);
  void release(int slot);
  /// Takes the slot out of service. Any content is discarded.
  void flag(int slot);

  int free_healthy() const;
  int healthy() const;
  int occupied() const { return static_cast<int>(order_.size()); }
  int write_cursor() const { return write_cursor_; }
  const std::deque<int>& order() const { return order_; }

  const RabSlot& slot(int i) const { return slots_.at(static_cast<std::size_t>(i)); }
  RabSlot& slot(int i) { return slots_.at(static_cast<std::size_t>(i)); }

  /// Frees every Stored (not InFlight) slot whose flit matches `pred`.
  template <typename Pred>
  int purge_stored(Pred&& pred) {
    int n = 0;
    for (auto it = order_.begin(); it != order_.end();) {
      auto& s = slots_[static_cast<std::size_t>(*it)];
      if (s.state == SlotState::Stored && pred(s.flit)) {
        s.state = SlotState::Free;
        it = order_.erase(it);
        ++n;
      } else {
        ++it;
      }
    }
    return n;
  }

 private:
  std::vector<RabSlot> slots_;
  int write_cursor_ = 0;
  std::deque<int> order_;
};

/// Free function form of RabBuffer::write.
int rab_write(RabBuffer& buf, const Flit& f, PackedFlit word = 0, std::uint64_t cycle = 0);

// ---------------------------------------------------------------------------
// Pipeline Computation Redundancy

/// NPC result: port code 0..6; any other value is a corrupted latch.
using NpcValue = std::uint8_t;
/// SA result for one input: 0 = no grant, 1 + p = granted onto output p.
using SaValue = std::uint8_t;

constexpr SaValue sa_grant(Direction out) { return static_cast<SaValue>(1 + port_index(out)); }
inline constexpr SaValue kNoGrant = 0;

template <typename T>
std::optional<T> majority(T a, T b, T c) {
  if (a == b || a == c) return a;
  if (b == c) return b;
  return std::nullopt;
}

/// Results of up to three computations of one unit for one flit.
template <typename T>
struct PcrStage {
  std::array<std::optional<T>, 3> results{};
  bool mismatch = false;
  std::optional<T> voted;

  void record(int instance, T value) { results[static_cast<std::size_t>(instance)] = value; }
  /// After instances 0 and 1: true when they differ.
  bool compare() {
    mismatch = results[0] != results[1];
    return mismatch;
  }
  /// Final value: first result when equal, else 2-of-3 majority (nullopt
  /// when all three disagree).
  std::optional<T> final_value() {
    if (!mismatch) return results[0];
    voted = majority(*results[0], *results[1], *results[2]);
    return voted;
  }
};

/// Corrupted replacement values per computation instance.
struct PcrHooks {
  std::array<std::optional<NpcValue>, 3> npc{};
  std::array<std::optional<SaValue>, 3> sa{};
};

enum class PcrStatus : std::uint8_t { Ok, Unresolvable };

struct PcrOutcome {
  NpcValue npc = 0;
  SaValue sa = 0;
  int cycles_consumed = 0;
  PcrStatus status = PcrStatus::Ok;
  PcrStage<NpcValue> npc_stage{};
  PcrStage<SaValue> sa_stage{};
};

/// Runs NPC and SA in parallel with redundancy for one flit whose inputs are
/// frozen: `npc_true`/`sa_true` are what a fault-free unit computes.
/// Two cycles without error, three when either unit mismatches. With
/// `pcr_enabled == false` a single computation is used as-is (one cycle).
PcrOutcome pcr_execute(NpcValue npc_true, SaValue sa_true, const PcrHooks& hooks,
                       bool pcr_enabled = true);

// ---------------------------------------------------------------------------
// Bypass-Link-on-Demand crossbar

struct BypassLink {
  bool in_use = false;
  int in_port = -1;
  int out_port = -1;
};

class BlodCrossbar {
 public:
  explicit BlodCrossbar(int pool_size = 2);

  bool primary_faulty(int in, int out) const { return primary_faulty_[idx(in)][idx(out)]; }
  bool bypassed(int in, int out) const;
  bool serviceable(int in, int out) const { return !primary_faulty(in, out) || bypassed(in, out); }

  /// False when the pool is exhausted.
  bool map_bypass(int in, int out);
  void release_bypass(int in, int out);

  /// Records a known-faulty primary path: maps a bypass when one is free,
  /// otherwise raises the escalation flag of `out`. Returns true if bypassed.
  bool mark_path_faulty(int in, int out);

  bool escalated(int out) const { return escalated_[idx(out)]; }
  int escalation_count() const;
  int free_bypasses() const;
  int pool_size() const { return static_cast<int>(pool_.size()); }
  const std::vector<BypassLink>& pool() const { return pool_; }

 private:
  static std::size_t idx(int p) { return static_cast<std::size_t>(p); }
  std::array<std::array<bool, kPortCount>, kPortCount> primary_faulty_{};
  std::vector<BypassLink> pool_;
  std::array<bool, kPortCount> escalated_{};
};

/// Crossbar traversal: merges `new_np` into the word read from the buffer
/// and routes it over the primary path or its mapped bypass. Physical
/// defects of the primary path apply only when it is used. Throws
/// std::logic_error on a non-serviceable path.
PackedFlit crossbar_traverse(const BlodCrossbar& xbar, int in, int out, PackedFlit word,
                             Direction old_np, Direction new_np,
                             std::span<const StuckAt> primary_path_faults, bool ecc);

// ---------------------------------------------------------------------------
// ARQ endpoint (one outstanding flit per output channel)

struct ArqEndpoint {
  bool in_flight = false;
  int src_port = -1;
  int src_slot = -1;  // buffer_position of the held flit
  int arq_counter = 0;
  bool retransmit_pending = false;
  FlitTag tag{};
};

enum class ArqAction : std::uint8_t { Release, Retransmit, RaiseDetected };

ArqAction arq_on_delivery_status(ArqEndpoint& ep, DecodeStatus status);

// ---------------------------------------------------------------------------
// Detection, diagnosis and recovery state machine (one per output channel)

enum class DdrmPhase : std::uint8_t { Idle, BufferCheck, BlodTrial };

enum class RecoveryKind : std::uint8_t {
  None,
  SendProbe,                 // probe_index 0 = pattern, 1 = complement
  RabFlag,                   // terminal: flag (port, slot)
  MapBypassAndRetransmit,
  Retransmit,
  KeepBypass,                // terminal: crossbar fault fixed by BLoD
  ReleaseBypassAndMarkLink,  // terminal: channel fault, LAFT marks the link
  EscalateAndMarkLink,       // terminal: no bypass left, LAFT marks the link
};

std::string_view to_string(RecoveryKind k);
constexpr bool is_terminal(RecoveryKind k) {
  return k == RecoveryKind::RabFlag || k == RecoveryKind::KeepBypass ||
         k == RecoveryKind::ReleaseBypassAndMarkLink || k == RecoveryKind::EscalateAndMarkLink;
}

struct RecoveryCommand {
  RecoveryKind kind = RecoveryKind::None;
  int port = -1;
  int slot = -1;
  int probe_index = -1;
};

struct DdrmObservation {
  enum class Kind : std::uint8_t { Detected, ProbeResult, TrialDelivery };
  Kind kind = Kind::Detected;
  int port = -1;  // Detected: input port of the held flit
  int slot = -1;  // Detected: its buffer_position
  bool alternate_slot_available = true;
  bool error_seen = false;  // ProbeResult: any non-clean decode
  DecodeStatus status = DecodeStatus::Clean;  // TrialDelivery
  bool bypass_available = true;
};

struct DdrmState {
  DdrmPhase phase = DdrmPhase::Idle;
  int monitored_port = -1;
  int monitored_slot = -1;
  int probes_done = 0;
  bool probe_error = false;
  int trial_failures = 0;
  RecoveryKind last_terminal = RecoveryKind::None;
  std::uint64_t episodes = 0;
};

inline constexpr int kBufferCheckProbes = 2;

RecoveryCommand ddrm_step(DdrmState& st, const DdrmObservation& obs);

// ---------------------------------------------------------------------------
// Switch allocation

class RoundRobinArbiter {
 public:
  /// Lowest-index requester at or after the pointer (wrapping). Advances the
  /// pointer past the winner.
  std::optional<int> arbitrate(std::uint8_t request_mask, int width = kPortCount);
  int pointer() const { return pointer_; }

 private:
  int pointer_ = 0;
};

struct SwitchAllocator {
  /// Input port holding each output for a packet in progress (wormhole).
  std::array<std::optional<int>, kPortCount> owner{};
  std::array<RoundRobinArbiter, kPortCount> arbiters{};
};

/// Per output: a held output keeps granting its owner; otherwise one of the
/// requesting inputs (bit i of requests[out]) wins by rotating priority.
/// Ownership is left to the caller (set on a head grant, cleared after tail).
std::array<std::optional<int>, kPortCount> sa_arbitrate(
    SwitchAllocator& sa, const std::array<std::uint8_t, kPortCount>& requests);

}  // namespace ftnoc
