#include "ftnoc/router.hpp"

#include <stdexcept>
#include <string>

namespace ftnoc {

RabBuffer::RabBuffer(int depth) : slots_(static_cast<std::size_t>(depth)) {
  if (depth < 1) throw std::invalid_argument("RabBuffer: depth must be >= 1");
}

int RabBuffer::write(const Flit& f, PackedFlit word, std::uint64_t cycle) {
  const int n = depth();
  for (int k = 0; k < n; ++k) {
    int i = (write_cursor_ + k) % n;
    auto& s = slots_[static_cast<std::size_t>(i)];
    if (s.fault_flag || s.state != SlotState::Free) continue;
    s.state = SlotState::Stored;
    s.word = word;
    s.flit = f;
    s.write_cycle = cycle;
    order_.push_back(i);
    write_cursor_ = (i + 1) % n;
    return i;
  }
  throw std::logic_error("rab_write: buffer overflow (no healthy free slot)");
}

std::optional<int> RabBuffer::head(std::uint64_t now) const {
  for (int i : order_) {
    const auto& s = slots_[static_cast<std::size_t>(i)];
    if (s.state == SlotState::Stored) {
      if (s.write_cycle < now) return i;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

void RabBuffer::mark_in_flight(int slot) {
  auto& s = this->slot(slot);
  if (s.state != SlotState::Stored) throw std::logic_error("RabBuffer: slot not stored");
  s.state = SlotState::InFlight;
}

void RabBuffer::revert_to_stored(int slot) {
  auto& s = this->slot(slot);
  if (s.state != SlotState::InFlight) throw std::logic_error("RabBuffer: slot not in flight");
  s.state = SlotState::Stored;
}

void RabBuffer::release(int slot) {
  auto& s = this->slot(slot);
  s.state = SlotState::Free;
  std::erase(order_, slot);
}

void RabBuffer::flag(int slot) {
  release(slot);
  this->slot(slot).fault_flag = true;
}

int RabBuffer::free_healthy() const {
  int n = 0;
  for (const auto& s : slots_) n += (!s.fault_flag && s.state == SlotState::Free) ? 1 : 0;
  return n;
}

int RabBuffer::healthy() const {
  int n = 0;
  for (const auto& s : slots_) n += s.fault_flag ? 0 : 1;
  return n;
}

int rab_write(RabBuffer& buf, const Flit& f, PackedFlit word, std::uint64_t cycle) {
  return buf.write(f, word, cycle);
}

PcrOutcome pcr_execute(NpcValue npc_true, SaValue sa_true, const PcrHooks& hooks,
                       bool pcr_enabled) {
  PcrOutcome out;
  auto npc_at = [&](int k) { return hooks.npc[static_cast<std::size_t>(k)].value_or(npc_true); };
  auto sa_at = [&](int k) { return hooks.sa[static_cast<std::size_t>(k)].value_or(sa_true); };

  out.npc_stage.record(0, npc_at(0));
  out.sa_stage.record(0, sa_at(0));
  if (!pcr_enabled) {
    out.npc = *out.npc_stage.results[0];
    out.sa = *out.sa_stage.results[0];
    out.cycles_consumed = 1;
    return out;
  }
  out.npc_stage.record(1, npc_at(1));
  out.sa_stage.record(1, sa_at(1));
  bool npc_bad = out.npc_stage.compare();
  bool sa_bad = out.sa_stage.compare();
  out.cycles_consumed = 2;
  if (npc_bad || sa_bad) {
    // Whole pipeline halts one cycle; only the mismatching unit recomputes.
    out.cycles_consumed = 3;
    if (npc_bad) out.npc_stage.record(2, npc_at(2));
    if (sa_bad) out.sa_stage.record(2, sa_at(2));
  }
  auto npc = out.npc_stage.final_value();
  auto sa = out.sa_stage.final_value();
  if (!npc || !sa) {
    out.status = PcrStatus::Unresolvable;
    out.npc = npc.value_or(*out.npc_stage.results[0]);
    out.sa = sa.value_or(*out.sa_stage.results[0]);
    return out;
  }
  out.npc = *npc;
  out.sa = *sa;
  return out;
}

BlodCrossbar::BlodCrossbar(int pool_size) : pool_(static_cast<std::size_t>(pool_size)) {}

bool BlodCrossbar::bypassed(int in, int out) const {
  for (const auto& b : pool_) {
    if (b.in_use && b.in_port == in && b.out_port == out) return true;
  }
  return false;
}

bool BlodCrossbar::map_bypass(int in, int out) {
  if (bypassed(in, out)) return true;
  for (auto& b : pool_) {
    if (!b.in_use) {
      b = BypassLink{true, in, out};
      return true;
    }
  }
  return false;
}

void BlodCrossbar::release_bypass(int in, int out) {
  for (auto& b : pool_) {
    if (b.in_use && b.in_port == in && b.out_port == out) b = BypassLink{};
  }
}

bool BlodCrossbar::mark_path_faulty(int in, int out) {
  primary_faulty_[idx(in)][idx(out)] = true;
  if (map_bypass(in, out)) return true;
  escalated_[idx(out)] = true;
  return false;
}

int BlodCrossbar::escalation_count() const {
  int n = 0;
  for (bool e : escalated_) n += e ? 1 : 0;
  return n;
}

int BlodCrossbar::free_bypasses() const {
  int n = 0;
  for (const auto& b : pool_) n += b.in_use ? 0 : 1;
  return n;
}

PackedFlit crossbar_traverse(const BlodCrossbar& xbar, int in, int out, PackedFlit word,
                             Direction old_np, Direction new_np,
                             std::span<const StuckAt> primary_path_faults, bool ecc) {
  if (!xbar.serviceable(in, out)) {
    throw std::logic_error("crossbar_traverse: path " + std::to_string(in) + "->" +
                           std::to_string(out) + " is not serviceable");
  }
  PackedFlit w = merge_next_port(word, old_np, new_np, ecc);
  if (!xbar.bypassed(in, out)) w = apply_all(w, primary_path_faults);
  return w & kFlitMask;
}

ArqAction arq_on_delivery_status(ArqEndpoint& ep, DecodeStatus status) {
  if (status != DecodeStatus::DetectedUncorrectable) {
    ep.in_flight = false;
    ep.arq_counter = 0;
    ep.retransmit_pending = false;
    return ArqAction::Release;
  }
  ++ep.arq_counter;
  if (ep.arq_counter >= 2) {
    ep.retransmit_pending = false;
    return ArqAction::RaiseDetected;
  }
  ep.retransmit_pending = true;
  return ArqAction::Retransmit;
}

std::string_view to_string(RecoveryKind k) {
  switch (k) {
    case RecoveryKind::None: return "none";
    case RecoveryKind::SendProbe: return "send-probe";
    case RecoveryKind::RabFlag: return "rab-flag";
    case RecoveryKind::MapBypassAndRetransmit: return "blod-map";
    case RecoveryKind::Retransmit: return "retransmit";
    case RecoveryKind::KeepBypass: return "blod-keep";
    case RecoveryKind::ReleaseBypassAndMarkLink: return "blod-release+laft-mark";
    case RecoveryKind::EscalateAndMarkLink: return "escalate+laft-mark";
  }
  return "?";
}

namespace {

RecoveryCommand finish(DdrmState& st, RecoveryCommand cmd) {
  st.phase = DdrmPhase::Idle;
  st.last_terminal = cmd.kind;
  return cmd;
}

RecoveryCommand start_trial(DdrmState& st, bool bypass_available) {
  if (!bypass_available) {
    return finish(st, {RecoveryKind::EscalateAndMarkLink, st.monitored_port, st.monitored_slot});
  }
  st.phase = DdrmPhase::BlodTrial;
  st.trial_failures = 0;
  return {RecoveryKind::MapBypassAndRetransmit, st.monitored_port, st.monitored_slot};
}

}  // namespace

RecoveryCommand ddrm_step(DdrmState& st, const DdrmObservation& obs) {
  using K = DdrmObservation::Kind;
  switch (st.phase) {
    case DdrmPhase::Idle:
      if (obs.kind != K::Detected) return {};
      ++st.episodes;
      st.monitored_port = obs.port;
      st.monitored_slot = obs.slot;
      st.probes_done = 0;
      st.probe_error = false;
      if (!obs.alternate_slot_available) return start_trial(st, obs.bypass_available);
      st.phase = DdrmPhase::BufferCheck;
      return {RecoveryKind::SendProbe, st.monitored_port, st.monitored_slot, 0};

    case DdrmPhase::BufferCheck:
      if (obs.kind != K::ProbeResult) return {};
      ++st.probes_done;
      st.probe_error = st.probe_error || obs.error_seen;
      if (st.probes_done < kBufferCheckProbes) {
        return {RecoveryKind::SendProbe, st.monitored_port, st.monitored_slot, st.probes_done};
      }
      // Clean probes through other slots: the error follows the monitored slot.
      if (!st.probe_error) {
        return finish(st, {RecoveryKind::RabFlag, st.monitored_port, st.monitored_slot});
      }
      return start_trial(st, obs.bypass_available);

    case DdrmPhase::BlodTrial:
      if (obs.kind != K::TrialDelivery) return {};
      if (obs.status != DecodeStatus::DetectedUncorrectable) {
        return finish(st, {RecoveryKind::KeepBypass, st.monitored_port, st.monitored_slot});
      }
      ++st.trial_failures;
      if (st.trial_failures >= 2) {
        return finish(st,
                      {RecoveryKind::ReleaseBypassAndMarkLink, st.monitored_port, st.monitored_slot});
      }
      return {RecoveryKind::Retransmit, st.monitored_port, st.monitored_slot};
  }
  return {};
}

std::optional<int> RoundRobinArbiter::arbitrate(std::uint8_t request_mask, int width) {
  for (int k = 0; k < width; ++k) {
    int i = (pointer_ + k) % width;
    if ((request_mask >> i) & 1u) {
      pointer_ = (i + 1) % width;
      return i;
    }
  }
  return std::nullopt;
}

std::array<std::optional<int>, kPortCount> sa_arbitrate(
    SwitchAllocator& sa, const std::array<std::uint8_t, kPortCount>& requests) {
  std::array<std::optional<int>, kPortCount> grants{};
  for (int out = 0; out < kPortCount; ++out) {
    auto o = static_cast<std::size_t>(out);
    if (sa.owner[o]) {
      grants[o] = sa.owner[o];
      continue;
    }
    if (requests[o] != 0) grants[o] = sa.arbiters[o].arbitrate(requests[o]);
  }
  return grants;
}

}  // namespace ftnoc
