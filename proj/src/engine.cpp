#include "ftnoc/engine.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ftnoc/rng.hpp"

namespace ftnoc {

EngineCounters EngineCounters::operator-(const EngineCounters& o) const {
  EngineCounters r;
  r.flits_traversed = flits_traversed - o.flits_traversed;
  r.arq_nacks = arq_nacks - o.arq_nacks;
  r.arq_retransmissions = arq_retransmissions - o.arq_retransmissions;
  r.ecc_corrections = ecc_corrections - o.ecc_corrections;
  r.ddrm_episodes = ddrm_episodes - o.ddrm_episodes;
  r.ddrm_probes = ddrm_probes - o.ddrm_probes;
  r.rab_flags = rab_flags - o.rab_flags;
  r.blod_keeps = blod_keeps - o.blod_keeps;
  r.blod_releases = blod_releases - o.blod_releases;
  r.escalations = escalations - o.escalations;
  r.link_marks = link_marks - o.link_marks;
  r.header_reroutes = header_reroutes - o.header_reroutes;
  r.pcr_mismatches = pcr_mismatches - o.pcr_mismatches;
  r.pcr_unresolvable = pcr_unresolvable - o.pcr_unresolvable;
  r.soft_events = soft_events - o.soft_events;
  r.soft_applied = soft_applied - o.soft_applied;
  r.packets_killed = packets_killed - o.packets_killed;
  r.noroute_drops = noroute_drops - o.noroute_drops;
  r.misroute_drops = misroute_drops - o.misroute_drops;
  r.deadlock_releases = deadlock_releases - o.deadlock_releases;
  r.duplicate_ejections = duplicate_ejections - o.duplicate_ejections;
  r.order_violations = order_violations - o.order_violations;
  return r;
}

std::string_view to_string(PacketState s) {
  switch (s) {
    case PacketState::Queued: return "queued";
    case PacketState::Injecting: return "injecting";
    case PacketState::InNetwork: return "in_network";
    case PacketState::Delivered: return "delivered";
    case PacketState::Dropped: return "dropped";
    case PacketState::Corrupted: return "corrupted";
    case PacketState::Timeout: return "timeout";
  }
  return "?";
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Inject: return "inject";
    case EventKind::Eject: return "eject";
    case EventKind::Nack: return "nack";
    case EventKind::Retransmit: return "retransmit";
    case EventKind::DdrmDetected: return "ddrm_detected";
    case EventKind::DdrmProbe: return "ddrm_probe";
    case EventKind::DdrmCommand: return "ddrm_command";
    case EventKind::LinkMarked: return "link_marked";
    case EventKind::PcrMismatch: return "pcr_mismatch";
    case EventKind::PcrUnresolvable: return "pcr_unresolvable";
    case EventKind::SoftUpset: return "soft_upset";
    case EventKind::PacketDropped: return "packet_dropped";
    case EventKind::FaultActivated: return "fault_activated";
  }
  return "?";
}

std::uint32_t packet_payload(std::uint64_t seed, std::uint64_t packet_id, std::uint32_t seq) {
  return static_cast<std::uint32_t>(hash_mix(seed, packet_id, seq, 0xDA7A) & kPayloadMask);
}

std::uint16_t packet_payload_ext(std::uint64_t seed, std::uint64_t packet_id, std::uint32_t seq) {
  return static_cast<std::uint16_t>((hash_mix(seed, packet_id, seq, 0xDA7A) >> 18) & kPayloadExtMask);
}

namespace {

// Alternating test pattern for buffer-check probes; the second probe is
// its complement so every wire is driven to both values.
constexpr PackedFlit kProbePattern = 0x55555555555ull & kFlitMask;

constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

struct ActiveFault {
  FaultTarget target{};
  bool hard = true;
  StuckAt stuck{};
  SoftSource soft{};
};

struct ChannelFlit {
  bool busy = false;
  bool probe = false;
  int probe_index = -1;
  PackedFlit word = 0;
  PackedFlit expected = 0;
  Flit flit{};
};

struct ComputeCtx {
  bool active = false;
  int slot = -1;
  int next_instance = 0;
  bool head = false;
  bool npc_active = false;
  Direction out = Direction::Local;
  NpcValue npc_true = 0;
  SaValue sa_true = 0;
  PcrStage<NpcValue> npc{};
  PcrStage<SaValue> sa{};
  std::uint64_t packet = 0;
};

struct ReadyCtx {
  bool active = false;
  int slot = -1;
  Direction out = Direction::Local;
  Direction np = Direction::Local;
  std::uint64_t packet = 0;
};

struct InPort {
  bool exists = false;
  RabBuffer rab{4};
  ComputeCtx comp{};
  ReadyCtx ready{};
  bool has_cur = false;
  std::uint64_t cur_packet = 0;
  Direction cur_out = Direction::Local;
  std::uint64_t last_progress = 0;
};

struct OutPort {
  bool exists = false;
  bool go = true;
  int reserved_by = -1;
  ArqEndpoint arq{};
  Direction arq_np = Direction::Local;
  DdrmState ddrm{};
  int probe_pending = -1;
  bool marked = false;
  ChannelFlit ch{};
  PackedFlit armed_upset = 0;
};

struct PcrArm {
  int port = 0;
  PcrUnit unit = PcrUnit::Npc;
  int instance = 0;
  std::uint8_t value = 0;
};

struct Router {
  Coord3 pos{};
  int index = 0;
  std::array<InPort, kPortCount> in{};
  std::array<OutPort, kPortCount> out{};
  SwitchAllocator sa{};
  BlodCrossbar xbar{2};
  std::vector<ActiveFault> faults;
  bool controller_failed = false;
  std::uint64_t halt_cycle = kNever;
  std::vector<std::uint64_t> npc_hits;
  std::vector<std::uint64_t> sa_hits;
  std::vector<std::uint64_t> link_hits;
  std::vector<PcrArm> pcr_arms;
};

struct PacketRec {
  Packet pkt{};
  PacketState state = PacketState::Queued;
  std::uint32_t next_eject = 0;
  int misroutes = 0;
  bool corrupted = false;
  bool dead = false;
  std::uint64_t latency = 0;
};

struct NodeNi {
  std::vector<std::uint64_t> queue;
  std::size_t next = 0;
  bool injecting = false;
  std::uint64_t cur = 0;
  std::uint32_t seq = 0;
  Direction route = Direction::Local;
};

struct RoutePlan {
  bool ok = false;
  Direction out = Direction::Local;
  Direction np = Direction::Local;
  int nonminimal = 0;
  bool rerouted = false;
};

bool is_terminal_state(PacketState s) {
  return s == PacketState::Delivered || s == PacketState::Dropped ||
         s == PacketState::Corrupted || s == PacketState::Timeout;
}

}  // namespace

struct EngineImpl {
  NetworkConfig cfg;
  SoftErrorProcess soft{};
  std::vector<Router> routers;
  std::vector<NodeNi> nis;
  std::vector<PacketRec> packets;
  std::vector<int> free_snap;
  std::vector<HardFault> pending_faults;
  std::vector<int> touched;
  std::uint64_t cycle = 0;
  std::uint64_t session_first = 0;
  std::uint64_t outstanding = 0;
  bool purge_needed = false;
  EngineCounters counters{};
  bool log_events = false;
  std::vector<EngineEvent> events;
  std::vector<RecoveryRecord> recoveries;
  std::ostream* trace = nullptr;
  std::ostream* dump = nullptr;

  explicit EngineImpl(const NetworkConfig& c) : cfg(c) {
    cfg.validate();
    const int n = cfg.dims.node_count();
    routers.resize(static_cast<std::size_t>(n));
    nis.resize(static_cast<std::size_t>(n));
    free_snap.assign(static_cast<std::size_t>(n) * kPortCount, cfg.buffer_depth);
    for (int i = 0; i < n; ++i) {
      Router& r = routers[static_cast<std::size_t>(i)];
      r.pos = cfg.dims.coord(i);
      r.index = i;
      r.xbar = BlodCrossbar(cfg.hard_ft_enabled ? cfg.bypass_links_per_router : 0);
      for (int p = 0; p < kPortCount; ++p) {
        bool exists = p == 0 || neighbor(r.pos, port_at(p), cfg.dims).has_value();
        r.in[static_cast<std::size_t>(p)].exists = exists;
        r.in[static_cast<std::size_t>(p)].rab = RabBuffer(cfg.buffer_depth);
        r.out[static_cast<std::size_t>(p)].exists = exists;
        if (!exists) free_snap[static_cast<std::size_t>(i * kPortCount + p)] = 0;
      }
    }
  }

  // ---------------------------------------------------------------- helpers

  Router& router_at(Coord3 c) {
    if (!cfg.dims.contains(c)) throw std::invalid_argument("router outside the mesh: " + to_string(c));
    return routers[static_cast<std::size_t>(cfg.dims.index(c))];
  }
  const Router& router_at(Coord3 c) const {
    if (!cfg.dims.contains(c)) throw std::invalid_argument("router outside the mesh: " + to_string(c));
    return routers[static_cast<std::size_t>(cfg.dims.index(c))];
  }

  static InPort& in(Router& r, int p) { return r.in[static_cast<std::size_t>(p)]; }
  static OutPort& out(Router& r, int o) { return r.out[static_cast<std::size_t>(o)]; }

  bool online_ddrm() const { return cfg.hard_ft_enabled && cfg.ecc_enabled; }
  bool known_faults() const { return cfg.hard_ft_enabled && !cfg.ecc_enabled; }

  PacketRec& rec(std::uint64_t id) { return packets[static_cast<std::size_t>(id)]; }
  bool dead(std::uint64_t id) const { return packets[static_cast<std::size_t>(id)].dead; }

  void log(EventKind k, const Router& r, int port, std::uint64_t pkt, std::string detail = {}) {
    if (!log_events) return;
    events.push_back({cycle, k, r.pos, port, pkt, std::move(detail)});
  }

  void finish_packet(PacketRec& p, PacketState s) {
    if (is_terminal_state(p.state)) return;
    p.state = s;
    if (outstanding > 0) --outstanding;
  }

  void kill(std::uint64_t id, PacketState reason = PacketState::Dropped) {
    PacketRec& p = rec(id);
    if (p.dead) return;
    p.dead = true;
    ++counters.packets_killed;
    finish_packet(p, reason);
    purge_needed = true;
  }

  LinkFaultView fault_view(Coord3 node) const {
    return LinkFaultView::build(node, cfg.dims, [this](Coord3 c, Direction d) {
      return routers[static_cast<std::size_t>(cfg.dims.index(c))]
          .out[static_cast<std::size_t>(port_index(d))]
          .marked;
    });
  }

  CongestionView congestion(Coord3 node) const {
    CongestionView v;
    for (Direction d : kMeshDirections) {
      auto nb = neighbor(node, d, cfg.dims);
      v.free_slots[static_cast<std::size_t>(port_index(d))] =
          nb ? free_snap[static_cast<std::size_t>(cfg.dims.index(*nb) * kPortCount +
                                                  port_index(direction_inverse(d)))]
             : 0;
    }
    return v;
  }

  std::optional<RoutingDecision> laft(Coord3 node, Coord3 dest, std::optional<Direction> arrival) {
    auto d = laft_next_port(node, dest, fault_view(node), congestion(node), cfg.dims, arrival);
    if (trace) *trace << "cycle=" << cycle << ' ' << format_decision(node, dest, d) << '\n';
    return d;
  }

  // ------------------------------------------------------------ fault model

  PackedFlit read_slot(Router& r, int p, int s) {
    PackedFlit w = in(r, p).rab.slot(s).word;
    for (const auto& f : r.faults) {
      if (f.target.kind != FaultStructure::BufferSlot || f.target.port != p || f.target.slot != s) continue;
      w = apply_fault(f, w);
    }
    return w & kFlitMask;
  }

  PackedFlit apply_fault(const ActiveFault& f, PackedFlit w) const {
    if (f.hard) return f.stuck.apply(w);
    if (f.soft.fires(cycle)) w ^= PackedFlit{1} << (f.soft.selector(cycle) % kFlitBits);
    return w;
  }

  PackedFlit traverse_path(Router& r, int p, int o, PackedFlit word, Direction old_np, Direction np) {
    std::array<StuckAt, 8> hard{};
    std::size_t nh = 0;
    bool any_soft = false;
    for (const auto& f : r.faults) {
      if (f.target.kind != FaultStructure::CrossbarPath || f.target.port != p || f.target.out_port != o) continue;
      if (f.hard && nh < hard.size()) hard[nh++] = f.stuck;
      if (!f.hard) any_soft = true;
    }
    PackedFlit w = crossbar_traverse(r.xbar, p, o, word, old_np, np,
                                     std::span<const StuckAt>(hard.data(), nh), cfg.ecc_enabled);
    if (any_soft && !r.xbar.bypassed(p, o)) {
      for (const auto& f : r.faults) {
        if (!f.hard && f.target.kind == FaultStructure::CrossbarPath && f.target.port == p &&
            f.target.out_port == o) {
          w = apply_fault(f, w);
        }
      }
    }
    return w;
  }

  PackedFlit channel_faults(Router& r, int o, PackedFlit w) {
    for (const auto& f : r.faults) {
      if (f.target.kind == FaultStructure::Channel && f.target.out_port == o) w = apply_fault(f, w);
    }
    auto& op = out(r, o);
    if (op.armed_upset) {
      w ^= op.armed_upset;
      op.armed_upset = 0;
    }
    return w & kFlitMask;
  }

  std::uint8_t unit_value(Router& r, int p, PcrUnit unit, int instance, std::uint8_t v, std::uint64_t xor_mask) {
    const auto kind = unit == PcrUnit::Npc ? FaultStructure::NpcUnit : FaultStructure::SaUnit;
    for (const auto& f : r.faults) {
      if (f.target.kind != kind || f.target.port != p) continue;
      if (f.hard) {
        v = static_cast<std::uint8_t>(f.stuck.apply(v) & kUnitResultMask);
      } else if (f.soft.fires(cycle * 4 + static_cast<std::uint64_t>(instance))) {
        v ^= static_cast<std::uint8_t>(1u << (f.soft.selector(cycle) % 3));
      }
    }
    v ^= static_cast<std::uint8_t>(xor_mask);
    for (auto it = r.pcr_arms.begin(); it != r.pcr_arms.end(); ++it) {
      if (it->port == p && it->unit == unit && it->instance == instance) {
        v = it->value;
        r.pcr_arms.erase(it);
        break;
      }
    }
    return v;
  }

  void mark_link(Router& r, int o) {
    auto& op = out(r, o);
    if (op.marked) return;
    op.marked = true;
    ++counters.link_marks;
    log(EventKind::LinkMarked, r, o, 0, std::string(to_string(port_at(o))));
  }

  void activate(const HardFault& f) {
    Router& r = router_at(f.target.router);
    ActiveFault a;
    a.target = f.target;
    a.hard = true;
    a.stuck = f.stuck();
    log(EventKind::FaultActivated, r, f.target.port, 0, to_string(f.target));
    if (f.target.kind == FaultStructure::Controller) {
      r.controller_failed = true;
      return;
    }
    r.faults.push_back(a);
    if (!known_faults()) return;
    // Without ECC the fault manager knows the fault from start-up testing.
    switch (f.target.kind) {
      case FaultStructure::BufferSlot: {
        auto& rab = in(r, f.target.port).rab;
        const auto& s = rab.slot(f.target.slot);
        if (s.state != SlotState::Free) kill(s.flit.tag.packet_id);
        if (!s.fault_flag) {
          rab.flag(f.target.slot);
          ++counters.rab_flags;
        }
        break;
      }
      case FaultStructure::CrossbarPath:
        if (!r.xbar.mark_path_faulty(f.target.port, f.target.out_port)) {
          ++counters.escalations;
          mark_link(r, f.target.out_port);
        }
        break;
      case FaultStructure::Channel: mark_link(r, f.target.out_port); break;
      default: break;
    }
  }

  // ---------------------------------------------------------- port control

  void cancel_port(Router& r, int p) {
    auto& ip = in(r, p);
    if (ip.comp.active) {
      auto& op = out(r, port_index(ip.comp.out));
      if (op.reserved_by == p) op.reserved_by = -1;
      ip.comp = ComputeCtx{};
    }
    if (ip.ready.active) {
      auto& op = out(r, port_index(ip.ready.out));
      if (op.reserved_by == p) op.reserved_by = -1;
      ip.ready = ReadyCtx{};
    }
  }

  void release_current(Router& r, int p) {
    auto& ip = in(r, p);
    if (!ip.has_cur) return;
    auto& owner = r.sa.owner[static_cast<std::size_t>(port_index(ip.cur_out))];
    if (owner && *owner == p) owner.reset();
    ip.has_cur = false;
  }

  void purge() {
    if (!purge_needed) return;
    purge_needed = false;
    for (auto& r : routers) {
      for (int p = 0; p < kPortCount; ++p) {
        auto& ip = in(r, p);
        if (!ip.exists) continue;
        if ((ip.comp.active && dead(ip.comp.packet)) || (ip.ready.active && dead(ip.ready.packet))) {
          cancel_port(r, p);
        }
        if (ip.rab.occupied() > 0) {
          const int before = ip.rab.occupied();
          ip.rab.purge_stored([this](const Flit& f) { return dead(f.tag.packet_id); });
          if (ip.rab.occupied() != before) ip.last_progress = cycle;
        }
        if (ip.has_cur && dead(ip.cur_packet)) release_current(r, p);
      }
    }
    for (auto& ni : nis) {
      if (ni.injecting && dead(ni.cur)) ni.injecting = false;
    }
  }

  // --------------------------------------------------------------- routing

  RoutePlan plan_route(Router& r, int p, const Flit& f) {
    RoutePlan plan;
    Direction o = f.next_port;
    const Coord3 dest = f.destination;
    auto usable = [&](Direction d) {
      if (d == Direction::Local) return !out(r, 0).marked;
      return neighbor(r.pos, d, cfg.dims).has_value() && !out(r, port_index(d)).marked;
    };
    if (cfg.routing_algorithm == RoutingAlgorithm::Xyz) {
      if (!usable(o)) return plan;
      plan.out = o;
      plan.np = o == Direction::Local ? Direction::Local
                                      : xyz_next_port(*neighbor(r.pos, o, cfg.dims), dest).chosen;
      plan.ok = true;
      return plan;
    }
    if (!usable(o)) {
      if (o == Direction::Local || dest == r.pos) return plan;
      std::optional<Direction> arrival;
      if (p != 0) arrival = direction_inverse(port_at(p));
      auto d = laft(r.pos, dest, arrival);
      if (!d) return plan;
      o = d->chosen;
      plan.nonminimal += d->minimal ? 0 : 1;
      plan.rerouted = true;
    }
    plan.out = o;
    if (o == Direction::Local) {
      plan.np = Direction::Local;
      plan.ok = true;
      return plan;
    }
    Coord3 next = *neighbor(r.pos, o, cfg.dims);
    auto d = laft(next, dest, o);
    if (!d) return plan;
    plan.np = d->chosen;
    plan.nonminimal += d->minimal ? 0 : 1;
    plan.ok = true;
    return plan;
  }

  void write_flit(InPort& ip, const Flit& f, PackedFlit w) {
    if (ip.rab.occupied() == 0) ip.last_progress = cycle;
    ip.rab.write(f, w, cycle);
  }

  // Wait-for graph over stalled input buffers: each waits on the buffer its
  // head must enter next, or on the port owning the output it needs. Every
  // cycle found loses the packet at the head of its longest-stalled member.
  void release_deadlocks() {
    const std::uint64_t limit = cfg.deadlock_release_cycles;
    const std::size_t n = routers.size() * kPortCount;
    std::vector<int> next(n, -1);
    bool any = false;
    for (std::size_t i = 0; i < routers.size(); ++i) {
      Router& r = routers[i];
      if (r.controller_failed) continue;
      for (int p = 0; p < kPortCount; ++p) {
        InPort& ip = in(r, p);
        if (!ip.exists || ip.rab.occupied() == 0 || cycle - ip.last_progress <= limit) continue;
        if (ip.comp.active) continue;
        auto h = ip.rab.head(kNever);
        if (!h) continue;
        const Flit& f = ip.rab.slot(*h).flit;
        const bool body = ip.has_cur && ip.cur_packet == f.tag.packet_id;
        const Direction o = body ? ip.cur_out : ip.ready.active ? ip.ready.out : f.next_port;
        const int oi = port_index(o);
        const int self = static_cast<int>(i) * kPortCount + p;
        if (!body) {
          const auto& own = r.sa.owner[static_cast<std::size_t>(oi)];
          if (own && *own != p) {
            next[static_cast<std::size_t>(self)] = static_cast<int>(i) * kPortCount + *own;
            any = true;
            continue;
          }
        }
        if (o == Direction::Local || out(r, oi).marked) continue;
        auto nb = neighbor(r.pos, o, cfg.dims);
        if (!nb) continue;
        next[static_cast<std::size_t>(self)] =
            cfg.dims.index(*nb) * kPortCount + port_index(direction_inverse(o));
        any = true;
      }
    }
    if (!any) return;
    std::vector<std::uint8_t> state(n, 0);  // 0 new, 1 on current walk, 2 done
    std::vector<int> walk;
    for (std::size_t start = 0; start < n; ++start) {
      if (state[start] || next[start] < 0) continue;
      walk.clear();
      int x = static_cast<int>(start);
      while (x >= 0 && state[static_cast<std::size_t>(x)] == 0) {
        state[static_cast<std::size_t>(x)] = 1;
        walk.push_back(x);
        x = next[static_cast<std::size_t>(x)];
      }
      if (x >= 0 && state[static_cast<std::size_t>(x)] == 1) {
        auto it = std::find(walk.begin(), walk.end(), x);
        InPort* victim = nullptr;
        Router* where = nullptr;
        for (; it != walk.end(); ++it) {
          Router& r = routers[static_cast<std::size_t>(*it / kPortCount)];
          InPort& ip = in(r, *it % kPortCount);
          if (!victim || ip.last_progress < victim->last_progress) {
            victim = &ip;
            where = &r;
          }
        }
        victim->last_progress = cycle;
        const std::uint64_t id = victim->rab.slot(*victim->rab.head(kNever)).flit.tag.packet_id;
        if (!dead(id)) {
          ++counters.deadlock_releases;
          log(EventKind::PacketDropped, *where, -1, id, "deadlock release");
          kill(id);
        }
      }
      for (int w : walk) state[static_cast<std::size_t>(w)] = 2;
    }
  }

  // ---------------------------------------------------------- transmission

  void transmit(Router& r, int p, int s, int o, Direction np) {
    auto& ip = in(r, p);
    auto& op = out(r, o);
    RabSlot& slot = ip.rab.slot(s);
    PackedFlit w = read_slot(r, p, s);
    w = traverse_path(r, p, o, w, slot.flit.next_port, np);
    if (o != 0) w = channel_faults(r, o, w);
    else if (op.armed_upset) w = channel_faults(r, o, w);
    if (slot.state == SlotState::Stored) {
      ip.rab.mark_in_flight(s);
      ip.last_progress = cycle;
    }
    op.arq.in_flight = true;
    op.arq.src_port = p;
    op.arq.src_slot = s;
    op.arq.tag = slot.flit.tag;
    op.arq.retransmit_pending = false;
    op.arq_np = np;
    op.ch.busy = true;
    op.ch.probe = false;
    op.ch.word = w;
    op.ch.flit = slot.flit;
    op.ch.flit.next_port = np;
    ++counters.flits_traversed;
  }

  void send_probe(Router& r, int o) {
    auto& op = out(r, o);
    const int p = op.ddrm.monitored_port;
    const int s = op.ddrm.monitored_slot;
    const auto& rab = in(r, p).rab;
    int alt = -1;
    for (int k = 1; k < rab.depth(); ++k) {
      int c = (s + k) % rab.depth();
      if (!rab.slot(c).fault_flag) {
        alt = c;
        break;
      }
    }
    PackedFlit pattern = op.probe_pending == 0 ? kProbePattern : (~kProbePattern & kFlitMask);
    PackedFlit w = pattern;
    if (alt >= 0) {
      for (const auto& f : r.faults) {
        if (f.target.kind == FaultStructure::BufferSlot && f.target.port == p && f.target.slot == alt) {
          w = apply_fault(f, w);
        }
      }
    }
    if (!r.xbar.bypassed(p, o)) {
      for (const auto& f : r.faults) {
        if (f.target.kind == FaultStructure::CrossbarPath && f.target.port == p && f.target.out_port == o) {
          w = apply_fault(f, w);
        }
      }
    }
    if (o != 0) w = channel_faults(r, o, w);
    op.ch.busy = true;
    op.ch.probe = true;
    op.ch.probe_index = op.probe_pending;
    op.ch.word = w & kFlitMask;
    op.ch.expected = pattern;
    op.probe_pending = -1;
    ++counters.ddrm_probes;
    log(EventKind::DdrmProbe, r, o, 0, "probe " + std::to_string(op.ch.probe_index));
  }

  void reset_endpoint(OutPort& op) {
    op.arq.in_flight = false;
    op.arq.arq_counter = 0;
    op.arq.retransmit_pending = false;
  }

  // Held flit after its link was given up: a header is routed again from
  // this router, anything else loses its packet.
  void handle_held(Router& r, int o) {
    auto& op = out(r, o);
    if (!op.arq.in_flight) return;
    const int p = op.arq.src_port;
    const int s = op.arq.src_slot;
    auto& ip = in(r, p);
    const RabSlot& slot = ip.rab.slot(s);
    const std::uint64_t id = op.arq.tag.packet_id;
    reset_endpoint(op);
    if (slot.state != SlotState::InFlight) return;
    if (!dead(id) && is_head(slot.flit.kind)) {
      ip.rab.revert_to_stored(s);
      cancel_port(r, p);
      release_current(r, p);
      ++counters.header_reroutes;
      return;
    }
    kill(id);
    ip.rab.release(s);
  }

  void execute(Router& r, int o, const RecoveryCommand& cmd) {
    auto& op = out(r, o);
    if (cmd.kind == RecoveryKind::None) return;
    if (cmd.kind != RecoveryKind::SendProbe) {
      recoveries.push_back({cycle, r.pos, o, cmd});
      log(EventKind::DdrmCommand, r, o, op.arq.tag.packet_id,
          std::string(to_string(cmd.kind)) + " port=" + std::string(to_string(port_at(cmd.port))) +
              " slot=" + std::to_string(cmd.slot));
    }
    switch (cmd.kind) {
      case RecoveryKind::None: break;
      case RecoveryKind::SendProbe: op.probe_pending = cmd.probe_index; break;
      case RecoveryKind::RabFlag: {
        auto& rab = in(r, cmd.port).rab;
        const auto& slot = rab.slot(cmd.slot);
        if (slot.state != SlotState::Free) kill(slot.flit.tag.packet_id);
        rab.flag(cmd.slot);
        reset_endpoint(op);
        ++counters.rab_flags;
        break;
      }
      case RecoveryKind::MapBypassAndRetransmit:
        r.xbar.map_bypass(cmd.port, o);
        op.arq.retransmit_pending = true;
        break;
      case RecoveryKind::Retransmit: op.arq.retransmit_pending = true; break;
      case RecoveryKind::KeepBypass:
        r.xbar.mark_path_faulty(cmd.port, o);
        ++counters.blod_keeps;
        break;
      case RecoveryKind::ReleaseBypassAndMarkLink:
        r.xbar.release_bypass(cmd.port, o);
        ++counters.blod_releases;
        mark_link(r, o);
        handle_held(r, o);
        break;
      case RecoveryKind::EscalateAndMarkLink:
        r.xbar.mark_path_faulty(cmd.port, o);
        ++counters.escalations;
        mark_link(r, o);
        handle_held(r, o);
        break;
    }
  }

  bool bypass_available(Router& r, int p, int o) const {
    return r.xbar.free_bypasses() > 0 || r.xbar.bypassed(p, o);
  }

  // -------------------------------------------------------------- delivery

  void accept(Router& r, int o, const UnpackResult& u) {
    auto& op = out(r, o);
    const ChannelFlit& ch = op.ch;
    in(r, op.arq.src_port).rab.release(op.arq.src_slot);
    reset_endpoint(op);
    const std::uint64_t id = ch.flit.tag.packet_id;
    if (dead(id)) return;
    if (!u.flit.wire_equal(ch.flit)) rec(id).corrupted = true;
    if (o == 0) {
      eject(r, ch.flit);
      return;
    }
    Coord3 dn = *neighbor(r.pos, port_at(o), cfg.dims);
    Router& d = router_at(dn);
    const int ip = port_index(direction_inverse(port_at(o)));
    PackedFlit stored = cfg.ecc_enabled ? u.corrected : ch.word;
    write_flit(in(d, ip), ch.flit, stored);
  }

  void eject(Router& r, const Flit& f) {
    PacketRec& p = rec(f.tag.packet_id);
    if (f.tag.seq_index != p.next_eject) {
      if (f.tag.seq_index < p.next_eject) ++counters.duplicate_ejections;
      else ++counters.order_violations;
    }
    p.next_eject = f.tag.seq_index + 1;
    if (!is_tail(f.kind)) return;
    p.latency = cycle - p.pkt.inject_cycle;
    log(EventKind::Eject, r, 0, f.tag.packet_id, p.corrupted ? "corrupted" : "ok");
    if (p.corrupted) {
      p.dead = true;
      ++counters.packets_killed;
      finish_packet(p, PacketState::Corrupted);
    } else {
      finish_packet(p, PacketState::Delivered);
    }
  }

  void deliver(Router& r, int o) {
    auto& op = out(r, o);
    op.ch.busy = false;
    const ChannelFlit& ch = op.ch;
    if (ch.probe) {
      bool err = ((ch.word ^ ch.expected) & kFlitMask) != 0;
      DdrmObservation obs;
      obs.kind = DdrmObservation::Kind::ProbeResult;
      obs.error_seen = err;
      obs.bypass_available = bypass_available(r, op.ddrm.monitored_port, o);
      execute(r, o, ddrm_step(op.ddrm, obs));
      return;
    }
    const std::uint64_t id = ch.flit.tag.packet_id;
    UnpackResult u = flit_unpack(ch.word, cfg.ecc_enabled, ch.flit.tag);
    if (u.status == DecodeStatus::Corrected) ++counters.ecc_corrections;
    if (op.ddrm.phase == DdrmPhase::BlodTrial) {
      DdrmObservation obs;
      obs.kind = DdrmObservation::Kind::TrialDelivery;
      obs.status = u.status;
      auto cmd = ddrm_step(op.ddrm, obs);
      execute(r, o, cmd);
      if (cmd.kind == RecoveryKind::KeepBypass) accept(r, o, u);
      return;
    }
    if (dead(id)) {
      in(r, op.arq.src_port).rab.release(op.arq.src_slot);
      reset_endpoint(op);
      return;
    }
    switch (arq_on_delivery_status(op.arq, u.status)) {
      case ArqAction::Release: accept(r, o, u); break;
      case ArqAction::Retransmit:
        ++counters.arq_nacks;
        log(EventKind::Nack, r, o, id);
        break;
      case ArqAction::RaiseDetected: {
        ++counters.arq_nacks;
        log(EventKind::Nack, r, o, id);
        if (!online_ddrm()) {
          kill(id);
          in(r, op.arq.src_port).rab.release(op.arq.src_slot);
          reset_endpoint(op);
          break;
        }
        ++counters.ddrm_episodes;
        log(EventKind::DdrmDetected, r, o, id,
            "port=" + std::string(to_string(port_at(op.arq.src_port))) +
                " slot=" + std::to_string(op.arq.src_slot));
        const auto& rab = in(r, op.arq.src_port).rab;
        DdrmObservation obs;
        obs.kind = DdrmObservation::Kind::Detected;
        obs.port = op.arq.src_port;
        obs.slot = op.arq.src_slot;
        obs.alternate_slot_available = rab.healthy() > 1;
        obs.bypass_available = bypass_available(r, obs.port, o);
        execute(r, o, ddrm_step(op.ddrm, obs));
        break;
      }
    }
  }

  void apply_link_hits(Router& r) {
    for (std::uint64_t sel : r.link_hits) {
      std::array<int, kPortCount> busy{};
      int n = 0;
      for (int o = 0; o < kPortCount; ++o) {
        if (out(r, o).ch.busy) busy[static_cast<std::size_t>(n++)] = o;
      }
      if (n == 0) continue;
      auto& ch = out(r, busy[sel % static_cast<std::uint64_t>(n)]).ch;
      ch.word ^= PackedFlit{1} << ((sel >> 16) % kFlitBits);
      ++counters.soft_applied;
      log(EventKind::SoftUpset, r, -1, ch.flit.tag.packet_id, "link");
    }
  }

  // ---------------------------------------------------------- router phase

  void try_ct(Router& r, int p) {
    auto& ip = in(r, p);
    ReadyCtx& rd = ip.ready;
    if (!rd.active) return;
    if (dead(rd.packet)) {
      cancel_port(r, p);
      return;
    }
    const int o = port_index(rd.out);
    auto& op = out(r, o);
    const bool head = is_head(ip.rab.slot(rd.slot).flit.kind);
    if (op.marked || !r.xbar.serviceable(p, o)) {
      if (head && o != 0) {
        cancel_port(r, p);
        release_current(r, p);
        ++counters.header_reroutes;
      } else {
        kill(rd.packet);
        cancel_port(r, p);
      }
      return;
    }
    if (op.ch.busy || op.arq.in_flight || op.ddrm.phase != DdrmPhase::Idle || op.probe_pending >= 0) return;
    if (o != 0 && !op.go) return;
    const bool tail = is_tail(ip.rab.slot(rd.slot).flit.kind);
    transmit(r, p, rd.slot, o, rd.np);
    rd.active = false;
    if (op.reserved_by == p) op.reserved_by = -1;
    if (tail) release_current(r, p);
  }

  void finalize_compute(Router& r, int p, std::optional<NpcValue> npc, std::optional<SaValue> sa) {
    auto& ip = in(r, p);
    ComputeCtx& c = ip.comp;
    if (!npc || !sa) {
      ++counters.pcr_unresolvable;
      log(EventKind::PcrUnresolvable, r, p, c.packet);
      kill(c.packet);
      cancel_port(r, p);
      return;
    }
    if (*npc != c.npc_true || *sa != c.sa_true) {
      log(EventKind::PacketDropped, r, p, c.packet, "corrupted npc/sa result");
      kill(c.packet);
      cancel_port(r, p);
      return;
    }
    ReadyCtx rd;
    rd.active = true;
    rd.slot = c.slot;
    rd.out = c.out;
    rd.np = c.head ? port_at(c.npc_true) : ip.rab.slot(c.slot).flit.next_port;
    rd.packet = c.packet;
    ip.comp = ComputeCtx{};
    ip.ready = rd;
  }

  void router_update(Router& r) {
    if (r.controller_failed) return;
    const std::uint64_t t = cycle;
    // DDRM probes and ARQ retransmissions.
    for (int o = 0; o < kPortCount; ++o) {
      auto& op = out(r, o);
      if (!op.exists || op.ch.busy) continue;
      if (op.probe_pending >= 0) {
        send_probe(r, o);
      } else if (op.arq.in_flight && op.arq.retransmit_pending) {
        const auto& slot = in(r, op.arq.src_port).rab.slot(op.arq.src_slot);
        if (slot.state != SlotState::InFlight) {
          reset_endpoint(op);
          continue;
        }
        ++counters.arq_retransmissions;
        log(EventKind::Retransmit, r, o, op.arq.tag.packet_id);
        transmit(r, op.arq.src_port, op.arq.src_slot, o, op.arq_np);
      }
    }
    const bool halted = r.halt_cycle == t;
    // Crossbar traversal of flits whose NPC/SA finished earlier.
    if (!halted) {
      for (int p = 0; p < kPortCount; ++p) {
        if (in(r, p).ready.active) try_ct(r, p);
      }
    }
    // NPC / SA.
    struct Active {
      int port;
      int instance;
      std::uint8_t npc_xor;
      std::uint8_t sa_xor;
    };
    std::array<Active, kPortCount> active{};
    int na = 0;
    std::array<RoutePlan, kPortCount> plans{};
    std::array<std::uint8_t, kPortCount> requests{};
    std::array<int, kPortCount> req_slot{};
    bool any_request = false;

    for (int p = 0; p < kPortCount; ++p) {
      auto& ip = in(r, p);
      if (!ip.exists) continue;
      if (ip.comp.active) {
        if (ip.comp.next_instance == 2 || !halted) {
          active[static_cast<std::size_t>(na++)] = {p, ip.comp.next_instance, 0, 0};
        }
        continue;
      }
      if (halted || ip.ready.active) continue;
      auto h = ip.rab.head(t);
      if (!h) continue;
      const Flit& f = ip.rab.slot(*h).flit;
      if (dead(f.tag.packet_id)) continue;
      Direction o;
      if (is_head(f.kind)) {
        RoutePlan plan = plan_route(r, p, f);
        if (!plan.ok) {
          ++counters.noroute_drops;
          log(EventKind::PacketDropped, r, p, f.tag.packet_id, "no route");
          kill(f.tag.packet_id);
          continue;
        }
        plans[static_cast<std::size_t>(p)] = plan;
        o = plan.out;
        if (r.sa.owner[static_cast<std::size_t>(port_index(o))]) continue;
      } else {
        if (!ip.has_cur || ip.cur_packet != f.tag.packet_id) {
          kill(f.tag.packet_id);
          continue;
        }
        o = ip.cur_out;
        const int oi = port_index(o);
        if (out(r, oi).marked || !r.xbar.serviceable(p, oi)) {
          kill(f.tag.packet_id);
          continue;
        }
      }
      const int oi = port_index(o);
      auto& op = out(r, oi);
      if (op.reserved_by >= 0 || op.ddrm.phase != DdrmPhase::Idle || op.probe_pending >= 0) continue;
      if (oi != 0 && !op.go) continue;
      if (!r.xbar.serviceable(p, oi)) continue;
      requests[static_cast<std::size_t>(oi)] |= static_cast<std::uint8_t>(1u << p);
      req_slot[static_cast<std::size_t>(p)] = *h;
      any_request = true;
    }
    if (any_request) {
      auto grants = sa_arbitrate(r.sa, requests);
      for (int o = 0; o < kPortCount; ++o) {
        auto g = grants[static_cast<std::size_t>(o)];
        if (!g || !((requests[static_cast<std::size_t>(o)] >> *g) & 1u)) continue;
        const int p = *g;
        auto& ip = in(r, p);
        const int s = req_slot[static_cast<std::size_t>(p)];
        const Flit& f = ip.rab.slot(s).flit;
        ComputeCtx c;
        c.active = true;
        c.slot = s;
        c.head = is_head(f.kind);
        c.out = port_at(o);
        c.packet = f.tag.packet_id;
        c.sa_true = sa_grant(c.out);
        if (c.head) {
          const RoutePlan& plan = plans[static_cast<std::size_t>(p)];
          c.npc_true = static_cast<NpcValue>(port_index(plan.np));
          c.npc_active = c.out != Direction::Local;
          PacketRec& pr = rec(c.packet);
          pr.misroutes += plan.nonminimal;
          if (plan.rerouted) ++counters.header_reroutes;
          if (pr.misroutes > cfg.misroute_budget()) {
            ++counters.misroute_drops;
            kill(c.packet);
            continue;
          }
          r.sa.owner[static_cast<std::size_t>(o)] = p;
          ip.has_cur = true;
          ip.cur_packet = c.packet;
          ip.cur_out = c.out;
        }
        out(r, o).reserved_by = p;
        ip.comp = c;
        active[static_cast<std::size_t>(na++)] = {p, 0, 0, 0};
      }
    }
    if (na == 0) return;
    // Soft upsets land on computations running in this cycle.
    for (std::uint64_t sel : r.npc_hits) {
      std::array<int, kPortCount> cand{};
      int n = 0;
      for (int i = 0; i < na; ++i) {
        if (in(r, active[static_cast<std::size_t>(i)].port).comp.npc_active) cand[static_cast<std::size_t>(n++)] = i;
      }
      if (n == 0) continue;
      auto& a = active[static_cast<std::size_t>(cand[sel % static_cast<std::uint64_t>(n)])];
      a.npc_xor ^= static_cast<std::uint8_t>(1u << ((sel >> 16) % 3));
      ++counters.soft_applied;
      log(EventKind::SoftUpset, r, a.port, in(r, a.port).comp.packet, "npc");
    }
    for (std::uint64_t sel : r.sa_hits) {
      auto& a = active[static_cast<std::size_t>(sel % static_cast<std::uint64_t>(na))];
      a.sa_xor ^= static_cast<std::uint8_t>(1u << ((sel >> 16) % 3));
      ++counters.soft_applied;
      log(EventKind::SoftUpset, r, a.port, in(r, a.port).comp.packet, "sa");
    }
    for (int i = 0; i < na; ++i) {
      const Active& a = active[static_cast<std::size_t>(i)];
      auto& ip = in(r, a.port);
      ComputeCtx& c = ip.comp;
      if (!c.active || dead(c.packet)) {
        cancel_port(r, a.port);
        continue;
      }
      NpcValue npc = c.npc_true;
      if (c.npc_active) npc = unit_value(r, a.port, PcrUnit::Npc, a.instance, npc, a.npc_xor);
      SaValue sa = unit_value(r, a.port, PcrUnit::Sa, a.instance, c.sa_true, a.sa_xor);
      c.npc.record(a.instance, npc);
      c.sa.record(a.instance, sa);
      if (!cfg.pcr_enabled) {
        finalize_compute(r, a.port, npc, sa);
        continue;
      }
      if (a.instance == 0) {
        c.next_instance = 1;
        continue;
      }
      if (a.instance == 1) {
        bool bad_npc = c.npc.compare();
        bool bad_sa = c.sa.compare();
        if (bad_npc || bad_sa) {
          c.next_instance = 2;
          r.halt_cycle = t + 1;
          ++counters.pcr_mismatches;
          log(EventKind::PcrMismatch, r, a.port, c.packet, bad_npc ? "npc" : "sa");
          continue;
        }
      }
      finalize_compute(r, a.port, c.npc.final_value(), c.sa.final_value());
      try_ct(r, a.port);
    }
  }

  // ----------------------------------------------------------------- NI

  void inject(int node) {
    NodeNi& ni = nis[static_cast<std::size_t>(node)];
    Router& r = routers[static_cast<std::size_t>(node)];
    if (!ni.injecting) {
      if (ni.next >= ni.queue.size()) return;
      std::uint64_t id = ni.queue[ni.next];
      PacketRec& p = rec(id);
      if (p.pkt.inject_cycle > cycle) return;
      ++ni.next;
      if (p.dead) return;
      Direction route = Direction::Local;
      if (p.pkt.destination != r.pos) {
        if (cfg.routing_algorithm == RoutingAlgorithm::Xyz) {
          route = xyz_next_port(r.pos, p.pkt.destination).chosen;
        } else {
          auto d = laft(r.pos, p.pkt.destination, std::nullopt);
          if (!d) {
            ++counters.noroute_drops;
            log(EventKind::PacketDropped, r, 0, id, "no route at source");
            kill(id);
            return;
          }
          route = d->chosen;
          p.misroutes += d->minimal ? 0 : 1;
        }
      }
      ni.injecting = true;
      ni.cur = id;
      ni.seq = 0;
      ni.route = route;
      p.state = PacketState::Injecting;
      log(EventKind::Inject, r, 0, id);
    }
    auto& rab = in(r, 0).rab;
    if (rab.free_healthy() == 0) return;
    PacketRec& p = rec(ni.cur);
    Flit f;
    f.kind = flit_kind_for(static_cast<int>(ni.seq), p.pkt.length);
    f.next_port = ni.route;
    f.destination = p.pkt.destination;
    f.payload = packet_payload(cfg.rng_seed, ni.cur, ni.seq);
    f.payload_ext = cfg.ecc_enabled ? 0 : packet_payload_ext(cfg.rng_seed, ni.cur, ni.seq);
    f.tag = {ni.cur, ni.seq};
    write_flit(in(r, 0), f, flit_pack(f, cfg.ecc_enabled));
    ++ni.seq;
    if (static_cast<int>(ni.seq) >= p.pkt.length) {
      ni.injecting = false;
      if (p.state == PacketState::Injecting) p.state = PacketState::InNetwork;
    }
  }

  // ----------------------------------------------------------------- cycle

  void step() {
    const std::uint64_t t = cycle;
    if (!pending_faults.empty()) {
      std::vector<HardFault> later;
      for (const auto& f : pending_faults) {
        if (f.onset_cycle <= t) activate(f);
        else later.push_back(f);
      }
      pending_faults.swap(later);
    }
    touched.clear();
    if (soft.rate > 0) {
      for (const auto& ev : sample_soft_errors(soft, cfg.dims, t)) {
        Router& r = routers[static_cast<std::size_t>(ev.router)];
        ++counters.soft_events;
        switch (ev.target) {
          case SoftTarget::NpcResult: r.npc_hits.push_back(ev.selector); break;
          case SoftTarget::SaResult: r.sa_hits.push_back(ev.selector); break;
          case SoftTarget::LinkFlit: r.link_hits.push_back(ev.selector); break;
        }
        touched.push_back(ev.router);
      }
    }
    for (int i : touched) apply_link_hits(routers[static_cast<std::size_t>(i)]);
    for (auto& r : routers) {
      for (int o = 0; o < kPortCount; ++o) {
        if (r.out[static_cast<std::size_t>(o)].ch.busy) deliver(r, o);
      }
    }
    purge();
    for (auto& r : routers) router_update(r);
    if (cfg.deadlock_release_cycles > 0 && (t & 15) == 0) release_deadlocks();
    purge();
    for (int n = 0; n < static_cast<int>(nis.size()); ++n) inject(n);
    // End-of-cycle snapshots.
    const int n = cfg.dims.node_count();
    for (int i = 0; i < n; ++i) {
      Router& r = routers[static_cast<std::size_t>(i)];
      for (int p = 0; p < kPortCount; ++p) {
        if (r.in[static_cast<std::size_t>(p)].exists) {
          free_snap[static_cast<std::size_t>(i * kPortCount + p)] =
              r.in[static_cast<std::size_t>(p)].rab.free_healthy();
        }
      }
    }
    for (auto& r : routers) {
      for (Direction d : kMeshDirections) {
        auto& op = r.out[static_cast<std::size_t>(port_index(d))];
        if (!op.exists) continue;
        Coord3 nb = *neighbor(r.pos, d, cfg.dims);
        int f = free_snap[static_cast<std::size_t>(cfg.dims.index(nb) * kPortCount +
                                                   port_index(direction_inverse(d)))];
        if (f <= cfg.stop_threshold) op.go = false;
        else if (f >= cfg.go_threshold) op.go = true;
      }
    }
    for (int i : touched) {
      Router& r = routers[static_cast<std::size_t>(i)];
      r.npc_hits.clear();
      r.sa_hits.clear();
      r.link_hits.clear();
    }
    if (dump) *dump << "== cycle " << t << '\n' << dump_state();
    ++cycle;
  }

  // ------------------------------------------------------------- sessions

  std::uint64_t schedule(std::vector<Packet> pk) {
    std::stable_sort(pk.begin(), pk.end(), [](const Packet& a, const Packet& b) {
      return a.inject_cycle < b.inject_cycle;
    });
    const std::uint64_t first = packets.size();
    for (auto& p : pk) {
      if (!cfg.dims.contains(p.source) || !cfg.dims.contains(p.destination)) {
        throw std::invalid_argument("packet endpoint outside the mesh");
      }
      if (p.length < 1) throw std::invalid_argument("packet length must be >= 1");
      p.id = packets.size();
      PacketRec r;
      r.pkt = p;
      packets.push_back(r);
      nis[static_cast<std::size_t>(cfg.dims.index(p.source))].queue.push_back(p.id);
      ++outstanding;
    }
    return first;
  }

  MetricsReport run_to_completion() {
    const std::uint64_t first = session_first;
    const std::uint64_t last = packets.size();
    const std::uint64_t start = cycle;
    const EngineCounters c0 = counters;
    std::uint64_t max_creation = cycle;
    for (std::uint64_t i = first; i < last; ++i) {
      max_creation = std::max(max_creation, packets[static_cast<std::size_t>(i)].pkt.inject_cycle);
    }
    const std::uint64_t deadline = max_creation + cfg.drain_timeout_cycles;
    while (outstanding > 0 && cycle < deadline) step();
    for (std::uint64_t i = first; i < last; ++i) {
      auto& p = packets[static_cast<std::size_t>(i)];
      if (!is_terminal_state(p.state)) kill(i, PacketState::Timeout);
    }
    purge();
    session_first = last;

    MetricsReport m;
    m.injected_packets = last - first;
    double lat_sum = 0;
    for (std::uint64_t i = first; i < last; ++i) {
      const auto& p = packets[static_cast<std::size_t>(i)];
      switch (p.state) {
        case PacketState::Delivered:
          ++m.delivered_packets;
          m.delivered_flits += static_cast<std::uint64_t>(p.pkt.length);
          lat_sum += static_cast<double>(p.latency);
          ++m.latency_histogram[p.latency / kLatencyBucket * kLatencyBucket];
          break;
        case PacketState::Corrupted: ++m.corrupted_packets; break;
        case PacketState::Timeout: ++m.timeout_packets; break;
        default: ++m.dropped_packets; break;
      }
    }
    m.lost_packets = m.dropped_packets + m.corrupted_packets + m.timeout_packets;
    m.simulation_cycles = cycle - start;
    m.average_latency = m.delivered_packets ? lat_sum / static_cast<double>(m.delivered_packets) : 0.0;
    m.throughput = m.simulation_cycles
                       ? static_cast<double>(m.delivered_flits) /
                             (static_cast<double>(m.simulation_cycles) * cfg.dims.node_count())
                       : 0.0;
    m.arrival_rate = m.injected_packets ? 100.0 * static_cast<double>(m.delivered_packets) /
                                              static_cast<double>(m.injected_packets)
                                        : 100.0;
    m.counters = counters - c0;
    return m;
  }

  std::string dump_state() const {
    std::ostringstream os;
    for (const auto& r : routers) {
      bool busy = false;
      for (const auto& ip : r.in) busy = busy || ip.rab.occupied() > 0 || ip.rab.healthy() < ip.rab.depth();
      for (const auto& op : r.out) busy = busy || op.arq.in_flight || op.ddrm.phase != DdrmPhase::Idle || op.marked;
      if (!busy && r.xbar.free_bypasses() == r.xbar.pool_size()) continue;
      os << "router " << to_string(r.pos) << (r.controller_failed ? " controller-failed" : "") << '\n';
      for (int p = 0; p < kPortCount; ++p) {
        const auto& ip = r.in[static_cast<std::size_t>(p)];
        if (!ip.exists) continue;
        os << "  in " << to_string(port_at(p)) << " [";
        for (int s = 0; s < ip.rab.depth(); ++s) {
          const auto& sl = ip.rab.slot(s);
          if (s) os << ' ';
          if (sl.fault_flag) os << 'X';
          else if (sl.state == SlotState::Free) os << '.';
          else os << (sl.state == SlotState::InFlight ? 'I' : 'S') << sl.flit.tag.packet_id << ':' << sl.flit.tag.seq_index;
        }
        os << ']';
        if (ip.has_cur) {
          os << " -> " << to_string(ip.cur_out) << " pkt " << ip.cur_packet;
        } else if (auto h = ip.rab.head(kNever)) {
          os << " wants " << to_string(ip.rab.slot(*h).flit.next_port);
        }
        os << '\n';
      }
      for (int o = 0; o < kPortCount; ++o) {
        const auto& op = r.out[static_cast<std::size_t>(o)];
        if (!op.exists) continue;
        static constexpr const char* kPhase[] = {"idle", "buffer-check", "blod-trial"};
        os << "  out " << to_string(port_at(o)) << " go=" << op.go << " arq=" << op.arq.arq_counter
           << (op.arq.in_flight ? " held" : "") << " ddrm=" << kPhase[static_cast<int>(op.ddrm.phase)]
           << (op.marked ? " marked" : "") << (r.xbar.escalated(o) ? " escalated" : "") << '\n';
      }
      os << "  blod [";
      bool first = true;
      for (const auto& b : r.xbar.pool()) {
        if (!b.in_use) continue;
        if (!first) os << ' ';
        first = false;
        os << to_string(port_at(b.in_port)) << "->" << to_string(port_at(b.out_port));
      }
      os << "]\n";
    }
    return os.str();
  }
};

// ---------------------------------------------------------------- Engine

Engine::Engine(const NetworkConfig& cfg, const FaultPlan& plan)
    : impl_(std::make_unique<EngineImpl>(cfg)) {
  plan.soft.validate();
  impl_->soft = plan.soft;
  for (const auto& f : plan.hard_faults) add_hard_fault(f);
}

Engine::~Engine() = default;
Engine::Engine(Engine&&) noexcept = default;
Engine& Engine::operator=(Engine&&) noexcept = default;

const NetworkConfig& Engine::config() const { return impl_->cfg; }
std::uint64_t Engine::cycle() const { return impl_->cycle; }

void Engine::add_hard_fault(const HardFault& f) {
  if (!impl_->cfg.dims.contains(f.target.router)) {
    throw std::invalid_argument("fault router outside the mesh: " + to_string(f.target.router));
  }
  if (f.onset_cycle <= impl_->cycle) impl_->activate(f);
  else impl_->pending_faults.push_back(f);
}

void Engine::add_soft_source(const SoftSource& s) {
  Router& r = impl_->router_at(s.target.router);
  if (s.target.kind == FaultStructure::Controller) {
    r.controller_failed = true;
    return;
  }
  ActiveFault a;
  a.target = s.target;
  a.hard = false;
  a.soft = s;
  r.faults.push_back(a);
}

void Engine::set_soft_process(const SoftErrorProcess& p) {
  p.validate();
  impl_->soft = p;
}

std::uint64_t Engine::schedule(std::vector<Packet> packets) { return impl_->schedule(std::move(packets)); }
void Engine::step() { impl_->step(); }
MetricsReport Engine::run_to_completion() { return impl_->run_to_completion(); }

void Engine::arm_link_upset(Coord3 router, Direction o, PackedFlit mask) {
  impl_->router_at(router).out[static_cast<std::size_t>(port_index(o))].armed_upset = mask & kFlitMask;
}

void Engine::arm_pcr_upset(Coord3 router, Direction in_port, PcrUnit unit, int instance,
                           std::uint8_t value) {
  impl_->router_at(router).pcr_arms.push_back({port_index(in_port), unit, instance, value});
}

void Engine::enable_event_log(bool on) { impl_->log_events = on; }
const std::vector<EngineEvent>& Engine::events() const { return impl_->events; }
void Engine::set_route_trace(std::ostream* os) { impl_->trace = os; }
void Engine::set_state_dump(std::ostream* os) { impl_->dump = os; }
std::string Engine::dump_state() const { return impl_->dump_state(); }
const EngineCounters& Engine::counters() const { return impl_->counters; }
const std::vector<RecoveryRecord>& Engine::recoveries() const { return impl_->recoveries; }

PacketState Engine::packet_state(std::uint64_t id) const {
  return impl_->packets.at(static_cast<std::size_t>(id)).state;
}

std::uint64_t Engine::packet_latency(std::uint64_t id) const {
  return impl_->packets.at(static_cast<std::size_t>(id)).latency;
}

const RabBuffer& Engine::input_buffer(Coord3 router, Direction port) const {
  return impl_->router_at(router).in[static_cast<std::size_t>(port_index(port))].rab;
}

const BlodCrossbar& Engine::crossbar(Coord3 router) const { return impl_->router_at(router).xbar; }

const DdrmState& Engine::ddrm(Coord3 router, Direction o) const {
  return impl_->router_at(router).out[static_cast<std::size_t>(port_index(o))].ddrm;
}

bool Engine::link_marked(Coord3 router, Direction o) const {
  return impl_->router_at(router).out[static_cast<std::size_t>(port_index(o))].marked;
}

bool Engine::any_ddrm_active() const {
  for (const auto& r : impl_->routers) {
    for (const auto& op : r.out) {
      if (op.ddrm.phase != DdrmPhase::Idle) return true;
    }
  }
  return false;
}

bool Engine::any_controller_failed() const {
  for (const auto& r : impl_->routers) {
    if (r.controller_failed) return true;
  }
  return false;
}

bool Engine::escalation_without_mark() const {
  for (const auto& r : impl_->routers) {
    for (int o = 0; o < kPortCount; ++o) {
      if (r.xbar.escalated(o) && !r.out[static_cast<std::size_t>(o)].marked) return true;
    }
  }
  return false;
}

bool Engine::network_empty() const {
  for (const auto& r : impl_->routers) {
    for (const auto& ip : r.in) {
      if (ip.rab.occupied() > 0) return false;
    }
    for (const auto& op : r.out) {
      if (op.ch.busy) return false;
    }
  }
  return true;
}

MetricsReport run(const NetworkConfig& cfg, const FaultPlan& plan, const TrafficSource& src) {
  Engine e(cfg, plan);
  e.schedule(gen_traffic(src, cfg));
  return e.run_to_completion();
}

// ---------------------------------------------------------------- reports

namespace {

nlohmann::json counters_json(const EngineCounters& c) {
  return {{"flits_traversed", c.flits_traversed},
          {"arq_nacks", c.arq_nacks},
          {"arq_retransmissions", c.arq_retransmissions},
          {"ecc_corrections", c.ecc_corrections},
          {"ddrm_episodes", c.ddrm_episodes},
          {"ddrm_probes", c.ddrm_probes},
          {"rab_flags", c.rab_flags},
          {"blod_keeps", c.blod_keeps},
          {"blod_releases", c.blod_releases},
          {"escalations", c.escalations},
          {"link_marks", c.link_marks},
          {"header_reroutes", c.header_reroutes},
          {"pcr_mismatches", c.pcr_mismatches},
          {"pcr_unresolvable", c.pcr_unresolvable},
          {"soft_events", c.soft_events},
          {"soft_applied", c.soft_applied},
          {"packets_killed", c.packets_killed},
          {"noroute_drops", c.noroute_drops},
          {"misroute_drops", c.misroute_drops},
          {"deadlock_releases", c.deadlock_releases},
          {"duplicate_ejections", c.duplicate_ejections},
          {"order_violations", c.order_violations}};
}

}  // namespace

std::string metrics_to_json(const MetricsReport& r) {
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [k, v] : r.latency_histogram) hist[std::to_string(k)] = v;
  nlohmann::json j = {{"injected_packets", r.injected_packets},
                      {"delivered_packets", r.delivered_packets},
                      {"lost_packets", r.lost_packets},
                      {"dropped_packets", r.dropped_packets},
                      {"corrupted_packets", r.corrupted_packets},
                      {"timeout_packets", r.timeout_packets},
                      {"delivered_flits", r.delivered_flits},
                      {"average_packet_latency", r.average_latency},
                      {"throughput", r.throughput},
                      {"arrival_rate", r.arrival_rate},
                      {"simulation_cycles", r.simulation_cycles},
                      {"latency_histogram_bucket", kLatencyBucket},
                      {"latency_histogram", hist},
                      {"counters", counters_json(r.counters)}};
  return j.dump(2);
}

std::string metrics_csv_header() {
  return "injected_packets,delivered_packets,lost_packets,dropped_packets,corrupted_packets,"
         "timeout_packets,average_packet_latency,throughput,arrival_rate,simulation_cycles,"
         "arq_retransmissions,pcr_mismatches,ddrm_episodes,rab_flags,blod_keeps,link_marks";
}

std::string metrics_csv_row(const MetricsReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << r.injected_packets << ',' << r.delivered_packets << ',' << r.lost_packets << ','
     << r.dropped_packets << ',' << r.corrupted_packets << ',' << r.timeout_packets << ','
     << r.average_latency << ',' << r.throughput << ',' << r.arrival_rate << ','
     << r.simulation_cycles << ',' << r.counters.arq_retransmissions << ','
     << r.counters.pcr_mismatches << ',' << r.counters.ddrm_episodes << ',' << r.counters.rab_flags
     << ',' << r.counters.blod_keeps << ',' << r.counters.link_marks;
  return os.str();
}

}  // namespace ftnoc
