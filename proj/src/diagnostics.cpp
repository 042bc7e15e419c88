#include "ftnoc/diagnostics.hpp"

#include <sstream>
#include <stdexcept>
#include <vector>

#include "ftnoc/rng.hpp"

namespace ftnoc {

namespace {

constexpr Dims kTrialDims{3, 3, 3};
constexpr int kTrialPackets = 48;
constexpr int kTrialLength = 4;
constexpr std::uint64_t kTrialGap = 8;
constexpr std::uint64_t kTrialCycles = 4000;
constexpr int kMaxRedraws = 64;

bool is_positive(Direction d) {
  return d == Direction::East || d == Direction::North || d == Direction::Up;
}

// Turns that minimal negative-first routing takes deterministically on a
// straight two-hop route through the router.
bool forced_turn(int in_port, int out_port) {
  if (in_port == 0 || out_port == 0) return true;
  const Direction moving = direction_inverse(port_at(in_port));
  const Direction leaving = port_at(out_port);
  if (moving == leaving) return true;
  return !is_positive(moving) && is_positive(leaving);
}

std::optional<Coord3> end_of(Coord3 router, int port) {
  if (port == 0) return router;
  return neighbor(router, port_at(port), kTrialDims);
}

std::vector<int> open_ports(Coord3 router, bool with_local) {
  std::vector<int> v;
  for (int p = with_local ? 0 : 1; p < kPortCount; ++p) {
    if (end_of(router, p)) v.push_back(p);
  }
  return v;
}

template <class T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[static_cast<std::size_t>(rng.below(v.size()))];
}

}  // namespace

std::string DdrmTrial::describe() const {
  std::ostringstream os;
  os << to_string(fault.target) << " expected=" << to_string(expected) << " observed=";
  if (observed) {
    os << to_string(observed->command.kind) << "@" << to_string(observed->router) << "/"
       << to_string(port_at(observed->out_port)) << " port=" << observed->command.port
       << " slot=" << observed->command.slot;
  } else {
    os << "none";
  }
  os << " cycles=" << cycles << " redraws=" << redraws;
  return os.str();
}

DdrmTrial ddrm_trial(FaultStructure kind, std::uint64_t seed) {
  Rng rng(hash_mix(seed, static_cast<std::uint64_t>(kind), 0xDD12));
  DdrmTrial t;
  FaultTarget& tg = t.fault.target;
  tg.kind = kind;
  tg.router = {rng.below_int(kTrialDims.x), rng.below_int(kTrialDims.y), rng.below_int(kTrialDims.z)};
  Coord3 src{};
  Coord3 dst{};
  switch (kind) {
    case FaultStructure::BufferSlot: {
      tg.port = pick(open_ports(tg.router, true), rng);
      tg.slot = rng.below_int(NetworkConfig{}.buffer_depth);
      src = *end_of(tg.router, tg.port);
      dst = tg.port == 0 ? *end_of(tg.router, pick(open_ports(tg.router, false), rng)) : tg.router;
      t.expected = RecoveryKind::RabFlag;
      break;
    }
    case FaultStructure::CrossbarPath: {
      std::vector<std::pair<int, int>> paths;
      for (int p : open_ports(tg.router, true)) {
        for (int o : open_ports(tg.router, true)) {
          if (p != o && forced_turn(p, o)) paths.emplace_back(p, o);
        }
      }
      std::tie(tg.port, tg.out_port) = pick(paths, rng);
      src = *end_of(tg.router, tg.port);
      dst = *end_of(tg.router, tg.out_port);
      t.expected = RecoveryKind::KeepBypass;
      break;
    }
    case FaultStructure::Channel: {
      tg.out_port = pick(open_ports(tg.router, false), rng);
      src = tg.router;
      dst = *end_of(tg.router, tg.out_port);
      t.expected = RecoveryKind::ReleaseBypassAndMarkLink;
      break;
    }
    default:
      throw std::invalid_argument("ddrm_trial: class must be buffer slot, crossbar path or channel");
  }
  NetworkConfig cfg;
  cfg.dims = kTrialDims;
  std::vector<Packet> pkts;
  for (int i = 0; i < kTrialPackets; ++i) {
    Packet p;
    p.source = src;
    p.destination = dst;
    p.length = kTrialLength;
    p.inject_cycle = static_cast<std::uint64_t>(i) * kTrialGap;
    pkts.push_back(p);
  }
  // Stuck bits that only ever flip one bit of a codeword are corrected by
  // ECC for good; such draws are replaced.
  std::optional<Engine> run;
  for (t.redraws = 0; t.redraws < kMaxRedraws; ++t.redraws) {
    t.fault.model = rng.below(2) ? StuckModel::StuckAt1 : StuckModel::StuckAt0;
    t.fault.mask = draw_stuck_mask(kind, 2, rng);
    cfg.rng_seed = rng.next();
    run.emplace(cfg);
    Engine& e = *run;
    e.add_hard_fault(t.fault);
    e.schedule(pkts);
    while (e.cycle() < kTrialCycles && !t.observed) {
      e.step();
      for (const auto& r : e.recoveries()) {
        if (is_terminal(r.command.kind)) {
          t.observed = r;
          break;
        }
      }
      if (e.network_empty() && e.cycle() > kTrialPackets * kTrialGap) break;
    }
    if (t.observed || e.counters().ddrm_episodes > 0) break;
  }
  Engine& e = *run;
  t.cycles = e.cycle();
  if (!t.observed || t.observed->command.kind != t.expected || t.observed->router != tg.router) {
    return t;
  }
  const RecoveryRecord& o = *t.observed;
  switch (kind) {
    case FaultStructure::BufferSlot:
      t.correct = o.command.port == tg.port && o.command.slot == tg.slot;
      break;
    case FaultStructure::CrossbarPath:
      t.correct = o.command.port == tg.port && o.out_port == tg.out_port;
      break;
    default:
      t.correct = o.out_port == tg.out_port && e.link_marked(tg.router, port_at(tg.out_port));
      break;
  }
  return t;
}

}  // namespace ftnoc
