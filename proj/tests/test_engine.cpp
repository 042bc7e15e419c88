#include <doctest.h>

#include <set>

#include "ftnoc/engine.hpp"

using namespace ftnoc;

namespace {

NetworkConfig pair_mesh(bool pcr) {
  NetworkConfig c;
  c.dims = {2, 1, 1};
  c.pcr_enabled = pcr;
  return c;
}

Packet one_hop(int length = 1) {
  Packet p;
  p.source = {0, 0, 0};
  p.destination = {1, 0, 0};
  p.length = length;
  return p;
}

PackedFlit bits(std::initializer_list<int> b) {
  PackedFlit m = 0;
  for (int i : b) m |= PackedFlit{1} << i;
  return m;
}

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("one-hop single-flit latency") {
  for (bool pcr : {false, true}) {
    Engine e(pair_mesh(pcr));
    e.schedule({one_hop()});
    const auto m = e.run_to_completion();
    CHECK(e.packet_state(0) == PacketState::Delivered);
    CHECK(e.packet_latency(0) == 6);
    CHECK(m.arrival_rate == doctest::Approx(100.0));
    CHECK(e.network_empty());
  }
}

TEST_CASE("an empty schedule finishes immediately") {
  Engine e(pair_mesh(true));
  const auto m = e.run_to_completion();
  CHECK(m.injected_packets == 0);
  CHECK(m.delivered_packets == 0);
  CHECK(e.network_empty());
}

TEST_CASE("single-bit link upset is corrected in place") {
  Engine e(pair_mesh(true));
  e.arm_link_upset({0, 0, 0}, Direction::East, bits({9}));
  e.schedule({one_hop(4)});
  const auto m = e.run_to_completion();
  CHECK(m.delivered_packets == 1);
  CHECK(m.corrupted_packets == 0);
  CHECK(m.counters.ecc_corrections == 1);
  CHECK(m.counters.arq_retransmissions == 0);
  CHECK(m.counters.ddrm_episodes == 0);
}

TEST_CASE("double-bit transient link upset costs exactly one retransmission") {
  // Both flipped bits sit in the same 22-bit codeword.
  for (int a = 0; a < 44; a += 5) {
    const int b = a < 22 ? (a + 3) % 22 : 22 + (a - 22 + 3) % 22;
    Engine e(pair_mesh(true));
    e.arm_link_upset({0, 0, 0}, Direction::East, bits({a, b}));
    e.schedule({one_hop(4)});
    const auto m = e.run_to_completion();
    CAPTURE(a);
    CHECK(m.delivered_packets == 1);
    CHECK(m.corrupted_packets == 0);
    CHECK(m.counters.arq_retransmissions == 1);
    CHECK(m.counters.ddrm_episodes == 0);
    CHECK(m.counters.link_marks == 0);
  }
}

TEST_CASE("PCR outvotes one faulty instance at the price of one cycle") {
  for (PcrUnit unit : {PcrUnit::Npc, PcrUnit::Sa}) {
    for (int instance : {0, 1}) {
      Engine e(pair_mesh(true));
      e.arm_pcr_upset({0, 0, 0}, Direction::Local, unit, instance, 6);
      e.schedule({one_hop()});
      const auto m = e.run_to_completion();
      CAPTURE(instance);
      CHECK(m.delivered_packets == 1);
      CHECK(m.counters.pcr_mismatches == 1);
      CHECK(m.counters.pcr_unresolvable == 0);
      CHECK(e.packet_latency(0) == 7);
    }
  }
}

TEST_CASE("a buffer-slot fault is flagged and traffic keeps flowing") {
  NetworkConfig c;
  c.dims = {3, 3, 3};
  FaultPlan plan;
  FaultTarget t;
  t.kind = FaultStructure::BufferSlot;
  t.router = {1, 1, 1};
  t.port = port_index(Direction::West);
  t.slot = 2;
  plan.hard_faults.push_back(stuck_bit_fault(t, StuckModel::StuckAt1, 10));
  plan.hard_faults.back().mask |= PackedFlit{1} << 12;
  Engine e(c, plan);
  std::vector<Packet> pkts;
  for (int i = 0; i < 24; ++i) {
    Packet p;
    p.source = {0, 1, 1};
    p.destination = {2, 1, 1};
    p.length = 4;
    p.inject_cycle = static_cast<std::uint64_t>(i) * 8;
    pkts.push_back(p);
  }
  e.schedule(pkts);
  const auto m = e.run_to_completion();
  // The packet that held the faulty slot when it was detected is dropped.
  CHECK(m.delivered_packets + m.dropped_packets == 24);
  CHECK(m.dropped_packets <= 1);
  CHECK(e.input_buffer({1, 1, 1}, Direction::West).slot(2).fault_flag);
  bool rab = false;
  for (const auto& r : e.recoveries()) {
    if (r.command.kind == RecoveryKind::RabFlag) {
      rab = true;
      CHECK(r.router == Coord3{1, 1, 1});
      CHECK(r.command.port == port_index(Direction::West));
      CHECK(r.command.slot == 2);
    }
  }
  CHECK(rab);
}

TEST_CASE("fault-free traffic is delivered in full") {
  NetworkConfig c;
  c.dims = {3, 3, 3};
  TrafficSource s;
  s.total_packets = 300;
  s.seed = 3;
  const auto m = run(c, {}, s);
  CHECK(m.injected_packets == 300);
  CHECK(m.delivered_packets == 300);
  CHECK(m.arrival_rate == doctest::Approx(100.0));
  CHECK(m.counters.arq_retransmissions == 0);
  CHECK(m.counters.ddrm_episodes == 0);
}

TEST_CASE("packet conservation and determinism under faults") {
  NetworkConfig c;
  c.dims = {3, 3, 3};
  TrafficSource s;
  s.total_packets = 400;
  s.interval_cycles = 60;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    FaultPlan plan = plan_hard_faults(c, 20.0, FaultDistribution::Datapath, seed, 2);
    plan.soft.rate = 0.10;
    plan.soft.seed = seed;
    s.seed = seed;
    c.rng_seed = seed;
    const auto a = run(c, plan, s);
    const auto b = run(c, plan, s);
    CAPTURE(seed);
    CHECK(a == b);
    CHECK(a.injected_packets == 400);
    CHECK(a.delivered_packets + a.lost_packets == a.injected_packets);
    CHECK(a.lost_packets == a.dropped_packets + a.corrupted_packets + a.timeout_packets);
    CHECK(a.counters.duplicate_ejections == 0);
    CHECK(a.counters.order_violations == 0);
  }
}

TEST_CASE("event log and metrics output") {
  Engine e(pair_mesh(true));
  e.enable_event_log(true);
  e.schedule({one_hop(2)});
  const auto m = e.run_to_completion();
  std::set<EventKind> kinds;
  for (const auto& ev : e.events()) kinds.insert(ev.kind);
  CHECK(kinds.contains(EventKind::Inject));
  CHECK(kinds.contains(EventKind::Eject));
  CHECK(metrics_csv_row(m).find('\n') == std::string::npos);
  CHECK(metrics_to_json(m).find("\"delivered_packets\"") != std::string::npos);
}

TEST_CASE("payload generator is a pure function") {
  CHECK(packet_payload(1, 2, 3) == packet_payload(1, 2, 3));
  CHECK(packet_payload(1, 2, 3) != packet_payload(1, 2, 4));
}

}
