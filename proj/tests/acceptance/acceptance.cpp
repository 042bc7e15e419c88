// Acceptance criteria AC1..AC10. Prints one PASS/FAIL line per criterion and
// exits nonzero when any fails. Arguments restrict the run, e.g. `AC2 AC7`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ftnoc/cli.hpp"
#include "ftnoc/codec.hpp"
#include "ftnoc/diagnostics.hpp"
#include "ftnoc/engine.hpp"
#include "ftnoc/mttf.hpp"
#include "ftnoc/rng.hpp"

using namespace ftnoc;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

constexpr int kSeeds = 10;

ExperimentConfig experiment(BenchmarkKind k, Dims dims) {
  ExperimentConfig c;
  c.network.dims = dims;
  c.dims_set = true;
  c.traffic.kind = k;
  c.threads = 1;
  return c;
}

struct Mean {
  double latency = 0;
  double arrival = 0;
  double throughput = 0;
};

Mean seed_mean(const ExperimentConfig& c, RunPoint p) {
  Mean m;
  for (int s = 1; s <= kSeeds; ++s) {
    p.seed = static_cast<std::uint64_t>(s);
    const auto r = run_point(c, p);
    m.latency += r.average_latency / kSeeds;
    m.arrival += r.arrival_rate / kSeeds;
    m.throughput += r.throughput / kSeeds;
  }
  return m;
}

Verdict ac1() {
  const SecdedCode& code = SecdedCode::hsiao();
  Rng rng(0xAC1);
  long singles = 0, doubles = 0, bad = 0;
  for (int w = 0; w < 256; ++w) {
    const auto data = static_cast<std::uint16_t>(rng.below(1u << 16));
    const Codeword22 cw = code.encode(data);
    for (int i = 0; i < kCodewordBits; ++i) {
      const auto d = code.decode(cw ^ (1u << i));
      ++singles;
      if (d.status != DecodeStatus::Corrected || d.data != data || d.bit_index != i) ++bad;
      for (int k = i + 1; k < kCodewordBits; ++k) {
        ++doubles;
        if (code.decode(cw ^ (1u << i) ^ (1u << k)).status != DecodeStatus::DetectedUncorrectable) ++bad;
      }
    }
  }
  return {bad == 0 && singles == 256 * 22 && doubles == 256 * 231,
          std::to_string(singles) + " single and " + std::to_string(doubles) + " double flips, " +
              std::to_string(bad) + " wrong"};
}

Verdict ac2() {
  int correct = 0, total = 0;
  std::string first_failure;
  std::string per_class;
  for (FaultStructure k : {FaultStructure::BufferSlot, FaultStructure::CrossbarPath, FaultStructure::Channel}) {
    int ok = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const auto t = ddrm_trial(k, seed);
      ++total;
      if (t.correct) {
        ++ok;
      } else if (first_failure.empty()) {
        first_failure = "; first failure: " + t.describe();
      }
    }
    correct += ok;
    per_class += std::string(per_class.empty() ? "" : " ") + std::string(to_string(k)) + "=" + std::to_string(ok);
  }
  return {correct == 300, std::to_string(correct) + "/" + std::to_string(total) + " (" + per_class + ")" +
                              first_failure};
}

NetworkConfig two_routers() {
  NetworkConfig c;
  c.dims = {2, 1, 1};
  return c;
}

Packet one_hop(int length) {
  Packet p;
  p.source = {0, 0, 0};
  p.destination = {1, 0, 0};
  p.length = length;
  return p;
}

Verdict ac3() {
  int cases = 0, bad = 0;
  // Every same-codeword bit pair on the channel of a 2-router link, hitting
  // each flit position of a 4-flit packet.
  for (int flit = 0; flit < 4; ++flit) {
    for (int cw = 0; cw < 2; ++cw) {
      for (int i = 0; i < kCodewordBits; ++i) {
        for (int k = i + 1; k < kCodewordBits; k += 5) {
          Engine e(two_routers());
          std::vector<Packet> pkts{one_hop(4)};
          e.schedule(pkts);
          while (e.counters().flits_traversed < static_cast<std::uint64_t>(flit)) e.step();
          const PackedFlit mask = (PackedFlit{1} << (cw * 22 + i)) | (PackedFlit{1} << (cw * 22 + k));
          e.arm_link_upset({0, 0, 0}, Direction::East, mask);
          const auto m = e.run_to_completion();
          ++cases;
          if (m.delivered_packets != 1 || m.corrupted_packets != 0 || m.counters.arq_retransmissions != 1 ||
              m.counters.ddrm_episodes != 0 || m.counters.ddrm_probes != 0 || m.counters.link_marks != 0 ||
              m.counters.duplicate_ejections != 0 || m.counters.order_violations != 0) {
            ++bad;
          }
        }
      }
    }
  }
  return {bad == 0, std::to_string(cases) + " double-bit upsets, " + std::to_string(bad) +
                        " without exactly one retransmission and intact delivery"};
}

Verdict ac4() {
  std::uint64_t base_latency = 0;
  {
    Engine e(two_routers());
    e.schedule({one_hop(1)});
    e.run_to_completion();
    base_latency = e.packet_latency(0);
  }
  int injected = 0, bad = 0;
  std::set<std::string> sites_hit;
  struct Site {
    Coord3 router;
    Direction port;
  };
  for (Site s : {Site{{0, 0, 0}, Direction::Local}, Site{{1, 0, 0}, Direction::West}}) {
    for (PcrUnit unit : {PcrUnit::Npc, PcrUnit::Sa}) {
      for (int instance : {0, 1}) {
        for (int value = 0; value < 8; ++value) {
          Engine e(two_routers());
          e.enable_event_log(true);
          e.schedule({one_hop(1)});
          e.arm_pcr_upset(s.router, s.port, unit, instance, static_cast<std::uint8_t>(value));
          const auto m = e.run_to_completion();
          const bool mismatch = m.counters.pcr_mismatches > 0;
          if (!mismatch) {
            // The armed value equalled the error-free result.
            if (e.packet_latency(0) != base_latency || m.delivered_packets != 1) ++bad;
            continue;
          }
          ++injected;
          sites_hit.insert(std::to_string(s.router.x) + (unit == PcrUnit::Npc ? "npc" : "sa") + std::to_string(instance));
          if (m.counters.pcr_mismatches != 1 || m.counters.pcr_unresolvable != 0 || m.delivered_packets != 1 ||
              m.corrupted_packets != 0 || e.packet_latency(0) != base_latency + 1) {
            ++bad;
          }
        }
      }
    }
  }
  return {bad == 0 && injected > 0,
          std::to_string(injected) + " effective upsets over " + std::to_string(sites_hit.size()) +
              " (router, unit, instance) sites, baseline latency " + std::to_string(base_latency) + ", " +
              std::to_string(bad) + " deviations"};
}

Verdict ac5() {
  const auto c = experiment(BenchmarkKind::Transpose, {4, 4, 4});
  RunPoint p{BenchmarkKind::Transpose, Variant::Baseline, 0, 0, 1};
  const auto base = run_point(c, p);
  p.variant = Variant::Fto3d;
  const auto fto = run_point(c, p);
  const double rel = std::abs(fto.average_latency - base.average_latency) / base.average_latency;
  return {rel <= 0.01, "baseline " + fmt(base.average_latency) + " vs 3d-fto " + fmt(fto.average_latency) +
                           " cycles (" + fmt(rel * 100) + "% apart)"};
}

Verdict ac6() {
  const auto c = experiment(BenchmarkKind::Transpose, {4, 4, 4});
  const double base = seed_mean(c, {BenchmarkKind::Transpose, Variant::Baseline, 0, 0, 1}).latency;
  bool pass = true;
  std::string detail = "baseline " + fmt(base);
  for (Variant v : {Variant::Set, Variant::Feto}) {
    double prev = 0;
    detail += "; " + std::string(to_string(v));
    for (double rate : {0.0, 10.0, 20.0, 33.0}) {
      const double lat = seed_mean(c, {BenchmarkKind::Transpose, v, 0, rate, 1}).latency;
      const double over = (lat / base - 1) * 100;
      detail += " " + fmt(rate, 0) + "%:" + fmt(lat) + "(+" + fmt(over, 1) + "%)";
      if (rate == 0 && (over < 5 || over > 40)) pass = false;
      if (rate > 0 && lat < prev) pass = false;
      prev = lat;
    }
  }
  return {pass, detail};
}

Verdict ac7() {
  const auto uni = experiment(BenchmarkKind::Uniform, {5, 5, 4});
  const double target[] = {100, 100, 99, 99, 97};
  const double rates[] = {1, 5, 10, 15, 20};
  bool pass = true;
  std::string detail = "uniform";
  for (int i = 0; i < 5; ++i) {
    const double a = seed_mean(uni, {BenchmarkKind::Uniform, Variant::Feto, rates[i], 0, 1}).arrival;
    detail += " " + fmt(rates[i], 0) + "%:" + fmt(a);
    if (std::abs(a - target[i]) > 4.0) pass = false;
  }
  const auto tr = experiment(BenchmarkKind::Transpose, {5, 5, 4});
  const double a = seed_mean(tr, {BenchmarkKind::Transpose, Variant::Feto, 20, 0, 1}).arrival;
  detail += "; transpose 20%:" + fmt(a);
  if (a < 94.0) pass = false;
  return {pass, detail};
}

Verdict ac8() {
  bool pass = true;
  std::string detail;
  for (BenchmarkKind k : {BenchmarkKind::Transpose, BenchmarkKind::Uniform, BenchmarkKind::Matrix,
                          BenchmarkKind::Hotspot10}) {
    const auto c = experiment(k, default_dims(k));
    const double t0 = seed_mean(c, {k, Variant::Fto3d, 0, 0, 1}).throughput;
    const double t33 = seed_mean(c, {k, Variant::Fto3d, 33, 0, 1}).throughput;
    const double kept = t33 / t0 * 100;
    detail += std::string(detail.empty() ? "" : " ") + std::string(to_string(k)) + ":" + fmt(kept, 1) + "%";
    if (kept < 50.0) pass = false;
  }
  return {pass, "throughput retained at 33% " + detail};
}

Verdict ac9() {
  ExperimentConfig c;
  c.mttf.experiments = 1000;
  c.threads = 1;
  const auto cells = run_mttf_table(c);
  double hard_flat = 0, hard_weighted = 0, soft_flat = 0, soft_weighted = 0;
  bool all_above_one = true;
  std::string detail;
  for (const auto& cell : cells) {
    const bool hard = cell.fault_type == FaultType::Hard;
    const bool flat = cell.distribution == FaultDistribution::Flat;
    (hard ? (flat ? hard_flat : hard_weighted) : (flat ? soft_flat : soft_weighted)) = cell.improvement;
    if (!(cell.improvement > 1.0)) all_above_one = false;
    detail += std::string(detail.empty() ? "" : " ") + std::string(to_string(cell.fault_type)) + "/" +
              std::string(to_string(cell.distribution)) + ":" + fmt(cell.baseline.aftf) + "->" +
              fmt(cell.protected_system.aftf) + "(x" + fmt(cell.improvement) + ")";
  }
  const bool pass = cells.size() == 4 && all_above_one && hard_weighted >= hard_flat && soft_weighted >= soft_flat;
  return {pass, detail};
}

Verdict ac10() {
  struct Case {
    BenchmarkKind k;
    Variant v;
    double hard;
    double soft;
  };
  const Case cases[] = {
      {BenchmarkKind::Uniform, Variant::Feto, 20, 33}, {BenchmarkKind::Transpose, Variant::Fto3d, 33, 0},
      {BenchmarkKind::Hotspot10, Variant::Set, 10, 20}, {BenchmarkKind::Matrix, Variant::Baseline, 10, 10},
      {BenchmarkKind::Pip, Variant::Feto, 33, 33},
  };
  int runs = 0, nondeterministic = 0, violations = 0;
  for (const auto& cs : cases) {
    for (std::uint64_t seed : {1u, 2u}) {
      auto c = experiment(cs.k, default_dims(cs.k));
      if (cs.k == BenchmarkKind::Uniform || cs.k == BenchmarkKind::Hotspot10) c.traffic.total_packets = 2000;
      const RunPoint p{cs.k, cs.v, cs.hard, cs.soft, seed};
      const auto a = run_point(c, p);
      const auto b = run_point(c, p);
      ++runs;
      if (!(a == b)) ++nondeterministic;
      if (a.injected_packets != a.delivered_packets + a.lost_packets || a.counters.duplicate_ejections != 0 ||
          a.counters.order_violations != 0) {
        ++violations;
      }
    }
  }
  return {nondeterministic == 0 && violations == 0,
          std::to_string(runs) + " replayed runs, " + std::to_string(nondeterministic) + " diverged, " +
              std::to_string(violations) + " conservation violations"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4}, {"AC5", ac5},
      {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9}, {"AC10", ac10},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.contains(name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << " [" << fmt(secs, 1) << " s]"
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
