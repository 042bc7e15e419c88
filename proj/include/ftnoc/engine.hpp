#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ftnoc/codec.hpp"
#include "ftnoc/core_model.hpp"
#include "ftnoc/fault_injection.hpp"
#include "ftnoc/router.hpp"
#include "ftnoc/routing.hpp"
#include "ftnoc/traffic.hpp"

namespace ftnoc {

struct EngineCounters {
  std::uint64_t flits_traversed = 0;
  std::uint64_t arq_nacks = 0;
  std::uint64_t arq_retransmissions = 0;
  std::uint64_t ecc_corrections = 0;
  std::uint64_t ddrm_episodes = 0;
  std::uint64_t ddrm_probes = 0;
  std::uint64_t rab_flags = 0;
  std::uint64_t blod_keeps = 0;
  std::uint64_t blod_releases = 0;
  std::uint64_t escalations = 0;
  std::uint64_t link_marks = 0;
  std::uint64_t header_reroutes = 0;
  std::uint64_t pcr_mismatches = 0;
  std::uint64_t pcr_unresolvable = 0;
  std::uint64_t soft_events = 0;
  std::uint64_t soft_applied = 0;
  std::uint64_t packets_killed = 0;
  std::uint64_t noroute_drops = 0;
  std::uint64_t misroute_drops = 0;
  std::uint64_t deadlock_releases = 0;
  std::uint64_t duplicate_ejections = 0;
  std::uint64_t order_violations = 0;

  bool operator==(const EngineCounters&) const = default;
  EngineCounters operator-(const EngineCounters& o) const;
};

struct MetricsReport {
  std::uint64_t injected_packets = 0;
  std::uint64_t delivered_packets = 0;
  std::uint64_t lost_packets = 0;
  std::uint64_t dropped_packets = 0;
  std::uint64_t corrupted_packets = 0;
  std::uint64_t timeout_packets = 0;
  std::uint64_t delivered_flits = 0;
  double average_latency = 0.0;  // cycles, tail ejection - header creation
  double throughput = 0.0;       // delivered flits / cycle / node
  double arrival_rate = 0.0;     // percent
  std::uint64_t simulation_cycles = 0;
  std::map<std::uint64_t, std::uint64_t> latency_histogram;  // bucket start -> count
  EngineCounters counters{};

  bool operator==(const MetricsReport&) const = default;
};

inline constexpr std::uint64_t kLatencyBucket = 10;

std::string metrics_to_json(const MetricsReport& r);
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& r);

enum class PacketState : std::uint8_t { Queued, Injecting, InNetwork, Delivered, Dropped, Corrupted, Timeout };

std::string_view to_string(PacketState s);

enum class EventKind : std::uint8_t {
  Inject,
  Eject,
  Nack,
  Retransmit,
  DdrmDetected,
  DdrmProbe,
  DdrmCommand,
  LinkMarked,
  PcrMismatch,
  PcrUnresolvable,
  SoftUpset,
  PacketDropped,
  FaultActivated,
};

std::string_view to_string(EventKind k);

struct EngineEvent {
  std::uint64_t cycle = 0;
  EventKind kind = EventKind::Inject;
  Coord3 router{};
  int port = -1;
  std::uint64_t packet_id = 0;
  std::string detail;
};

enum class PcrUnit : std::uint8_t { Npc, Sa };

/// A DDRM command other than a probe request, as executed.
struct RecoveryRecord {
  std::uint64_t cycle = 0;
  Coord3 router{};
  int out_port = 0;
  RecoveryCommand command{};
};

struct EngineImpl;

/// Cycle-driven network simulator. Per cycle: channel delivery (ECC decode,
/// buffer write or NACK), router updates (DDRM, crossbar traversal, NPC/SA),
/// NI injection, end-of-cycle stop-go and congestion snapshots.
class Engine {
 public:
  explicit Engine(const NetworkConfig& cfg, const FaultPlan& plan = {});
  ~Engine();
  Engine(Engine&&) noexcept;
  Engine& operator=(Engine&&) noexcept;

  const NetworkConfig& config() const;
  std::uint64_t cycle() const;

  void add_hard_fault(const HardFault& f);
  void add_soft_source(const SoftSource& s);
  void set_soft_process(const SoftErrorProcess& p);

  /// Queues packets for injection at their (absolute) inject_cycle. Ids are
  /// reassigned densely; returns the id given to the first packet.
  std::uint64_t schedule(std::vector<Packet> packets);

  void step();
  /// Steps until every scheduled packet resolves, or until
  /// drain_timeout_cycles after the last creation; the rest are timed out.
  MetricsReport run_to_completion();

  // Test hooks. Both fire once, on the next matching opportunity.
  void arm_link_upset(Coord3 router, Direction out, PackedFlit mask);
  void arm_pcr_upset(Coord3 router, Direction in_port, PcrUnit unit, int instance,
                     std::uint8_t value);

  void enable_event_log(bool on);
  const std::vector<EngineEvent>& events() const;
  void set_route_trace(std::ostream* os);
  void set_state_dump(std::ostream* os);

  std::string dump_state() const;

  // Inspection.
  const EngineCounters& counters() const;
  const std::vector<RecoveryRecord>& recoveries() const;
  PacketState packet_state(std::uint64_t id) const;
  std::uint64_t packet_latency(std::uint64_t id) const;
  const RabBuffer& input_buffer(Coord3 router, Direction port) const;
  const BlodCrossbar& crossbar(Coord3 router) const;
  const DdrmState& ddrm(Coord3 router, Direction out) const;
  bool link_marked(Coord3 router, Direction out) const;
  bool any_ddrm_active() const;
  bool any_controller_failed() const;
  /// True when some output escalation flag has no LAFT link mark.
  bool escalation_without_mark() const;
  bool network_empty() const;

 private:
  std::unique_ptr<EngineImpl> impl_;
};

MetricsReport run(const NetworkConfig& cfg, const FaultPlan& plan, const TrafficSource& src);

/// Deterministic payload of (seed, packet, seq): 18 data bits plus 12 ext bits.
std::uint32_t packet_payload(std::uint64_t seed, std::uint64_t packet_id, std::uint32_t seq);
std::uint16_t packet_payload_ext(std::uint64_t seed, std::uint64_t packet_id, std::uint32_t seq);

}  // namespace ftnoc
