#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ftnoc/core_model.hpp"
#include "ftnoc/router.hpp"
#include "ftnoc/rng.hpp"

namespace ftnoc {

enum class FaultStructure : std::uint8_t { BufferSlot, CrossbarPath, Channel, NpcUnit, SaUnit, Controller };

std::string_view to_string(FaultStructure s);
std::optional<FaultStructure> parse_fault_structure(std::string_view s);

/// Where a fault sits. BufferSlot uses (port, slot); CrossbarPath uses
/// (port -> out_port); Channel uses out_port (a mesh direction); NpcUnit and
/// SaUnit use the input port they serve.
struct FaultTarget {
  FaultStructure kind = FaultStructure::BufferSlot;
  Coord3 router{};
  int port = 0;
  int slot = 0;
  int out_port = 0;

  bool operator==(const FaultTarget&) const = default;
};

std::string to_string(const FaultTarget& t);

enum class StuckModel : std::uint8_t { StuckAt0, StuckAt1 };

/// NPC and SA results are 3-bit latches.
inline constexpr std::uint64_t kUnitResultMask = 0x7;

struct HardFault {
  FaultTarget target{};
  StuckModel model = StuckModel::StuckAt0;
  std::uint64_t mask = 0;  // affected wires: 44-bit datapath or 3-bit unit result
  std::uint64_t onset_cycle = 0;

  StuckAt stuck() const { return {mask, model == StuckModel::StuckAt1}; }
  bool operator==(const HardFault&) const = default;
};

/// Single-bit stuck-at fault, bit in [0, 44).
HardFault stuck_bit_fault(const FaultTarget& t, StuckModel m, int bit, std::uint64_t onset = 0);

enum class SoftTarget : std::uint8_t { NpcResult, SaResult, LinkFlit };

struct SoftErrorProcess {
  double rate = 0.0;  // expected upsets per cycle, network-wide
  std::array<double, 3> target_mix{1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument on a negative rate or bad weights.
  void validate() const;
  bool operator==(const SoftErrorProcess&) const = default;
};

struct SoftErrorEvent {
  std::uint64_t cycle = 0;
  int router = 0;  // node index
  SoftTarget target = SoftTarget::LinkFlit;
  std::uint64_t selector = 0;  // picks the instance / channel / bit

  bool operator==(const SoftErrorEvent&) const = default;
};

/// Independent Bernoulli trials per cycle: trial k fires when its uniform
/// draw is below rate - k, so event sets nest across rates for one seed.
std::vector<SoftErrorEvent> sample_soft_errors(const SoftErrorProcess& proc, const Dims& dims,
                                               std::uint64_t cycle);

/// Recurring upset source pinned to one structure: fires with
/// `probability` per cycle.
struct SoftSource {
  FaultTarget target{};
  double probability = 0.02;
  std::uint64_t seed = 1;

  bool fires(std::uint64_t cycle) const {
    return to_unit(hash_mix(seed, cycle, 0x50F7)) < probability;
  }
  std::uint64_t selector(std::uint64_t cycle) const { return hash_mix(seed, cycle, 0x5E1); }
  bool operator==(const SoftSource&) const = default;
};

enum class FaultDistribution : std::uint8_t { Datapath, Flat, Weighted };

std::string_view to_string(FaultDistribution d);
std::optional<FaultDistribution> parse_distribution(std::string_view s);

/// Share of draws landing on controller/management logic.
double controller_share(FaultDistribution d);

/// Fault-tolerance-covered structures of one router: buffer slots, crossbar
/// paths (in != out), mesh channels, NPC and SA units of existing ports.
std::vector<FaultTarget> router_structures(Coord3 router, const Dims& dims, int buffer_depth);

/// Draws one target. Datapath picks a class among buffer slot / crossbar
/// path / channel, then an instance; Flat and Weighted pick the controller
/// with controller_share() and otherwise an instance of router_structures().
FaultTarget draw_target(Coord3 router, const Dims& dims, int buffer_depth, FaultDistribution dist,
                        Rng& rng);

/// Random stuck mask: `bits` distinct wires inside one codeword for
/// datapath targets, inside the 3-bit latch for NPC/SA units.
std::uint64_t draw_stuck_mask(FaultStructure kind, int bits, Rng& rng);

HardFault draw_hard_fault(Coord3 router, const Dims& dims, int buffer_depth, FaultDistribution dist,
                          int stuck_bits, Rng& rng);

struct FaultPlan {
  double hard_fault_router_percentage = 0.0;
  FaultDistribution distribution = FaultDistribution::Datapath;
  int stuck_bits = 2;
  std::vector<HardFault> hard_faults;
  SoftErrorProcess soft{};
  std::uint64_t seed = 1;

  bool operator==(const FaultPlan&) const = default;
};

/// ceil(percentage/100 * nodes) distinct routers, one fault each.
int faulty_router_count(double percentage, int node_count);

/// Throws std::invalid_argument when percentage is outside [0, 100].
FaultPlan plan_hard_faults(const NetworkConfig& cfg, double percentage, FaultDistribution dist,
                           std::uint64_t seed, int stuck_bits = 2);

std::string fault_plan_to_json(const FaultPlan& plan);
/// Throws std::invalid_argument with the offending field on malformed input.
FaultPlan fault_plan_from_json(std::string_view text);

}  // namespace ftnoc
