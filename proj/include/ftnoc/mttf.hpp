#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ftnoc/core_model.hpp"
#include "ftnoc/engine.hpp"
#include "ftnoc/fault_injection.hpp"

namespace ftnoc {

enum class FaultType : std::uint8_t { Hard, Soft };
enum class SystemVariant : std::uint8_t { Baseline, Sher3dr };

std::string_view to_string(FaultType t);
std::string_view to_string(SystemVariant v);
std::optional<FaultType> parse_fault_type(std::string_view s);
std::optional<SystemVariant> parse_system_variant(std::string_view s);

struct MttfCampaign {
  int experiments = 1000;
  FaultType fault_type = FaultType::Hard;
  FaultDistribution distribution = FaultDistribution::Flat;
  SystemVariant variant = SystemVariant::Sher3dr;
  std::uint64_t seed = 1;
  double lambda_raw = 1.0;
  int cap = 10000;
  Dims dims{3, 3, 3};
  double soft_probability = 0.02;  // per-cycle firing chance of a recurring upset
  int stuck_bits = 2;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Network the campaign runs on: Baseline has PCR, ECC and hard-fault
/// tolerance off; SHER-3DR has all three on.
NetworkConfig mttf_network(const MttfCampaign& c);

/// Faults are injected into the central router of the mesh.
Coord3 mttf_fault_router(const Dims& dims);

/// One 4-flit probe per crossbar path (in != out, Local included) of
/// `router`, from the router behind `in` to the router behind `out`.
std::vector<Packet> health_probe_workload(const Dims& dims, Coord3 router, std::uint64_t start);

struct HealthResult {
  bool healthy = false;
  int rounds = 0;
  std::uint64_t probes = 0;
  std::uint64_t delivered = 0;
  std::string reason;
};

/// Probe rounds until one runs without recovery activity (at most 4). The
/// verdict round must deliver every probe uncorrupted and leave no DDRM
/// episode open, no escalation without a link mark and no failed controller.
HealthResult health_check(Engine& engine, Coord3 router);

struct ExperimentResult {
  int faults_to_failure = 0;
  bool capped = false;
  std::uint64_t seed = 0;
  std::string failure;
};

/// Fault sequences depend on (campaign seed, index, type, distribution)
/// only, so both variants see the same draws.
std::uint64_t experiment_seed(const MttfCampaign& c, int index);
ExperimentResult run_experiment(const MttfCampaign& c, int index);

struct MttfReport {
  MttfCampaign campaign{};
  std::vector<int> faults_to_failure;
  std::vector<int> capped;  // experiment indices that hit the cap
  std::vector<std::string> diagnostics;
  double aftf = 0.0;
  double lambda_raw = 1.0;
  double mttf_raw = 1.0;
  double mttf_system = 1.0;
};

/// AFTF = mean(f_i); MTTF_raw = 1/lambda_raw; MTTF_system = sum(f_i) * MTTF_raw / N.
MttfReport summarize(const MttfCampaign& c, std::vector<int> f);

/// threads = 0 uses the hardware concurrency.
MttfReport run_campaign(const MttfCampaign& c, unsigned threads = 0);

/// AFTF_ft / AFTF_orig. Throws std::invalid_argument when AFTF_orig < 1.
double improvement(const MttfReport& ft, const MttfReport& orig);

std::string mttf_csv(const MttfReport& r);
std::string mttf_summary_json(const MttfReport& r, const MttfReport* reference = nullptr);

}  // namespace ftnoc
