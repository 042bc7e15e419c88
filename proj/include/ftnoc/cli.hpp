#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ftnoc/engine.hpp"
#include "ftnoc/mttf.hpp"

namespace ftnoc {

inline constexpr std::string_view kVersion = FTNOC_VERSION;

/// System presets: baseline (no fault tolerance), 3d-fto (hard faults
/// only), set (soft errors only: PCR + ECC), feto (everything).
enum class Variant : std::uint8_t { Baseline, Fto3d, Set, Feto };

std::string_view to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view s);
void apply_variant(NetworkConfig& cfg, Variant v);

struct SweepSpec {
  std::vector<double> hard_rates{0, 10, 20, 33};
  std::vector<double> soft_rates{0};
  std::vector<Variant> variants{Variant::Feto};
  std::vector<BenchmarkKind> benchmarks{BenchmarkKind::Uniform};
};

struct MttfSpec {
  int experiments = 1000;
  double lambda_raw = 1.0;
  int cap = 10000;
  double soft_probability = 0.02;
  int stuck_bits = 2;
  Dims dims{3, 3, 3};
};

struct ExperimentConfig {
  NetworkConfig network{};  // pcr/ecc/hard_ft and rng_seed are set per run
  bool dims_set = false;    // false: the benchmark's default mesh
  Variant variant = Variant::Feto;
  double hard_rate = 0.0;  // percent of routers given one permanent fault
  double soft_rate = 0.0;  // percent; 33 means 0.33 upsets per cycle network-wide
  std::array<double, 3> soft_mix{1.0 / 3, 1.0 / 3, 1.0 / 3};  // NPC, SA, link
  FaultDistribution distribution = FaultDistribution::Datapath;
  int stuck_bits = 2;
  TrafficSource traffic{};
  std::vector<std::uint64_t> seeds{1};
  std::string out_dir = ".";
  unsigned threads = 0;  // 0 = hardware concurrency
  SweepSpec sweep{};
  MttfSpec mttf{};

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

std::string config_to_json(const ExperimentConfig& c);
/// Keys absent from `text` keep their value from `base`; unknown keys are
/// rejected. Throws std::invalid_argument naming the offending key.
ExperimentConfig config_from_json(std::string_view text, ExperimentConfig base = {});
/// Throws std::runtime_error naming the path when it cannot be read.
ExperimentConfig load_config(const std::string& path);

/// Two lines: artifact version and the resolved config as compact JSON.
std::string provenance_header(const ExperimentConfig& c, std::string_view prefix = "# ");

struct RunPoint {
  BenchmarkKind benchmark = BenchmarkKind::Uniform;
  Variant variant = Variant::Feto;
  double hard_rate = 0.0;
  double soft_rate = 0.0;
  std::uint64_t seed = 1;
};

NetworkConfig network_for(const ExperimentConfig& c, const RunPoint& p);
FaultPlan fault_plan_for(const ExperimentConfig& c, const RunPoint& p);
MetricsReport run_point(const ExperimentConfig& c, const RunPoint& p);

struct SweepCell {
  RunPoint point{};
  bool ok = false;
  MetricsReport report{};
  std::string error;
};

/// benchmarks x hard rates x soft rates x variants x seeds, in that order.
std::vector<RunPoint> sweep_points(const ExperimentConfig& c);
/// Cells run on a worker pool; a throwing cell is recorded and skipped.
std::vector<SweepCell> run_sweep(const ExperimentConfig& c);
std::string sweep_csv(const ExperimentConfig& c, const std::vector<SweepCell>& cells);

struct MttfCell {
  FaultType fault_type = FaultType::Hard;
  FaultDistribution distribution = FaultDistribution::Flat;
  MttfReport baseline;
  MttfReport protected_system;
  double improvement = 0.0;
};

MttfCampaign mttf_campaign_for(const ExperimentConfig& c, FaultType t, FaultDistribution d,
                               SystemVariant v);
/// hard/flat, hard/weighted, soft/flat, soft/weighted; both variants each.
std::vector<MttfCell> run_mttf_table(const ExperimentConfig& c);
std::string mttf_table_csv(const ExperimentConfig& c, const std::vector<MttfCell>& cells);

struct SelftestOptions {
  bool corrupt_hmatrix = false;  // duplicate one H-matrix column
  bool perturb_rng = false;      // flip one draw of the replay run
};

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<SelftestCheck> run_selftest(const SelftestOptions& o = {});

/// Entry point of the `ftnoc` tool. Returns the process exit status: 0 on
/// success, 1 when a selftest check fails, 2 on configuration or I/O errors.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ftnoc
