#include "ftnoc/mttf.hpp"

#include <atomic>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "ftnoc/rng.hpp"

namespace ftnoc {

namespace {

constexpr int kProbeLength = 4;
constexpr int kMaxHealthRounds = 4;
constexpr std::uint64_t kProbeDrainCycles = 1500;

}  // namespace

std::string_view to_string(FaultType t) { return t == FaultType::Hard ? "hard" : "soft"; }

std::string_view to_string(SystemVariant v) {
  return v == SystemVariant::Baseline ? "baseline" : "sher3dr";
}

std::optional<FaultType> parse_fault_type(std::string_view s) {
  if (s == "hard") return FaultType::Hard;
  if (s == "soft") return FaultType::Soft;
  return std::nullopt;
}

std::optional<SystemVariant> parse_system_variant(std::string_view s) {
  if (s == "baseline") return SystemVariant::Baseline;
  if (s == "sher3dr" || s == "sher-3dr" || s == "feto") return SystemVariant::Sher3dr;
  return std::nullopt;
}

void MttfCampaign::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (experiments < 1) fail("experiments: must be >= 1");
  if (cap < 1) fail("cap: must be >= 1");
  if (!(lambda_raw > 0)) fail("lambda_raw: must be > 0");
  if (!(soft_probability > 0 && soft_probability <= 1)) fail("soft_probability: must be in (0, 1]");
  if (stuck_bits < 1 || stuck_bits > 3) fail("stuck_bits: must be in [1, 3]");
  if (distribution == FaultDistribution::Datapath) fail("distribution: must be flat or weighted");
  NetworkConfig n;
  n.dims = dims;
  n.validate();
}

NetworkConfig mttf_network(const MttfCampaign& c) {
  NetworkConfig n;
  n.dims = c.dims;
  const bool ft = c.variant == SystemVariant::Sher3dr;
  n.pcr_enabled = ft;
  n.ecc_enabled = ft;
  n.hard_ft_enabled = ft;
  n.rng_seed = c.seed;
  n.drain_timeout_cycles = kProbeDrainCycles;
  return n;
}

Coord3 mttf_fault_router(const Dims& dims) { return {dims.x / 2, dims.y / 2, dims.z / 2}; }

std::vector<Packet> health_probe_workload(const Dims& dims, Coord3 router, std::uint64_t start) {
  std::vector<Packet> out;
  auto end_of = [&](int port) -> std::optional<Coord3> {
    if (port == 0) return router;
    return neighbor(router, port_at(port), dims);
  };
  for (int i = 0; i < kPortCount; ++i) {
    auto src = end_of(i);
    if (!src) continue;
    for (int o = 0; o < kPortCount; ++o) {
      auto dst = end_of(o);
      if (o == i || !dst) continue;
      Packet p;
      p.source = *src;
      p.destination = *dst;
      p.length = kProbeLength;
      p.inject_cycle = start;
      out.push_back(p);
    }
  }
  return out;
}

HealthResult health_check(Engine& engine, Coord3 router) {
  HealthResult h;
  const Dims dims = engine.config().dims;
  for (int round = 0; round < kMaxHealthRounds; ++round) {
    if (engine.any_controller_failed()) {
      h.reason = "controller failed";
      return h;
    }
    engine.schedule(health_probe_workload(dims, router, engine.cycle()));
    MetricsReport m = engine.run_to_completion();
    ++h.rounds;
    h.probes = m.injected_packets;
    h.delivered = m.delivered_packets;
    const auto& c = m.counters;
    const bool recovering = c.ddrm_episodes > 0 || c.rab_flags > 0 || c.link_marks > 0 ||
                            c.blod_keeps > 0 || c.header_reroutes > 0;
    if (recovering && round + 1 < kMaxHealthRounds) continue;
    if (m.delivered_packets != m.injected_packets) {
      h.reason = std::to_string(m.injected_packets - m.delivered_packets) + " of " +
                 std::to_string(m.injected_packets) + " probes lost";
      return h;
    }
    break;
  }
  if (engine.any_controller_failed()) h.reason = "controller failed";
  else if (engine.any_ddrm_active()) h.reason = "unfinished DDRM episode";
  else if (engine.escalation_without_mark()) h.reason = "escalation without link mark";
  else h.healthy = true;
  return h;
}

std::uint64_t experiment_seed(const MttfCampaign& c, int index) {
  return hash_mix(c.seed, static_cast<std::uint64_t>(index), static_cast<std::uint64_t>(c.fault_type),
                  static_cast<std::uint64_t>(c.distribution), 0x3771F);
}

ExperimentResult run_experiment(const MttfCampaign& c, int index) {
  ExperimentResult r;
  r.seed = experiment_seed(c, index);
  NetworkConfig cfg = mttf_network(c);
  cfg.rng_seed = r.seed;
  Engine engine(cfg);
  Rng rng(r.seed);
  const Coord3 where = mttf_fault_router(c.dims);
  for (int k = 1; k <= c.cap; ++k) {
    if (c.fault_type == FaultType::Hard) {
      HardFault f = draw_hard_fault(where, c.dims, cfg.buffer_depth, c.distribution, c.stuck_bits, rng);
      f.onset_cycle = engine.cycle();
      engine.add_hard_fault(f);
    } else {
      SoftSource s;
      s.target = draw_target(where, c.dims, cfg.buffer_depth, c.distribution, rng);
      s.probability = c.soft_probability;
      s.seed = rng.next();
      engine.add_soft_source(s);
    }
    HealthResult h = health_check(engine, where);
    if (!h.healthy) {
      r.faults_to_failure = k;
      r.failure = h.reason;
      return r;
    }
  }
  r.faults_to_failure = c.cap;
  r.capped = true;
  r.failure = "cap of " + std::to_string(c.cap) + " faults reached";
  return r;
}

MttfReport summarize(const MttfCampaign& c, std::vector<int> f) {
  if (f.empty()) throw std::invalid_argument("summarize: no experiments");
  MttfReport r;
  r.campaign = c;
  r.faults_to_failure = std::move(f);
  const double sum = std::accumulate(r.faults_to_failure.begin(), r.faults_to_failure.end(), 0.0);
  const double n = static_cast<double>(r.faults_to_failure.size());
  r.aftf = sum / n;
  r.lambda_raw = c.lambda_raw;
  r.mttf_raw = 1.0 / c.lambda_raw;
  r.mttf_system = sum * r.mttf_raw / n;
  return r;
}

MttfReport run_campaign(const MttfCampaign& c, unsigned threads) {
  c.validate();
  const int n = c.experiments;
  std::vector<ExperimentResult> results(static_cast<std::size_t>(n));
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(n));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < n; i = next++) results[static_cast<std::size_t>(i)] = run_experiment(c, i);
  };
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  std::vector<int> f;
  f.reserve(results.size());
  for (const auto& r : results) f.push_back(r.faults_to_failure);
  MttfReport rep = summarize(c, std::move(f));
  for (int i = 0; i < n; ++i) {
    const auto& r = results[static_cast<std::size_t>(i)];
    if (!r.capped) continue;
    rep.capped.push_back(i);
    std::ostringstream os;
    os << "experiment " << i << " (seed " << r.seed << "): " << r.failure;
    rep.diagnostics.push_back(os.str());
  }
  return rep;
}

double improvement(const MttfReport& ft, const MttfReport& orig) {
  if (orig.aftf < 1.0) throw std::invalid_argument("improvement: reference AFTF must be >= 1");
  return ft.aftf / orig.aftf;
}

std::string mttf_csv(const MttfReport& r) {
  std::ostringstream os;
  os << "experiment_index,faults_to_failure\n";
  for (std::size_t i = 0; i < r.faults_to_failure.size(); ++i) {
    os << i << ',' << r.faults_to_failure[i] << '\n';
  }
  return os.str();
}

std::string mttf_summary_json(const MttfReport& r, const MttfReport* reference) {
  nlohmann::json j = {{"fault_type", to_string(r.campaign.fault_type)},
                      {"distribution", to_string(r.campaign.distribution)},
                      {"variant", to_string(r.campaign.variant)},
                      {"experiments", r.faults_to_failure.size()},
                      {"seed", r.campaign.seed},
                      {"aftf", r.aftf},
                      {"lambda_raw", r.lambda_raw},
                      {"mttf_raw", r.mttf_raw},
                      {"mttf_system", r.mttf_system},
                      {"capped_experiments", r.capped},
                      {"diagnostics", r.diagnostics}};
  if (reference) {
    j["reference_aftf"] = reference->aftf;
    j["improvement"] = improvement(r, *reference);
  }
  return j.dump(2);
}

}  // namespace ftnoc
