#include "ftnoc/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <CLI11.hpp>
#include <json.hpp>

#include "ftnoc/diagnostics.hpp"
#include "ftnoc/rng.hpp"

namespace ftnoc {

using nlohmann::json;

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::Fto3d: return "3d-fto";
    case Variant::Set: return "set";
    case Variant::Feto: return "feto";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view s) {
  if (s == "baseline") return Variant::Baseline;
  if (s == "3d-fto" || s == "3dfto" || s == "fto") return Variant::Fto3d;
  if (s == "set") return Variant::Set;
  if (s == "feto") return Variant::Feto;
  return std::nullopt;
}

void apply_variant(NetworkConfig& cfg, Variant v) {
  const bool soft = v == Variant::Set || v == Variant::Feto;
  const bool hard = v == Variant::Fto3d || v == Variant::Feto;
  cfg.pcr_enabled = soft;
  cfg.ecc_enabled = soft;
  cfg.hard_ft_enabled = hard;
}

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw std::invalid_argument(field + ": " + what);
}

Variant variant_or_throw(const std::string& s, const std::string& field) {
  auto v = parse_variant(s);
  if (!v) bad(field, "unknown variant '" + s + "' (baseline, 3d-fto, set, feto)");
  return *v;
}

BenchmarkKind benchmark_or_throw(const std::string& s, const std::string& field) {
  auto b = parse_benchmark(s);
  if (!b) bad(field, "unknown benchmark '" + s + "'");
  return *b;
}

Dims dims_or_throw(const std::string& s, const std::string& field) {
  auto d = parse_dims(s);
  if (!d) bad(field, "expected XxYxZ, got '" + s + "'");
  return *d;
}

FaultDistribution distribution_or_throw(const std::string& s, const std::string& field) {
  auto d = parse_distribution(s);
  if (!d) bad(field, "unknown distribution '" + s + "' (datapath, flat, weighted)");
  return *d;
}

RoutingAlgorithm routing_or_throw(const std::string& s, const std::string& field) {
  auto r = parse_routing(s);
  if (!r) bad(field, "unknown routing algorithm '" + s + "'");
  return *r;
}

template <class T, class F>
std::vector<std::string> names(const std::vector<T>& v, F f) {
  std::vector<std::string> out;
  for (const auto& x : v) out.emplace_back(f(x));
  return out;
}

// Reads `key` of object `j` into `dst` when present, reporting type errors
// with the dotted path.
template <class T>
void take(const json& j, const char* key, const std::string& path, T& dst) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    dst = it->template get<T>();
  } catch (const json::exception&) {
    bad(path + key, "wrong type");
  }
}

void only_keys(const json& j, const std::string& path, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) bad(path.empty() ? "config" : path.substr(0, path.size() - 1), "expected an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) bad(path + k, "unknown key");
  }
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write output file '" + p.string() + "'");
  f << text;
  if (!f) throw std::runtime_error("error writing output file '" + p.string() + "'");
}

std::filesystem::path output_dir(const ExperimentConfig& c) {
  std::filesystem::path d(c.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(d, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + c.out_dir + "': " + ec.message());
  return d;
}

json provenance_json(const ExperimentConfig& c) {
  return {{"version", std::string(kVersion)}, {"config", json::parse(config_to_json(c))}};
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

std::string point_csv(const RunPoint& p, const Dims& dims) {
  std::ostringstream os;
  os << to_string(p.benchmark) << ',' << to_string(dims) << ',' << to_string(p.variant) << ','
     << p.hard_rate << ',' << p.soft_rate << ',' << p.seed;
  return os.str();
}

constexpr std::string_view kPointHeader = "benchmark,dims,variant,hard_rate,soft_rate,seed";

unsigned worker_count(unsigned requested, std::size_t jobs) {
  unsigned t = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(jobs, 1)));
}

}  // namespace

void ExperimentConfig::validate() const {
  NetworkConfig n = network;
  n.validate();
  if (!(hard_rate >= 0 && hard_rate <= 100)) bad("faults.hard_rate", "must be within [0, 100]");
  if (!(soft_rate >= 0)) bad("faults.soft_rate", "must be >= 0");
  if (stuck_bits < 1 || stuck_bits > 3) bad("faults.stuck_bits", "must be within [1, 3]");
  SoftErrorProcess sp;
  sp.target_mix = soft_mix;
  try {
    sp.validate();
  } catch (const std::invalid_argument& e) {
    bad("faults.soft_mix", e.what());
  }
  if (traffic.total_packets < 0) bad("traffic.packets", "must be >= 0");
  if (traffic.packet_length < 1) bad("traffic.packet_length", "must be >= 1");
  if (traffic.interval_cycles < 1) bad("traffic.interval", "must be >= 1");
  const bool uses_table = traffic.kind == BenchmarkKind::Table ||
                          std::find(sweep.benchmarks.begin(), sweep.benchmarks.end(),
                                    BenchmarkKind::Table) != sweep.benchmarks.end();
  if (uses_table) {
    if (traffic.table_path.empty()) bad("traffic.table", "required by the table benchmark");
    if (!std::ifstream(traffic.table_path)) {
      bad("traffic.table", "cannot open traffic table '" + traffic.table_path + "'");
    }
  }
  if (seeds.empty()) bad("seeds", "must not be empty");
  if (sweep.hard_rates.empty()) bad("sweep.hard_rates", "must not be empty");
  if (sweep.soft_rates.empty()) bad("sweep.soft_rates", "must not be empty");
  if (sweep.variants.empty()) bad("sweep.variants", "must not be empty");
  if (sweep.benchmarks.empty()) bad("sweep.benchmarks", "must not be empty");
  for (double r : sweep.hard_rates) {
    if (!(r >= 0 && r <= 100)) bad("sweep.hard_rates", "every rate must be within [0, 100]");
  }
  for (double r : sweep.soft_rates) {
    if (!(r >= 0)) bad("sweep.soft_rates", "every rate must be >= 0");
  }
  MttfCampaign m;
  m.experiments = mttf.experiments;
  m.lambda_raw = mttf.lambda_raw;
  m.cap = mttf.cap;
  m.soft_probability = mttf.soft_probability;
  m.stuck_bits = mttf.stuck_bits;
  m.dims = mttf.dims;
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("mttf.") + e.what());
  }
}

std::string config_to_json(const ExperimentConfig& c) {
  const NetworkConfig& n = c.network;
  json hotspots = json::array();
  for (const auto& h : c.traffic.hotspots) hotspots.push_back({h.x, h.y, h.z});
  json j = {
      {"network",
       {{"dims", c.dims_set ? json(to_string(n.dims)) : json(nullptr)},
        {"buffer_depth", n.buffer_depth},
        {"bypass_links", n.bypass_links_per_router},
        {"stop_threshold", n.stop_threshold},
        {"go_threshold", n.go_threshold},
        {"routing", to_string(n.routing_algorithm)},
        {"drain_timeout", n.drain_timeout_cycles},
        {"deadlock_release", n.deadlock_release_cycles}}},
      {"variant", to_string(c.variant)},
      {"faults",
       {{"hard_rate", c.hard_rate},
        {"soft_rate", c.soft_rate},
        {"soft_mix", c.soft_mix},
        {"distribution", to_string(c.distribution)},
        {"stuck_bits", c.stuck_bits}}},
      {"traffic",
       {{"benchmark", to_string(c.traffic.kind)},
        {"packets", c.traffic.total_packets},
        {"packet_length", c.traffic.packet_length},
        {"interval", c.traffic.interval_cycles},
        {"table", c.traffic.table_path},
        {"hotspots", hotspots}}},
      {"seeds", c.seeds},
      {"output", {{"dir", c.out_dir}}},
      {"threads", c.threads},
      {"sweep",
       {{"hard_rates", c.sweep.hard_rates},
        {"soft_rates", c.sweep.soft_rates},
        {"variants", names(c.sweep.variants, [](Variant v) { return to_string(v); })},
        {"benchmarks", names(c.sweep.benchmarks, [](BenchmarkKind b) { return to_string(b); })}}},
      {"mttf",
       {{"experiments", c.mttf.experiments},
        {"lambda_raw", c.mttf.lambda_raw},
        {"cap", c.mttf.cap},
        {"soft_probability", c.mttf.soft_probability},
        {"stuck_bits", c.mttf.stuck_bits},
        {"dims", to_string(c.mttf.dims)}}},
  };
  return j.dump();
}

ExperimentConfig config_from_json(std::string_view text, ExperimentConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
  }
  only_keys(j, "", {"network", "variant", "faults", "traffic", "seeds", "output", "threads", "sweep", "mttf"});
  std::string s;
  if (j.contains("network")) {
    const json& n = j["network"];
    only_keys(n, "network.", {"dims", "buffer_depth", "bypass_links", "stop_threshold", "go_threshold",
                              "routing", "drain_timeout", "deadlock_release"});
    if (n.contains("dims")) {
      if (n["dims"].is_null()) {
        c.dims_set = false;
      } else {
        take(n, "dims", "network.", s);
        c.network.dims = dims_or_throw(s, "network.dims");
        c.dims_set = true;
      }
    }
    take(n, "buffer_depth", "network.", c.network.buffer_depth);
    take(n, "bypass_links", "network.", c.network.bypass_links_per_router);
    take(n, "stop_threshold", "network.", c.network.stop_threshold);
    take(n, "go_threshold", "network.", c.network.go_threshold);
    if (n.contains("routing")) {
      take(n, "routing", "network.", s);
      c.network.routing_algorithm = routing_or_throw(s, "network.routing");
    }
    take(n, "drain_timeout", "network.", c.network.drain_timeout_cycles);
    take(n, "deadlock_release", "network.", c.network.deadlock_release_cycles);
  }
  if (j.contains("variant")) {
    take(j, "variant", "", s);
    c.variant = variant_or_throw(s, "variant");
  }
  if (j.contains("faults")) {
    const json& f = j["faults"];
    only_keys(f, "faults.", {"hard_rate", "soft_rate", "soft_mix", "distribution", "stuck_bits"});
    take(f, "hard_rate", "faults.", c.hard_rate);
    take(f, "soft_rate", "faults.", c.soft_rate);
    take(f, "soft_mix", "faults.", c.soft_mix);
    if (f.contains("distribution")) {
      take(f, "distribution", "faults.", s);
      c.distribution = distribution_or_throw(s, "faults.distribution");
    }
    take(f, "stuck_bits", "faults.", c.stuck_bits);
  }
  if (j.contains("traffic")) {
    const json& t = j["traffic"];
    only_keys(t, "traffic.", {"benchmark", "packets", "packet_length", "interval", "table", "hotspots"});
    if (t.contains("benchmark")) {
      take(t, "benchmark", "traffic.", s);
      c.traffic.kind = benchmark_or_throw(s, "traffic.benchmark");
    }
    take(t, "packets", "traffic.", c.traffic.total_packets);
    take(t, "packet_length", "traffic.", c.traffic.packet_length);
    take(t, "interval", "traffic.", c.traffic.interval_cycles);
    take(t, "table", "traffic.", c.traffic.table_path);
    if (t.contains("hotspots")) {
      std::vector<std::array<int, 3>> hs;
      take(t, "hotspots", "traffic.", hs);
      c.traffic.hotspots.clear();
      for (const auto& h : hs) c.traffic.hotspots.push_back({h[0], h[1], h[2]});
    }
  }
  take(j, "seeds", "", c.seeds);
  if (j.contains("output")) {
    only_keys(j["output"], "output.", {"dir"});
    take(j["output"], "dir", "output.", c.out_dir);
  }
  take(j, "threads", "", c.threads);
  if (j.contains("sweep")) {
    const json& w = j["sweep"];
    only_keys(w, "sweep.", {"hard_rates", "soft_rates", "variants", "benchmarks"});
    take(w, "hard_rates", "sweep.", c.sweep.hard_rates);
    take(w, "soft_rates", "sweep.", c.sweep.soft_rates);
    std::vector<std::string> v;
    if (w.contains("variants")) {
      take(w, "variants", "sweep.", v);
      c.sweep.variants.clear();
      for (const auto& x : v) c.sweep.variants.push_back(variant_or_throw(x, "sweep.variants"));
    }
    if (w.contains("benchmarks")) {
      take(w, "benchmarks", "sweep.", v);
      c.sweep.benchmarks.clear();
      for (const auto& x : v) c.sweep.benchmarks.push_back(benchmark_or_throw(x, "sweep.benchmarks"));
    }
  }
  if (j.contains("mttf")) {
    const json& m = j["mttf"];
    only_keys(m, "mttf.", {"experiments", "lambda_raw", "cap", "soft_probability", "stuck_bits", "dims"});
    take(m, "experiments", "mttf.", c.mttf.experiments);
    take(m, "lambda_raw", "mttf.", c.mttf.lambda_raw);
    take(m, "cap", "mttf.", c.mttf.cap);
    take(m, "soft_probability", "mttf.", c.mttf.soft_probability);
    take(m, "stuck_bits", "mttf.", c.mttf.stuck_bits);
    if (m.contains("dims")) {
      take(m, "dims", "mttf.", s);
      c.mttf.dims = dims_or_throw(s, "mttf.dims");
    }
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return config_from_json(ss.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

std::string provenance_header(const ExperimentConfig& c, std::string_view prefix) {
  std::ostringstream os;
  os << prefix << "ftnoc " << kVersion << '\n' << prefix << "config " << config_to_json(c) << '\n';
  return os.str();
}

NetworkConfig network_for(const ExperimentConfig& c, const RunPoint& p) {
  NetworkConfig n = c.network;
  if (!c.dims_set) n.dims = default_dims(p.benchmark);
  apply_variant(n, p.variant);
  n.rng_seed = p.seed;
  return n;
}

FaultPlan fault_plan_for(const ExperimentConfig& c, const RunPoint& p) {
  const NetworkConfig n = network_for(c, p);
  FaultPlan plan = plan_hard_faults(n, p.hard_rate, c.distribution, p.seed, c.stuck_bits);
  plan.soft.rate = p.soft_rate / 100.0;
  plan.soft.target_mix = c.soft_mix;
  plan.soft.seed = p.seed;
  return plan;
}

MetricsReport run_point(const ExperimentConfig& c, const RunPoint& p) {
  TrafficSource t = c.traffic;
  t.kind = p.benchmark;
  t.seed = p.seed;
  return run(network_for(c, p), fault_plan_for(c, p), t);
}

std::vector<RunPoint> sweep_points(const ExperimentConfig& c) {
  std::vector<RunPoint> pts;
  for (BenchmarkKind b : c.sweep.benchmarks) {
    for (double h : c.sweep.hard_rates) {
      for (double s : c.sweep.soft_rates) {
        for (Variant v : c.sweep.variants) {
          for (std::uint64_t seed : c.seeds) pts.push_back({b, v, h, s, seed});
        }
      }
    }
  }
  return pts;
}

std::vector<SweepCell> run_sweep(const ExperimentConfig& c) {
  const auto pts = sweep_points(c);
  std::vector<SweepCell> cells(pts.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < pts.size(); i = next++) {
      SweepCell& cell = cells[i];
      cell.point = pts[i];
      try {
        cell.report = run_point(c, pts[i]);
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };
  const unsigned n = worker_count(c.threads, pts.size());
  if (n <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(work);
  }
  return cells;
}

std::string sweep_csv(const ExperimentConfig& c, const std::vector<SweepCell>& cells) {
  std::ostringstream os;
  os << provenance_header(c) << kPointHeader << ',' << metrics_csv_header() << '\n';
  for (const auto& cell : cells) {
    const Dims d = network_for(c, cell.point).dims;
    if (!cell.ok) {
      os << "# FAILED " << point_csv(cell.point, d) << ": " << cell.error << '\n';
      continue;
    }
    os << point_csv(cell.point, d) << ',' << metrics_csv_row(cell.report) << '\n';
  }
  return os.str();
}

MttfCampaign mttf_campaign_for(const ExperimentConfig& c, FaultType t, FaultDistribution d,
                               SystemVariant v) {
  MttfCampaign m;
  m.experiments = c.mttf.experiments;
  m.fault_type = t;
  m.distribution = d;
  m.variant = v;
  m.seed = c.seeds.front();
  m.lambda_raw = c.mttf.lambda_raw;
  m.cap = c.mttf.cap;
  m.dims = c.mttf.dims;
  m.soft_probability = c.mttf.soft_probability;
  m.stuck_bits = c.mttf.stuck_bits;
  return m;
}

std::vector<MttfCell> run_mttf_table(const ExperimentConfig& c) {
  std::vector<MttfCell> cells;
  for (FaultType t : {FaultType::Hard, FaultType::Soft}) {
    for (FaultDistribution d : {FaultDistribution::Flat, FaultDistribution::Weighted}) {
      MttfCell cell;
      cell.fault_type = t;
      cell.distribution = d;
      cell.baseline = run_campaign(mttf_campaign_for(c, t, d, SystemVariant::Baseline), c.threads);
      cell.protected_system = run_campaign(mttf_campaign_for(c, t, d, SystemVariant::Sher3dr), c.threads);
      cell.improvement = improvement(cell.protected_system, cell.baseline);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

std::string mttf_table_csv(const ExperimentConfig& c, const std::vector<MttfCell>& cells) {
  std::ostringstream os;
  os << provenance_header(c)
     << "fault_type,distribution,experiments,aftf_baseline,aftf_sher3dr,mttf_system_baseline,"
        "mttf_system_sher3dr,improvement,capped_baseline,capped_sher3dr\n";
  for (const auto& m : cells) {
    os << to_string(m.fault_type) << ',' << to_string(m.distribution) << ','
       << m.baseline.faults_to_failure.size() << ',' << fmt(m.baseline.aftf) << ','
       << fmt(m.protected_system.aftf) << ',' << fmt(m.baseline.mttf_system) << ','
       << fmt(m.protected_system.mttf_system) << ',' << fmt(m.improvement) << ','
       << m.baseline.capped.size() << ',' << m.protected_system.capped.size() << '\n';
  }
  return os.str();
}

// ------------------------------------------------------------------ selftest

namespace {

SelftestCheck check_secded(const SelftestOptions& o) {
  auto cols = SecdedCode::hsiao().columns();
  if (o.corrupt_hmatrix) cols[1] = cols[0];
  const SecdedCode code(cols);
  SelftestCheck c{"secded-exhaustive", false, ""};
  if (!code.structurally_valid()) {
    c.detail = "H-matrix columns are not distinct nonzero odd-weight with identity check part";
    return c;
  }
  Rng rng(0x5EC);
  for (int w = 0; w < 256; ++w) {
    const auto data = static_cast<std::uint16_t>(rng.below(1u << 16));
    const Codeword22 cw = code.encode(data);
    for (int i = 0; i < kCodewordBits; ++i) {
      const auto d = code.decode(cw ^ (1u << i));
      if (d.status != DecodeStatus::Corrected || d.data != data) {
        c.detail = "single flip of bit " + std::to_string(i) + " not corrected";
        return c;
      }
      for (int k = i + 1; k < kCodewordBits; ++k) {
        if (code.decode(cw ^ (1u << i) ^ (1u << k)).status != DecodeStatus::DetectedUncorrectable) {
          c.detail = "double flip of bits " + std::to_string(i) + "," + std::to_string(k) + " not detected";
          return c;
        }
      }
    }
  }
  c.passed = true;
  c.detail = "256 words, 22 single and 231 double flips each";
  return c;
}

SelftestCheck check_ddrm() {
  SelftestCheck c{"ddrm-classification", true, ""};
  for (FaultStructure k : {FaultStructure::BufferSlot, FaultStructure::CrossbarPath, FaultStructure::Channel}) {
    const DdrmTrial t = ddrm_trial(k, 1);
    if (!t.correct) {
      c.passed = false;
      c.detail = t.describe();
      return c;
    }
  }
  c.detail = "buffer slot, crossbar path and channel classified";
  return c;
}

ExperimentConfig smoke_config() {
  ExperimentConfig c;
  c.network.dims = {3, 3, 3};
  c.dims_set = true;
  c.traffic.total_packets = 200;
  c.traffic.interval_cycles = 60;
  return c;
}

constexpr RunPoint kSmokePoint{BenchmarkKind::Uniform, Variant::Feto, 15.0, 5.0, 7};

}  // namespace

std::vector<SelftestCheck> run_selftest(const SelftestOptions& o) {
  std::vector<SelftestCheck> out;
  out.push_back(check_secded(o));
  out.push_back(check_ddrm());

  const ExperimentConfig cfg = smoke_config();
  const MetricsReport first = run_point(cfg, kSmokePoint);
  if (o.perturb_rng) RngPerturbation::arm(40);
  const MetricsReport second = run_point(cfg, kSmokePoint);
  RngPerturbation::disarm();
  SelftestCheck det{"determinism-replay", first == second, ""};
  det.detail = det.passed ? "identical reports for identical seeds"
                          : "replay diverged: latency " + fmt(first.average_latency) + " vs " +
                                fmt(second.average_latency);
  out.push_back(det);

  const auto& m = first;
  SelftestCheck cons{"conservation", false, ""};
  cons.passed = m.injected_packets == m.delivered_packets + m.lost_packets &&
                m.counters.duplicate_ejections == 0 && m.counters.order_violations == 0;
  cons.detail = "injected=" + std::to_string(m.injected_packets) +
                " delivered=" + std::to_string(m.delivered_packets) + " lost=" + std::to_string(m.lost_packets) +
                " duplicates=" + std::to_string(m.counters.duplicate_ejections);
  out.push_back(cons);
  return out;
}

// ----------------------------------------------------------------------- cli

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::vector<std::string>& items) {
  std::vector<std::uint64_t> out;
  for (const auto& s : items) {
    if (s.empty()) continue;
    std::uint64_t v = 0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || end != s.data() + s.size()) bad("--seed", "not a seed: '" + s + "'");
    out.push_back(v);
  }
  if (out.empty()) bad("--seed", "empty seed list");
  return out;
}

// Long-flag overrides shared by the subcommands. Only flags given on the
// command line are applied over the config file.
struct Overrides {
  std::string config;
  std::string benchmark, dims, variant, distribution, routing, table, out;
  double hard_rate = 0, soft_rate = 0, soft_probability = 0, lambda_raw = 0;
  int packets = 0, packet_length = 0, interval = 0, buffer_depth = 0, bypass_links = 0;
  int stop_threshold = 0, go_threshold = 0, stuck_bits = 0, experiments = 0, cap = 0;
  std::uint64_t drain_timeout = 0, deadlock_release = 0;
  unsigned threads = 0;
  std::vector<std::string> seeds;
  std::vector<double> rates, soft_rates;
  std::vector<std::string> variants, benchmarks;
  std::map<std::string, CLI::Option*> given;

  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& flag, T& var, const std::string& help) {
    CLI::Option* o = app->add_option(flag, var, help);
    given[flag] = o;
    return o;
  }
  bool has(const std::string& flag) const {
    auto it = given.find(flag);
    return it != given.end() && it->second->count() > 0;
  }

  void add_common(CLI::App* app) {
    add(app, "--config", config, "JSON experiment config");
    add(app, "--benchmark", benchmark, "uniform, transpose, hotspot10, matrix, h264, vopd, mwd, pip, table");
    add(app, "--dims", dims, "mesh size XxYxZ");
    add(app, "--variant", variant, "baseline, 3d-fto, set, feto");
    add(app, "--hard-rate", hard_rate, "percent of routers with a permanent fault");
    add(app, "--soft-rate", soft_rate, "soft-error rate in percent (33 = 0.33 upsets/cycle)");
    add(app, "--distribution", distribution, "datapath, flat, weighted");
    add(app, "--stuck-bits", stuck_bits, "stuck wires per permanent fault");
    add(app, "--seed", seeds, "seed or comma list of seeds")->delimiter(',');
    add(app, "--packets", packets, "total packets (0 = benchmark default)");
    add(app, "--packet-length", packet_length, "flits per packet");
    add(app, "--interval", interval, "cycles between packets of one node");
    add(app, "--table", table, "traffic table path");
    add(app, "--buffer-depth", buffer_depth, "input buffer slots");
    add(app, "--bypass-links", bypass_links, "BLoD bypass links per router");
    add(app, "--stop-threshold", stop_threshold, "stop when free slots <= this");
    add(app, "--go-threshold", go_threshold, "go when free slots >= this");
    add(app, "--routing", routing, "laft or xyz");
    add(app, "--drain-timeout", drain_timeout, "cycles after the last creation before timing out");
    add(app, "--deadlock-release", deadlock_release, "stall cycles before a wait-for check (0 = off)");
    add(app, "--threads", threads, "worker threads (0 = all cores)");
    add(app, "--out", out, "output directory");
  }

  void add_sweep(CLI::App* app) {
    add(app, "--rates", rates, "hard-fault rates, comma list")->delimiter(',');
    add(app, "--soft-rates", soft_rates, "soft-error rates, comma list")->delimiter(',');
    add(app, "--variants", variants, "variants, comma list")->delimiter(',');
    add(app, "--benchmarks", benchmarks, "benchmarks, comma list")->delimiter(',');
  }

  void add_mttf(CLI::App* app) {
    add(app, "--experiments", experiments, "experiments per cell and variant");
    add(app, "--lambda-raw", lambda_raw, "raw fault arrival rate");
    add(app, "--cap", cap, "faults per experiment before giving up");
    add(app, "--soft-probability", soft_probability, "per-cycle firing chance of a soft source");
  }

  ExperimentConfig resolve(bool mttf) const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : load_config(config);
    if (has("--benchmark")) c.traffic.kind = benchmark_or_throw(benchmark, "--benchmark");
    if (has("--dims")) {
      const Dims d = dims_or_throw(dims, "--dims");
      if (mttf) {
        c.mttf.dims = d;
      } else {
        c.network.dims = d;
        c.dims_set = true;
      }
    }
    if (has("--variant")) c.variant = variant_or_throw(variant, "--variant");
    if (has("--hard-rate")) c.hard_rate = hard_rate;
    if (has("--soft-rate")) c.soft_rate = soft_rate;
    if (has("--distribution")) c.distribution = distribution_or_throw(distribution, "--distribution");
    if (has("--stuck-bits")) {
      c.stuck_bits = stuck_bits;
      c.mttf.stuck_bits = stuck_bits;
    }
    if (has("--seed")) c.seeds = parse_seed_list(seeds);
    if (has("--packets")) c.traffic.total_packets = packets;
    if (has("--packet-length")) c.traffic.packet_length = packet_length;
    if (has("--interval")) c.traffic.interval_cycles = interval;
    if (has("--table")) c.traffic.table_path = table;
    if (has("--buffer-depth")) c.network.buffer_depth = buffer_depth;
    if (has("--bypass-links")) c.network.bypass_links_per_router = bypass_links;
    if (has("--stop-threshold")) c.network.stop_threshold = stop_threshold;
    if (has("--go-threshold")) c.network.go_threshold = go_threshold;
    if (has("--routing")) c.network.routing_algorithm = routing_or_throw(routing, "--routing");
    if (has("--drain-timeout")) c.network.drain_timeout_cycles = drain_timeout;
    if (has("--deadlock-release")) c.network.deadlock_release_cycles = deadlock_release;
    if (has("--threads")) c.threads = threads;
    if (has("--out")) c.out_dir = out;
    if (has("--rates")) c.sweep.hard_rates = rates;
    if (has("--soft-rates")) c.sweep.soft_rates = soft_rates;
    if (has("--variants")) {
      c.sweep.variants.clear();
      for (const auto& v : variants) c.sweep.variants.push_back(variant_or_throw(v, "--variants"));
    }
    if (has("--benchmarks")) {
      c.sweep.benchmarks.clear();
      for (const auto& b : benchmarks) c.sweep.benchmarks.push_back(benchmark_or_throw(b, "--benchmarks"));
    }
    if (has("--experiments")) c.mttf.experiments = experiments;
    if (has("--lambda-raw")) c.mttf.lambda_raw = lambda_raw;
    if (has("--cap")) c.mttf.cap = cap;
    if (has("--soft-probability")) c.mttf.soft_probability = soft_probability;
    c.validate();
    return c;
  }
};

int cmd_run(const ExperimentConfig& c, std::ostream& out) {
  const auto dir = output_dir(c);
  std::ostringstream csv;
  csv << provenance_header(c) << kPointHeader << ',' << metrics_csv_header() << '\n';
  json runs = json::array();
  for (std::uint64_t seed : c.seeds) {
    const RunPoint p{c.traffic.kind, c.variant, c.hard_rate, c.soft_rate, seed};
    const MetricsReport m = run_point(c, p);
    const Dims d = network_for(c, p).dims;
    csv << point_csv(p, d) << ',' << metrics_csv_row(m) << '\n';
    runs.push_back({{"seed", seed}, {"metrics", json::parse(metrics_to_json(m))}});
    out << to_string(p.benchmark) << ' ' << to_string(d) << ' ' << to_string(p.variant) << " seed=" << seed
        << " arrival=" << fmt(m.arrival_rate, 2) << "% latency=" << fmt(m.average_latency, 2)
        << " throughput=" << fmt(m.throughput, 5) << " lost=" << m.lost_packets << '\n';
  }
  write_file(dir / "run.csv", csv.str());
  write_file(dir / "run.json", json{{"provenance", provenance_json(c)}, {"runs", runs}}.dump(2) + "\n");
  out << "wrote " << (dir / "run.csv").string() << " and " << (dir / "run.json").string() << '\n';
  return 0;
}

int cmd_sweep(const ExperimentConfig& c, std::ostream& out) {
  const auto dir = output_dir(c);
  const auto cells = run_sweep(c);
  write_file(dir / "sweep.csv", sweep_csv(c, cells));

  using Key = std::tuple<BenchmarkKind, Variant, double, double>;
  struct Acc {
    int runs = 0, failed = 0;
    double arrival = 0, latency = 0, throughput = 0;
  };
  std::vector<Key> order;
  std::map<Key, Acc> acc;
  for (const auto& cell : cells) {
    const Key k{cell.point.benchmark, cell.point.variant, cell.point.hard_rate, cell.point.soft_rate};
    if (!acc.contains(k)) order.push_back(k);
    Acc& a = acc[k];
    if (!cell.ok) {
      ++a.failed;
      continue;
    }
    ++a.runs;
    a.arrival += cell.report.arrival_rate;
    a.latency += cell.report.average_latency;
    a.throughput += cell.report.throughput;
  }
  json rows = json::array();
  for (const auto& k : order) {
    const Acc& a = acc[k];
    const double n = std::max(a.runs, 1);
    rows.push_back({{"benchmark", to_string(std::get<0>(k))},
                    {"variant", to_string(std::get<1>(k))},
                    {"hard_rate", std::get<2>(k)},
                    {"soft_rate", std::get<3>(k)},
                    {"runs", a.runs},
                    {"failed", a.failed},
                    {"mean_arrival_rate", a.arrival / n},
                    {"mean_latency", a.latency / n},
                    {"mean_throughput", a.throughput / n}});
    out << to_string(std::get<0>(k)) << ' ' << to_string(std::get<1>(k)) << " hard=" << std::get<2>(k)
        << "% soft=" << std::get<3>(k) << "% runs=" << a.runs << " arrival=" << fmt(a.arrival / n, 2)
        << "% latency=" << fmt(a.latency / n, 2) << " throughput=" << fmt(a.throughput / n, 5);
    if (a.failed) out << " FAILED=" << a.failed;
    out << '\n';
  }
  json failures = json::array();
  for (const auto& cell : cells) {
    if (!cell.ok) failures.push_back(point_csv(cell.point, network_for(c, cell.point).dims) + ": " + cell.error);
  }
  write_file(dir / "sweep_summary.json",
             json{{"provenance", provenance_json(c)}, {"cells", rows}, {"failures", failures}}.dump(2) + "\n");
  out << "wrote " << (dir / "sweep.csv").string() << " and " << (dir / "sweep_summary.json").string() << '\n';
  return 0;
}

int cmd_mttf(const ExperimentConfig& c, std::ostream& out) {
  const auto dir = output_dir(c);
  const auto cells = run_mttf_table(c);
  write_file(dir / "mttf_summary.csv", mttf_table_csv(c, cells));
  json table = json::array();
  for (const auto& m : cells) {
    const std::string stem = std::string("mttf_") + std::string(to_string(m.fault_type)) + "_" +
                             std::string(to_string(m.distribution));
    write_file(dir / (stem + "_baseline.csv"), provenance_header(c) + mttf_csv(m.baseline));
    write_file(dir / (stem + "_sher3dr.csv"), provenance_header(c) + mttf_csv(m.protected_system));
    table.push_back({{"fault_type", to_string(m.fault_type)},
                     {"distribution", to_string(m.distribution)},
                     {"baseline", json::parse(mttf_summary_json(m.baseline))},
                     {"sher3dr", json::parse(mttf_summary_json(m.protected_system, &m.baseline))},
                     {"improvement", m.improvement},
                     {"cap_aborts", m.baseline.capped.size() + m.protected_system.capped.size()}});
    out << to_string(m.fault_type) << '/' << to_string(m.distribution)
        << " aftf_baseline=" << fmt(m.baseline.aftf, 3) << " aftf_sher3dr=" << fmt(m.protected_system.aftf, 3)
        << " improvement=" << fmt(m.improvement, 3);
    const auto capped = m.baseline.capped.size() + m.protected_system.capped.size();
    if (capped) out << " CAPPED=" << capped;
    out << '\n';
  }
  write_file(dir / "mttf_summary.json",
             json{{"provenance", provenance_json(c)}, {"cells", table}}.dump(2) + "\n");
  out << "wrote " << (dir / "mttf_summary.csv").string() << " and " << (dir / "mttf_summary.json").string()
      << '\n';
  return 0;
}

int cmd_selftest(const SelftestOptions& o, std::ostream& out) {
  bool ok = true;
  for (const auto& c : run_selftest(o)) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    ok = ok && c.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fault-tolerant 3D network-on-chip simulator", "ftnoc"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Overrides run_o, sweep_o, mttf_o;
  CLI::App* run_cmd = app.add_subcommand("run", "Run one configuration for each seed");
  run_o.add_common(run_cmd);
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Benchmark x rate x variant x seed matrix");
  sweep_o.add_common(sweep_cmd);
  sweep_o.add_sweep(sweep_cmd);
  CLI::App* mttf_cmd = app.add_subcommand("mttf", "Faults-to-failure campaign, both variants, four cells");
  mttf_o.add_common(mttf_cmd);
  mttf_o.add_mttf(mttf_cmd);

  SelftestOptions st;
  CLI::App* self_cmd = app.add_subcommand("selftest", "Fast invariant checks");
  self_cmd->add_flag("--corrupt-hmatrix", st.corrupt_hmatrix)->group("");
  self_cmd->add_flag("--perturb-rng", st.perturb_rng)->group("");
  CLI::App* hm_cmd = app.add_subcommand("dump-hmatrix", "Print the SECDED parity-check matrix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*run_cmd) return cmd_run(run_o.resolve(false), out);
    if (*sweep_cmd) return cmd_sweep(sweep_o.resolve(false), out);
    if (*mttf_cmd) return cmd_mttf(mttf_o.resolve(true), out);
    if (*self_cmd) return cmd_selftest(st, out);
    if (*hm_cmd) {
      SecdedCode::hsiao().print_matrix(out);
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace ftnoc
