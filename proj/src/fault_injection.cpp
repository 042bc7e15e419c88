#include "ftnoc/fault_injection.hpp"

#include <algorithm>
#include <cmath>
#include <bit>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ftnoc {

using nlohmann::json;

std::string_view to_string(FaultStructure s) {
  switch (s) {
    case FaultStructure::BufferSlot: return "buffer_slot";
    case FaultStructure::CrossbarPath: return "crossbar_path";
    case FaultStructure::Channel: return "channel";
    case FaultStructure::NpcUnit: return "npc_unit";
    case FaultStructure::SaUnit: return "sa_unit";
    case FaultStructure::Controller: return "controller";
  }
  return "?";
}

std::optional<FaultStructure> parse_fault_structure(std::string_view s) {
  for (auto k : {FaultStructure::BufferSlot, FaultStructure::CrossbarPath, FaultStructure::Channel,
                 FaultStructure::NpcUnit, FaultStructure::SaUnit, FaultStructure::Controller}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::string to_string(const FaultTarget& t) {
  std::ostringstream os;
  os << to_string(t.kind) << '@' << to_string(t.router);
  switch (t.kind) {
    case FaultStructure::BufferSlot:
      os << " port=" << to_string(port_at(t.port)) << " slot=" << t.slot;
      break;
    case FaultStructure::CrossbarPath:
      os << ' ' << to_string(port_at(t.port)) << "->" << to_string(port_at(t.out_port));
      break;
    case FaultStructure::Channel: os << " dir=" << to_string(port_at(t.out_port)); break;
    case FaultStructure::NpcUnit:
    case FaultStructure::SaUnit: os << " port=" << to_string(port_at(t.port)); break;
    case FaultStructure::Controller: break;
  }
  return os.str();
}

HardFault stuck_bit_fault(const FaultTarget& t, StuckModel m, int bit, std::uint64_t onset) {
  if (bit < 0 || bit >= kFlitBits) throw std::invalid_argument("stuck_bit_fault: bit out of range");
  return {t, m, std::uint64_t{1} << bit, onset};
}

void SoftErrorProcess::validate() const {
  if (!(rate >= 0.0)) throw std::invalid_argument("soft.rate must be >= 0");
  double sum = 0;
  for (double w : target_mix) {
    if (w < 0) throw std::invalid_argument("soft.target_mix weights must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw std::invalid_argument("soft.target_mix must sum to 1");
}

std::vector<SoftErrorEvent> sample_soft_errors(const SoftErrorProcess& proc, const Dims& dims,
                                               std::uint64_t cycle) {
  std::vector<SoftErrorEvent> out;
  if (proc.rate <= 0.0) return out;
  const auto nodes = static_cast<std::uint64_t>(dims.node_count());
  for (int k = 0; k < proc.rate; ++k) {
    if (to_unit(hash_mix(proc.seed, cycle, k, 0)) >= proc.rate - k) continue;
    SoftErrorEvent ev;
    ev.cycle = cycle;
    ev.router = static_cast<int>(hash_mix(proc.seed, cycle, k, 1) % nodes);
    double u = to_unit(hash_mix(proc.seed, cycle, k, 2));
    double acc = proc.target_mix[0];
    if (u < acc) {
      ev.target = SoftTarget::NpcResult;
    } else if (u < (acc += proc.target_mix[1])) {
      ev.target = SoftTarget::SaResult;
    } else {
      ev.target = SoftTarget::LinkFlit;
    }
    ev.selector = hash_mix(proc.seed, cycle, k, 3);
    out.push_back(ev);
  }
  return out;
}

std::string_view to_string(FaultDistribution d) {
  switch (d) {
    case FaultDistribution::Datapath: return "datapath";
    case FaultDistribution::Flat: return "flat";
    case FaultDistribution::Weighted: return "weighted";
  }
  return "?";
}

std::optional<FaultDistribution> parse_distribution(std::string_view s) {
  if (s == "datapath") return FaultDistribution::Datapath;
  if (s == "flat") return FaultDistribution::Flat;
  if (s == "weighted" || s == "weight") return FaultDistribution::Weighted;
  return std::nullopt;
}

double controller_share(FaultDistribution d) {
  switch (d) {
    case FaultDistribution::Datapath: return 0.0;
    case FaultDistribution::Flat: return 0.20;
    case FaultDistribution::Weighted: return 0.10;
  }
  return 0.0;
}

namespace {

std::vector<int> existing_ports(Coord3 r, const Dims& dims) {
  std::vector<int> ports{port_index(Direction::Local)};
  for (Direction d : kMeshDirections) {
    if (neighbor(r, d, dims)) ports.push_back(port_index(d));
  }
  return ports;
}

std::vector<FaultTarget> class_instances(Coord3 r, const Dims& dims, int depth, FaultStructure k) {
  std::vector<FaultTarget> out;
  auto ports = existing_ports(r, dims);
  switch (k) {
    case FaultStructure::BufferSlot:
      for (int p : ports) {
        for (int s = 0; s < depth; ++s) out.push_back({k, r, p, s, 0});
      }
      break;
    case FaultStructure::CrossbarPath:
      for (int in : ports) {
        for (int o : ports) {
          if (in != o) out.push_back({k, r, in, 0, o});
        }
      }
      break;
    case FaultStructure::Channel:
      for (int p : ports) {
        if (p != port_index(Direction::Local)) out.push_back({k, r, 0, 0, p});
      }
      break;
    case FaultStructure::NpcUnit:
    case FaultStructure::SaUnit:
      for (int p : ports) out.push_back({k, r, p, 0, 0});
      break;
    case FaultStructure::Controller: out.push_back({k, r, 0, 0, 0}); break;
  }
  return out;
}

}  // namespace

std::vector<FaultTarget> router_structures(Coord3 router, const Dims& dims, int buffer_depth) {
  std::vector<FaultTarget> all;
  for (auto k : {FaultStructure::BufferSlot, FaultStructure::CrossbarPath, FaultStructure::Channel,
                 FaultStructure::NpcUnit, FaultStructure::SaUnit}) {
    auto v = class_instances(router, dims, buffer_depth, k);
    all.insert(all.end(), v.begin(), v.end());
  }
  return all;
}

FaultTarget draw_target(Coord3 router, const Dims& dims, int buffer_depth, FaultDistribution dist,
                        Rng& rng) {
  if (dist == FaultDistribution::Datapath) {
    std::vector<std::vector<FaultTarget>> classes;
    for (auto k : {FaultStructure::BufferSlot, FaultStructure::CrossbarPath, FaultStructure::Channel}) {
      auto v = class_instances(router, dims, buffer_depth, k);
      if (!v.empty()) classes.push_back(std::move(v));
    }
    const auto& cls = classes[rng.below(classes.size())];
    return cls[rng.below(cls.size())];
  }
  if (rng.uniform() < controller_share(dist)) return {FaultStructure::Controller, router, 0, 0, 0};
  auto all = router_structures(router, dims, buffer_depth);
  return all[rng.below(all.size())];
}

std::uint64_t draw_stuck_mask(FaultStructure kind, int bits, Rng& rng) {
  if (kind == FaultStructure::Controller) return 0;
  const bool unit = kind == FaultStructure::NpcUnit || kind == FaultStructure::SaUnit;
  const int width = unit ? 3 : kCodewordBits;
  const int base = unit ? 0 : kCodewordBits * rng.below_int(2);
  bits = std::clamp(bits, 1, width);
  std::uint64_t mask = 0;
  while (std::popcount(mask) < bits) mask |= std::uint64_t{1} << (base + rng.below_int(width));
  return mask;
}

HardFault draw_hard_fault(Coord3 router, const Dims& dims, int buffer_depth, FaultDistribution dist,
                          int stuck_bits, Rng& rng) {
  HardFault f;
  f.target = draw_target(router, dims, buffer_depth, dist, rng);
  f.model = rng.below(2) ? StuckModel::StuckAt1 : StuckModel::StuckAt0;
  f.mask = draw_stuck_mask(f.target.kind, stuck_bits, rng);
  return f;
}

int faulty_router_count(double percentage, int node_count) {
  return static_cast<int>(std::ceil(percentage * node_count / 100.0 - 1e-9));
}

FaultPlan plan_hard_faults(const NetworkConfig& cfg, double percentage, FaultDistribution dist,
                           std::uint64_t seed, int stuck_bits) {
  if (!(percentage >= 0.0 && percentage <= 100.0)) {
    throw std::invalid_argument("hard fault percentage must be within [0, 100]");
  }
  FaultPlan plan;
  plan.hard_fault_router_percentage = percentage;
  plan.distribution = dist;
  plan.stuck_bits = stuck_bits;
  plan.seed = seed;
  const int n = cfg.dims.node_count();
  const int k = faulty_router_count(percentage, n);
  Rng rng(hash_mix(seed, 0xFA017));
  std::vector<int> nodes(static_cast<std::size_t>(n));
  std::iota(nodes.begin(), nodes.end(), 0);
  for (int i = 0; i < k; ++i) {
    auto j = static_cast<std::size_t>(i) + rng.below(static_cast<std::uint64_t>(n - i));
    std::swap(nodes[static_cast<std::size_t>(i)], nodes[j]);
  }
  std::sort(nodes.begin(), nodes.begin() + k);
  for (int i = 0; i < k; ++i) {
    plan.hard_faults.push_back(draw_hard_fault(cfg.dims.coord(nodes[static_cast<std::size_t>(i)]),
                                               cfg.dims, cfg.buffer_depth, dist, stuck_bits, rng));
  }
  return plan;
}

namespace {

json coord_json(Coord3 c) { return json::array({c.x, c.y, c.z}); }

Coord3 coord_from(const json& j) {
  return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()};
}

}  // namespace

std::string fault_plan_to_json(const FaultPlan& plan) {
  json j;
  j["hard_fault_router_percentage"] = plan.hard_fault_router_percentage;
  j["distribution"] = std::string(to_string(plan.distribution));
  j["stuck_bits"] = plan.stuck_bits;
  j["seed"] = plan.seed;
  j["soft"] = {{"rate", plan.soft.rate},
               {"target_mix", plan.soft.target_mix},
               {"seed", plan.soft.seed}};
  json faults = json::array();
  for (const auto& f : plan.hard_faults) {
    faults.push_back({{"structure", std::string(to_string(f.target.kind))},
                      {"router", coord_json(f.target.router)},
                      {"port", std::string(to_string(port_at(f.target.port)))},
                      {"slot", f.target.slot},
                      {"out_port", std::string(to_string(port_at(f.target.out_port)))},
                      {"model", f.model == StuckModel::StuckAt1 ? "stuck_at_1" : "stuck_at_0"},
                      {"mask", f.mask},
                      {"onset_cycle", f.onset_cycle}});
  }
  j["hard_faults"] = faults;
  return j.dump(2);
}

FaultPlan fault_plan_from_json(std::string_view text) {
  FaultPlan plan;
  std::string field = "<document>";
  try {
    json j = json::parse(text);
    auto get = [&](const json& o, const char* key) -> const json& {
      field = key;
      return o.at(key);
    };
    auto dir = [&](const json& v) {
      auto d = parse_direction(v.get<std::string>());
      if (!d) throw std::invalid_argument("unknown direction");
      return port_index(*d);
    };
    if (j.contains("hard_fault_router_percentage")) {
      plan.hard_fault_router_percentage = get(j, "hard_fault_router_percentage").get<double>();
    }
    if (j.contains("distribution")) {
      auto d = parse_distribution(get(j, "distribution").get<std::string>());
      if (!d) throw std::invalid_argument("unknown distribution");
      plan.distribution = *d;
    }
    if (j.contains("stuck_bits")) plan.stuck_bits = get(j, "stuck_bits").get<int>();
    if (j.contains("seed")) plan.seed = get(j, "seed").get<std::uint64_t>();
    if (j.contains("soft")) {
      const auto& s = get(j, "soft");
      if (s.contains("rate")) plan.soft.rate = get(s, "rate").get<double>();
      if (s.contains("target_mix")) plan.soft.target_mix = get(s, "target_mix").get<std::array<double, 3>>();
      if (s.contains("seed")) plan.soft.seed = get(s, "seed").get<std::uint64_t>();
      field = "soft";
      plan.soft.validate();
    }
    if (j.contains("hard_faults")) {
      for (const auto& f : get(j, "hard_faults")) {
        HardFault h;
        auto k = parse_fault_structure(get(f, "structure").get<std::string>());
        if (!k) throw std::invalid_argument("unknown structure");
        h.target.kind = *k;
        h.target.router = coord_from(get(f, "router"));
        if (f.contains("port")) h.target.port = dir(get(f, "port"));
        if (f.contains("slot")) h.target.slot = get(f, "slot").get<int>();
        if (f.contains("out_port")) h.target.out_port = dir(get(f, "out_port"));
        if (f.contains("model")) {
          auto m = get(f, "model").get<std::string>();
          if (m != "stuck_at_0" && m != "stuck_at_1") throw std::invalid_argument("unknown model");
          h.model = m == "stuck_at_1" ? StuckModel::StuckAt1 : StuckModel::StuckAt0;
        }
        if (f.contains("mask")) h.mask = get(f, "mask").get<std::uint64_t>();
        if (f.contains("bit")) {
          int bit = get(f, "bit").get<int>();
          if (bit < 0 || bit >= kFlitBits) throw std::invalid_argument("bit out of range");
          h.mask = std::uint64_t{1} << bit;
        }
        if (f.contains("onset_cycle")) h.onset_cycle = get(f, "onset_cycle").get<std::uint64_t>();
        plan.hard_faults.push_back(h);
      }
    }
  } catch (const std::exception& e) {
    throw std::invalid_argument("fault plan: field '" + field + "': " + e.what());
  }
  return plan;
}

}  // namespace ftnoc
