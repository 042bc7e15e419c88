#include "ftnoc/traffic.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ftnoc/rng.hpp"

namespace ftnoc {

std::string_view to_string(BenchmarkKind k) {
  switch (k) {
    case BenchmarkKind::Uniform: return "uniform";
    case BenchmarkKind::Transpose: return "transpose";
    case BenchmarkKind::Hotspot10: return "hotspot10";
    case BenchmarkKind::Matrix: return "matrix";
    case BenchmarkKind::H264: return "h264";
    case BenchmarkKind::Vopd: return "vopd";
    case BenchmarkKind::Mwd: return "mwd";
    case BenchmarkKind::Pip: return "pip";
    case BenchmarkKind::Table: return "table";
  }
  return "?";
}

std::optional<BenchmarkKind> parse_benchmark(std::string_view s) {
  for (auto k : {BenchmarkKind::Uniform, BenchmarkKind::Transpose, BenchmarkKind::Hotspot10,
                 BenchmarkKind::Matrix, BenchmarkKind::H264, BenchmarkKind::Vopd, BenchmarkKind::Mwd,
                 BenchmarkKind::Pip, BenchmarkKind::Table}) {
    if (to_string(k) == s) return k;
  }
  if (s == "hotspot") return BenchmarkKind::Hotspot10;
  if (s == "h.264") return BenchmarkKind::H264;
  return std::nullopt;
}

int default_packet_budget(BenchmarkKind k) {
  switch (k) {
    case BenchmarkKind::Uniform: return 8192;
    case BenchmarkKind::Transpose: return 640;
    case BenchmarkKind::Hotspot10: return 8192;
    case BenchmarkKind::Matrix: return 1080;
    case BenchmarkKind::H264: return 8400;
    case BenchmarkKind::Vopd: return 3494;
    case BenchmarkKind::Mwd: return 1120;
    case BenchmarkKind::Pip: return 512;
    case BenchmarkKind::Table: return 0;
  }
  return 0;
}

Dims default_dims(BenchmarkKind k) {
  switch (k) {
    case BenchmarkKind::Matrix: return {6, 6, 3};
    case BenchmarkKind::H264: return {3, 3, 3};
    case BenchmarkKind::Vopd: return {3, 2, 2};
    case BenchmarkKind::Mwd: return {2, 2, 3};
    case BenchmarkKind::Pip: return {2, 2, 2};
    default: return {4, 4, 4};
  }
}

namespace {

struct Edge {
  int src;
  int dst;
  double weight;
};

// Approximate application task graphs, one task per node in index order.
// Weights are relative bandwidths.
const std::vector<Edge>& task_graph(BenchmarkKind k) {
  static const std::vector<Edge> vopd = {
      {0, 1, 70},   {1, 2, 362}, {2, 3, 362}, {3, 4, 362}, {3, 5, 49},   {5, 3, 27},
      {4, 6, 357},  {6, 7, 353}, {7, 8, 300}, {8, 9, 313}, {9, 10, 313}, {10, 9, 94},
      {11, 6, 16},  {11, 9, 16}};
  static const std::vector<Edge> mwd = {
      {0, 1, 64},  {0, 2, 128}, {1, 3, 64},  {3, 4, 64},  {2, 5, 96},   {5, 6, 96},
      {4, 7, 96},  {6, 7, 96},  {7, 8, 64},  {8, 9, 64},  {9, 10, 64},  {10, 11, 64}};
  static const std::vector<Edge> pip = {
      {0, 1, 128}, {1, 2, 64}, {2, 3, 64}, {0, 4, 128}, {4, 5, 64}, {5, 6, 64},
      {3, 7, 64},  {6, 7, 64}};
  // H.264 encoder (0..11), MP3 encoder (12..19) and OFDM (20..26).
  static const std::vector<Edge> h264 = {
      {0, 1, 420},  {1, 2, 380},  {2, 3, 380},  {3, 4, 300},  {4, 5, 300},  {5, 6, 260},
      {6, 7, 260},  {7, 1, 120},  {3, 8, 150},  {8, 9, 150},  {9, 10, 90},  {10, 11, 90},
      {11, 0, 40},  {12, 13, 120}, {13, 14, 120}, {14, 15, 100}, {15, 16, 100}, {16, 17, 80},
      {17, 18, 80}, {18, 19, 60},  {19, 12, 20},  {20, 21, 160}, {21, 22, 160}, {22, 23, 140},
      {23, 24, 140}, {24, 25, 120}, {25, 26, 120}, {26, 20, 30}};
  static const std::vector<Edge> none;
  switch (k) {
    case BenchmarkKind::Vopd: return vopd;
    case BenchmarkKind::Mwd: return mwd;
    case BenchmarkKind::Pip: return pip;
    case BenchmarkKind::H264: return h264;
    default: return none;
  }
}

struct Spec {
  Coord3 dst;
  int length;
};

// Per-node creation times: node phase + k * interval.
std::vector<Packet> finalize(const Dims& dims, std::vector<std::vector<Spec>> per_node,
                             int interval, Rng& rng) {
  struct Timed {
    std::uint64_t t;
    int node;
    Spec s;
  };
  std::vector<Timed> all;
  for (int n = 0; n < dims.node_count(); ++n) {
    auto& v = per_node[static_cast<std::size_t>(n)];
    if (v.empty()) continue;
    std::uint64_t phase = interval > 0 ? rng.below(static_cast<std::uint64_t>(interval)) : 0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      all.push_back({phase + k * static_cast<std::uint64_t>(interval), n, v[k]});
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const Timed& a, const Timed& b) {
    return a.t != b.t ? a.t < b.t : a.node < b.node;
  });
  std::vector<Packet> out;
  out.reserve(all.size());
  for (const auto& t : all) {
    Packet p;
    p.id = out.size();
    p.source = dims.coord(t.node);
    p.destination = t.s.dst;
    p.length = t.s.length;
    p.inject_cycle = t.t;
    out.push_back(p);
  }
  return out;
}

std::vector<int> even_split(int total, int parts) {
  std::vector<int> v(static_cast<std::size_t>(parts), parts ? total / parts : 0);
  for (int i = 0; i < (parts ? total % parts : 0); ++i) ++v[static_cast<std::size_t>(i)];
  return v;
}

Coord3 uniform_other(const Dims& dims, Coord3 src, Rng& rng) {
  int n = dims.node_count();
  int s = dims.index(src);
  int d = rng.below_int(n - 1);
  if (d >= s) ++d;
  return dims.coord(d);
}

// Interleaves flows of one source: one packet per flow per round.
void round_robin(std::vector<Spec>& out, std::vector<std::pair<Spec, int>> flows) {
  bool any = true;
  while (any) {
    any = false;
    for (auto& [spec, left] : flows) {
      if (left > 0) {
        out.push_back(spec);
        --left;
        any = true;
      }
    }
  }
}

}  // namespace

Coord3 transpose_of(Coord3 c) { return {c.z, c.y, c.x}; }

std::vector<Coord3> default_hotspots(const Dims& dims) {
  int z = dims.z / 2;
  int x0 = std::max(0, dims.x / 2 - 1);
  int y0 = std::max(0, dims.y / 2 - 1);
  std::vector<Coord3> h;
  for (int y = y0; y <= std::min(y0 + 1, dims.y - 1); ++y) {
    for (int x = x0; x <= std::min(x0 + 1, dims.x - 1); ++x) h.push_back({x, y, z});
  }
  return h;
}

std::vector<int> apportion(int total, const std::vector<double>& weights) {
  double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> out(weights.size(), 0);
  if (weights.empty() || sum <= 0) return out;
  std::vector<std::pair<double, std::size_t>> frac;
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    double exact = total * weights[i] / sum;
    out[i] = static_cast<int>(exact);
    assigned += out[i];
    frac.push_back({exact - out[i], i});
  }
  std::stable_sort(frac.begin(), frac.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int k = 0; k < total - assigned; ++k) ++out[frac[static_cast<std::size_t>(k) % frac.size()].second];
  return out;
}

std::vector<TableFlow> parse_traffic_table(std::istream& in, const std::string& name,
                                           const Dims& dims) {
  std::vector<TableFlow> flows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::vector<long long> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        long long x = std::stoll(cell, &pos);
        if (cell.find_first_not_of(" \t\r", pos) != std::string::npos) throw std::invalid_argument("");
        v.push_back(x);
      } catch (const std::exception&) {
        throw TrafficTableError(name, lineno, "not an integer: '" + cell + "'");
      }
    }
    if (v.size() != 9) {
      throw TrafficTableError(name, lineno, "expected 9 fields, got " + std::to_string(v.size()));
    }
    TableFlow f;
    f.src = {static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2])};
    f.dst = {static_cast<int>(v[3]), static_cast<int>(v[4]), static_cast<int>(v[5])};
    if (!dims.contains(f.src)) throw TrafficTableError(name, lineno, "source outside the mesh");
    if (!dims.contains(f.dst)) throw TrafficTableError(name, lineno, "destination outside the mesh");
    if (f.src == f.dst) throw TrafficTableError(name, lineno, "source equals destination");
    if (v[6] < 0 || v[7] < 1 || v[8] < 0) {
      throw TrafficTableError(name, lineno, "count/length/interval out of range");
    }
    f.packet_count = static_cast<int>(v[6]);
    f.packet_length = static_cast<int>(v[7]);
    f.interval_cycles = static_cast<int>(v[8]);
    flows.push_back(f);
  }
  return flows;
}

std::vector<TableFlow> load_traffic_table(const std::string& path, const Dims& dims) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open traffic table '" + path + "'");
  return parse_traffic_table(in, path, dims);
}

std::vector<Packet> gen_traffic(const TrafficSource& src, const NetworkConfig& cfg) {
  const Dims& dims = cfg.dims;
  const int n = dims.node_count();
  const int len = src.packet_length;
  Rng rng(hash_mix(src.seed, 0x7AFF1C, static_cast<std::uint64_t>(src.kind)));
  std::vector<std::vector<Spec>> per_node(static_cast<std::size_t>(n));

  switch (src.kind) {
    case BenchmarkKind::Uniform:
    case BenchmarkKind::Hotspot10: {
      auto counts = even_split(src.budget(), n);
      std::vector<std::pair<int, int>> order;  // (node, k) in creation order
      for (int node = 0; node < n; ++node) {
        for (int k = 0; k < counts[static_cast<std::size_t>(node)]; ++k) {
          per_node[static_cast<std::size_t>(node)].push_back(
              {uniform_other(dims, dims.coord(node), rng), len});
          order.push_back({node, k});
        }
      }
      if (src.kind == BenchmarkKind::Hotspot10) {
        auto hs = src.hotspots.empty() ? default_hotspots(dims) : src.hotspots;
        int retarget = static_cast<int>((src.budget() + 5) / 10);
        // Partial Fisher-Yates over all packets picks exactly `retarget`.
        for (int i = 0; i < retarget && i < static_cast<int>(order.size()); ++i) {
          auto j = static_cast<std::size_t>(i) + rng.below(order.size() - static_cast<std::size_t>(i));
          std::swap(order[static_cast<std::size_t>(i)], order[j]);
          auto [node, k] = order[static_cast<std::size_t>(i)];
          Coord3 s = dims.coord(node);
          std::vector<Coord3> cand;
          for (auto h : hs) {
            if (h != s) cand.push_back(h);
          }
          if (cand.empty()) continue;
          auto& spec = per_node[static_cast<std::size_t>(node)][static_cast<std::size_t>(k)];
          spec.dst = cand[rng.below(cand.size())];
          spec.length = len + std::max(1, len / 10);
        }
      }
      break;
    }
    case BenchmarkKind::Transpose: {
      std::vector<int> senders;
      for (int node = 0; node < n; ++node) {
        Coord3 c = dims.coord(node);
        Coord3 t = transpose_of(c);
        if (t != c && dims.contains(t)) senders.push_back(node);
      }
      auto counts = even_split(src.budget(), static_cast<int>(senders.size()));
      for (std::size_t i = 0; i < senders.size(); ++i) {
        Coord3 c = dims.coord(senders[i]);
        for (int k = 0; k < counts[i]; ++k) {
          per_node[static_cast<std::size_t>(senders[i])].push_back({transpose_of(c), len});
        }
      }
      break;
    }
    case BenchmarkKind::Matrix: {
      // Layer A (z=0) and B (z=1) send operands to layer C (top), which
      // returns results to A. On 6x6x3: 432 + 432 + 216 = 1080 packets.
      const int za = 0;
      const int zb = std::min(1, dims.z - 1);
      const int zc = dims.z - 1;
      for (int x = 0; x < dims.x; ++x) {
        for (int y = 0; y < dims.y; ++y) {
          std::vector<std::pair<Spec, int>> fa;
          std::vector<std::pair<Spec, int>> fb;
          for (int k = 0; k < dims.y; ++k) fa.push_back({{{x, k, zc}, len}, 2});
          for (int k = 0; k < dims.x; ++k) fb.push_back({{{k, y, zc}, len}, 2});
          round_robin(per_node[static_cast<std::size_t>(dims.index({x, y, za}))], fa);
          if (zb != za && zb != zc) {
            round_robin(per_node[static_cast<std::size_t>(dims.index({x, y, zb}))], fb);
          }
          if (zc != za) {
            round_robin(per_node[static_cast<std::size_t>(dims.index({x, y, zc}))],
                        {{{{x, y, za}, len}, 6}});
          }
        }
      }
      break;
    }
    case BenchmarkKind::H264:
    case BenchmarkKind::Vopd:
    case BenchmarkKind::Mwd:
    case BenchmarkKind::Pip: {
      std::vector<Edge> edges;
      for (const auto& e : task_graph(src.kind)) {
        if (e.src < n && e.dst < n) edges.push_back(e);
      }
      std::vector<double> w;
      for (const auto& e : edges) w.push_back(e.weight);
      auto counts = apportion(src.budget(), w);
      std::vector<std::vector<std::pair<Spec, int>>> flows(static_cast<std::size_t>(n));
      for (std::size_t i = 0; i < edges.size(); ++i) {
        flows[static_cast<std::size_t>(edges[i].src)].push_back(
            {{dims.coord(edges[i].dst), len}, counts[i]});
      }
      for (int node = 0; node < n; ++node) {
        round_robin(per_node[static_cast<std::size_t>(node)], flows[static_cast<std::size_t>(node)]);
      }
      break;
    }
    case BenchmarkKind::Table: {
      auto flows = load_traffic_table(src.table_path, dims);
      std::vector<Packet> out;
      for (const auto& f : flows) {
        for (int k = 0; k < f.packet_count; ++k) {
          Packet p;
          p.source = f.src;
          p.destination = f.dst;
          p.length = f.packet_length;
          p.inject_cycle = static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(f.interval_cycles);
          out.push_back(p);
        }
      }
      std::stable_sort(out.begin(), out.end(), [&](const Packet& a, const Packet& b) {
        if (a.inject_cycle != b.inject_cycle) return a.inject_cycle < b.inject_cycle;
        return dims.index(a.source) < dims.index(b.source);
      });
      for (std::size_t i = 0; i < out.size(); ++i) out[i].id = i;
      return out;
    }
  }
  return finalize(dims, std::move(per_node), src.interval_cycles, rng);
}

}  // namespace ftnoc
