#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ftnoc/core_model.hpp"

namespace ftnoc {

enum class BenchmarkKind : std::uint8_t {
  Uniform,
  Transpose,
  Hotspot10,
  Matrix,
  H264,
  Vopd,
  Mwd,
  Pip,
  Table,
};

std::string_view to_string(BenchmarkKind k);
std::optional<BenchmarkKind> parse_benchmark(std::string_view s);

/// Packet budget and mesh size each benchmark is run with by default.
int default_packet_budget(BenchmarkKind k);
Dims default_dims(BenchmarkKind k);

struct TrafficSource {
  BenchmarkKind kind = BenchmarkKind::Uniform;
  int total_packets = 0;  // 0 = benchmark default
  int packet_length = 10;
  int interval_cycles = 100;  // per-node gap between packet creations
  std::string table_path;
  std::vector<Coord3> hotspots;  // empty = 4 central nodes of layer Z/2
  std::uint64_t seed = 1;

  int budget() const { return total_packets > 0 ? total_packets : default_packet_budget(kind); }
};

/// One row of a traffic table.
struct TableFlow {
  Coord3 src{};
  Coord3 dst{};
  int packet_count = 0;
  int packet_length = 10;
  int interval_cycles = 100;
};

class TrafficTableError : public std::runtime_error {
 public:
  TrafficTableError(const std::string& where, int line, const std::string& what)
      : std::runtime_error(where + ":" + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Rows: src_x,src_y,src_z,dst_x,dst_y,dst_z,packet_count,packet_length,
/// interval_cycles. Blank lines and lines starting with '#' are skipped.
std::vector<TableFlow> parse_traffic_table(std::istream& in, const std::string& name,
                                           const Dims& dims);

/// Throws std::runtime_error naming the path when it cannot be opened.
std::vector<TableFlow> load_traffic_table(const std::string& path, const Dims& dims);

Coord3 transpose_of(Coord3 c);
std::vector<Coord3> default_hotspots(const Dims& dims);

/// Splits `total` over `weights` by largest remainder (ties to lower index).
std::vector<int> apportion(int total, const std::vector<double>& weights);

/// Timed injection schedule sorted by (inject_cycle, source index); ids are
/// assigned 0..n-1 in that order.
std::vector<Packet> gen_traffic(const TrafficSource& src, const NetworkConfig& cfg);

}  // namespace ftnoc
