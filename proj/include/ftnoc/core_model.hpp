#pragma once

#include <array>
#include <bit>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ftnoc {

struct Coord3 {
  int x = 0;
  int y = 0;
  int z = 0;

  auto operator<=>(const Coord3&) const = default;
};

std::string to_string(Coord3 c);

// Port encoding is part of the wire format (3-bit next_port field) and fixes
// the tie-break order used by routing: E < W < N < S < U < D.
enum class Direction : std::uint8_t { Local = 0, East, West, North, South, Up, Down };

inline constexpr int kPortCount = 7;

inline constexpr std::array<Direction, 7> kAllPorts = {
    Direction::Local, Direction::East,  Direction::West, Direction::North,
    Direction::South, Direction::Up,    Direction::Down};

inline constexpr std::array<Direction, 6> kMeshDirections = {
    Direction::East, Direction::West, Direction::North,
    Direction::South, Direction::Up, Direction::Down};

constexpr int port_index(Direction d) { return static_cast<int>(d); }
constexpr Direction port_at(int i) { return static_cast<Direction>(i); }

std::string_view to_string(Direction d);
std::optional<Direction> parse_direction(std::string_view s);

/// Opposing port: a flit sent on output `d` enters the neighbor on input
/// `direction_inverse(d)`. Throws std::invalid_argument for Local.
Direction direction_inverse(Direction d);

/// Small value set of ports, bit i = port i.
class DirectionSet {
 public:
  constexpr DirectionSet() = default;
  constexpr explicit DirectionSet(std::uint8_t bits) : bits_(bits) {}

  constexpr void insert(Direction d) { bits_ |= static_cast<std::uint8_t>(1u << port_index(d)); }
  constexpr void erase(Direction d) { bits_ &= static_cast<std::uint8_t>(~(1u << port_index(d))); }
  constexpr bool contains(Direction d) const { return (bits_ >> port_index(d)) & 1u; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr int size() const { return std::popcount(bits_); }
  constexpr std::uint8_t bits() const { return bits_; }

  constexpr bool operator==(const DirectionSet&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

struct Dims {
  int x = 4;
  int y = 4;
  int z = 4;

  int node_count() const { return x * y * z; }
  bool contains(Coord3 c) const {
    return c.x >= 0 && c.y >= 0 && c.z >= 0 && c.x < x && c.y < y && c.z < z;
  }
  int index(Coord3 c) const { return (c.z * y + c.y) * x + c.x; }
  Coord3 coord(int idx) const { return {idx % x, (idx / x) % y, idx / (x * y)}; }

  bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& d);
/// Parses "4x4x4".
std::optional<Dims> parse_dims(std::string_view s);

enum class FlitKind : std::uint8_t { Header = 0, Body = 1, Tail = 2, HeaderTail = 3 };

constexpr bool is_head(FlitKind k) { return k == FlitKind::Header || k == FlitKind::HeaderTail; }
constexpr bool is_tail(FlitKind k) { return k == FlitKind::Tail || k == FlitKind::HeaderTail; }

FlitKind flit_kind_for(int seq_index, int length);

inline constexpr std::uint32_t kPayloadMask = (1u << 18) - 1;
inline constexpr std::uint32_t kPayloadExtMask = (1u << 12) - 1;

/// Simulator sideband carried next to a flit; never on the wire.
struct FlitTag {
  std::uint64_t packet_id = 0;
  std::uint32_t seq_index = 0;

  bool operator==(const FlitTag&) const = default;
};

/// Semantic flit. `payload_ext` occupies the parity positions when ECC is off
/// (30-bit payload variants) and is zero otherwise.
struct Flit {
  FlitKind kind = FlitKind::Header;
  Direction next_port = Direction::Local;
  Coord3 destination{};
  std::uint32_t payload = 0;
  std::uint16_t payload_ext = 0;
  FlitTag tag{};

  bool wire_equal(const Flit& o) const {
    return kind == o.kind && next_port == o.next_port && destination == o.destination &&
           payload == o.payload && payload_ext == o.payload_ext;
  }
  bool operator==(const Flit&) const = default;
};

struct Packet {
  std::uint64_t id = 0;
  Coord3 source{};
  Coord3 destination{};
  int length = 10;
  std::uint64_t inject_cycle = 0;

  bool operator==(const Packet&) const = default;
};

enum class RoutingAlgorithm : std::uint8_t { Laft, Xyz };

std::string_view to_string(RoutingAlgorithm a);
std::optional<RoutingAlgorithm> parse_routing(std::string_view s);

struct NetworkConfig {
  Dims dims{};
  int buffer_depth = 4;
  int bypass_links_per_router = 2;
  int stop_threshold = 1;  // stop when free slots <= this
  int go_threshold = 2;    // go when free slots >= this
  bool pcr_enabled = true;
  bool ecc_enabled = true;
  bool hard_ft_enabled = true;  // RAB + BLoD + DDRM + LAFT link marking
  RoutingAlgorithm routing_algorithm = RoutingAlgorithm::Laft;
  std::uint64_t rng_seed = 1;
  std::uint64_t drain_timeout_cycles = 20000;
  // Buffers stalled this long are checked for a wait-for cycle; one packet
  // per cycle found is dropped to break it. 0 disables the release.
  std::uint64_t deadlock_release_cycles = 64;

  /// Header hop budget for non-minimal steps: 2*(X+Y+Z).
  int misroute_budget() const { return 2 * (dims.x + dims.y + dims.z); }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  bool operator==(const NetworkConfig&) const = default;
};

/// Mesh neighbor, none for Local or when the step leaves the mesh.
std::optional<Coord3> neighbor(Coord3 c, Direction d, const Dims& dims);
inline std::optional<Coord3> neighbor(Coord3 c, Direction d, const NetworkConfig& cfg) {
  return neighbor(c, d, cfg.dims);
}

int manhattan(Coord3 a, Coord3 b);

}  // namespace ftnoc
