#include "ftnoc/core_model.hpp"

#include <charconv>
#include <cstdlib>
#include <stdexcept>

namespace ftnoc {

std::string to_string(Coord3 c) {
  return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + "," + std::to_string(c.z) + ")";
}

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::Local: return "L";
    case Direction::East: return "E";
    case Direction::West: return "W";
    case Direction::North: return "N";
    case Direction::South: return "S";
    case Direction::Up: return "U";
    case Direction::Down: return "D";
  }
  return "?";
}

std::optional<Direction> parse_direction(std::string_view s) {
  for (Direction d : kAllPorts) {
    if (to_string(d) == s) return d;
  }
  if (s == "Local" || s == "local") return Direction::Local;
  if (s == "East" || s == "east") return Direction::East;
  if (s == "West" || s == "west") return Direction::West;
  if (s == "North" || s == "north") return Direction::North;
  if (s == "South" || s == "south") return Direction::South;
  if (s == "Up" || s == "up") return Direction::Up;
  if (s == "Down" || s == "down") return Direction::Down;
  return std::nullopt;
}

Direction direction_inverse(Direction d) {
  switch (d) {
    case Direction::East: return Direction::West;
    case Direction::West: return Direction::East;
    case Direction::North: return Direction::South;
    case Direction::South: return Direction::North;
    case Direction::Up: return Direction::Down;
    case Direction::Down: return Direction::Up;
    case Direction::Local: break;
  }
  throw std::invalid_argument("direction_inverse: Local has no inverse");
}

std::string to_string(const Dims& d) {
  return std::to_string(d.x) + "x" + std::to_string(d.y) + "x" + std::to_string(d.z);
}

std::optional<Dims> parse_dims(std::string_view s) {
  Dims out{};
  int* fields[3] = {&out.x, &out.y, &out.z};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    std::size_t end = (i < 2) ? s.find('x', pos) : s.size();
    if (end == std::string_view::npos) return std::nullopt;
    auto part = s.substr(pos, end - pos);
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), *fields[i]);
    if (ec != std::errc{} || p != part.data() + part.size() || *fields[i] <= 0) return std::nullopt;
    pos = end + 1;
  }
  return out;
}

FlitKind flit_kind_for(int seq_index, int length) {
  if (length == 1) return FlitKind::HeaderTail;
  if (seq_index == 0) return FlitKind::Header;
  if (seq_index == length - 1) return FlitKind::Tail;
  return FlitKind::Body;
}

std::string_view to_string(RoutingAlgorithm a) {
  return a == RoutingAlgorithm::Laft ? "laft" : "xyz";
}

std::optional<RoutingAlgorithm> parse_routing(std::string_view s) {
  if (s == "laft" || s == "LAFT") return RoutingAlgorithm::Laft;
  if (s == "xyz" || s == "XYZ") return RoutingAlgorithm::Xyz;
  return std::nullopt;
}

void NetworkConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (dims.x < 1 || dims.y < 1 || dims.z < 1) fail("dims: every axis must be >= 1");
  // 3 destination bits per axis in the header.
  if (dims.x > 8 || dims.y > 8 || dims.z > 8) fail("dims: every axis must be <= 8");
  if (buffer_depth < 2) fail("buffer_depth: must be >= 2");
  if (bypass_links_per_router < 0) fail("bypass_links_per_router: must be >= 0");
  if (stop_threshold < 1) fail("stop_threshold: must be >= 1 (one flit may be in flight)");
  if (!(stop_threshold < go_threshold)) fail("stop_threshold: must be < go_threshold");
  if (go_threshold > buffer_depth) fail("go_threshold: must be <= buffer_depth");
}

std::optional<Coord3> neighbor(Coord3 c, Direction d, const Dims& dims) {
  Coord3 n = c;
  switch (d) {
    case Direction::Local: return std::nullopt;
    case Direction::East: ++n.x; break;
    case Direction::West: --n.x; break;
    case Direction::North: ++n.y; break;
    case Direction::South: --n.y; break;
    case Direction::Up: ++n.z; break;
    case Direction::Down: --n.z; break;
  }
  if (!dims.contains(n)) return std::nullopt;
  return n;
}

int manhattan(Coord3 a, Coord3 b) {
  return std::abs(a.x - b.x) + std::abs(a.y - b.y) + std::abs(a.z - b.z);
}

}  // namespace ftnoc
