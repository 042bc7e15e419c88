#include "ftnoc/routing.hpp"

#include <sstream>

namespace ftnoc {

DirectionSet minimal_dirs(Coord3 from, Coord3 to) {
  DirectionSet s;
  if (to.x > from.x) s.insert(Direction::East);
  if (to.x < from.x) s.insert(Direction::West);
  if (to.y > from.y) s.insert(Direction::North);
  if (to.y < from.y) s.insert(Direction::South);
  if (to.z > from.z) s.insert(Direction::Up);
  if (to.z < from.z) s.insert(Direction::Down);
  return s;
}

int diversity_score(Coord3 node, Direction d, Coord3 dest, const Dims& dims) {
  auto n = neighbor(node, d, dims);
  if (!n) return 0;
  return minimal_dirs(*n, dest).size();
}

namespace {

bool is_negative(Direction d) {
  return d == Direction::West || d == Direction::South || d == Direction::Down;
}

// Max diversity, then max free slots, then fixed port order (first wins).
bool better(const RouteCandidate& a, const RouteCandidate& b) {
  if (a.diversity != b.diversity) return a.diversity > b.diversity;
  if (a.free_slots != b.free_slots) return a.free_slots > b.free_slots;
  return port_index(a.dir) < port_index(b.dir);
}

}  // namespace

std::optional<RoutingDecision> laft_next_port(Coord3 next_node, Coord3 dest,
                                              const LinkFaultView& faults,
                                              const CongestionView& congestion, const Dims& dims,
                                              std::optional<Direction> arrival) {
  RoutingDecision out;
  if (next_node == dest) {
    out.chosen = Direction::Local;
    out.minimal = true;
    return out;
  }
  const DirectionSet minimal = minimal_dirs(next_node, dest);
  auto usable = [&](Direction d) {
    return !faults.faulty[port_index(d)] && neighbor(next_node, d, dims).has_value();
  };

  std::optional<Direction> uturn;
  if (arrival && *arrival != Direction::Local) uturn = direction_inverse(*arrival);

  // A minimal U-turn is only taken when it is the sole minimal option.
  int open_minimal = 0;
  for (Direction d : kMeshDirections) {
    if (minimal.contains(d) && usable(d)) ++open_minimal;
  }
  auto admissible = [&](Direction d) {
    return minimal.contains(d) && usable(d) && !(open_minimal > 1 && uturn && *uturn == d);
  };
  // Negative-first: while a W/S/D offset remains, only those are offered.
  bool negative_pending = false;
  for (Direction d : {Direction::West, Direction::South, Direction::Down}) {
    negative_pending = negative_pending || admissible(d);
  }
  for (Direction d : kMeshDirections) {
    if (admissible(d) && (!negative_pending || is_negative(d))) {
      out.candidates.push_back({d, diversity_score(next_node, d, dest, dims),
                                congestion.free_slots[port_index(d)], true});
    }
  }
  if (out.candidates.empty()) {
    for (Direction d : kMeshDirections) {
      if (minimal.contains(d) || !usable(d) || (uturn && *uturn == d)) continue;
      out.candidates.push_back({d, diversity_score(next_node, d, dest, dims),
                                congestion.free_slots[port_index(d)], false});
    }
  }
  if (out.candidates.empty()) return std::nullopt;

  // Detours first leave the blocked axis, then lean negative so they stay
  // close to negative-first order.
  auto detour_rank = [&](const RouteCandidate& c) {
    if (c.minimal) return 0;
    const bool backtrack = minimal.contains(direction_inverse(c.dir));
    return (backtrack ? 2 : 0) + (is_negative(c.dir) ? 0 : 1);
  };
  const RouteCandidate* best = &out.candidates.front();
  for (const auto& c : out.candidates) {
    const int rc = detour_rank(c);
    const int rb = detour_rank(*best);
    if (rc != rb) {
      if (rc < rb) best = &c;
      continue;
    }
    if (better(c, *best)) best = &c;
  }
  out.chosen = best->dir;
  out.minimal = best->minimal;
  return out;
}

RoutingDecision xyz_next_port(Coord3 next_node, Coord3 dest) {
  RoutingDecision out;
  if (dest.x > next_node.x) out.chosen = Direction::East;
  else if (dest.x < next_node.x) out.chosen = Direction::West;
  else if (dest.y > next_node.y) out.chosen = Direction::North;
  else if (dest.y < next_node.y) out.chosen = Direction::South;
  else if (dest.z > next_node.z) out.chosen = Direction::Up;
  else if (dest.z < next_node.z) out.chosen = Direction::Down;
  else out.chosen = Direction::Local;
  out.minimal = true;
  return out;
}

std::string format_decision(Coord3 node, Coord3 dest, const std::optional<RoutingDecision>& d) {
  std::ostringstream os;
  os << "route node=" << to_string(node) << " dest=" << to_string(dest) << " candidates=[";
  if (d) {
    bool first = true;
    for (const auto& c : d->candidates) {
      if (!first) os << ' ';
      first = false;
      os << to_string(c.dir) << ":div=" << c.diversity << ",free=" << c.free_slots
         << (c.minimal ? ",min" : ",nonmin");
    }
    os << "] choice=" << to_string(d->chosen);
  } else {
    os << "] choice=NoRoute";
  }
  return os.str();
}

}  // namespace ftnoc
