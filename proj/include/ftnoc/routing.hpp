#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ftnoc/core_model.hpp"

namespace ftnoc {

/// Output-link health as seen by the node evaluating a route. Index by
/// port_index(); Local is never consulted. Out-of-mesh directions are faulty.
struct LinkFaultView {
  std::array<bool, kPortCount> faulty{};
  /// Each neighbor's own map, indexed [direction to neighbor][its port].
  std::array<std::array<bool, kPortCount>, kPortCount> neighbor_faulty{};

  /// View of `node` built from a per-node predicate `is_faulty(node, dir)`.
  template <typename Pred>
  static LinkFaultView build(Coord3 node, const Dims& dims, Pred&& is_faulty);
};

/// Downstream free-slot count per output direction (larger = less congested).
struct CongestionView {
  std::array<int, kPortCount> free_slots{};
};

struct RouteCandidate {
  Direction dir = Direction::Local;
  int diversity = 0;
  int free_slots = 0;
  bool minimal = false;
};

struct RoutingDecision {
  Direction chosen = Direction::Local;
  bool minimal = true;
  std::vector<RouteCandidate> candidates;  // tracing only
};

/// Axis directions that strictly reduce the distance to `to`.
DirectionSet minimal_dirs(Coord3 from, Coord3 to);

/// Number of minimal continuations after stepping from `node` along `d`.
/// Requires neighbor(node, d) to exist.
int diversity_score(Coord3 node, Direction d, Coord3 dest, const Dims& dims);

/// Look-ahead fault-tolerant selection of the port `next_node` will use.
/// `arrival` is the direction the flit travels to reach next_node (its
/// inverse is excluded from the non-minimal fallback). Minimal candidates
/// follow negative-first order: W/S/D offsets are resolved before E/N/U.
/// Returns nullopt when every usable output of next_node is faulty (NoRoute).
std::optional<RoutingDecision> laft_next_port(Coord3 next_node, Coord3 dest,
                                              const LinkFaultView& faults,
                                              const CongestionView& congestion, const Dims& dims,
                                              std::optional<Direction> arrival = std::nullopt);

/// Dimension-order x, then y, then z. Ignores faults.
RoutingDecision xyz_next_port(Coord3 next_node, Coord3 dest);

/// One trace line: node, dest, candidates with scores, choice.
std::string format_decision(Coord3 node, Coord3 dest, const std::optional<RoutingDecision>& d);

template <typename Pred>
LinkFaultView LinkFaultView::build(Coord3 node, const Dims& dims, Pred&& is_faulty) {
  LinkFaultView v;
  for (Direction d : kMeshDirections) {
    auto n = neighbor(node, d, dims);
    v.faulty[port_index(d)] = !n || is_faulty(node, d);
    if (!n) continue;
    for (Direction e : kMeshDirections) {
      v.neighbor_faulty[port_index(d)][port_index(e)] =
          !neighbor(*n, e, dims) || is_faulty(*n, e);
    }
  }
  return v;
}

}  // namespace ftnoc
