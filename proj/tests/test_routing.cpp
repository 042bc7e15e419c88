#include <doctest.h>

#include <map>
#include <queue>
#include <set>
#include <utility>

#include "ftnoc/rng.hpp"
#include "ftnoc/routing.hpp"

using namespace ftnoc;

namespace {

LinkFaultView no_faults(Coord3 node, const Dims& d) {
  return LinkFaultView::build(node, d, [](Coord3, Direction) { return false; });
}

CongestionView flat_congestion(int v = 4) {
  CongestionView c;
  c.free_slots.fill(v);
  return c;
}

std::set<Direction> as_set(DirectionSet s) {
  std::set<Direction> out;
  for (Direction d : kMeshDirections) {
    if (s.contains(d)) out.insert(d);
  }
  return out;
}

// Shortest hop counts by breadth-first search over mesh links.
int bfs_distance(Coord3 a, Coord3 b, const Dims& d) {
  std::map<Coord3, int> dist{{a, 0}};
  std::queue<Coord3> q;
  q.push(a);
  while (!q.empty()) {
    Coord3 c = q.front();
    q.pop();
    if (c == b) return dist[c];
    for (Direction dir : kMeshDirections) {
      auto n = neighbor(c, dir, d);
      if (n && !dist.contains(*n)) {
        dist[*n] = dist[c] + 1;
        q.push(*n);
      }
    }
  }
  return -1;
}

std::vector<Coord3> all_nodes(const Dims& d) {
  std::vector<Coord3> v;
  for (int x = 0; x < d.x; ++x)
    for (int y = 0; y < d.y; ++y)
      for (int z = 0; z < d.z; ++z) v.push_back({x, y, z});
  return v;
}

}  // namespace

TEST_SUITE("routing") {

TEST_CASE("minimal directions") {
  CHECK(as_set(minimal_dirs({0, 0, 0}, {2, 1, 0})) == std::set{Direction::East, Direction::North});
  CHECK(minimal_dirs({1, 1, 1}, {1, 1, 1}).empty());
  CHECK(as_set(minimal_dirs({3, 3, 3}, {0, 0, 0})) ==
        std::set{Direction::West, Direction::South, Direction::Down});
}

TEST_CASE("diversity score") {
  const Dims d{4, 4, 4};
  CHECK(diversity_score({0, 0, 0}, Direction::East, {2, 2, 0}, d) == 2);
  CHECK(diversity_score({0, 0, 0}, Direction::East, {1, 0, 0}, d) == 0);
  CHECK(diversity_score({0, 0, 0}, Direction::North, {2, 2, 0}, d) == 2);
  CHECK(diversity_score({0, 0, 0}, Direction::East, {1, 2, 0}, d) == 1);
}

TEST_CASE("LAFT examples") {
  const Dims d{4, 4, 4};
  auto at_dest = laft_next_port({1, 1, 0}, {1, 1, 0}, no_faults({1, 1, 0}, d), flat_congestion(), d);
  REQUIRE(at_dest);
  CHECK(at_dest->chosen == Direction::Local);

  auto tie = laft_next_port({0, 0, 0}, {2, 2, 0}, no_faults({0, 0, 0}, d), flat_congestion(), d);
  REQUIRE(tie);
  CHECK(tie->chosen == Direction::East);
  CHECK(tie->minimal);

  auto view = no_faults({0, 0, 0}, d);
  view.faulty[port_index(Direction::East)] = true;
  auto east_out = laft_next_port({0, 0, 0}, {2, 2, 0}, view, flat_congestion(), d);
  REQUIRE(east_out);
  CHECK(east_out->chosen == Direction::North);
}

TEST_CASE("diversity beats congestion, congestion beats port order") {
  const Dims d{4, 4, 4};
  // From (0,0,0) to (1,2,0): East lands with diversity 1, North with 2.
  auto r = laft_next_port({0, 0, 0}, {1, 2, 0}, no_faults({0, 0, 0}, d), flat_congestion(), d);
  REQUIRE(r);
  CHECK(r->chosen == Direction::North);

  CongestionView c = flat_congestion();
  c.free_slots[port_index(Direction::East)] = 1;
  auto r2 = laft_next_port({0, 0, 0}, {2, 2, 0}, no_faults({0, 0, 0}, d), c, d);
  REQUIRE(r2);
  CHECK(r2->chosen == Direction::North);
}

TEST_CASE("negative offsets are resolved first") {
  const Dims d{4, 4, 4};
  // dest needs +x and -y: only South is offered while the -y offset remains.
  auto r = laft_next_port({1, 2, 1}, {3, 0, 1}, no_faults({1, 2, 1}, d), flat_congestion(), d);
  REQUIRE(r);
  CHECK(r->chosen == Direction::South);
  for (const auto& c : r->candidates) CHECK(c.dir == Direction::South);
}

TEST_CASE("non-minimal fallback and NoRoute") {
  const Dims d{4, 4, 4};
  auto view = no_faults({1, 1, 1}, d);
  view.faulty[port_index(Direction::East)] = true;
  // Only minimal direction blocked: a detour that does not reverse x.
  auto r = laft_next_port({1, 1, 1}, {2, 1, 1}, view, flat_congestion(), d, Direction::East);
  REQUIRE(r);
  CHECK_FALSE(r->minimal);
  CHECK(r->chosen != Direction::East);
  CHECK(r->chosen != Direction::West);

  for (Direction dir : kMeshDirections) view.faulty[port_index(dir)] = true;
  CHECK_FALSE(laft_next_port({1, 1, 1}, {2, 1, 1}, view, flat_congestion(), d).has_value());
}

TEST_CASE("fallback never takes an immediate U-turn") {
  const Dims d{3, 3, 3};
  // Arrived travelling East at (1,1,1); the only open non-minimal links are
  // West (the U-turn) and North.
  auto view = no_faults({1, 1, 1}, d);
  for (Direction dir : {Direction::East, Direction::South, Direction::Up, Direction::Down}) {
    view.faulty[port_index(dir)] = true;
  }
  auto r = laft_next_port({1, 1, 1}, {2, 1, 1}, view, flat_congestion(), d, Direction::East);
  REQUIRE(r);
  CHECK(r->chosen == Direction::North);
}

TEST_CASE("XYZ order") {
  CHECK(xyz_next_port({0, 0, 0}, {2, 1, 1}).chosen == Direction::East);
  CHECK(xyz_next_port({2, 0, 0}, {2, 1, 1}).chosen == Direction::North);
  CHECK(xyz_next_port({2, 1, 0}, {2, 1, 1}).chosen == Direction::Up);
  CHECK(xyz_next_port({2, 1, 1}, {2, 1, 1}).chosen == Direction::Local);
}

TEST_CASE("fault-free LAFT paths are shortest on every 3x3x3 pair") {
  const Dims d{3, 3, 3};
  const auto nodes = all_nodes(d);
  for (Coord3 s : nodes) {
    for (Coord3 t : nodes) {
      Coord3 cur = s;
      std::optional<Direction> arrival;
      int hops = 0;
      for (;;) {
        auto r = laft_next_port(cur, t, no_faults(cur, d), flat_congestion(), d, arrival);
        REQUIRE(r);
        if (r->chosen == Direction::Local) break;
        CHECK(r->minimal);
        arrival = r->chosen;
        cur = *neighbor(cur, r->chosen, d);
        REQUIRE(++hops <= 6);
      }
      CHECK(cur == t);
      CHECK(hops == bfs_distance(s, t, d));
      CHECK(hops == manhattan(s, t));
    }
  }
}

TEST_CASE("property: avoids faulty links, prefers minimal, deterministic, scale invariant") {
  const Dims d{4, 4, 4};
  const auto nodes = all_nodes(d);
  Rng rng(99);
  for (int trial = 0; trial < 4000; ++trial) {
    const Coord3 node = nodes[rng.below(nodes.size())];
    const Coord3 dest = nodes[rng.below(nodes.size())];
    auto view = no_faults(node, d);
    for (Direction dir : kMeshDirections) {
      if (rng.bernoulli(0.3)) view.faulty[port_index(dir)] = true;
    }
    CongestionView c;
    for (auto& v : c.free_slots) v = rng.below_int(5);
    std::optional<Direction> arrival;
    if (rng.bernoulli(0.7)) arrival = kMeshDirections[rng.below(6)];

    auto r = laft_next_port(node, dest, view, c, d, arrival);
    auto again = laft_next_port(node, dest, view, c, d, arrival);
    CongestionView scaled = c;
    for (auto& v : scaled.free_slots) v *= 3;
    auto s = laft_next_port(node, dest, view, scaled, d, arrival);
    REQUIRE(r.has_value() == again.has_value());
    REQUIRE(r.has_value() == s.has_value());
    if (!r) continue;
    CHECK(r->chosen == again->chosen);
    CHECK(r->chosen == s->chosen);
    if (node == dest) {
      CHECK(r->chosen == Direction::Local);
      continue;
    }
    CHECK(r->chosen != Direction::Local);
    CHECK_FALSE(view.faulty[port_index(r->chosen)]);
    bool open_minimal = false;
    const auto m = minimal_dirs(node, dest);
    for (Direction dir : kMeshDirections) {
      open_minimal = open_minimal || (m.contains(dir) && !view.faulty[port_index(dir)]);
    }
    if (open_minimal) CHECK(m.contains(r->chosen));
  }
}

TEST_CASE("trace line") {
  const Dims d{4, 4, 4};
  auto r = laft_next_port({0, 0, 0}, {2, 2, 0}, no_faults({0, 0, 0}, d), flat_congestion(), d);
  const std::string line = format_decision({0, 0, 0}, {2, 2, 0}, r);
  CHECK(line.find("choice=E") != std::string::npos);
  CHECK(format_decision({0, 0, 0}, {1, 0, 0}, std::nullopt).find("NoRoute") != std::string::npos);
}

}
