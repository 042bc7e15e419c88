#include <doctest.h>

#include <stdexcept>

#include "ftnoc/core_model.hpp"

using namespace ftnoc;

TEST_SUITE("core_model") {

TEST_CASE("neighbor steps one unit and stops at the mesh boundary") {
  const Dims d{4, 4, 4};
  CHECK(neighbor({1, 1, 1}, Direction::East, d) == Coord3{2, 1, 1});
  CHECK_FALSE(neighbor({3, 0, 0}, Direction::East, d).has_value());
  CHECK_FALSE(neighbor({1, 1, 1}, Direction::Local, d).has_value());
  CHECK(neighbor({1, 1, 1}, Direction::North, d) == Coord3{1, 2, 1});
  CHECK(neighbor({1, 1, 1}, Direction::Down, d) == Coord3{1, 1, 0});
  CHECK_FALSE(neighbor({0, 0, 0}, Direction::West, d).has_value());
}

TEST_CASE("direction inverse pairs opposing ports") {
  CHECK(direction_inverse(Direction::East) == Direction::West);
  CHECK(direction_inverse(Direction::Up) == Direction::Down);
  CHECK(direction_inverse(Direction::North) == Direction::South);
  CHECK_THROWS_AS(direction_inverse(Direction::Local), std::invalid_argument);
  for (Direction d : kMeshDirections) {
    CHECK(direction_inverse(direction_inverse(d)) == d);
    CHECK(direction_inverse(d) != d);
  }
}

TEST_CASE("port encoding is fixed") {
  CHECK(port_index(Direction::Local) == 0);
  CHECK(port_index(Direction::East) == 1);
  CHECK(port_index(Direction::West) == 2);
  CHECK(port_index(Direction::North) == 3);
  CHECK(port_index(Direction::South) == 4);
  CHECK(port_index(Direction::Up) == 5);
  CHECK(port_index(Direction::Down) == 6);
}

TEST_CASE("adjacency is symmetric and degrees lie in [3, 6]") {
  for (Dims d : {Dims{2, 2, 2}, Dims{4, 4, 4}, Dims{5, 5, 4}, Dims{6, 6, 3}}) {
    int nodes = 0;
    for (int x = 0; x < d.x; ++x) {
      for (int y = 0; y < d.y; ++y) {
        for (int z = 0; z < d.z; ++z) {
          ++nodes;
          const Coord3 c{x, y, z};
          int degree = 0;
          for (Direction dir : kMeshDirections) {
            auto n = neighbor(c, dir, d);
            if (!n) continue;
            ++degree;
            CHECK(neighbor(*n, direction_inverse(dir), d) == c);
            CHECK(manhattan(c, *n) == 1);
          }
          CHECK(degree >= 3);
          CHECK(degree <= 6);
        }
      }
    }
    CHECK(nodes == d.node_count());
  }
}

TEST_CASE("dims parse and print") {
  CHECK(parse_dims("4x4x4") == Dims{4, 4, 4});
  CHECK(parse_dims("5x5x4") == Dims{5, 5, 4});
  CHECK_FALSE(parse_dims("4x4").has_value());
  CHECK_FALSE(parse_dims("axbxc").has_value());
  CHECK(to_string(Dims{6, 6, 3}) == "6x6x3");
}

TEST_CASE("packet flit kinds") {
  CHECK(flit_kind_for(0, 1) == FlitKind::HeaderTail);
  CHECK(flit_kind_for(0, 10) == FlitKind::Header);
  CHECK(flit_kind_for(5, 10) == FlitKind::Body);
  CHECK(flit_kind_for(9, 10) == FlitKind::Tail);
}

TEST_CASE("config validation names the field") {
  NetworkConfig c;
  CHECK_NOTHROW(c.validate());
  c.buffer_depth = 1;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("buffer_depth"), std::invalid_argument);
  c = NetworkConfig{};
  c.stop_threshold = 2;
  c.go_threshold = 2;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = NetworkConfig{};
  c.dims = {9, 4, 4};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK(NetworkConfig{}.misroute_budget() == 24);
}

}
