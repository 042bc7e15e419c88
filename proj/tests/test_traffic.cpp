#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ftnoc/traffic.hpp"

using namespace ftnoc;

namespace {

NetworkConfig mesh(Dims d) {
  NetworkConfig c;
  c.dims = d;
  return c;
}

TrafficSource source(BenchmarkKind k, std::uint64_t seed = 1) {
  TrafficSource s;
  s.kind = k;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_SUITE("traffic") {

TEST_CASE("transpose mapping and fixed points") {
  CHECK(transpose_of({1, 2, 3}) == Coord3{3, 2, 1});
  const auto pkts = gen_traffic(source(BenchmarkKind::Transpose), mesh({4, 4, 4}));
  CHECK(pkts.size() == 640);
  for (const auto& p : pkts) {
    CHECK(p.destination == transpose_of(p.source));
    CHECK(p.source != Coord3{2, 2, 2});
    CHECK(p.source.x != p.source.z);
  }
}

TEST_CASE("uniform spreads the budget evenly and never self-addresses") {
  const auto pkts = gen_traffic(source(BenchmarkKind::Uniform), mesh({4, 4, 4}));
  CHECK(pkts.size() == 8192);
  std::map<Coord3, int> per_node;
  for (const auto& p : pkts) {
    ++per_node[p.source];
    CHECK(p.source != p.destination);
    CHECK(p.length == 10);
  }
  CHECK(per_node.size() == 64);
  for (const auto& [n, c] : per_node) CHECK(c == 128);
}

TEST_CASE("schedule is sorted with dense ids") {
  const auto pkts = gen_traffic(source(BenchmarkKind::Uniform, 4), mesh({3, 3, 3}));
  for (std::size_t i = 0; i < pkts.size(); ++i) {
    CHECK(pkts[i].id == i);
    if (i) CHECK(pkts[i - 1].inject_cycle <= pkts[i].inject_cycle);
  }
  CHECK(pkts == gen_traffic(source(BenchmarkKind::Uniform, 4), mesh({3, 3, 3})));
  CHECK(pkts != gen_traffic(source(BenchmarkKind::Uniform, 5), mesh({3, 3, 3})));
}

TEST_CASE("hotspot retargets a tenth of the packets with an extra flit") {
  const auto pkts = gen_traffic(source(BenchmarkKind::Hotspot10), mesh({4, 4, 4}));
  CHECK(pkts.size() == 8192);
  const auto hs = default_hotspots({4, 4, 4});
  CHECK(hs.size() == 4);
  const std::set<Coord3> hot(hs.begin(), hs.end());
  for (Coord3 h : hs) CHECK(h.z == 2);
  int long_packets = 0;
  for (const auto& p : pkts) {
    if (p.length == 11) {
      ++long_packets;
      CHECK(hot.contains(p.destination));
    } else {
      CHECK(p.length == 10);
    }
  }
  CHECK(long_packets == 819);
}

TEST_CASE("bundled benchmark budgets") {
  CHECK(gen_traffic(source(BenchmarkKind::Matrix), mesh({6, 6, 3})).size() == 1080);
  for (auto k : {BenchmarkKind::H264, BenchmarkKind::Vopd, BenchmarkKind::Mwd, BenchmarkKind::Pip}) {
    const auto pkts = gen_traffic(source(k), mesh(default_dims(k)));
    CHECK(static_cast<int>(pkts.size()) == default_packet_budget(k));
    for (const auto& p : pkts) CHECK(p.source != p.destination);
  }
}

TEST_CASE("apportion by largest remainder") {
  CHECK(apportion(10, {1, 1, 1}) == std::vector<int>{4, 3, 3});
  CHECK(apportion(7, {2, 1}) == std::vector<int>{5, 2});
  CHECK(apportion(0, {1, 2}) == std::vector<int>{0, 0});
}

TEST_CASE("traffic tables") {
  std::istringstream good(
      "# comment\n"
      "\n"
      "0,0,0,1,1,1,3,4,20\n"
      "1,0,0,0,0,0,2,10,5\n");
  const auto flows = parse_traffic_table(good, "t", {2, 2, 2});
  REQUIRE(flows.size() == 2);
  CHECK(flows[0].dst == Coord3{1, 1, 1});
  CHECK(flows[0].packet_count == 3);
  CHECK(flows[1].interval_cycles == 5);

  std::istringstream bad("0,0,0,1,1,1,3,4,20\n0,0,0,1,1\n");
  try {
    parse_traffic_table(bad, "t.csv", {2, 2, 2});
    FAIL("expected a parse error");
  } catch (const TrafficTableError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("t.csv:2") != std::string::npos);
  }
  std::istringstream outside("0,0,0,5,0,0,1,1,1\n");
  CHECK_THROWS_AS(parse_traffic_table(outside, "t", {2, 2, 2}), TrafficTableError);

  CHECK_THROWS_WITH(load_traffic_table("/nonexistent/flows.csv", {2, 2, 2}),
                    doctest::Contains("/nonexistent/flows.csv"));
}

TEST_CASE("table playback") {
  const std::string path = "ftnoc_test_table.csv";
  {
    std::ofstream f(path);
    f << "0,0,0,1,0,0,2,3,10\n1,1,1,0,0,0,1,1,0\n";
  }
  TrafficSource s = source(BenchmarkKind::Table);
  s.table_path = path;
  const auto pkts = gen_traffic(s, mesh({2, 2, 2}));
  std::remove(path.c_str());
  REQUIRE(pkts.size() == 3);
  CHECK(pkts[0].inject_cycle == 0);
  CHECK(pkts[2].inject_cycle == 10);
  CHECK(pkts[2].length == 3);
}

TEST_CASE("benchmark names") {
  for (auto k : {BenchmarkKind::Uniform, BenchmarkKind::Transpose, BenchmarkKind::Hotspot10,
                 BenchmarkKind::Matrix, BenchmarkKind::H264, BenchmarkKind::Vopd, BenchmarkKind::Mwd,
                 BenchmarkKind::Pip, BenchmarkKind::Table}) {
    CHECK(parse_benchmark(to_string(k)) == k);
  }
  CHECK_FALSE(parse_benchmark("nope").has_value());
}

}
