#include <doctest.h>

#include "ftnoc/mttf.hpp"

using namespace ftnoc;

namespace {

MttfCampaign small(FaultType t, FaultDistribution d, SystemVariant v, int n = 6) {
  MttfCampaign c;
  c.experiments = n;
  c.fault_type = t;
  c.distribution = d;
  c.variant = v;
  c.cap = 200;
  return c;
}

MttfReport with_aftf(double aftf) {
  MttfReport r;
  r.aftf = aftf;
  return r;
}

}  // namespace

TEST_SUITE("mttf") {

TEST_CASE("summary statistics") {
  MttfCampaign c;
  c.lambda_raw = 0.5;
  const auto r = summarize(c, {1, 2, 3, 6});
  CHECK(r.aftf == doctest::Approx(3.0));
  CHECK(r.mttf_raw == doctest::Approx(2.0));
  CHECK(r.mttf_system == doctest::Approx(6.0));
  CHECK(r.mttf_system == doctest::Approx(r.aftf * r.mttf_raw));
  CHECK_THROWS_AS(summarize(c, {}), std::invalid_argument);
}

TEST_CASE("improvement ratio") {
  CHECK(improvement(with_aftf(4.58), with_aftf(2.37)) == doctest::Approx(1.9325).epsilon(1e-3));
  CHECK(improvement(with_aftf(21.492), with_aftf(4.037)) == doctest::Approx(5.3238).epsilon(1e-3));
  CHECK(improvement(with_aftf(3.0), with_aftf(3.0)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(improvement(with_aftf(3.0), with_aftf(0.5)), std::invalid_argument);
}

TEST_CASE("campaign validation") {
  MttfCampaign c;
  CHECK_NOTHROW(c.validate());
  c.experiments = 0;
  CHECK_THROWS_WITH(c.validate(), doctest::Contains("experiments"));
  c = {};
  c.distribution = FaultDistribution::Datapath;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.soft_probability = 0;
  CHECK_THROWS_WITH(c.validate(), doctest::Contains("soft_probability"));
}

TEST_CASE("probe workload covers every crossbar path of the central router") {
  const Dims d{3, 3, 3};
  const Coord3 r = mttf_fault_router(d);
  CHECK(r == Coord3{1, 1, 1});
  const auto probes = health_probe_workload(d, r, 0);
  CHECK(probes.size() == 42);
  for (const auto& p : probes) {
    CHECK(p.length == 4);
    CHECK(p.source != p.destination);
    CHECK(manhattan(p.source, r) <= 1);
    CHECK(manhattan(p.destination, r) <= 1);
  }
}

TEST_CASE("health check verdicts") {
  MttfCampaign c;
  c.dims = {3, 3, 3};
  const Coord3 where = mttf_fault_router(c.dims);

  SUBCASE("fault-free network is healthy") {
    for (auto v : {SystemVariant::Baseline, SystemVariant::Sher3dr}) {
      c.variant = v;
      Engine e(mttf_network(c));
      const auto h = health_check(e, where);
      CHECK(h.healthy);
      CHECK(h.probes == 42);
      CHECK(h.delivered == 42);
    }
  }

  SUBCASE("one stuck buffer slot is tolerated by the protected router") {
    c.variant = SystemVariant::Sher3dr;
    Engine e(mttf_network(c));
    FaultTarget t;
    t.kind = FaultStructure::BufferSlot;
    t.router = where;
    t.port = port_index(Direction::East);
    t.slot = 1;
    HardFault f = stuck_bit_fault(t, StuckModel::StuckAt1, 10);
    f.mask |= PackedFlit{1} << 12;
    e.add_hard_fault(f);
    const auto h = health_check(e, where);
    CHECK_MESSAGE(h.healthy, h.reason);
  }

  SUBCASE("a broken channel fails the unprotected router") {
    c.variant = SystemVariant::Baseline;
    Engine e(mttf_network(c));
    FaultTarget t;
    t.kind = FaultStructure::Channel;
    t.router = where;
    t.out_port = port_index(Direction::North);
    HardFault f = stuck_bit_fault(t, StuckModel::StuckAt1, 10);
    f.mask |= PackedFlit{1} << 12;
    e.add_hard_fault(f);
    const auto h = health_check(e, where);
    CHECK_FALSE(h.healthy);
    CHECK_FALSE(h.reason.empty());
  }
}

TEST_CASE("campaigns are reproducible and thread-count independent") {
  const auto c = small(FaultType::Hard, FaultDistribution::Flat, SystemVariant::Sher3dr);
  const auto a = run_campaign(c, 1);
  const auto b = run_campaign(c, 2);
  CHECK(a.faults_to_failure == b.faults_to_failure);
  CHECK(a.aftf == b.aftf);
  for (int f : a.faults_to_failure) {
    CHECK(f >= 1);
    CHECK(f <= c.cap);
  }
}

TEST_CASE("a single experiment is a valid campaign") {
  const auto r = run_campaign(small(FaultType::Soft, FaultDistribution::Weighted, SystemVariant::Baseline, 1), 1);
  REQUIRE(r.faults_to_failure.size() == 1);
  CHECK(r.aftf == doctest::Approx(r.faults_to_failure[0]));
}

TEST_CASE("both variants see the same fault sequence") {
  auto a = small(FaultType::Hard, FaultDistribution::Weighted, SystemVariant::Baseline);
  auto b = a;
  b.variant = SystemVariant::Sher3dr;
  for (int i = 0; i < 4; ++i) CHECK(experiment_seed(a, i) == experiment_seed(b, i));
  CHECK(experiment_seed(a, 0) != experiment_seed(a, 1));
}

TEST_CASE("the cap is reported") {
  auto c = small(FaultType::Soft, FaultDistribution::Flat, SystemVariant::Sher3dr, 2);
  c.cap = 1;
  const auto r = run_campaign(c, 1);
  for (int f : r.faults_to_failure) CHECK(f == 1);
  CHECK(r.capped.size() + 0 <= 2);
  CHECK(r.diagnostics.size() == r.capped.size());
}

TEST_CASE("report serialization") {
  const auto r = summarize(MttfCampaign{}, {2, 4});
  CHECK(mttf_csv(r) == "experiment_index,faults_to_failure\n0,2\n1,4\n");
  const auto ref = summarize(MttfCampaign{}, {1, 1});
  CHECK(mttf_summary_json(r, &ref).find("\"improvement\": 3.0") != std::string::npos);
}

TEST_CASE("names") {
  CHECK(parse_fault_type("hard") == FaultType::Hard);
  CHECK(parse_system_variant("sher3dr") == SystemVariant::Sher3dr);
  CHECK_FALSE(parse_fault_type("x").has_value());
}

}
