#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include <json.hpp>

#include "lscp/harness.hpp"

using namespace lscp;

TEST_CASE("catalog covers the nine models with the displayed layouts") {
    auto catalog = model_catalog();
    REQUIRE(catalog.size() == 9);
    for (int id = 1; id <= 9; ++id) REQUIRE(catalog.count(id) == 1);

    const SimulationModel& m1 = catalog.at(1);
    CHECK(m1.taus == std::vector<long>{m1.T / 2});
    CHECK(m1.types == std::vector<ChangeType>{ChangeType::Jump});
    REQUIRE(m1.tvar_representable);
    // left AR curve 0.9 - 0.4 u at u = 0
    CHECK(m1.spec.segments[0].phi_at(0, 0.0) == doctest::Approx(0.9));
    CHECK(m1.spec.segments[0].phi_at(0, 0.5) == doctest::Approx(0.7));

    const SimulationModel& m2 = catalog.at(2);
    CHECK(m2.T == 2000);
    CHECK(m2.types == std::vector<ChangeType>{ChangeType::Kink});

    const SimulationModel& m3 = catalog.at(3);
    CHECK(m3.T == 2048);
    CHECK(m3.m0() == 0);

    const SimulationModel& m6 = catalog.at(6);
    CHECK(static_cast<double>(m6.taus[0]) / m6.T == doctest::Approx(0.5));
    CHECK(static_cast<double>(m6.taus[1]) / m6.T == doctest::Approx(0.75));

    const SimulationModel& m8 = catalog.at(8);
    CHECK(m8.taus == std::vector<long>{840, 1644});
    CHECK(m8.spec.segments[0].phi_at(0, 0.2) == doctest::Approx(0.75));
    CHECK(m8.spec.segments[1].phi_at(0, 0.5) == doctest::Approx(-0.75));

    const SimulationModel& m7 = catalog.at(7);
    CHECK(m7.T == 3072);
    CHECK(m7.types ==
          std::vector<ChangeType>{ChangeType::Kink, ChangeType::Kink});

    // misspecified models carry no tvAR spec
    CHECK_FALSE(catalog.at(4).tvar_representable);
    CHECK_FALSE(catalog.at(5).tvar_representable);
    CHECK_FALSE(catalog.at(9).tvar_representable);
}

TEST_CASE("model scaling rules") {
    SimulationModel m1 = make_model(1, 512);
    CHECK(m1.T == 512);
    CHECK(m1.taus[0] == 256);
    CHECK_THROWS_AS(make_model(6, 4096), std::invalid_argument);  // fixed-length model
    CHECK_THROWS_AS(make_model(10), std::invalid_argument);
    CHECK_THROWS_AS(make_model(0), std::invalid_argument);
}

TEST_CASE("simulation is deterministic per seed and finite") {
    for (int id = 1; id <= 9; ++id) {
        SimulationModel model = make_model(id);
        TimeSeries a = model.simulate(11);
        TimeSeries b = model.simulate(11);
        TimeSeries c = model.simulate(12);
        REQUIRE(a.size() == model.T);
        CHECK(a.values == b.values);
        CHECK(a.values != c.values);
        for (double v : a.values) REQUIRE(std::isfinite(v));
    }
}

TEST_CASE("model 4 midpoint variance touches zero without degenerating") {
    SimulationModel m4 = make_model(4);
    TimeSeries x = m4.simulate(5);
    // noise SD 10 |t/2048 - 0.5| vanishes at t = 1024; the sample there is
    // still finite because sigma is clamped at the numerical floor
    CHECK(std::isfinite(x.values[1023]));
    double inner = std::fabs(x.values[1023] - 0.5 * x.values[1022]);
    double outer = std::fabs(x.values[100] - 0.5 * x.values[99]);
    CHECK(inner < outer);  // essentially no innovation at the touching point
}

TEST_CASE("ace arithmetic") {
    CHECK(ace({{0.80, 0.80}, {0.90, 0.90}, {0.95, 0.95}}) == doctest::Approx(0.0));
    CHECK(ace({{0.80, 0.75}, {0.90, 0.85}, {0.95, 0.90}}) == doctest::Approx(0.05));
    // coverage errors (0.077, 0.033, 0.011)
    CHECK(ace({{0.80, 0.723}, {0.90, 0.867}, {0.95, 0.939}}) ==
          doctest::Approx(0.040).epsilon(0.01));
    CHECK_THROWS_AS(ace({{0.80, 0.8}, {0.90, 0.9}}), std::invalid_argument);
}

TEST_CASE("ae arithmetic") {
    CHECK(ae(1.0) == doctest::Approx(0.0));
    CHECK(ae(0.895) == doctest::Approx(0.105));
    CHECK(ae(0.0) == doctest::Approx(1.0));
}

TEST_CASE("run_experiment aggregates and stays deterministic across threads") {
    ExperimentSpec spec;
    spec.model = 1;
    spec.T = 512;
    spec.replications = 3;
    spec.seed = 21;
    spec.bootstrap_b = 100;
    spec.threads = 1;

    ExperimentReport report = run_experiment(spec);
    REQUIRE(report.replications.size() == 3);
    CHECK(report.m0 == 1);
    CHECK(report.spec.T == 512);
    CHECK(report.spec.scan.h > 0);  // rule-of-thumb radii resolved into the report
    CHECK(report.ae_value == doctest::Approx(ae(report.p_correct)));
    CHECK(report.ae_value >= 0.0);
    CHECK(report.ae_value <= 1.0);
    REQUIRE(report.locations.size() == 1);
    CHECK(report.locations[0].true_tau == 256);

    ExperimentSpec par = spec;
    par.threads = 2;
    ExperimentReport report2 = run_experiment(par);
    CHECK(report_to_json(report) == report_to_json(report2));

    // text table sanity
    std::string text = report_to_text(report);
    CHECK(text.find("m_hat") != std::string::npos);
    CHECK(text.find("256") != std::string::npos);
}

TEST_CASE("report json round-trips through a parser") {
    ExperimentSpec spec;
    spec.model = 3;
    spec.T = 0;
    spec.replications = 2;
    spec.seed = 4;
    spec.bootstrap_b = 100;
    ExperimentReport report = run_experiment(spec);
    auto j = nlohmann::json::parse(report_to_json(report));
    CHECK(j.at("model").get<int>() == 3);
    CHECK(j.at("replications").get<int>() == 2);
    CHECK(j.at("replication_records").size() == 2);
    CHECK(j.at("m_hat").contains("mean"));
    CHECK_FALSE(j.contains("wall_seconds"));  // reports stay bit-stable
}
