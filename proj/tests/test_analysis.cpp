#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "heraldsim/analysis.hpp"
#include "heraldsim/heralding.hpp"

using namespace heraldsim;

namespace {

EventStream make_stream(std::uint64_t pulses, std::vector<EventRecord> records) {
    EventStream s;
    s.header.pulses = pulses;
    std::sort(records.begin(), records.end(), record_order);
    s.records = std::move(records);
    return s;
}

EventRecord rec(Channel c, std::uint64_t pulse) {
    const std::int64_t base = static_cast<std::int64_t>(pulse) * 2000000;
    const std::int64_t off = c == Channel::HERALD ? 100000 : (c == Channel::D1 || c == Channel::D2) ? 1000000 : 0;
    return {c, pulse, base + off};
}

RunConfig lowpower_config(std::uint64_t pulses) {
    RunConfig c;
    c.pulses = pulses;
    c.bank.transmitted = {0.2, 0.08};
    c.bank.reflected = {0.15, 0.1, 0.04};
    c.seed = 2024;
    return c;
}

}  // namespace

TEST(G2FromCounts, Arithmetic) {
    const auto e = g2_from_counts(1, 1000, 1000, 500000);
    EXPECT_EQ(e.value, 0.5);
    EXPECT_NEAR(e.sigma, 0.5 * std::sqrt(1 + 2e-3 + 2e-6), 1e-15);
    EXPECT_EQ(g2_from_counts(0, 10, 10, 100).value, 0.0);
    EXPECT_EQ(g2_from_counts(0, 10, 10, 100).sigma, 1.0);
    EXPECT_THROW(g2_from_counts(1, 0, 5, 5), UndefinedMetricError);
    EXPECT_THROW(g2_from_counts(1, 5, 0, 5), UndefinedMetricError);
    EXPECT_THROW(g2_from_counts(0, 5, 5, 0), UndefinedMetricError);
}

TEST(CountCoincidences, SingleHeraldBothClicks) {
    const auto s = make_stream(2, {rec(Channel::T, 0), rec(Channel::HERALD, 0), rec(Channel::D1, 0), rec(Channel::D2, 0)});
    const auto r = count_coincidences(s);
    EXPECT_EQ(r.heralds, 1u);
    EXPECT_EQ(r.singles_1, 1u);
    EXPECT_EQ(r.singles_2, 1u);
    EXPECT_EQ(r.coincidences, 1u);
    EXPECT_TRUE(r.g2_defined);
    EXPECT_EQ(klyshko_efficiency(r), 1.0);
}

TEST(CountCoincidences, HeraldsWithoutClicksLeaveG2Undefined) {
    const auto s = make_stream(3, {rec(Channel::HERALD, 0), rec(Channel::HERALD, 2)});
    const auto r = count_coincidences(s);
    EXPECT_EQ(r.heralds, 2u);
    EXPECT_EQ(r.singles_1 + r.singles_2 + r.coincidences, 0u);
    EXPECT_FALSE(r.g2_defined);
    EXPECT_EQ(klyshko_efficiency(r), 0.0);
    EXPECT_THROW(onf(s), UndefinedMetricError);
}

TEST(CountCoincidences, NoHeralds) {
    const auto r = count_coincidences(make_stream(3, {rec(Channel::D1, 1)}));
    EXPECT_EQ(r.heralds, 0u);
    EXPECT_FALSE(r.g2_defined);
    EXPECT_THROW(klyshko_efficiency(r), UndefinedMetricError);
    EXPECT_EQ(r.unheralded_detections, 1u);
}

TEST(G2FromCounts, UncorrelatedChannelsGiveOne) {
    std::mt19937_64 gen(99);
    std::bernoulli_distribution herald(0.2), click(0.1);
    std::vector<EventRecord> recs;
    const std::uint64_t n = 1000000;
    for (std::uint64_t p = 0; p < n; ++p) {
        if (!herald(gen)) continue;
        recs.push_back(rec(Channel::HERALD, p));
        if (click(gen)) recs.push_back(rec(Channel::D1, p));
        if (click(gen)) recs.push_back(rec(Channel::D2, p));
    }
    const auto r = count_coincidences(make_stream(n, std::move(recs)));
    ASSERT_TRUE(r.g2_defined);
    EXPECT_NEAR(r.g2.value, 1.0, 3 * r.g2.sigma);
}

TEST(CountingIdentity, FuzzedStreams) {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 300; ++trial) {
        std::uniform_int_distribution<std::uint64_t> pulses_d(1, 200);
        const std::uint64_t pulses = pulses_d(gen);
        std::bernoulli_distribution coin(std::uniform_real_distribution<double>(0.0, 1.0)(gen));
        std::vector<EventRecord> recs;
        for (std::uint64_t p = 0; p < pulses; ++p)
            for (Channel c : {Channel::T, Channel::R, Channel::D1, Channel::D2, Channel::HERALD})
                if (coin(gen)) recs.push_back(rec(c, p));
        const auto r = count_coincidences(make_stream(pulses, std::move(recs)));
        ASSERT_LE(r.coincidences, std::min(r.singles_1, r.singles_2));
        ASSERT_LE(std::min(r.singles_1, r.singles_2), r.heralds);
        ASSERT_LE(std::max(r.singles_1, r.singles_2), r.heralds);
        ASSERT_LE(r.heralds, pulses);
        ASSERT_LE(r.unheralded_detections, r.detections);
    }
}

TEST(CountCoincidences, MatchesIndependentTally) {
    RunConfig c = lowpower_config(500000);
    c.det_d1.dark = 2e-4;
    c.extinction_db = 15;
    const auto s = simulate_run(c);
    std::map<std::uint64_t, std::set<Channel>> by_pulse;
    for (const auto& r : s.records) by_pulse[r.pulse].insert(r.channel);
    std::uint64_t h = 0, s1 = 0, s2 = 0, cc = 0, det = 0, unh = 0;
    for (const auto& [p, chans] : by_pulse) {
        const bool d1 = chans.count(Channel::D1), d2 = chans.count(Channel::D2);
        det += d1 + d2;
        if (chans.count(Channel::HERALD)) {
            ++h;
            s1 += d1;
            s2 += d2;
            cc += d1 && d2;
        } else {
            unh += d1 + d2;
        }
    }
    const auto r = count_coincidences(s);
    EXPECT_EQ(r.heralds, h);
    EXPECT_EQ(r.singles_1, s1);
    EXPECT_EQ(r.singles_2, s2);
    EXPECT_EQ(r.coincidences, cc);
    EXPECT_EQ(r.detections, det);
    EXPECT_EQ(r.unheralded_detections, unh);
}

TEST(Klyshko, RecoversHeraldedArmEfficiency) {
    RunConfig c = lowpower_config(4000000);
    for (double& q : c.bank.transmitted) q *= 0.3;
    for (double& q : c.bank.reflected) q *= 0.3;
    c.heralded_transmission = 0.3;
    c.det_d1.efficiency = 0.8;
    c.det_d2.efficiency = 0.8;
    const auto r = count_coincidences(simulate_run(c));
    // Exact expectation: photon-number-resolved heralded state, threshold click on D1 or D2.
    const DetectorModel dt{c.herald_transmission, 0.0}, dr{c.herald_transmission, 0.0};
    const HeraldedState st(c.bank, dt, dr, 14);
    const double eta = c.heralded_transmission * 0.8;
    double click = 0.0;
    for (unsigned nt = 0; nt <= 14; ++nt)
        for (unsigned nr = 0; nr <= 14; ++nr) click += st.heralded_weight(nt, nr) * (1 - std::pow(1 - eta, nt + nr));
    const double expected = click / st.event_probability();
    const double k = klyshko_efficiency(r);
    EXPECT_NEAR(k, expected, 3 * std::sqrt(expected * (1 - expected) / r.heralds));
    EXPECT_NEAR(expected, eta, 2e-3);  // single-photon dominated at this power
}

TEST(Onf, ZeroWithPerfectGateAndNoDarks) {
    RunConfig c = lowpower_config(200000);
    c.extinction_db = 1000;
    const auto e = onf(simulate_run(c));
    EXPECT_EQ(e.value, 0.0);
}

TEST(Onf, OneWhenGateNeverOpensInTime) {
    RunConfig c = lowpower_config(200000);
    c.gate_open_s = 1.5e-6;  // after the photons have passed
    const auto s = simulate_run(c);
    EXPECT_EQ(onf(s).value, 1.0);
    const auto r = count_coincidences(s);
    // Every detection passed the closed switch: heralded pulses do not beat leakage.
    EXPECT_GT(r.detections, 0u);
}

TEST(Onf, DecreasesWithExtinction) {
    double prev = 2.0;
    for (double db : {5.0, 10.0, 20.0, 30.0}) {
        RunConfig c = lowpower_config(1000000);
        c.extinction_db = db;
        const double v = onf(simulate_run(c)).value;
        EXPECT_LT(v, prev) << db;
        prev = v;
    }
}

TEST(Onf, DarkCountsInsideGateAreNoise) {
    CoincidenceReport r;
    r.heralds = 1000;
    r.detections = 100;
    r.unheralded_detections = 10;
    const auto e = onf(r, 0.01, 0.02);
    EXPECT_NEAR(e.value, (10 + 30) / 100.0, 1e-15);
    EXPECT_NEAR(e.sigma, std::sqrt(0.4 * 0.6 / 100), 1e-15);
}

TEST(PostSelection, MatchesHardwareExtendedPerSeed) {
    for (std::uint64_t seed : {1ull, 2ull, 77ull}) {
        RunConfig c = lowpower_config(300000);
        c.seed = seed;
        c.feed_forward = false;
        c.det_r.dark = 1e-3;
        c.logic = HeraldLogic::standard;
        const auto post = apply_extended_postselection(simulate_run(c));
        c.logic = HeraldLogic::extended;
        const auto hw = simulate_run(c);
        EXPECT_TRUE(post == hw) << seed;
        const auto a = count_coincidences(post), b = count_coincidences(hw);
        EXPECT_EQ(a.heralds, b.heralds);
        EXPECT_EQ(a.singles_1, b.singles_1);
        EXPECT_EQ(a.singles_2, b.singles_2);
        EXPECT_EQ(a.coincidences, b.coincidences);
        EXPECT_EQ(a.g2.value, b.g2.value);
    }
    EXPECT_THROW(apply_extended_postselection(EventStream{}), UndefinedMetricError);
}

TEST(Report, TextAndCsvLayout) {
    const auto s = make_stream(2, {rec(Channel::HERALD, 0), rec(Channel::D1, 0), rec(Channel::D2, 0)});
    const auto a = analyze_stream(s);
    std::ostringstream csv;
    write_report_csv(a, csv);
    EXPECT_EQ(csv.str(), "H,S1,S2,C,g2,g2_sigma,klyshko,onf,onf_sigma\n1,1,1,1,1,2,1,0,0\n");
    std::ostringstream txt;
    write_report_text(analyze_stream(make_stream(1, {rec(Channel::HERALD, 0)})), txt);
    EXPECT_NE(txt.str().find("g2 = nan\n"), std::string::npos);
    EXPECT_NE(txt.str().find("g2_defined = false\n"), std::string::npos);
    EXPECT_NE(txt.str().find("H = 1\n"), std::string::npos);
}

TEST(Splits, MeanAndStandardError) {
    // Pulses {0,1}: H=1, S1=S2=C=1, g2 = 1. Pulses {2,3}: H=2, S1=S2=1, C=0, g2 = 0.
    const auto s = make_stream(4, {rec(Channel::HERALD, 0), rec(Channel::D1, 0), rec(Channel::D2, 0),
                                   rec(Channel::HERALD, 2), rec(Channel::D1, 2), rec(Channel::HERALD, 3), rec(Channel::D2, 3)});
    const auto e = g2_over_splits(s, 2);
    EXPECT_DOUBLE_EQ(e.value, 0.5);
    EXPECT_DOUBLE_EQ(e.sigma, 0.5);
    EXPECT_THROW(g2_over_splits(s, 1), ConfigError);
    EXPECT_THROW(g2_over_splits(s, 5), UndefinedMetricError);
}
