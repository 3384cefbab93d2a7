#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "scenarios.hpp"
#include "sagin/trico.hpp"

using namespace sagin;
using namespace sagin::trico;

namespace {

nn::ModelProfile single_layer(std::uint64_t flops) {
    return nn::parse_profile_csv(std::string(nn::profile_csv_header) + "\nblock," + std::to_string(flops) + ",10,4,1\n");
}

Scenario fixed_scenario(std::vector<ChannelState> channels) {
    Scenario s = default_scenario();
    s.channels.assign(channels.begin(), channels.end());
    return s;
}

} // namespace

TEST(CommCost, Examples) {
    const auto p = nn::build_resnet50_usam_profile(224, 224);
    auto dev = net::vehicle_device();
    const auto c = comm_cost(dev, {1e6, 3.0}, p, {4});
    EXPECT_DOUBLE_EQ(c.latency_s, 1.605632);
    EXPECT_DOUBLE_EQ(c.energy_j, 3.211264);
    const double zero = net::tx_latency(0, 2e6);
    EXPECT_EQ(zero, 0.0);
    EXPECT_EQ(net::tx_energy(dev.tx_power_w, zero), 0.0);
    EXPECT_THROW(comm_cost(dev, {1e6, 0.0}, p, {4}), ZeroRate);
}

TEST(CommCost, HalvingRateDoublesBoth) {
    const auto p = nn::build_resnet50_usam_profile(224, 224);
    const auto dev = net::uav_device();
    Rng rng(12);
    for (int i = 0; i < 200; ++i) {
        const ChannelState ch{rng.uniform(1e6, 3e7), rng.uniform(0.1, 100)};
        const ChannelState half{ch.bandwidth_hz / 2, ch.snr_linear};
        for (std::size_t c = 0; c < 5; ++c) {
            const auto a = comm_cost(dev, ch, p, {c}), b = comm_cost(dev, half, p, {c});
            EXPECT_DOUBLE_EQ(b.latency_s, 2 * a.latency_s);
            EXPECT_DOUBLE_EQ(b.energy_j, 2 * a.energy_j);
        }
    }
}

TEST(CompCost, Examples) {
    EXPECT_DOUBLE_EQ(comp_cost(net::uav_device(), single_layer(641000000000ULL), {0}), 30.0);
    EXPECT_NEAR(comp_cost(net::vehicle_device(), single_layer(641000000000ULL), {0}), 0.641 / 1.3 * 30, 1e-12);
    EXPECT_NEAR(comp_cost(net::vehicle_device(), single_layer(641000000000ULL), {0}), 14.79, 0.005);
    EXPECT_EQ(comp_cost(net::uav_device(), single_layer(0), {0}), 0.0);
}

TEST(ConfCost, Examples) {
    ConfidentialityTable t{{{"a", 4, 4}, {"b", 0, 0}, {"c", 4, 0}}};
    EXPECT_EQ(conf_cost(t, {0}, 0.5), 0.0);
    EXPECT_EQ(conf_cost(t, {1}, 0.5), 1.0);
    EXPECT_EQ(conf_cost(t, {2}, 0.5), 0.5);
    EXPECT_EQ(conf_cost(t, {2}, 1.0), 0.0);
    EXPECT_EQ(conf_cost(t, {2}, 0.0), 1.0);
    EXPECT_THROW(conf_cost(t, {3}, 0.5), MissingEntry);
    ConfidentialityTable zero{{{"a", 0, 0}}};
    EXPECT_THROW(zero.validate(), InvalidArgument);
    EXPECT_THROW(conf_cost(zero, {0}, 0.5), InvalidArgument);
}

TEST(ConfCost, AlwaysInUnitInterval) {
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        auto s = fixture::random_scenario(rng, 1);
        for (std::size_t c = 0; c < 5; ++c) {
            const double v = conf_cost(s.conf_table, {c}, rng.uniform());
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(NormalizeCosts, Endpoints) {
    std::vector<TriCoBreakdown> rows(3);
    rows[0].comm_latency_s = 1, rows[0].comm_energy_j = 2, rows[0].comp_energy_j = 5, rows[0].conf_cost = 0.7;
    rows[1].comm_latency_s = 2, rows[1].comm_energy_j = 4, rows[1].comp_energy_j = 6, rows[1].conf_cost = 0.3;
    rows[2].comm_latency_s = 3, rows[2].comm_energy_j = 6, rows[2].comp_energy_j = 7, rows[2].conf_cost = 0.1;
    const auto n = normalize_costs(rows, 0.5);
    EXPECT_EQ(n[0].n_comm, 0.0);
    EXPECT_EQ(n[0].n_comp, 0.0);
    EXPECT_EQ(n[0].n_conf, 0.7);
    EXPECT_EQ(n[2].n_comm, 1.0);
    EXPECT_EQ(n[2].n_comp, 1.0);
    EXPECT_EQ(n[2].n_conf, 0.1);
    EXPECT_DOUBLE_EQ(n[1].n_comm, 0.5);
    EXPECT_DOUBLE_EQ(n[1].n_comp, 0.5);
}

TEST(NormalizeCosts, DegenerateRangeIsZero) {
    std::vector<TriCoBreakdown> rows(2);
    rows[0].comm_latency_s = rows[1].comm_latency_s = 1;
    rows[0].comm_energy_j = rows[1].comm_energy_j = 1;
    rows[0].comp_energy_j = 1, rows[1].comp_energy_j = 2;
    const auto n = normalize_costs(rows, 0.5);
    EXPECT_EQ(n[0].n_comm, 0.0);
    EXPECT_EQ(n[1].n_comm, 0.0);
    EXPECT_EQ(n[1].n_comp, 1.0);
}

TEST(Effect, Examples) {
    const TriCoWeights w;
    EXPECT_NEAR(effect(w, {0.3, 0.6, 0.0}), 0.3, 1e-15);
    EXPECT_EQ(effect(w, {0, 0, 0}), 0.0);
    TriCoWeights comm_only{1, 0, 0};
    EXPECT_EQ(effect(comm_only, {0.37, 0.9, 0.9}), 0.37);
    TriCoWeights bad{0.5, 0.5, 0.5};
    EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(CostModel, FixedChannelReducesToMinMax) {
    Rng rng(31);
    for (int i = 0; i < 50; ++i) {
        auto s = fixture::random_scenario(rng, 1);
        const ChannelState ch{rng.uniform(1e6, 2e7), rng.uniform(0.5, 100)};
        s.channels = {ch};
        const CostModel m(s);
        std::vector<TriCoBreakdown> raw;
        for (std::size_t c = 0; c < m.candidates(); ++c) raw.push_back(m.raw(0, c, ch));
        const auto n = normalize_costs(raw, s.weights.lambda_latency);
        for (std::size_t c = 0; c < m.candidates(); ++c) {
            const auto b = m.breakdown(0, c, ch);
            EXPECT_NEAR(b.normalized.n_comm, n[c].n_comm, 1e-12);
            EXPECT_NEAR(b.normalized.n_comp, n[c].n_comp, 1e-12);
            EXPECT_NEAR(b.effect, effect(s.weights, n[c]), 1e-12);
        }
    }
}

TEST(CostModel, MatchesIndependentEffectOracle) {
    Rng rng(77);
    for (int i = 0; i < 100; ++i) {
        const auto s = fixture::random_scenario(rng, 1 + rng.index(3));
        const CostModel m(s);
        std::vector<ChannelState> ch;
        for (std::size_t d = 0; d < s.devices.size(); ++d) {
            if (const auto* dist = std::get_if<ChannelDistribution>(&s.channels[d])) ch.push_back(net::sample_channel(*dist, rng));
            else ch.push_back(std::get<ChannelState>(s.channels[d]));
        }
        for (std::size_t id = 0; id < m.decisions(); ++id) {
            const auto d = decode_decision(id, m.candidates(), m.devices());
            std::vector<std::size_t> cuts;
            for (auto c : d.cuts) cuts.push_back(c.candidate_index);
            const double e = m.effect(d, ch);
            EXPECT_NEAR(e, oracle::effect(s, cuts, ch), 1e-12);
            EXPECT_GE(e, 0.0);
            EXPECT_LE(e, 1.0 + 1e-12);
        }
    }
}

TEST(CostModel, TradeOffDirectionOnBuiltProfile) {
    const CostModel m(default_scenario());
    for (std::size_t d = 0; d < m.devices(); ++d) {
        const auto ch = m.scenario().reference_channels()[d];
        for (std::size_t c = 0; c + 1 < m.candidates(); ++c) {
            const auto a = m.raw(d, c, ch), b = m.raw(d, c + 1, ch);
            EXPECT_LE(b.comm_latency_s, a.comm_latency_s);
            EXPECT_LE(b.comm_energy_j, a.comm_energy_j);
            EXPECT_LE(b.conf_cost, a.conf_cost);
            EXPECT_GT(b.comp_energy_j, a.comp_energy_j);
        }
    }
}

TEST(CostModel, PermutationInvariance) {
    Rng rng(8);
    for (int i = 0; i < 30; ++i) {
        auto s = fixture::random_scenario(rng, 3);
        const CostModel m(s);
        auto t = s;
        std::swap(t.devices[0], t.devices[2]);
        std::swap(t.channels[0], t.channels[2]);
        const CostModel mt(t);
        const auto ch = s.reference_channels();
        const auto cht = t.reference_channels();
        for (std::size_t id = 0; id < m.decisions(); ++id) {
            auto d = decode_decision(id, m.candidates(), 3);
            auto dt = d;
            std::swap(dt.cuts[0], dt.cuts[2]);
            EXPECT_NEAR(m.effect(d, ch), mt.effect(dt, cht), 1e-14);
        }
    }
}

TEST(CostModel, InfeasibleLinkScoresWorst) {
    auto s = fixed_scenario({{1e6, 0.0}, {1e7, 10.0}});
    const CostModel m(s);
    const auto ch = s.reference_channels();
    EXPECT_TRUE(m.any_infeasible(ch));
    const auto b = m.breakdown(0, 2, ch[0]);
    EXPECT_FALSE(b.feasible);
    EXPECT_EQ(b.effect, 1.0);
    EXPECT_TRUE(m.breakdown(1, 2, ch[1]).feasible);
}

TEST(Scenario, Validation) {
    auto s = default_scenario();
    s.conf_table.entries.pop_back();
    EXPECT_THROW(s.validate(), MissingEntry);
    s = default_scenario();
    s.channels.pop_back();
    EXPECT_THROW(s.validate(), InvalidArgument);
    s = default_scenario();
    s.devices.clear();
    s.channels.clear();
    EXPECT_THROW(s.validate(), InvalidArgument);
}

TEST(DecisionCodec, RoundTripAndOrder) {
    for (std::size_t id = 0; id < 125; ++id) {
        const auto d = decode_decision(id, 5, 3);
        EXPECT_EQ(encode_decision(d, 5), id);
        if (id > 0) { EXPECT_TRUE(decode_decision(id - 1, 5, 3).cuts < d.cuts); }
    }
}

TEST(BruteForce, SingleCandidate) {
    auto s = default_scenario();
    s.profile = single_layer(1000);
    s.conf_table = default_conf_table(s.profile);
    const auto r = brute_force_optimal(CostModel(s));
    EXPECT_EQ(r.decision.cuts, (std::vector<nn::PartitionPoint>{{0}, {0}}));
    EXPECT_EQ(r.evaluated, 1u);
}

TEST(BruteForce, ConfidentialityDominance) {
    auto s = default_scenario();
    s.weights = {0, 0, 1, 0.5, 0.5};
    const auto r = brute_force_optimal(CostModel(s));
    EXPECT_EQ(r.decision.cuts, (std::vector<nn::PartitionPoint>{{4}, {4}}));
    EXPECT_EQ(r.effect, 0.0);
}

TEST(BruteForce, TiesPreferDeeperCuts) {
    auto s = default_scenario();
    s.weights = {0, 0, 1, 0.5, 0.5};
    for (auto& e : s.conf_table.entries) e.kl_open = e.kl_closed = 1.0;
    const auto r = brute_force_optimal(CostModel(s));
    EXPECT_EQ(r.decision.cuts, (std::vector<nn::PartitionPoint>{{4}, {4}}));
    // Computation-only weights favour the shallowest cut for every device.
    s = default_scenario();
    s.weights = {0, 1, 0, 0.5, 0.5};
    EXPECT_EQ(brute_force_optimal(CostModel(s)).decision.cuts, (std::vector<nn::PartitionPoint>{{0}, {0}}));
}

TEST(BruteForce, MatchesSecondEnumerator) {
    Rng rng(1234);
    for (int i = 0; i < 100; ++i) {
        const auto devices = 1 + rng.index(3);
        const auto s = fixture::random_scenario(rng, devices, 2 + rng.index(4));
        const CostModel m(s);
        const auto ch = s.reference_channels();
        const auto r = brute_force_optimal(m, ch);
        const auto o = oracle::enumerate(s, ch);
        EXPECT_EQ(r.evaluated, o.visited);
        EXPECT_NEAR(r.effect, o.effect, 1e-12);
        for (std::size_t id = 0; id < m.decisions(); ++id)
            EXPECT_LE(r.effect, m.effect(decode_decision(id, m.candidates(), devices), ch));
        std::vector<std::size_t> cuts;
        for (auto c : r.decision.cuts) cuts.push_back(c.candidate_index);
        EXPECT_NEAR(oracle::effect(s, cuts, ch), o.effect, 1e-12);
    }
}

TEST(BruteForce, DefaultScenario) {
    const auto r = brute_force_optimal(CostModel(default_scenario()));
    EXPECT_EQ(r.evaluated, 25u);
    EXPECT_EQ(r.decision.cuts, (std::vector<nn::PartitionPoint>{{4}, {4}}));
    EXPECT_NEAR(r.effect, 0.3404, 1e-4);
}

TEST(ConfCsv, RoundTrip) {
    ConfidentialityTable t{{{"a", 0.5, 0.25, 0.9, std::nullopt}, {"b", 1.0 / 3.0, 2, std::nullopt, 0.125}}};
    const auto text = write_conf_csv(t);
    EXPECT_EQ(parse_conf_csv(text), t);
    EXPECT_THROW(parse_conf_csv("cut,kl\n"), InvalidArgument);
    EXPECT_THROW(parse_conf_csv(std::string(conf_csv_header) + "\na,-1,1,,\n"), InvalidArgument);
}

TEST(CostCsv, RowFormat) {
    const CostModel m(default_scenario());
    const auto ch = m.scenario().reference_channels();
    const auto row = cost_csv_row("uav0", "stem.conv", m.breakdown(0, 0, ch[0]));
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), 9);
    EXPECT_EQ(row.rfind("uav0,stem.conv,", 0), 0u);
}
