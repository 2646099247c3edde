#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <numeric>
#include <random>
#include <vector>

#include "cavgame/coalition_engine.hpp"
#include "cavgame/errors.hpp"

using namespace cavgame;

namespace {

CharacteristicMap from_function(int n, const std::function<double(SubsetMask)>& v) {
    CharacteristicMap m(n);
    for (SubsetMask s = 1; s <= m.grand(); ++s) m.set(s, v(s));
    return m;
}

CharacteristicMap random_game(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(0.0, 10.0);
    CharacteristicMap m(n);
    for (SubsetMask s = 1; s <= m.grand(); ++s) m.set(s, d(rng));
    return m;
}

Player player(const char* id, int lane, double X, DrivingProfile p = DrivingProfile::moderate()) {
    return {id, lane, p, PlayerRole::MainLaneAdjacent, X};
}

}  // namespace

TEST_CASE("worked three-player game") {
    const double v[] = {0, 10, 12, 20, 14, 22, 24, 30};
    const auto m = from_function(3, [&](SubsetMask s) { return v[s]; });
    const auto q = shapley_allocation(m);
    CHECK(q[0] == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(q[1] == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(q[2] == doctest::Approx(12.0).epsilon(1e-12));
}

TEST_CASE("efficiency on random games") {
    std::mt19937_64 rng(31);
    for (int n = 1; n <= 6; ++n) {
        for (int t = 0; t < 20; ++t) {
            const auto m = random_game(n, rng);
            const auto q = shapley_allocation(m);
            CHECK(std::accumulate(q.begin(), q.end(), 0.0) == doctest::Approx(m.at(m.grand())).epsilon(1e-9));
        }
    }
}

TEST_CASE("symmetric players get equal shares") {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> d(0.0, 10.0);
    // players 0 and 1 are interchangeable: v depends on how many of them are in, plus player 2 and 3
    std::vector<double> base(3 * 4);
    for (double& x : base) x = d(rng);
    const auto m = from_function(4, [&](SubsetMask s) {
        const int k = std::popcount(s & 3u);
        return base[k * 4 + (s >> 2)] + 0.5 * std::popcount(s);
    });
    const auto q = shapley_allocation(m);
    CHECK(q[0] == doctest::Approx(q[1]).epsilon(1e-12));
}

TEST_CASE("dummy player gets its standalone value") {
    std::mt19937_64 rng(33);
    const auto g = random_game(3, rng);
    const double dummy = 2.5;
    const auto m = from_function(4, [&](SubsetMask s) {
        const SubsetMask rest = s & 7u;
        return (rest ? g.at(rest) : 0.0) + ((s & 8u) ? dummy : 0.0);
    });
    const auto q = shapley_allocation(m);
    CHECK(q[3] == doctest::Approx(dummy).epsilon(1e-12));
    const auto q3 = shapley_allocation(g);
    for (int i = 0; i < 3; ++i) CHECK(q[i] == doctest::Approx(q3[i]).epsilon(1e-12));
}

TEST_CASE("missing subsets") {
    CharacteristicMap m(2);
    m.set(1, 1.0);
    CHECK_FALSE(m.complete());
    CHECK_THROWS_AS(shapley_allocation(m), MissingSubset);
    CHECK_THROWS_AS(m.set(4, 1.0), std::out_of_range);
    CHECK_THROWS_AS(CharacteristicMap(0), std::invalid_argument);
}

TEST_CASE("rationality rule") {
    CHECK(rationality_check(10.0, 10.0) == Rationality::Stay);
    CHECK(rationality_check(10.1, 10.0) == Rationality::BreakAway);
    CHECK(rationality_check(10.1, 10.0, 0.2) == Rationality::Stay);
}

TEST_CASE("formation keeps a subadditive game together") {
    const double v[] = {0, 10, 12, 20, 14, 22, 24, 30};
    const auto out = coalition_formation(3, [&](SubsetMask s) { return v[s]; });
    REQUIRE(out.coalitions.size() == 1);
    CHECK(out.coalitions[0] == 7u);
    CHECK(out.defected == std::vector<bool>{false, false, false});
}

TEST_CASE("one defector splits off") {
    // player 0 is charged for the others' synergy
    const double v[] = {0, 1, 5, 6, 5, 6, 8, 11};
    const auto out = coalition_formation(3, [&](SubsetMask s) { return v[s]; });
    CHECK(out.defected[0]);
    CHECK_FALSE(out.defected[1]);
    REQUIRE(out.coalitions.size() == 2);
    CHECK(out.coalitions[0] == 1u);
    CHECK(out.coalitions[1] == 6u);
}

TEST_CASE("two defectors break the grand coalition") {
    const double v[] = {0, 1, 1, 6, 5, 7, 7, 12};
    const auto out = coalition_formation(3, [&](SubsetMask s) { return v[s]; });
    CHECK(out.defected[0]);
    CHECK(out.defected[1]);
    CHECK(out.coalitions == std::vector<SubsetMask>{1u, 2u, 4u});
}

TEST_CASE("evaluator failure names the subset") {
    try {
        coalition_formation(2, [](SubsetMask s) -> double {
            if (s == 2) throw std::runtime_error("boom");
            return 1.0;
        });
        FAIL("expected a throw");
    } catch (const EvaluatorFailure& e) {
        CHECK(e.subset() == 2u);
    }
}

TEST_CASE("sub-coalitions chain close same-profile vehicles per lane") {
    std::vector<Player> ps = {player("V1", 3, 18), player("V2", 2, 10), player("V3", 1, 8), player("V4", 3, 12),
                              player("V5", 1, 2)};
    const auto subs = form_sub_coalitions(ps, 15.0);
    REQUIRE(subs.size() == 3);
    CHECK(subs[0].members == std::vector<VehicleId>{"V1", "V4"});
    CHECK(subs[0].lane == 3);
    CHECK(subs[1].members == std::vector<VehicleId>{"V2"});
    CHECK(subs[2].members == std::vector<VehicleId>{"V3", "V5"});
    CHECK(subs[2].leader() == "V3");

    ps[3].profile = DrivingProfile::aggressive();
    CHECK(form_sub_coalitions(ps, 15.0).size() == 4);
    ps[3].profile = DrivingProfile::moderate();
    CHECK(form_sub_coalitions(ps, 5.0).size() == 5);
}

TEST_CASE("partition labels and types") {
    const std::vector<SubCoalition> subs = {{{"V1", "V4"}, 3}, {{"V2"}, 2}, {{"V3", "V5"}, 1}};
    auto p = make_partition(subs, {7u});
    CHECK(p.to_string() == "{{V1,V4},{V2},{V3,V5}}");
    CHECK(p.type == CoalitionType::GrandWithSub);
    p = make_partition(subs, {3u, 4u});
    CHECK(p.to_string() == "{{V1,V4},{V2}} {{V3,V5}}");
    CHECK(p.type == CoalitionType::MultiPlayer);
    const std::vector<SubCoalition> solo = {{{"V1"}, 3}, {{"V2"}, 2}};
    CHECK(make_partition(solo, {1u, 2u}).type == CoalitionType::SinglePlayer);
    CHECK(make_partition(solo, {3u}).type == CoalitionType::Grand);
    CHECK_THROWS_AS(make_partition(subs, {3u, 6u}), std::invalid_argument);
    CHECK_THROWS_AS(make_partition(subs, {3u}), std::invalid_argument);
    CHECK(coalition_type_name(CoalitionType::GrandWithSub) == "grand-with-sub");
}

TEST_CASE("followers replay the leader with a gap delay") {
    CHECK(delay_steps(6.0, 20.0, 0.1) == 3);
    CHECK(delay_steps(0.0, 20.0, 0.1) == 0);
    CHECK_THROWS_AS(delay_steps(6.0, 0.0, 0.1), std::invalid_argument);
    std::vector<DecisionAction> lead;
    for (int k = 0; k < 6; ++k) lead.push_back({0.01 * (k + 1), 0.0, 0});
    const auto f = replay_with_delay(lead, 4.0, 20.0, 0.1);
    REQUIRE(f.size() == lead.size());
    CHECK(f[0] == kHoldAction);
    CHECK(f[1] == kHoldAction);
    CHECK(f[2] == lead[0]);
    CHECK(f[5] == lead[3]);
}
