#include <catch2/catch_amalgamated.hpp>

#include <limits>
#include <vector>

#include "hfnt/pareto.hpp"
#include "hfnt/rng.hpp"

using namespace hfnt;

namespace {

// O(n^2)-per-front oracle: repeatedly peel off the undominated subset.
std::vector<std::vector<std::size_t>> peel_fronts(const std::vector<ObjectiveTriple>& pop) {
    std::vector<std::vector<std::size_t>> fronts;
    std::vector<bool> assigned(pop.size(), false);
    std::size_t left = pop.size();
    while (left > 0) {
        std::vector<std::size_t> front;
        for (std::size_t i = 0; i < pop.size(); ++i) {
            if (assigned[i]) continue;
            bool dominated_by_remaining = false;
            for (std::size_t j = 0; j < pop.size(); ++j) {
                if (j == i || assigned[j]) continue;
                if (dominates(pop[j], pop[i])) {
                    dominated_by_remaining = true;
                    break;
                }
            }
            if (!dominated_by_remaining) front.push_back(i);
        }
        for (std::size_t i : front) assigned[i] = true;
        left -= front.size();
        fronts.push_back(std::move(front));
    }
    return fronts;
}

ObjectiveTriple random_triple(Rng& rng) {
    return {rng.uniform(0, 1), static_cast<double>(1 + rng.uniform_index(20)),
            -static_cast<double>(1 + rng.uniform_index(7))};
}

} // namespace

TEST_CASE("dominates componentwise rule") {
    CHECK(dominates({1, 1, -3}, {2, 2, -3}));
    const ObjectiveTriple a{1, 2, -3};
    CHECK_FALSE(dominates(a, a));
    const ObjectiveTriple p{1, 3, -1}, q{2, 2, -1};
    CHECK_FALSE(dominates(p, q));
    CHECK_FALSE(dominates(q, p));
}

TEST_CASE("dominates is irreflexive, antisymmetric, transitive") {
    Rng rng(101);
    for (int trial = 0; trial < 3000; ++trial) {
        const auto a = random_triple(rng);
        const auto b = random_triple(rng);
        const auto c = random_triple(rng);
        CHECK_FALSE(dominates(a, a));
        if (dominates(a, b)) CHECK_FALSE(dominates(b, a));
        if (dominates(a, b) && dominates(b, c)) CHECK(dominates(a, c));
    }
}

TEST_CASE("nondominated_sort small cases") {
    // A=(1,1,0), B=(2,2,0), C=(1,3,0) -> fronts {A}, {B,C}
    const std::vector<ObjectiveTriple> pop{{1, 1, 0}, {2, 2, 0}, {1, 3, 0}};
    const auto fronts = nondominated_sort(pop);
    REQUIRE(fronts.size() == 2);
    CHECK(fronts[0] == std::vector<std::size_t>{0});
    CHECK(fronts[1] == std::vector<std::size_t>{1, 2});

    const std::vector<ObjectiveTriple> same(4, ObjectiveTriple{1, 2, -3});
    const auto one = nondominated_sort(same);
    REQUIRE(one.size() == 1);
    CHECK(one[0].size() == 4);

    std::vector<ObjectiveTriple> chain;
    for (int i = 0; i < 5; ++i)
        chain.push_back({static_cast<double>(i), static_cast<double>(i), 0.0});
    const auto five = nondominated_sort(chain);
    REQUIRE(five.size() == 5);
    for (std::size_t f = 0; f < 5; ++f) CHECK(five[f] == std::vector<std::size_t>{f});
}

TEST_CASE("nondominated_sort matches the peeling oracle on 200 random populations") {
    Rng rng(2023);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(50);
        std::vector<ObjectiveTriple> pop;
        pop.reserve(n);
        for (std::size_t i = 0; i < n; ++i) pop.push_back(random_triple(rng));
        auto got = nondominated_sort(pop);
        auto want = peel_fronts(pop);
        REQUIRE(got.size() == want.size());
        for (std::size_t f = 0; f < got.size(); ++f) {
            std::sort(got[f].begin(), got[f].end());
            CHECK(got[f] == want[f]);
        }
    }
}

TEST_CASE("crowding distance conventions") {
    constexpr double inf = std::numeric_limits<double>::infinity();

    const std::vector<ObjectiveTriple> two{{0, 0, 0}, {1, 1, 1}};
    const auto d2 = crowding_distance(two);
    CHECK(d2[0] == inf);
    CHECK(d2[1] == inf);

    // three collinear equally spaced points varying in one objective
    const std::vector<ObjectiveTriple> three{{0.0, 5, -2}, {0.5, 5, -2}, {1.0, 5, -2}};
    const auto d3 = crowding_distance(three);
    CHECK(d3[0] == inf);
    CHECK(d3[2] == inf);
    CHECK(d3[1] == Catch::Approx(1.0));

    const std::vector<ObjectiveTriple> same(5, ObjectiveTriple{1, 2, -3});
    const auto d5 = crowding_distance(same);
    CHECK(d5[0] == inf);
    CHECK(d5[4] == inf);
    for (std::size_t i = 1; i < 4; ++i) CHECK(d5[i] == 0.0);
}
