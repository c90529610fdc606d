#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "poet/bandit.hpp"
#include "poet/error.hpp"

using namespace poet;
using namespace poet::bandit;

namespace {

// 3/5 + 1.414 * sqrt(ln(20)/5), evaluated to 40 digits outside this code base.
constexpr double kUcbExample = 1.6945003540259597;
constexpr double kUcbTol = 1e-9;

OperatorStats stats_with(OperatorId op, double r, long n, long total)
{
    OperatorStats s(1.414);
    s.reward[index_of(op)] = r;
    s.count[index_of(op)] = n;
    s.total = total;
    return s;
}

}  // namespace

TEST_CASE("ucb_score")
{
    const auto s = stats_with(OperatorId::Explore, 3, 5, 20);
    CHECK(std::abs(ucb_score(s, OperatorId::Explore) - kUcbExample) <= kUcbTol);
    CHECK(std::isinf(ucb_score(s, OperatorId::Improve)));
    CHECK(ucb_score(s, OperatorId::Improve) > 0);

    const auto always = stats_with(OperatorId::Fusion, 7, 7, 30);
    const double explore = 1.414 * std::sqrt(std::log(30.0) / 7.0);
    CHECK(ucb_score(always, OperatorId::Fusion) - explore == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("select_operator: cold start walks the tie order")
{
    OperatorStats s;
    std::vector<OperatorId> picked;
    for (int i = 0; i < 6; ++i) {
        const OperatorId op = select_operator(s);
        picked.push_back(op);
        record_outcome(s, op, std::nullopt, 1.0);
    }
    CHECK(picked == std::vector<OperatorId>(kAllOperators.begin(), kAllOperators.end()));
    CHECK(s.total == 6);
}

TEST_CASE("select_operator: cold-start operators come before any repeat")
{
    // Whatever rewards the first picks earn, all six are tried before one is picked twice.
    for (int pattern = 0; pattern < 64; ++pattern) {
        OperatorStats s;
        std::set<OperatorId> seen;
        for (int i = 0; i < 6; ++i) {
            const OperatorId op = select_operator(s);
            CHECK(seen.insert(op).second);
            record_outcome(s, op, (pattern >> i) & 1 ? std::optional<double>(0.5) : std::nullopt, 1.0);
        }
    }
}

TEST_CASE("select_operator: single untried operator wins; argmax otherwise")
{
    OperatorStats s;
    for (OperatorId op : kAllOperators) {
        s.count[index_of(op)] = 5;
        s.reward[index_of(op)] = 5;
    }
    s.total = 25;
    s.count[index_of(OperatorId::Simplify)] = 0;
    s.reward[index_of(OperatorId::Simplify)] = 0;
    CHECK(select_operator(s) == OperatorId::Simplify);

    OperatorStats t;
    t.c = 0.0;
    for (OperatorId op : kAllOperators)
        t.count[index_of(op)] = 100;
    t.total = 600;
    for (OperatorId op : kAllOperators)
        t.reward[index_of(op)] = 50;
    t.reward[index_of(OperatorId::Fusion)] = 100 * 0.70;
    t.reward[index_of(OperatorId::Refactor)] = 100 * 0.69;
    CHECK(select_operator(t) == OperatorId::Fusion);
}

TEST_CASE("select_operator records scores and counts")
{
    OperatorStats s;
    const OperatorId op = select_operator(s);
    CHECK(s.count[index_of(op)] == 1);
    CHECK(s.total == 1);
    for (OperatorId o : kAllOperators)
        CHECK(std::isinf(s.last_score[index_of(o)]));
}

TEST_CASE("select_operator skips crossover when one parent is available")
{
    OperatorStats s;
    for (OperatorId op : kAllOperators) {
        if (op == OperatorId::Crossover)
            continue;
        s.count[index_of(op)] = 3;
        s.reward[index_of(op)] = 0;
    }
    s.total = 15;
    CHECK(select_operator(s, 1) != OperatorId::Crossover);
    CHECK(select_operator(s, 2) == OperatorId::Crossover);
}

TEST_CASE("record_outcome reward rule")
{
    OperatorStats s;
    s.count[index_of(OperatorId::Improve)] = 1;
    record_outcome(s, OperatorId::Improve, 99.2, 161.0);
    CHECK(s.reward[index_of(OperatorId::Improve)] == 1.0);
    record_outcome(s, OperatorId::Improve, std::nullopt, 161.0);
    CHECK(s.reward[index_of(OperatorId::Improve)] == 1.0);
    record_outcome(s, OperatorId::Improve, 161.0, 161.0);
    CHECK(s.reward[index_of(OperatorId::Improve)] == 1.0);
    record_outcome(s, OperatorId::Improve, 161.0 * (1 - 1e-12), 161.0);  // within tolerance: not lower
    CHECK(s.reward[index_of(OperatorId::Improve)] == 1.0);
    CHECK_THROWS_AS(record_outcome(s, OperatorId::Crossover, 1.0, 2.0), Error);
}

TEST_CASE("bandit invariants under random play")
{
    OperatorStats s;
    unsigned x = 7;
    for (int i = 0; i < 500; ++i) {
        const OperatorId op = select_operator(s);
        x = x * 1103515245u + 12345u;
        record_outcome(s, op, (x >> 16) % 3 == 0 ? std::optional<double>(1.0) : std::nullopt, 2.0);
        long sum = 0;
        for (OperatorId o : kAllOperators) {
            CHECK(s.reward[index_of(o)] <= s.count[index_of(o)]);
            CHECK(s.reward[index_of(o)] >= 0);
            sum += s.count[index_of(o)];
        }
        CHECK(sum == s.total);
    }
}
