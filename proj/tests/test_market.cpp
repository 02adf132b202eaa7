#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gtb/market.hpp"
#include "reference_market.hpp"

using namespace gtb;

namespace {

WorldState rich_world(int n_agents, double coin = 100.0, int units = 50) {
    WorldConfig c;
    c.layout = LayoutKind::Uniform;
    c.width = 11;
    c.height = 11;
    c.n_agents = n_agents;
    c.regen_counts = {2, 2, 2};
    WorldState w = make_world(c, 1);
    for (AgentState& a : w.agents) {
        a.coin = coin;
        a.inventory = {units, units, units};
    }
    return w;
}

Order make_order(int owner, Side side, ResourceKind res, int price, int t) {
    Order o;
    o.owner = owner;
    o.side = side;
    o.resource = res;
    o.price = price;
    o.placed_at = t;
    return o;
}

constexpr double kTradeLabor = 0.05;

}  // namespace

TEST_CASE("matching prefers the best price and trades at the resting price") {
    WorldState w = rich_world(3);
    OrderBook book;
    Rng rng(1);

    // two open asks for stone at 3 then 7, then a bid at 8
    CHECK(book.submit(w, make_order(1, Side::Ask, ResourceKind::Stone, 3, 0), rng, kTradeLabor)
              .kind == SubmitResult::Kind::Accepted);
    CHECK(book.submit(w, make_order(2, Side::Ask, ResourceKind::Stone, 7, 0), rng, kTradeLabor)
              .kind == SubmitResult::Kind::Accepted);
    SubmitResult r =
        book.submit(w, make_order(0, Side::Bid, ResourceKind::Stone, 8, 1), rng, kTradeLabor);
    REQUIRE(r.kind == SubmitResult::Kind::Executed);
    CHECK(r.trade->price == 3);
    CHECK(r.trade->buyer == 0);
    CHECK(r.trade->seller == 1);

    CHECK(w.agents[0].coin == 100.0 - 3.0);
    CHECK(w.agents[0].inventory[1] == 51);
    CHECK(w.agents[1].coin == 100.0 + 3.0);
    CHECK(w.agents[1].inventory[1] == 49);
    CHECK(w.agents[1].escrow[1] == 0);
    // the 7-coin ask is still open
    CHECK(book.open_orders(ResourceKind::Stone, Side::Ask).size() == 1);
}

TEST_CASE("open-order cap rejects the sixth order per side") {
    WorldState w = rich_world(2);
    OrderBook book;
    Rng rng(1);
    for (int i = 0; i < 5; ++i)
        CHECK(book.submit(w, make_order(0, Side::Bid, ResourceKind::Wood, 1 + i, 0), rng,
                          kTradeLabor)
                  .kind == SubmitResult::Kind::Accepted);
    SubmitResult r =
        book.submit(w, make_order(0, Side::Bid, ResourceKind::Wood, 6, 0), rng, kTradeLabor);
    CHECK(r.kind == SubmitResult::Kind::Rejected);
    CHECK(*r.reason == RejectReason::OpenOrderCap);
    // the cap is per (resource, side): asks and other resources still fine
    CHECK(book.submit(w, make_order(0, Side::Ask, ResourceKind::Wood, 9, 0), rng, kTradeLabor)
              .kind == SubmitResult::Kind::Accepted);
    CHECK(book.submit(w, make_order(0, Side::Bid, ResourceKind::Iron, 2, 0), rng, kTradeLabor)
              .kind == SubmitResult::Kind::Accepted);
}

TEST_CASE("a bid below the best ask rests open") {
    WorldState w = rich_world(2);
    OrderBook book;
    Rng rng(1);
    book.submit(w, make_order(1, Side::Ask, ResourceKind::Wood, 5, 0), rng, kTradeLabor);
    SubmitResult r =
        book.submit(w, make_order(0, Side::Bid, ResourceKind::Wood, 2, 0), rng, kTradeLabor);
    CHECK(r.kind == SubmitResult::Kind::Accepted);
    CHECK(book.trades().empty());
    CHECK(w.agents[0].escrow_coin == 2.0);
    CHECK(w.agents[0].coin == 98.0);
}

TEST_CASE("funding and escrow rules") {
    WorldState w = rich_world(2, 4.0, 0);
    OrderBook book;
    Rng rng(1);

    SUBCASE("bids beyond free coin are rejected; labor only on valid submissions") {
        const double labor_before = w.agents[0].labor;
        SubmitResult r =
            book.submit(w, make_order(0, Side::Bid, ResourceKind::Wood, 5, 0), rng, kTradeLabor);
        CHECK(r.kind == SubmitResult::Kind::Rejected);
        CHECK(*r.reason == RejectReason::InsufficientFunds);
        CHECK(w.agents[0].labor == labor_before);

        CHECK(book.submit(w, make_order(0, Side::Bid, ResourceKind::Wood, 4, 0), rng, kTradeLabor)
                  .kind == SubmitResult::Kind::Accepted);
        CHECK(w.agents[0].labor == doctest::Approx(labor_before + kTradeLabor));
        // the 4 coins now sit in escrow, so another bid of 1 is unfunded
        SubmitResult r2 =
            book.submit(w, make_order(0, Side::Bid, ResourceKind::Wood, 1, 0), rng, kTradeLabor);
        CHECK(r2.kind == SubmitResult::Kind::Rejected);
    }

    SUBCASE("asks need the unit in inventory") {
        SubmitResult r =
            book.submit(w, make_order(0, Side::Ask, ResourceKind::Iron, 3, 0), rng, kTradeLabor);
        CHECK(r.kind == SubmitResult::Kind::Rejected);
        CHECK(*r.reason == RejectReason::InsufficientResource);
    }

    SUBCASE("invalid price") {
        SubmitResult r =
            book.submit(w, make_order(0, Side::Bid, ResourceKind::Iron, 11, 0), rng, kTradeLabor);
        CHECK(r.kind == SubmitResult::Kind::Rejected);
        CHECK(*r.reason == RejectReason::InvalidPrice);
    }
}

TEST_CASE("orders expire after 50 steps and release escrow") {
    WorldState w = rich_world(1);
    OrderBook book;
    Rng rng(1);
    book.submit(w, make_order(0, Side::Bid, ResourceKind::Wood, 6, 0), rng, kTradeLabor);
    book.submit(w, make_order(0, Side::Ask, ResourceKind::Stone, 6, 0), rng, kTradeLabor);
    CHECK(w.agents[0].escrow_coin == 6.0);
    CHECK(w.agents[0].escrow[1] == 1);

    CHECK(book.expire(w, 49).empty());  // placed at 0, age 49: still open
    std::vector<Order> released = book.expire(w, 50);
    CHECK(released.size() == 2);
    CHECK(w.agents[0].escrow_coin == 0.0);
    CHECK(w.agents[0].escrow[1] == 0);
    CHECK(w.agents[0].coin == 100.0);
    CHECK(w.agents[0].inventory[1] == 50);
    CHECK(book.expire(w, 200).empty());  // empty book no-op
}

TEST_CASE("market observation vectors") {
    WorldState w = rich_world(3);
    OrderBook book;
    Rng rng(1);

    SUBCASE("empty book: all zeros, average price defined as 0") {
        MarketView v = book.observation(0);
        for (double x : v.own_counts) CHECK(x == 0.0);
        for (double x : v.other_counts) CHECK(x == 0.0);
        for (double x : v.avg_price) CHECK(x == 0.0);
        for (double x : v.trades_at_level) CHECK(x == 0.0);
    }

    SUBCASE("own bid shows in the owner's own-vector only") {
        book.submit(w, make_order(0, Side::Bid, ResourceKind::Wood, 4, 0), rng, kTradeLabor);
        MarketView mine = book.observation(0);
        const size_t slot = 0 * 22 + 0 * 11 + 4;
        CHECK(mine.own_counts[slot] == 1.0);
        CHECK(mine.other_counts[slot] == 0.0);
        MarketView theirs = book.observation(1);
        CHECK(theirs.own_counts[slot] == 0.0);
        CHECK(theirs.other_counts[slot] == 1.0);
        // the planner sees cumulative counts only
        MarketView planner = book.observation(kPlannerViewer);
        CHECK(planner.own_counts[slot] == 0.0);
        CHECK(planner.other_counts[slot] == 1.0);
    }

    SUBCASE("two stone trades at 3 and 5 average to 4") {
        book.submit(w, make_order(1, Side::Ask, ResourceKind::Stone, 3, 0), rng, kTradeLabor);
        book.submit(w, make_order(0, Side::Bid, ResourceKind::Stone, 3, 0), rng, kTradeLabor);
        book.submit(w, make_order(1, Side::Ask, ResourceKind::Stone, 5, 1), rng, kTradeLabor);
        book.submit(w, make_order(0, Side::Bid, ResourceKind::Stone, 5, 1), rng, kTradeLabor);
        MarketView v = book.observation(2);
        CHECK(v.avg_price[1] == 4.0);
        CHECK(v.trades_at_level[1 * 11 + 3] == 1.0);
        CHECK(v.trades_at_level[1 * 11 + 5] == 1.0);
    }
}

TEST_CASE("self-trade nets to zero coin and zero resource") {
    WorldState w = rich_world(1);
    OrderBook book;
    Rng rng(1);
    book.submit(w, make_order(0, Side::Ask, ResourceKind::Iron, 4, 0), rng, kTradeLabor);
    SubmitResult r =
        book.submit(w, make_order(0, Side::Bid, ResourceKind::Iron, 6, 1), rng, kTradeLabor);
    REQUIRE(r.kind == SubmitResult::Kind::Executed);
    CHECK(r.trade->buyer == 0);
    CHECK(r.trade->seller == 0);
    CHECK(w.agents[0].coin == 100.0);
    CHECK(w.agents[0].inventory[2] == 50);
    CHECK(w.agents[0].escrow[2] == 0);
    CHECK(w.agents[0].labor == doctest::Approx(2 * kTradeLabor));
}

TEST_CASE("random order streams match the naive reference matcher") {
    const int kStreams = 60;
    const int kOrders = 120;
    for (int stream = 0; stream < kStreams; ++stream) {
        const int n = 4;
        WorldState w = rich_world(n, 1000.0, 200);
        OrderBook book;
        testref::ReferenceMatcher ref(
            MarketConfig{}, std::vector<testref::RefAgent>(
                                n, testref::RefAgent{1000.0, 0.0, {200, 200, 200}, {0, 0, 0}}));

        Rng order_rng(9000 + static_cast<uint64_t>(stream));
        Rng tie_a(777 + static_cast<uint64_t>(stream));
        Rng tie_b(777 + static_cast<uint64_t>(stream));

        const double coin0 = n * 1000.0;
        for (int k = 0; k < kOrders; ++k) {
            const int now = k / 6;  // several orders share a step: real ties
            const int owner = static_cast<int>(order_rng.uniform_int(0, n - 1));
            const Side side = order_rng.bernoulli(0.5) ? Side::Bid : Side::Ask;
            const auto res = static_cast<ResourceKind>(order_rng.uniform_int(0, 2));
            const int price = static_cast<int>(order_rng.uniform_int(0, 10));
            book.submit(w, make_order(owner, side, res, price, now), tie_a, kTradeLabor);
            ref.submit(owner, side, res, price, now, tie_b);
            book.expire(w, now);
            ref.expire(now);
        }

        REQUIRE(book.trades().size() == ref.trades().size());
        for (size_t i = 0; i < book.trades().size(); ++i) CHECK(book.trades()[i] == ref.trades()[i]);

        // conservation: coin + escrowed coin and per-resource unit totals
        double coin = 0.0;
        std::array<int64_t, 3> units{};
        for (const AgentState& a : w.agents) {
            coin += a.coin + a.escrow_coin;
            for (int k = 0; k < 3; ++k)
                units[static_cast<size_t>(k)] +=
                    a.inventory[static_cast<size_t>(k)] + a.escrow[static_cast<size_t>(k)];
        }
        CHECK(coin == doctest::Approx(coin0).epsilon(1e-12));
        for (int k = 0; k < 3; ++k) CHECK(units[static_cast<size_t>(k)] == n * 200);

        // no crossed book at rest
        for (int r = 0; r < 3; ++r) {
            int best_bid = -1, best_ask = 99;
            for (const Order& o : book.open_orders(static_cast<ResourceKind>(r), Side::Bid))
                best_bid = std::max(best_bid, o.price);
            for (const Order& o : book.open_orders(static_cast<ResourceKind>(r), Side::Ask))
                best_ask = std::min(best_ask, o.price);
            CHECK(best_bid < best_ask);
        }
    }
}
