#include "gtb/market.hpp"

#include <algorithm>

namespace gtb {

int OrderBook::open_count(int owner, ResourceKind r, Side s) const {
    const auto& v = open_[static_cast<size_t>(r)][static_cast<size_t>(s)];
    return static_cast<int>(std::count_if(v.begin(), v.end(),
                                          [owner](const Order& o) { return o.owner == owner; }));
}

double OrderBook::average_trade_price(ResourceKind r) const {
    const auto n = trade_count_[static_cast<size_t>(r)];
    return n == 0 ? 0.0 : price_sum_[static_cast<size_t>(r)] / static_cast<double>(n);
}

void OrderBook::record_trade(const Trade& t) {
    trades_.push_back(t);
    price_sum_[static_cast<size_t>(t.resource)] += t.price;
    trade_count_[static_cast<size_t>(t.resource)] += 1;
    level_counts_[static_cast<size_t>(t.resource)][static_cast<size_t>(t.price)] += 1;
}

SubmitResult OrderBook::submit(WorldState& world, Order order, Rng& rng, double trade_labor) {
    require(order.owner >= 0 && order.owner < static_cast<int>(world.agents.size()),
            "submit: invalid order owner");
    AgentState& owner = world.agents[static_cast<size_t>(order.owner)];

    if (order.price < kMinPrice || order.price > kMaxPrice)
        return {SubmitResult::Kind::Rejected, std::nullopt, RejectReason::InvalidPrice};
    if (open_count(order.owner, order.resource, order.side) >= cfg_.max_open_per_side)
        return {SubmitResult::Kind::Rejected, std::nullopt, RejectReason::OpenOrderCap};
    if (order.side == Side::Bid) {
        if (owner.coin < static_cast<double>(order.price))
            return {SubmitResult::Kind::Rejected, std::nullopt, RejectReason::InsufficientFunds};
    } else {
        if (owner.inventory[static_cast<size_t>(order.resource)] < 1)
            return {SubmitResult::Kind::Rejected, std::nullopt, RejectReason::InsufficientResource};
    }

    order.seq = next_seq_++;
    owner.labor += trade_labor;

    // find the best complementary resting order the incoming one can cross
    const Side other_side = order.side == Side::Bid ? Side::Ask : Side::Bid;
    auto& resting = open_[static_cast<size_t>(order.resource)][static_cast<size_t>(other_side)];
    std::vector<size_t> best;
    for (size_t i = 0; i < resting.size(); ++i) {
        const Order& cand = resting[i];
        bool crosses = order.side == Side::Bid ? (cand.price <= order.price)
                                               : (cand.price >= order.price);
        if (!crosses) continue;
        if (best.empty()) {
            best.push_back(i);
            continue;
        }
        const Order& cur = resting[best.front()];
        int cmp = 0;
        if (cand.price != cur.price)
            cmp = (order.side == Side::Bid ? cand.price < cur.price : cand.price > cur.price) ? 1
                                                                                              : -1;
        else if (cand.placed_at != cur.placed_at)
            cmp = cand.placed_at < cur.placed_at ? 1 : -1;
        if (cmp > 0) {
            best.clear();
            best.push_back(i);
        } else if (cmp == 0) {
            best.push_back(i);  // full tie, resolved at random below
        }
    }

    if (!best.empty()) {
        size_t pick = best.size() == 1
                          ? best.front()
                          : best[static_cast<size_t>(
                                rng.uniform_int(0, static_cast<int64_t>(best.size()) - 1))];
        Order matched = resting[pick];
        resting.erase(resting.begin() + static_cast<std::ptrdiff_t>(pick));

        // the resting order is the earlier one; trade at its price
        const int price = matched.price;
        Trade t;
        t.step = order.placed_at;
        t.resource = order.resource;
        t.price = price;
        if (order.side == Side::Bid) {
            t.buyer = order.owner;
            t.seller = matched.owner;
            AgentState& seller = world.agents[static_cast<size_t>(matched.owner)];
            owner.coin -= price;
            owner.inventory[static_cast<size_t>(order.resource)] += 1;
            seller.escrow[static_cast<size_t>(order.resource)] -= 1;
            seller.coin += price;
        } else {
            t.buyer = matched.owner;
            t.seller = order.owner;
            AgentState& buyer = world.agents[static_cast<size_t>(matched.owner)];
            buyer.escrow_coin -= price;
            buyer.inventory[static_cast<size_t>(order.resource)] += 1;
            owner.inventory[static_cast<size_t>(order.resource)] -= 1;
            owner.coin += price;
        }
        record_trade(t);
        return {SubmitResult::Kind::Executed, t, std::nullopt};
    }

    // rest open: move the committed amount into escrow
    if (order.side == Side::Bid) {
        owner.coin -= order.price;
        owner.escrow_coin += order.price;
    } else {
        owner.inventory[static_cast<size_t>(order.resource)] -= 1;
        owner.escrow[static_cast<size_t>(order.resource)] += 1;
    }
    open_[static_cast<size_t>(order.resource)][static_cast<size_t>(order.side)].push_back(order);
    return {SubmitResult::Kind::Accepted, std::nullopt, std::nullopt};
}

std::vector<Order> OrderBook::expire(WorldState& world, int now) {
    std::vector<Order> released;
    for (auto& per_resource : open_) {
        for (auto& orders : per_resource) {
            auto it = orders.begin();
            while (it != orders.end()) {
                if (now - it->placed_at >= cfg_.order_lifetime) {
                    AgentState& owner = world.agents[static_cast<size_t>(it->owner)];
                    if (it->side == Side::Bid) {
                        owner.escrow_coin -= it->price;
                        owner.coin += it->price;
                    } else {
                        owner.escrow[static_cast<size_t>(it->resource)] -= 1;
                        owner.inventory[static_cast<size_t>(it->resource)] += 1;
                    }
                    released.push_back(*it);
                    it = orders.erase(it);
                } else {
                    ++it;
                }
            }
        }
    }
    return released;
}

MarketView OrderBook::observation(int viewer) const {
    MarketView v;
    v.own_counts.assign(kNumResources * 2 * kPriceLevels, 0.0);
    v.other_counts.assign(kNumResources * 2 * kPriceLevels, 0.0);
    v.trades_at_level.assign(kNumResources * kPriceLevels, 0.0);
    for (int r = 0; r < kNumResources; ++r) {
        for (int s = 0; s < 2; ++s) {
            for (const Order& o : open_[static_cast<size_t>(r)][static_cast<size_t>(s)]) {
                size_t slot = static_cast<size_t>(r * 2 * kPriceLevels + s * kPriceLevels + o.price);
                if (viewer != kPlannerViewer && o.owner == viewer)
                    v.own_counts[slot] += 1.0;
                else
                    v.other_counts[slot] += 1.0;
            }
        }
        v.avg_price[static_cast<size_t>(r)] = average_trade_price(static_cast<ResourceKind>(r));
        for (int p = 0; p < kPriceLevels; ++p)
            v.trades_at_level[static_cast<size_t>(r * kPriceLevels + p)] =
                static_cast<double>(level_counts_[static_cast<size_t>(r)][static_cast<size_t>(p)]);
    }
    return v;
}

}  // namespace gtb
