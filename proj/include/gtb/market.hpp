#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "gtb/config.hpp"
#include "gtb/rng.hpp"
#include "gtb/types.hpp"
#include "gtb/world.hpp"

namespace gtb {

enum class Side : uint8_t { Bid = 0, Ask = 1 };

inline constexpr int kMinPrice = 0;
inline constexpr int kMaxPrice = 10;
inline constexpr int kPriceLevels = 11;

struct Order {
    int owner = -1;
    Side side = Side::Bid;
    ResourceKind resource = ResourceKind::Wood;
    int price = 0;       // one of the 11 discrete levels
    int placed_at = 0;   // time step of submission
    uint64_t seq = 0;    // global submission counter, for stable identity
};

struct Trade {
    int step = 0;
    ResourceKind resource = ResourceKind::Wood;
    int price = 0;
    int buyer = -1;
    int seller = -1;

    bool operator==(const Trade&) const = default;
};

enum class RejectReason : uint8_t {
    InvalidPrice,
    OpenOrderCap,
    InsufficientFunds,
    InsufficientResource,
};

struct SubmitResult {
    enum class Kind : uint8_t { Accepted, Executed, Rejected } kind = Kind::Rejected;
    std::optional<Trade> trade;
    std::optional<RejectReason> reason;
};

/// Per-viewer market observation: open-order counts per (resource, side,
/// price level), the running average trade price, and trade counts per level.
struct MarketView {
    std::vector<double> own_counts;       // 66, zeros for the planner
    std::vector<double> other_counts;     // 66; for the planner: all agents
    std::array<double, kNumResources> avg_price{};  // 0 until a trade happens
    std::vector<double> trades_at_level;  // 33
};

inline constexpr int kPlannerViewer = -1;

/// Continuous double auction over the three resources. Orders are single
/// unit; bids escrow their coins and asks escrow the unit while open.
class OrderBook {
  public:
    explicit OrderBook(MarketConfig cfg = {}) : cfg_(cfg) {}

    /// Validates, escrows, and matches one incoming order. Matching prefers
    /// the best-priced complementary order, then the earliest, then draws
    /// uniformly among ties; the execution price is the resting order's.
    SubmitResult submit(WorldState& world, Order order, Rng& rng, double trade_labor);

    /// Removes every open order aged >= order_lifetime and returns escrow to
    /// its owner.
    std::vector<Order> expire(WorldState& world, int now);

    MarketView observation(int viewer) const;

    const std::vector<Order>& open_orders(ResourceKind r, Side s) const {
        return open_[static_cast<size_t>(r)][static_cast<size_t>(s)];
    }
    const std::vector<Trade>& trades() const { return trades_; }
    int open_count(int owner, ResourceKind r, Side s) const;
    double average_trade_price(ResourceKind r) const;

  private:
    MarketConfig cfg_;
    std::array<std::array<std::vector<Order>, 2>, kNumResources> open_{};
    std::vector<Trade> trades_;
    std::array<double, kNumResources> price_sum_{};
    std::array<int64_t, kNumResources> trade_count_{};
    std::array<std::array<int64_t, kPriceLevels>, kNumResources> level_counts_{};
    uint64_t next_seq_ = 0;

    void record_trade(const Trade& t);
};

}  // namespace gtb
