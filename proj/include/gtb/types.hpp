#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace gtb {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Raised when a configuration violates a constraint; the message names it.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when a caller breaks an operation's contract (bad agent id, bad
/// action index, malformed schedule). Never used for in-simulation outcomes
/// such as blocked moves or rejected orders.
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

inline void require(bool cond, const char* msg) {
    if (!cond) throw ContractError(msg);
}

// ---------------------------------------------------------------------------
// Resources and houses
// ---------------------------------------------------------------------------

enum class ResourceKind : uint8_t { Wood = 0, Stone = 1, Iron = 2 };

inline constexpr int kNumResources = 3;
inline constexpr std::array<ResourceKind, kNumResources> kAllResources{
    ResourceKind::Wood, ResourceKind::Stone, ResourceKind::Iron};

inline const char* name_of(ResourceKind k) {
    switch (k) {
        case ResourceKind::Wood: return "wood";
        case ResourceKind::Stone: return "stone";
        case ResourceKind::Iron: return "iron";
    }
    return "?";
}

enum class HouseType : uint8_t { Red = 0, Blue = 1, Green = 2 };

inline constexpr int kNumHouseTypes = 3;
inline constexpr std::array<HouseType, kNumHouseTypes> kAllHouseTypes{
    HouseType::Red, HouseType::Blue, HouseType::Green};

/// Each house consumes one unit of each of two distinct resources.
inline constexpr std::array<ResourceKind, 2> recipe(HouseType h) {
    switch (h) {
        case HouseType::Red: return {ResourceKind::Wood, ResourceKind::Stone};
        case HouseType::Blue: return {ResourceKind::Wood, ResourceKind::Iron};
        case HouseType::Green: return {ResourceKind::Stone, ResourceKind::Iron};
    }
    return {ResourceKind::Wood, ResourceKind::Stone};
}

inline const char* name_of(HouseType h) {
    switch (h) {
        case HouseType::Red: return "red";
        case HouseType::Blue: return "blue";
        case HouseType::Green: return "green";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Grid geometry
// ---------------------------------------------------------------------------

struct Coord {
    int x = 0;
    int y = 0;
    auto operator<=>(const Coord&) const = default;
};

enum class Direction : uint8_t { Up = 0, Down = 1, Left = 2, Right = 3 };

inline constexpr std::array<Direction, 4> kAllDirections{
    Direction::Up, Direction::Down, Direction::Left, Direction::Right};

inline Coord neighbor(Coord c, Direction d) {
    switch (d) {
        case Direction::Up: return {c.x, c.y - 1};
        case Direction::Down: return {c.x, c.y + 1};
        case Direction::Left: return {c.x - 1, c.y};
        case Direction::Right: return {c.x + 1, c.y};
    }
    return c;
}

enum class LayoutKind : uint8_t { BandLike = 0, Uniform = 1 };

inline const char* name_of(LayoutKind k) {
    return k == LayoutKind::BandLike ? "band" : "uniform";
}

}  // namespace gtb
