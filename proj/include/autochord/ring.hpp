#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>

namespace autochord {

/// Position on the identifier ring. All arithmetic is modulo 2^m where m is
/// the ring bit-width carried by Ring; values are kept masked to m bits.
struct NodeId {
    std::uint64_t value = 0;

    friend constexpr auto operator<=>(const NodeId&, const NodeId&) = default;
};

/// x in (a, b] walking clockwise. When a == b the interval is the full ring,
/// so the test is true for every x.
constexpr bool in_half_open(NodeId x, NodeId a, NodeId b) {
    if (a.value == b.value) return true;
    if (a.value < b.value) return a.value < x.value && x.value <= b.value;
    return x.value > a.value || x.value <= b.value;  // wraps past zero
}

/// x in (a, b), both bounds exclusive. Full ring minus {a} when a == b.
constexpr bool in_open(NodeId x, NodeId a, NodeId b) {
    return x.value != b.value && in_half_open(x, a, b);
}

/// Identifier-space arithmetic for a 2^m ring. m defaults to 64; smaller
/// widths are used by tests that need hand-laid rings.
class Ring {
public:
    explicit constexpr Ring(unsigned bits = 64) : bits_(bits) {
        if (bits_ < 1 || bits_ > 64)
            throw std::invalid_argument("ring bit-width must be in [1, 64]");
        mask_ = bits_ == 64 ? ~std::uint64_t{0}
                            : (std::uint64_t{1} << bits_) - 1;
    }

    constexpr unsigned bits() const { return bits_; }
    constexpr std::uint64_t mask() const { return mask_; }

    constexpr NodeId add(NodeId n, std::uint64_t delta) const {
        return NodeId{(n.value + delta) & mask_};
    }

    /// Clockwise distance from a to b.
    constexpr std::uint64_t distance(NodeId a, NodeId b) const {
        return (b.value - a.value) & mask_;
    }

    /// Placement of finger i: (n + 2^(i-1)) mod 2^m, i in 1..m.
    constexpr NodeId finger_target(NodeId n, unsigned i) const {
        if (i < 1 || i > bits_)
            throw std::invalid_argument("finger index out of range");
        return add(n, std::uint64_t{1} << (i - 1));
    }

    /// Deterministic key -> ring position map: 64-bit FNV-1a truncated to the
    /// low m bits. Platform-independent; frozen by a golden test.
    NodeId id_from_key(std::span<const std::uint8_t> key_bytes) const {
        if (key_bytes.empty())
            throw std::invalid_argument("id_from_key: empty key");
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (std::uint8_t b : key_bytes) {
            h ^= b;
            h *= 0x100000001b3ULL;
        }
        return NodeId{h & mask_};
    }

    NodeId id_from_key(std::string_view key) const {
        return id_from_key(std::span<const std::uint8_t>(
            reinterpret_cast<const std::uint8_t*>(key.data()), key.size()));
    }

private:
    unsigned bits_;
    std::uint64_t mask_;
};

}  // namespace autochord
