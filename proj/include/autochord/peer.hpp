#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <vector>

#include "autochord/ring.hpp"

namespace autochord {

/// Transport address. In the simulated network this is the node's index.
using Address = std::uint32_t;

struct PeerRef {
    NodeId id;
    Address address = 0;

    friend constexpr auto operator<=>(const PeerRef&, const PeerRef&) = default;
};

/// A node's known links: successor (correct routing + repair), predecessor
/// (repair), successor list (repair) and fingers (efficient routing).
struct PeerSet {
    PeerRef successor;
    std::optional<PeerRef> predecessor;
    std::vector<PeerRef> successor_list;        // successor_list[0] == successor
    std::vector<std::optional<PeerRef>> fingers;  // index i-1 holds finger i

    friend bool operator==(const PeerSet&, const PeerSet&) = default;
};

}  // namespace autochord
