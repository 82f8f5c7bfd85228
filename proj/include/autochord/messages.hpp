#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "autochord/peer.hpp"

namespace autochord {

enum class RpcKind : std::uint8_t {
    find_successor,
    get_predecessor,
    get_successor_list,
    notify,
    ping,
};

struct RpcRequest {
    RpcKind kind = RpcKind::ping;
    NodeId key;      // find_successor only
    PeerRef sender;  // notify only
    // find_successor runs in two modes: a one-shot query answered from local
    // state (maintenance uses this), or a recursive lookup the receiver
    // forwards toward the key, with ttl bounding the chain. Both flags live
    // in the 32-byte header for sizing purposes.
    bool recursive = false;
    std::uint32_t ttl = 0;
};

struct RpcResponse {
    RpcKind kind = RpcKind::ping;
    // find_successor: found -> peer is the responsible node; otherwise peer
    // is the next hop to ask (one-shot mode). failed -> a downstream hop of
    // a recursive lookup was unreachable. get_predecessor: peer when known.
    bool found = false;
    bool failed = false;
    std::optional<PeerRef> peer;
    std::vector<PeerRef> peers;  // get_successor_list
};

// Abstract wire sizes: 32-byte header, 20 bytes per embedded PeerRef,
// 8 bytes per NodeId. List responses charge per element.
inline constexpr std::uint32_t kMessageHeaderBytes = 32;
inline constexpr std::uint32_t kPeerRefBytes = 20;
inline constexpr std::uint32_t kNodeIdBytes = 8;

constexpr std::uint32_t message_size(const RpcRequest& req) {
    switch (req.kind) {
        case RpcKind::find_successor: return kMessageHeaderBytes + kNodeIdBytes;
        case RpcKind::notify: return kMessageHeaderBytes + kPeerRefBytes;
        default: return kMessageHeaderBytes;
    }
}

inline std::uint32_t message_size(const RpcResponse& resp) {
    std::uint32_t size = kMessageHeaderBytes;
    if (resp.peer) size += kPeerRefBytes;
    size += kPeerRefBytes * static_cast<std::uint32_t>(resp.peers.size());
    return size;
}

}  // namespace autochord
