#pragma once

#include <cstdint>
#include <string>

#include "ncore/repository.hpp"

namespace ncore {

// Follower side of log shipping: long-polls the leader for entries after the
// local tip and applies them. One instance per follower process.
class ReplicationClient {
 public:
  // leader_addr: "http://host:port"
  ReplicationClient(Repository& repo, std::string leader_addr);

  // One pull. Returns entries applied (possibly 0 when the poll timed out).
  // Throws NetworkFailure on transport trouble and Divergence when a
  // checkpoint hash disagrees with local state.
  std::size_t pull_once(int long_poll_ms = 5000);

  // Leader tip observed on the last successful pull.
  uint64_t leader_seq() const { return leader_seq_; }

 private:
  Repository& repo_;
  std::string leader_addr_;
  uint64_t leader_seq_ = 0;
};

// Fetches a URL with a plain GET and returns the body; non-2xx or transport
// failure throws NetworkFailure. The default FetchFn for harvests.
std::string http_fetch(const std::string& url);

}  // namespace ncore
