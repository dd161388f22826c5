#include "ncore/replication.hpp"

#include <charconv>

#include <httplib.h>

#include "ncore/errors.hpp"

namespace ncore {

ReplicationClient::ReplicationClient(Repository& repo, std::string leader_addr)
    : repo_(repo), leader_addr_(std::move(leader_addr)) {}

std::size_t ReplicationClient::pull_once(int long_poll_ms) {
  httplib::Client cli(leader_addr_);
  cli.set_read_timeout(long_poll_ms / 1000 + 30, 0);

  uint64_t from = repo_.last_seq() + 1;
  std::string path = "/replication/entries?from=" + std::to_string(from) +
                     "&wait_ms=" + std::to_string(long_poll_ms);
  auto res = cli.Get(path);
  if (!res)
    fail(Err::NetworkFailure,
         "leader unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200)
    fail(Err::NetworkFailure,
         "leader returned status " + std::to_string(res->status));

  std::size_t applied = 0;
  if (!res->body.empty()) applied = repo_.apply_replicated(res->body);

  if (res->has_header("X-NCore-Leader-Seq")) {
    uint64_t tip = 0;
    std::string v = res->get_header_value("X-NCore-Leader-Seq");
    std::from_chars(v.data(), v.data() + v.size(), tip);
    leader_seq_ = tip;
  }

  // Divergence check: the leader names its newest retained checkpoint at or
  // below the batch end; if we hold the same seq, the hashes must agree.
  if (res->has_header("X-NCore-Checkpoint-Seq")) {
    uint64_t seq = 0;
    std::string v = res->get_header_value("X-NCore-Checkpoint-Seq");
    std::from_chars(v.data(), v.data() + v.size(), seq);
    std::string leader_hash = res->get_header_value("X-NCore-Checkpoint-Hash");
    if (!leader_hash.empty() && seq <= repo_.last_seq()) {
      std::optional<std::string> ours = repo_.checkpoint_hash(seq);
      if (!ours && seq == repo_.last_seq()) ours = repo_.state_hash();
      if (ours && *ours != leader_hash)
        fail(Err::Divergence, "state hash mismatch at checkpoint seq " +
                                  std::to_string(seq));
    }
  }
  return applied;
}

std::string http_fetch(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    fail(Err::NetworkFailure, "fetch needs an absolute URL: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  std::string base =
      path_start == std::string::npos ? url : url.substr(0, path_start);
  std::string path =
      path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client cli(base);
  cli.set_read_timeout(60, 0);
  auto res = cli.Get(path);
  if (!res)
    fail(Err::NetworkFailure,
         "fetch failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    fail(Err::NetworkFailure,
         "fetch of " + url + " returned status " + std::to_string(res->status));
  return res->body;
}

}  // namespace ncore
