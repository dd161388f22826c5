#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ncore/repository.hpp"
#include "ncore/time.hpp"

namespace ncore {

struct HarvestReport {
  std::size_t created = 0;   // new metadata objects
  std::size_t updated = 0;   // payload replaced or target moved
  std::size_t deleted = 0;   // metadata tombstoned from status=deleted
  std::size_t unchanged = 0; // byte-identical records skipped
  std::size_t errors = 0;    // bad records skipped
  bool complete = false;     // all pages consumed
  std::string until;         // watermark recorded, empty when unchanged
  std::vector<std::string> notes;
};

// Performs one HTTP GET of `url` and returns the response body. Transport
// problems are reported by throwing NcoreError(Err::NetworkFailure).
using FetchFn = std::function<std::string(const std::string& url)>;

// Runs one harvest of a registered source to exhaustion of resumption
// tokens. `actor` must be an admin: harvest progress checkpoints require it.
// Incremental runs resume from the stored watermark; `full` ignores it.
// Aborts (network failure, protocol error from the remote) leave the
// watermark untouched; individual bad records are counted and skipped.
HarvestReport harvest(Repository& repo, Handle actor,
                      const std::string& source_id, bool full,
                      const FetchFn& fetch);

// Builds the synthetic identity used when a record carries no usable URL.
std::string synthetic_urn(const std::string& source_id,
                          const std::string& oai_id);

}  // namespace ncore
