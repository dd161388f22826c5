#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "ncore/handle.hpp"
#include "ncore/repository.hpp"
#include "ncore/time.hpp"

namespace ncore {

struct OaiConfig {
  std::string repo_id;           // "oai:<repo_id>:<handle>" identifiers
  std::string repository_name;
  std::string admin_email;
  std::string base_url;          // echoed in <request> and Identify
  std::size_t batch_size = 100;
  int64_t token_ttl_seconds = 86400;
};

// Query parameters, duplicates preserved. OAI-PMH treats a repeated argument
// as a protocol error, so the provider needs to see them.
using OaiParams = std::multimap<std::string, std::string>;

// Serves the six OAI-PMH 2.0 verbs over repository metadata objects.
// Sets are aggregations registered here (configuration, not journaled);
// setSpec is the aggregation handle text with ':' replaced by '_'.
class OaiProvider {
 public:
  OaiProvider(Repository& repo, OaiConfig cfg, Clock clock = {});

  void register_set(const Handle& agg);
  std::vector<Handle> sets() const;

  // Handles one protocol request and returns the complete XML document.
  // Never throws for protocol-level problems; those become OAI error
  // responses.
  std::string handle_request(const OaiParams& params);

  // setSpec text for an aggregation handle.
  static std::string set_spec_of(const Handle& agg);

 private:
  struct TokenState {
    std::vector<std::string> rendered;  // one XML block per record
    std::size_t complete_size = 0;
    Timestamp created = 0;
    std::string verb;
    std::string prefix;
    std::string set;
    std::string from;
    std::string until;
    uint64_t seq = 0;  // journal seq the list was materialized at
  };

  struct Selected;

  std::string verb_identify(const OaiParams& params);
  std::string verb_list_metadata_formats(const OaiParams& params);
  std::string verb_list_sets(const OaiParams& params);
  std::string verb_get_record(const OaiParams& params);
  std::string verb_list(const OaiParams& params, bool with_payload);

  std::string envelope(const std::string& verb, const OaiParams& params,
                       const std::string& body, bool echo_args) const;
  std::string error_response(const std::string& verb, const OaiParams& params,
                             const std::string& code,
                             const std::string& message) const;
  std::string render_header(const Selected& rec) const;
  std::string render_record(const Selected& rec,
                            const std::string& prefix) const;
  std::vector<Selected> select_records(const std::string& prefix,
                                       const std::string& set_spec,
                                       const std::string& from,
                                       const std::string& until,
                                       std::string* error_code,
                                       std::string* error_msg) const;
  std::vector<std::string> supported_prefixes() const;
  std::string page_response(const std::string& verb, const OaiParams& params,
                            const TokenState& st, std::size_t page,
                            const std::string& token_id);
  void prune_tokens_locked(Timestamp now);

  Repository& repo_;
  OaiConfig cfg_;
  Clock clock_;
  std::vector<Handle> sets_;

  mutable std::mutex token_mu_;
  std::map<std::string, TokenState> tokens_;
  uint64_t next_token_ = 1;
};

// Strips an XML declaration (and surrounding whitespace) from a datastream
// payload so it can be embedded inside a larger document.
std::string xml_payload_for_embedding(const std::string& payload);

}  // namespace ncore
