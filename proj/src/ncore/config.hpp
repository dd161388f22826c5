#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncore/journal.hpp"
#include "ncore/repository.hpp"

namespace ncore {

// Service configuration, loaded from one JSON file. Unknown keys are
// rejected so typos fail loudly at startup instead of silently defaulting.
struct ServiceConfig {
  std::string data_dir;
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;
  std::string role = "leader";  // "leader" or "follower"
  std::string leader_addr;      // follower pull target, "http://host:port"
  std::string repo_id = "ncore.local";
  std::string public_view;  // view name; empty means no public reads

  std::string oai_repository_name = "NCore repository";
  std::string oai_admin_email = "admin@localhost";
  std::size_t oai_batch_size = 100;
  int64_t oai_token_ttl_seconds = 86400;
  std::vector<std::string> oai_sets;  // aggregation handle text

  int64_t auth_skew_seconds = 300;
  int64_t nonce_window_seconds = 600;

  JournalStore::Options journal;
  uint64_t checkpoint_interval = 1000;

  // Aggregation handle text -> metadata fields its descendants inherit.
  std::map<std::string, std::vector<std::string>> propagation;

  int harvest_poll_seconds = 60;

  static ServiceConfig from_json(const nlohmann::json& doc);
  static ServiceConfig load_file(const std::string& path);

  RepositoryOptions repository_options() const;
};

}  // namespace ncore
