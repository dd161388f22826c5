#pragma once

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ncore/auth.hpp"
#include "ncore/config.hpp"
#include "ncore/harvester.hpp"
#include "ncore/oai_provider.hpp"
#include "ncore/repository.hpp"
#include "ncore/search.hpp"

namespace ncore {

// Wires one repository together with its search index, OAI provider,
// authenticator, and the background machinery (index refresh, scheduled
// harvests, follower tailing). The HTTP layer sits on top of this.
class Service {
 public:
  explicit Service(ServiceConfig cfg, Clock clock = {});
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  Repository& repo() { return *repo_; }
  const Repository& repo() const { return *repo_; }
  SearchIndex& index() { return *index_; }
  OaiProvider& oai() { return *oai_; }
  Authenticator& auth() { return *auth_; }
  const ServiceConfig& config() const { return cfg_; }

  // The view public (unauthenticated) reads are limited to; null when the
  // service has no public view configured.
  const ViewSpec* public_view() const;

  // Admin identity used for scheduled harvests: the oldest active admin.
  std::optional<Handle> scheduler_actor() const;

  void start_background();
  void stop_background();

  // One follower pull against the configured leader; returns entries applied.
  std::size_t follower_pull_once(int long_poll_ms = 5000);
  uint64_t observed_leader_seq() const { return leader_seq_.load(); }

  // Runs every source whose cron schedule has come due at `now`; returns one
  // human-readable line per attempted source. An empty fetch uses HTTP.
  std::vector<std::string> run_due_harvests(Timestamp now,
                                            const FetchFn& fetch = {});

  nlohmann::json status() const;

 private:
  void index_loop();
  void scheduler_loop();
  void follower_loop();

  ServiceConfig cfg_;
  Clock clock_;
  std::unique_ptr<Repository> repo_;
  std::unique_ptr<SearchIndex> index_;
  std::unique_ptr<OaiProvider> oai_;
  std::unique_ptr<Authenticator> auth_;
  mutable std::mutex view_mu_;
  mutable std::unique_ptr<ViewSpec> public_view_cache_;

  std::atomic<uint64_t> leader_seq_{0};

  std::mutex bg_mu_;
  std::condition_variable bg_cv_;
  bool stopping_ = false;
  std::vector<std::thread> threads_;

  std::mutex harvest_mu_;
  std::map<std::string, Timestamp> last_attempt_;
};

}  // namespace ncore
