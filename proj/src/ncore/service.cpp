#include "ncore/service.hpp"

#include <algorithm>
#include <chrono>

#include "ncore/cron.hpp"
#include "ncore/errors.hpp"
#include "ncore/replication.hpp"

namespace ncore {

Service::Service(ServiceConfig cfg, Clock clock)
    : cfg_(std::move(cfg)), clock_(std::move(clock)) {
  if (!clock_) clock_ = system_now;

  RepositoryOptions opt = cfg_.repository_options();
  opt.clock = clock_;
  repo_ = Repository::open(std::move(opt));

  index_ = std::make_unique<SearchIndex>(*repo_);
  index_->rebuild();
  for (const auto& [handle_text, fields] : cfg_.propagation) {
    auto h = Handle::parse(handle_text);
    if (!h) fail(Err::ConfigInvalid, "bad propagation handle: " + handle_text);
    index_->set_propagation(*h, {fields.begin(), fields.end()});
  }

  OaiConfig oai_cfg;
  oai_cfg.repo_id = cfg_.repo_id;
  oai_cfg.repository_name = cfg_.oai_repository_name;
  oai_cfg.admin_email = cfg_.oai_admin_email;
  oai_cfg.base_url = "http://" + cfg_.listen_host + ":" +
                     std::to_string(cfg_.listen_port) + "/oai";
  oai_cfg.batch_size = cfg_.oai_batch_size;
  oai_cfg.token_ttl_seconds = cfg_.oai_token_ttl_seconds;
  oai_ = std::make_unique<OaiProvider>(*repo_, std::move(oai_cfg), clock_);
  for (const std::string& text : cfg_.oai_sets) {
    auto h = Handle::parse(text);
    if (!h) fail(Err::ConfigInvalid, "bad oai_sets handle: " + text);
    oai_->register_set(*h);
  }

  AuthConfig auth_cfg;
  auth_cfg.skew_seconds = static_cast<int>(cfg_.auth_skew_seconds);
  auth_cfg.nonce_window_seconds = static_cast<int>(cfg_.nonce_window_seconds);
  auth_ = std::make_unique<Authenticator>(*repo_, auth_cfg, clock_);
}

Service::~Service() { stop_background(); }

const ViewSpec* Service::public_view() const {
  if (cfg_.public_view.empty()) return nullptr;
  std::lock_guard lk(view_mu_);
  // Views are registered entities; the spec may appear after startup, so a
  // miss is re-checked on every call until it resolves.
  try {
    public_view_cache_ =
        std::make_unique<ViewSpec>(repo_->get_view(cfg_.public_view));
  } catch (const NcoreError&) {
    public_view_cache_.reset();
  }
  return public_view_cache_.get();
}

std::optional<Handle> Service::scheduler_actor() const {
  // for_each_object callbacks must not re-enter the repository, so admin
  // status is checked after collecting the candidates.
  std::vector<Handle> agents;
  repo_->for_each_object([&](const DigitalObject& obj) {
    const auto* a = std::get_if<AgentObject>(&obj);
    if (a && !a->deleted && a->active) agents.push_back(a->handle);
  });
  for (Handle h : agents)
    if (repo_->is_admin(h)) return h;
  return std::nullopt;
}

void Service::start_background() {
  std::lock_guard lk(bg_mu_);
  if (!threads_.empty()) return;
  stopping_ = false;
  threads_.emplace_back([this] { index_loop(); });
  if (cfg_.role == "follower") {
    threads_.emplace_back([this] { follower_loop(); });
  } else {
    threads_.emplace_back([this] { scheduler_loop(); });
  }
}

void Service::stop_background() {
  {
    std::lock_guard lk(bg_mu_);
    stopping_ = true;
  }
  bg_cv_.notify_all();
  for (auto& t : threads_)
    if (t.joinable()) t.join();
  threads_.clear();
}

void Service::index_loop() {
  std::unique_lock lk(bg_mu_);
  while (!stopping_) {
    bg_cv_.wait_for(lk, std::chrono::milliseconds(200),
                    [this] { return stopping_; });
    if (stopping_) break;
    lk.unlock();
    try {
      if (repo_->last_seq() > index_->cursor()) index_->update_from_journal();
    } catch (const NcoreError&) {
      // Index refresh must not kill the thread; the next tick retries.
    }
    lk.lock();
  }
}

void Service::scheduler_loop() {
  std::unique_lock lk(bg_mu_);
  while (!stopping_) {
    bg_cv_.wait_for(lk, std::chrono::seconds(
                            std::max(1, cfg_.harvest_poll_seconds)),
                    [this] { return stopping_; });
    if (stopping_) break;
    lk.unlock();
    try {
      run_due_harvests(clock_());
    } catch (const NcoreError&) {
    }
    lk.lock();
  }
}

void Service::follower_loop() {
  int backoff_ms = 500;
  std::unique_lock lk(bg_mu_);
  while (!stopping_) {
    lk.unlock();
    bool ok = true;
    try {
      follower_pull_once(5000);
      backoff_ms = 500;
    } catch (const NcoreError&) {
      ok = false;
    }
    lk.lock();
    if (!ok) {
      bg_cv_.wait_for(lk, std::chrono::milliseconds(backoff_ms),
                      [this] { return stopping_; });
      backoff_ms = std::min(backoff_ms * 2, 15000);
    }
  }
}

std::size_t Service::follower_pull_once(int long_poll_ms) {
  if (cfg_.role != "follower")
    fail(Err::NotAFollower, "this node is the leader");
  ReplicationClient client(*repo_, cfg_.leader_addr);
  std::size_t n = client.pull_once(long_poll_ms);
  leader_seq_.store(client.leader_seq());
  return n;
}

std::vector<std::string> Service::run_due_harvests(Timestamp now,
                                                   const FetchFn& fetch) {
  std::vector<std::string> lines;
  if (repo_->is_follower()) return lines;
  auto actor = scheduler_actor();
  if (!actor) return lines;
  FetchFn f = fetch ? fetch : http_fetch;

  for (const HarvestSource& src : repo_->list_sources()) {
    if (src.schedule.empty()) continue;
    auto cron = CronExpr::parse(src.schedule);
    if (!cron) {
      lines.push_back("source " + src.id + ": unparseable schedule");
      continue;
    }
    Timestamp baseline;
    {
      std::lock_guard lk(harvest_mu_);
      auto it = last_attempt_.find(src.id);
      if (it != last_attempt_.end()) {
        baseline = it->second;
      } else if (!src.last_successful_until.empty()) {
        // First check since startup: a window missed while down runs now.
        baseline = parse_oai_datestamp(src.last_successful_until).value_or(0);
      } else {
        baseline = 0;  // never harvested: due immediately
      }
    }
    auto next = cron->next_after(baseline);
    if (baseline != 0 && (!next || *next > now)) continue;
    {
      std::lock_guard lk(harvest_mu_);
      last_attempt_[src.id] = now;
    }
    try {
      HarvestReport r =
          harvest(*repo_, *actor, src.id, src.last_successful_until.empty(), f);
      lines.push_back("source " + src.id + ": created " +
                      std::to_string(r.created) + ", updated " +
                      std::to_string(r.updated) + ", deleted " +
                      std::to_string(r.deleted) + ", errors " +
                      std::to_string(r.errors));
    } catch (const NcoreError& e) {
      lines.push_back("source " + src.id + " failed: " + e.what());
    }
  }
  return lines;
}

nlohmann::json Service::status() const {
  RepoStats s = repo_->stats();
  uint64_t leader_tip = leader_seq_.load();
  uint64_t lag = 0;
  if (repo_->is_follower() && leader_tip > s.last_seq)
    lag = leader_tip - s.last_seq;
  return {
      {"role", repo_->is_follower() ? "follower" : "leader"},
      {"repo_id", cfg_.repo_id},
      {"last_seq", s.last_seq},
      {"lag", lag},
      {"index_cursor", index_->cursor()},
      {"objects",
       {{"resources", s.resources},
        {"metadata", s.metadata},
        {"aggregations", s.aggregations},
        {"providers", s.providers},
        {"agents", s.agents},
        {"tombstoned", s.tombstoned}}},
      {"triples", s.triples},
      {"grants", s.grants},
      {"views", s.views},
      {"sources", s.sources},
  };
}

}  // namespace ncore
