#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ncore/api_service.hpp"
#include "ncore/config.hpp"
#include "ncore/crypto.hpp"
#include "ncore/errors.hpp"
#include "ncore/harvester.hpp"
#include "ncore/replication.hpp"
#include "ncore/repository.hpp"
#include "ncore/search.hpp"
#include "ncore/service.hpp"
#include "ncore/util.hpp"

namespace fs = std::filesystem;
using namespace ncore;

namespace {

HttpFront* g_front = nullptr;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Err::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content,
                bool secret = false) {
  int flags = O_CREAT | O_WRONLY | O_TRUNC;
  int fd = ::open(path.c_str(), flags, secret ? 0600 : 0644);
  if (fd < 0) fail(Err::IoError, "cannot create " + path);
  size_t off = 0;
  while (off < content.size()) {
    ssize_t n = ::write(fd, content.data() + off, content.size() - off);
    if (n < 0) {
      ::close(fd);
      fail(Err::IoError, "write failed: " + path);
    }
    off += static_cast<size_t>(n);
  }
  ::close(fd);
}

// Commands that mutate act as the oldest active admin; the CLI runs against
// the local data directory with operator trust, not signed requests.
Handle first_admin(const Repository& repo) {
  std::vector<Handle> agents;
  repo.for_each_object([&](const DigitalObject& obj) {
    const auto* a = std::get_if<AgentObject>(&obj);
    if (a && !a->deleted && a->active) agents.push_back(a->handle);
  });
  for (Handle h : agents)
    if (repo.is_admin(h)) return h;
  fail(Err::UnknownActor, "repository has no active admin agent");
}

struct Target {
  std::string data_dir;
  std::string config_path;
  ServiceConfig config;  // populated when config_path given
  bool has_config = false;
};

// Commands accept either --data-dir or --config; config wins for tunables.
void add_target_options(CLI::App* cmd, Target& t) {
  cmd->add_option("--data-dir", t.data_dir, "repository data directory");
  cmd->add_option("--config", t.config_path, "service config file");
}

void resolve_target(Target& t) {
  if (!t.config_path.empty()) {
    t.config = ServiceConfig::load_file(t.config_path);
    t.has_config = true;
    if (t.data_dir.empty()) t.data_dir = t.config.data_dir;
  }
  if (t.data_dir.empty())
    fail(Err::ConfigInvalid, "give --data-dir or --config");
}

std::unique_ptr<Repository> open_repo(Target& t, bool follower = false) {
  resolve_target(t);
  RepositoryOptions opt =
      t.has_config ? t.config.repository_options() : RepositoryOptions{};
  opt.data_dir = t.data_dir;
  opt.follower = follower;
  return Repository::open(std::move(opt));
}

std::string slug(const std::string& text) {
  std::string out;
  bool gap = false;
  for (char c : to_lower(text)) {
    if (is_ascii_alnum(c)) {
      if (gap && !out.empty()) out.push_back('-');
      gap = false;
      out.push_back(c);
    } else {
      gap = true;
    }
  }
  return out.empty() ? "source" : out;
}

int cmd_init(const std::string& data_dir, const std::string& repo_id) {
  if (fs::exists(data_dir) && !fs::is_empty(data_dir))
    fail(Err::NonEmptyDataDir, "refusing to init into non-empty " + data_dir);
  fs::create_directories(data_dir);

  RepositoryOptions opt;
  opt.data_dir = data_dir;
  auto repo = Repository::open(std::move(opt));

  Keypair kp = generate_keypair();
  Handle admin = repo->bootstrap_admin("admin", kp.public_key);

  nlohmann::json key_doc = {{"handle", admin.text()},
                            {"scheme", kSignatureScheme},
                            {"public_key", base64_encode(kp.public_key)},
                            {"secret_key", base64_encode(kp.secret_key)}};
  std::string key_path = data_dir + "/admin.key";
  write_file(key_path, key_doc.dump(2) + "\n", /*secret=*/true);

  nlohmann::json cfg = {{"data_dir", data_dir},
                        {"repo_id", repo_id},
                        {"listen_addr", "127.0.0.1:8080"},
                        {"role", "leader"},
                        {"public_view", ""}};
  std::string cfg_path = data_dir + "/config.json";
  write_file(cfg_path, cfg.dump(2) + "\n");

  std::cout << "initialized repository in " << data_dir << "\n"
            << "admin agent:  " << admin.text() << "\n"
            << "admin keypair: " << key_path << " (mode 0600)\n"
            << "config:        " << cfg_path << "\n";
  return 0;
}

int cmd_serve(const std::string& config_path) {
  ServiceConfig cfg = ServiceConfig::load_file(config_path);
  Service svc(std::move(cfg));
  HttpFront front(svc);
  g_front = &front;
  std::signal(SIGINT, [](int) {
    if (g_front) g_front->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_front) g_front->stop();
  });
  svc.start_background();
  const auto& c = svc.config();
  std::cout << "ncore " << c.role << " listening on " << c.listen_host << ":"
            << c.listen_port << " (data: " << c.data_dir << ")\n";
  bool ok = front.listen(c.listen_host, c.listen_port);
  svc.stop_background();
  g_front = nullptr;
  if (!ok) fail(Err::IoError, "could not bind " + c.listen_host + ":" +
                                  std::to_string(c.listen_port));
  return 0;
}

std::string read_pubkey_file(const std::string& path) {
  std::string raw = read_file(path);
  if (raw.size() == kPublicKeyBytes) return raw;
  if (auto decoded = base64_decode(trim(raw));
      decoded && decoded->size() == kPublicKeyBytes)
    return *decoded;
  // Key files written by `init` hold JSON with a base64 public_key field.
  nlohmann::json doc = nlohmann::json::parse(raw, nullptr, false);
  if (doc.is_object() && doc.contains("public_key")) {
    if (auto decoded = base64_decode(doc["public_key"].get<std::string>());
        decoded && decoded->size() == kPublicKeyBytes)
      return *decoded;
  }
  fail(Err::MalformedKey,
       path + " is neither 32 raw bytes, base64, nor an init key file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ncore: journaled digital library repository"};
  app.require_subcommand(1);

  // init
  auto* init = app.add_subcommand("init", "create an empty repository");
  std::string init_dir, init_repo_id = "ncore.local";
  init->add_option("--data-dir", init_dir, "directory to create")->required();
  init->add_option("--repo-id", init_repo_id, "OAI identifier prefix");

  // serve
  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  std::string serve_config;
  serve->add_option("--config", serve_config, "config file")->required();

  // agent
  auto* agent = app.add_subcommand("agent", "agent registry");
  agent->require_subcommand(1);
  auto* agent_add = agent->add_subcommand("add", "register an agent");
  Target agent_add_t;
  std::string agent_name, agent_pubkey;
  bool agent_admin = false;
  add_target_options(agent_add, agent_add_t);
  agent_add->add_option("--name", agent_name, "display name")->required();
  agent_add->add_option("--pubkey", agent_pubkey, "verification key file")
      ->required();
  agent_add->add_flag("--admin", agent_admin, "grant the admin role");
  auto* agent_list = agent->add_subcommand("list", "list agents");
  Target agent_list_t;
  add_target_options(agent_list, agent_list_t);

  // harvest
  auto* harvest_cmd = app.add_subcommand("harvest", "OAI-PMH harvesting");
  harvest_cmd->require_subcommand(1);
  auto* harvest_add = harvest_cmd->add_subcommand("add", "register a source");
  Target harvest_add_t;
  std::string h_base, h_set, h_prefix, h_org, h_schedule, h_id;
  add_target_options(harvest_add, harvest_add_t);
  harvest_add->add_option("--base-url", h_base, "OAI base URL")->required();
  harvest_add->add_option("--set", h_set, "OAI setSpec to harvest");
  harvest_add->add_option("--prefix", h_prefix, "metadataPrefix")->required();
  harvest_add->add_option("--org", h_org, "providing organization")
      ->required();
  harvest_add->add_option("--schedule", h_schedule, "cron-like schedule");
  harvest_add->add_option("--id", h_id, "source id (derived when omitted)");
  auto* harvest_run = harvest_cmd->add_subcommand("run", "harvest one source");
  Target harvest_run_t;
  std::string hr_id;
  bool hr_full = false;
  add_target_options(harvest_run, harvest_run_t);
  harvest_run->add_option("--id", hr_id, "source id")->required();
  harvest_run->add_flag("--full", hr_full, "ignore the stored watermark");
  auto* harvest_list = harvest_cmd->add_subcommand("list", "list sources");
  Target harvest_list_t;
  add_target_options(harvest_list, harvest_list_t);

  // view
  auto* view = app.add_subcommand("view", "named repository views");
  view->require_subcommand(1);
  auto* view_define = view->add_subcommand("define", "register a view");
  Target view_define_t;
  std::string v_name, v_in, v_not_in, v_md_exclude, v_md_include;
  add_target_options(view_define, view_define_t);
  view_define->add_option("--name", v_name, "view name")->required();
  view_define->add_option("--in", v_in, "containing aggregation")->required();
  view_define->add_option("--not-in", v_not_in, "excluded aggregation");
  view_define->add_option("--md-exclude", v_md_exclude,
                          "providers to exclude, comma-separated");
  view_define->add_option("--md-include", v_md_include,
                          "provider allow-list, comma-separated");
  auto* view_list = view->add_subcommand("list", "list views");
  Target view_list_t;
  add_target_options(view_list, view_list_t);

  // reindex
  auto* reindex = app.add_subcommand("reindex", "rebuild the search index");
  Target reindex_t;
  add_target_options(reindex, reindex_t);

  // dump / load
  auto* dump = app.add_subcommand("dump", "export canonical state");
  Target dump_t;
  std::string dump_out;
  add_target_options(dump, dump_t);
  dump->add_option("--out", dump_out, "output file, - for stdout")
      ->required();
  auto* load = app.add_subcommand("load", "import a dump into a fresh repo");
  Target load_t;
  std::string load_in;
  add_target_options(load, load_t);
  load->add_option("--in", load_in, "dump file")->required();

  // promote
  auto* promote = app.add_subcommand("promote", "make this follower leader");
  std::string promote_config;
  promote->add_option("--config", promote_config, "config file")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "repository statistics");
  Target stats_t;
  bool stats_json = false;
  add_target_options(stats, stats_t);
  stats->add_flag("--json", stats_json, "machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*init) return cmd_init(init_dir, init_repo_id);
    if (*serve) return cmd_serve(serve_config);

    if (*agent_add) {
      auto repo = open_repo(agent_add_t);
      Handle actor = first_admin(*repo);
      std::string key = read_pubkey_file(agent_pubkey);
      Handle h = repo->register_agent(actor, agent_name, key, agent_admin);
      std::cout << h.text() << "\n";
      return 0;
    }
    if (*agent_list) {
      auto repo = open_repo(agent_list_t);
      std::vector<AgentObject> agents;
      repo->for_each_object([&](const DigitalObject& obj) {
        if (const auto* a = std::get_if<AgentObject>(&obj))
          agents.push_back(*a);
      });
      for (const auto& a : agents) {
        std::cout << a.handle.text() << "\t" << a.display_name << "\t"
                  << (a.deleted ? "tombstoned"
                                : (a.active ? "active" : "inactive"))
                  << (repo->is_admin(a.handle) ? "\tadmin" : "") << "\n";
      }
      return 0;
    }

    if (*harvest_add) {
      auto repo = open_repo(harvest_add_t);
      Handle actor = first_admin(*repo);
      std::string id = h_id;
      if (id.empty()) {
        id = slug(h_org);
        if (!h_set.empty()) id += "-" + slug(h_set);
        std::string base = id;
        for (int n = 2; repo->get_source(id); ++n)
          id = base + "-" + std::to_string(n);
      }
      std::string label = h_org + " @ " + h_base;
      if (!h_set.empty()) label += " set " + h_set;
      HarvestSource src;
      src.id = id;
      src.base_url = h_base;
      src.set_spec = h_set;
      src.metadata_prefix = h_prefix;
      src.organization = h_org;
      src.schedule = h_schedule;
      src.provider = repo->create_aggregation(actor, /*metadata_provider=*/true,
                                              label, actor);
      src.resource_agg =
          repo->create_aggregation(actor, false, h_org + " resources", actor);
      src.metadata_agg =
          repo->create_aggregation(actor, false, h_org + " metadata", actor);
      repo->upsert_source(actor, src);
      std::cout << "registered source " << id << "\n"
                << "provider:     " << src.provider.text() << "\n"
                << "resource agg: " << src.resource_agg.text() << "\n"
                << "metadata agg: " << src.metadata_agg.text() << "\n";
      return 0;
    }
    if (*harvest_run) {
      auto repo = open_repo(harvest_run_t);
      Handle actor = first_admin(*repo);
      HarvestReport r = harvest(*repo, actor, hr_id, hr_full, http_fetch);
      std::cout << "created " << r.created << ", updated " << r.updated
                << ", deleted " << r.deleted << ", unchanged " << r.unchanged
                << ", errors " << r.errors << "\n";
      if (!r.until.empty()) std::cout << "watermark " << r.until << "\n";
      for (const auto& n : r.notes) std::cout << "note: " << n << "\n";
      return 0;
    }
    if (*harvest_list) {
      auto repo = open_repo(harvest_list_t);
      for (const HarvestSource& s : repo->list_sources()) {
        std::cout << s.id << "\t" << s.base_url << "\t" << s.metadata_prefix
                  << "\t"
                  << (s.last_successful_until.empty()
                          ? "never"
                          : s.last_successful_until)
                  << "\t" << s.records.size() << " records\n";
      }
      return 0;
    }

    if (*view_define) {
      auto repo = open_repo(view_define_t);
      Handle actor = first_admin(*repo);
      ViewSpec spec;
      spec.name = v_name;
      auto in = Handle::parse(v_in);
      if (!in) fail(Err::NotFound, "unparseable handle: " + v_in);
      spec.in_agg = *in;
      if (!v_not_in.empty()) {
        auto h = Handle::parse(v_not_in);
        if (!h) fail(Err::NotFound, "unparseable handle: " + v_not_in);
        spec.not_in_agg = *h;
      }
      auto parse_list = [](const std::string& text) {
        std::set<Handle> out;
        for (const std::string& part : split(text, ',')) {
          if (part.empty()) continue;
          auto h = Handle::parse(part);
          if (!h) fail(Err::NotFound, "unparseable handle: " + part);
          out.insert(*h);
        }
        return out;
      };
      if (!v_md_exclude.empty()) spec.md_exclude = parse_list(v_md_exclude);
      if (!v_md_include.empty()) spec.md_include = parse_list(v_md_include);
      repo->register_view(actor, spec);
      std::cout << "registered view " << v_name << "\n";
      return 0;
    }
    if (*view_list) {
      auto repo = open_repo(view_list_t);
      for (const ViewSpec& v : repo->list_views())
        std::cout << view_to_json(v).dump() << "\n";
      return 0;
    }

    if (*reindex) {
      auto repo = open_repo(reindex_t);
      SearchIndex index(*repo);
      index.rebuild();
      std::cout << "indexed " << index.doc_count() << " documents through seq "
                << index.cursor() << "\n";
      return 0;
    }

    if (*dump) {
      auto repo = open_repo(dump_t);
      if (dump_out == "-") {
        repo->serialize_state(
            [](std::string_view chunk) { std::cout << chunk; });
      } else {
        std::ofstream out(dump_out, std::ios::binary);
        if (!out) fail(Err::IoError, "cannot create " + dump_out);
        repo->serialize_state(
            [&](std::string_view chunk) { out.write(chunk.data(),
                                                    static_cast<std::streamsize>(chunk.size())); });
        if (!out) fail(Err::IoError, "write failed: " + dump_out);
      }
      return 0;
    }
    if (*load) {
      auto repo = open_repo(load_t);
      repo->import_state(read_file(load_in));
      std::cout << "loaded state, hash " << repo->state_hash() << "\n";
      return 0;
    }

    if (*promote) {
      ServiceConfig cfg = ServiceConfig::load_file(promote_config);
      if (cfg.role != "follower")
        fail(Err::NotAFollower, "config role is " + cfg.role);
      RepositoryOptions opt = cfg.repository_options();
      auto repo = Repository::open(std::move(opt));
      // Compare with the leader's tip when it is still reachable; a dead
      // leader is exactly the promote scenario, so unreachable is a warning.
      try {
        std::string body = http_fetch(cfg.leader_addr + "/status");
        auto doc = nlohmann::json::parse(body);
        uint64_t leader_seq = doc.at("last_seq").get<uint64_t>();
        if (leader_seq > repo->last_seq())
          fail(Err::LaggingFollower,
               "follower at seq " + std::to_string(repo->last_seq()) +
                   ", leader at " + std::to_string(leader_seq) + " (lag " +
                   std::to_string(leader_seq - repo->last_seq()) + ")");
      } catch (const NcoreError& e) {
        if (e.code() == Err::LaggingFollower) throw;
        std::cerr << "warning: leader unreachable (" << e.what()
                  << "); promoting at local seq " << repo->last_seq() << "\n";
      }
      repo->promote_to_leader();
      nlohmann::json raw = nlohmann::json::parse(read_file(promote_config));
      raw["role"] = "leader";
      write_file(promote_config, raw.dump(2) + "\n");
      std::cout << "promoted to leader at seq " << repo->last_seq() << "\n";
      return 0;
    }

    if (*stats) {
      auto repo = open_repo(stats_t);
      RepoStats s = repo->stats();
      SearchIndex index(*repo);
      index.rebuild();
      if (stats_json) {
        nlohmann::json doc = {{"resources", s.resources},
                              {"metadata", s.metadata},
                              {"aggregations", s.aggregations},
                              {"providers", s.providers},
                              {"agents", s.agents},
                              {"tombstoned", s.tombstoned},
                              {"triples", s.triples},
                              {"grants", s.grants},
                              {"views", s.views},
                              {"sources", s.sources},
                              {"last_seq", s.last_seq},
                              {"index_cursor", index.cursor()},
                              {"state_hash", repo->state_hash()}};
        std::cout << doc.dump(2) << "\n";
      } else {
        std::cout << "resources     " << s.resources << "\n"
                  << "metadata      " << s.metadata << "\n"
                  << "aggregations  " << s.aggregations << "\n"
                  << "providers     " << s.providers << "\n"
                  << "agents        " << s.agents << "\n"
                  << "tombstoned    " << s.tombstoned << "\n"
                  << "triples       " << s.triples << "\n"
                  << "grants        " << s.grants << "\n"
                  << "views         " << s.views << "\n"
                  << "sources       " << s.sources << "\n"
                  << "last seq      " << s.last_seq << "\n"
                  << "index cursor  " << index.cursor() << "\n";
      }
      return 0;
    }
  } catch (const NcoreError& e) {
    std::cerr << "error: " << machine_code(e.code()) << ": " << e.what()
              << "\n";
    return e.code() == Err::IoError ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
