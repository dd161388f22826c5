#include "ncore/config.hpp"

#include <fstream>
#include <sstream>

#include "ncore/errors.hpp"
#include "ncore/util.hpp"

namespace ncore {

namespace {

[[noreturn]] void bad(const std::string& message) {
  fail(Err::ConfigInvalid, message);
}

void reject_unknown(const nlohmann::json& obj,
                    const std::vector<std::string>& known,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      bad("unknown config key " + where + it.key());
  }
}

bool valid_repo_id(const std::string& id) {
  if (id.empty()) return false;
  for (char c : id) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '.' ||
              c == '-';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

ServiceConfig ServiceConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) bad("config root must be a JSON object");
  reject_unknown(doc,
                 {"data_dir", "listen_addr", "role", "leader_addr", "repo_id",
                  "public_view", "oai", "auth", "journal",
                  "checkpoint_interval", "search", "oai_sets",
                  "harvest_poll_seconds"},
                 "");

  ServiceConfig c;
  try {
    c.data_dir = doc.at("data_dir").get<std::string>();

    if (doc.contains("listen_addr")) {
      std::string addr = doc["listen_addr"].get<std::string>();
      auto colon = addr.rfind(':');
      if (colon == std::string::npos || colon == 0 ||
          colon + 1 == addr.size())
        bad("listen_addr must be host:port");
      c.listen_host = addr.substr(0, colon);
      c.listen_port = std::stoi(addr.substr(colon + 1));
      if (c.listen_port <= 0 || c.listen_port > 65535)
        bad("listen_addr port out of range");
    }

    if (doc.contains("role")) c.role = doc["role"].get<std::string>();
    if (c.role != "leader" && c.role != "follower")
      bad("role must be leader or follower");
    if (doc.contains("leader_addr"))
      c.leader_addr = doc["leader_addr"].get<std::string>();
    if (c.role == "follower" && c.leader_addr.empty())
      bad("follower role requires leader_addr");

    if (doc.contains("repo_id")) c.repo_id = doc["repo_id"].get<std::string>();
    if (!valid_repo_id(c.repo_id))
      bad("repo_id must match [a-z0-9.-]+ and be non-empty");

    if (doc.contains("public_view"))
      c.public_view = doc["public_view"].get<std::string>();

    if (doc.contains("oai")) {
      const auto& o = doc["oai"];
      reject_unknown(
          o, {"repository_name", "admin_email", "batch_size",
              "token_ttl_seconds"},
          "oai.");
      if (o.contains("repository_name"))
        c.oai_repository_name = o["repository_name"].get<std::string>();
      if (o.contains("admin_email"))
        c.oai_admin_email = o["admin_email"].get<std::string>();
      if (o.contains("batch_size")) {
        c.oai_batch_size = o["batch_size"].get<std::size_t>();
        if (c.oai_batch_size == 0) bad("oai.batch_size must be positive");
      }
      if (o.contains("token_ttl_seconds"))
        c.oai_token_ttl_seconds = o["token_ttl_seconds"].get<int64_t>();
    }

    if (doc.contains("auth")) {
      const auto& a = doc["auth"];
      reject_unknown(a, {"skew_seconds", "nonce_window_seconds"}, "auth.");
      if (a.contains("skew_seconds"))
        c.auth_skew_seconds = a["skew_seconds"].get<int64_t>();
      if (a.contains("nonce_window_seconds"))
        c.nonce_window_seconds = a["nonce_window_seconds"].get<int64_t>();
      if (c.auth_skew_seconds < 0 || c.nonce_window_seconds <= 0)
        bad("auth windows must be positive");
    }

    if (doc.contains("journal")) {
      const auto& j = doc["journal"];
      reject_unknown(j, {"fsync", "batch_flush_every", "entries_per_file"},
                     "journal.");
      if (j.contains("fsync")) {
        std::string mode = j["fsync"].get<std::string>();
        if (mode == "always")
          c.journal.fsync = JournalStore::FsyncPolicy::Always;
        else if (mode == "batch")
          c.journal.fsync = JournalStore::FsyncPolicy::Batch;
        else
          bad("journal.fsync must be always or batch");
      }
      if (j.contains("batch_flush_every")) {
        c.journal.batch_flush_every = j["batch_flush_every"].get<uint64_t>();
        if (c.journal.batch_flush_every == 0)
          bad("journal.batch_flush_every must be positive");
      }
      if (j.contains("entries_per_file")) {
        c.journal.entries_per_file = j["entries_per_file"].get<uint64_t>();
        if (c.journal.entries_per_file == 0)
          bad("journal.entries_per_file must be positive");
      }
    }

    if (doc.contains("checkpoint_interval")) {
      c.checkpoint_interval = doc["checkpoint_interval"].get<uint64_t>();
      if (c.checkpoint_interval == 0)
        bad("checkpoint_interval must be positive");
    }

    if (doc.contains("search")) {
      const auto& s = doc["search"];
      reject_unknown(s, {"propagation"}, "search.");
      if (s.contains("propagation")) {
        for (auto it = s["propagation"].begin(); it != s["propagation"].end();
             ++it) {
          std::vector<std::string> fields;
          for (const auto& f : it.value())
            fields.push_back(f.get<std::string>());
          c.propagation[it.key()] = std::move(fields);
        }
      }
    }

    if (doc.contains("oai_sets"))
      for (const auto& h : doc["oai_sets"])
        c.oai_sets.push_back(h.get<std::string>());

    if (doc.contains("harvest_poll_seconds")) {
      c.harvest_poll_seconds = doc["harvest_poll_seconds"].get<int>();
      if (c.harvest_poll_seconds <= 0)
        bad("harvest_poll_seconds must be positive");
    }
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("config parse: ") + e.what());
  } catch (const std::invalid_argument&) {
    bad("listen_addr port is not a number");
  } catch (const std::out_of_range&) {
    bad("numeric config value out of range");
  }

  if (c.data_dir.empty()) bad("data_dir must be set");
  return c;
}

ServiceConfig ServiceConfig::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Err::IoError, "cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  nlohmann::json doc = nlohmann::json::parse(buf.str(), nullptr, false);
  if (doc.is_discarded()) bad("config file is not valid JSON: " + path);
  return from_json(doc);
}

RepositoryOptions ServiceConfig::repository_options() const {
  RepositoryOptions opt;
  opt.data_dir = data_dir;
  opt.journal = journal;
  opt.checkpoint_interval = checkpoint_interval;
  opt.follower = role == "follower";
  return opt;
}

}  // namespace ncore
