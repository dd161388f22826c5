#include "ncore/api_service.hpp"

#include <algorithm>
#include <charconv>

#include "ncore/atom.hpp"
#include "ncore/errors.hpp"
#include "ncore/query_parser.hpp"
#include "ncore/util.hpp"

namespace ncore {

namespace {

void write_json(httplib::Response& res, int status, const nlohmann::json& doc) {
  res.status = status;
  res.set_content(doc.dump(2) + "\n", "application/json");
}

void write_error(httplib::Response& res, const NcoreError& e) {
  nlohmann::json body = {{"error",
                          {{"code", std::string(machine_code(e.code()))},
                           {"message", std::string(e.what())}}}};
  if (!e.handle().empty()) body["error"]["handle"] = e.handle();
  write_json(res, http_status(e.code()), body);
}

// API-layer problems that never reach the engine: malformed JSON, missing
// body fields, bad paging numbers.
void write_api_error(httplib::Response& res, int status,
                     const std::string& code, const std::string& message) {
  write_json(res, status,
             {{"error", {{"code", code}, {"message", message}}}});
}

// 200 with an explicit code for mutations that found nothing to do.
void write_idempotent(httplib::Response& res, const std::string& area,
                      nlohmann::json body) {
  body["code"] = area + ".idempotent";
  write_json(res, 200, std::move(body));
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const NcoreError& e) {
    write_error(res, e);
  } catch (const nlohmann::json::exception& e) {
    write_api_error(res, 400, "api.bad-body",
                    std::string("malformed request body: ") + e.what());
  } catch (const std::exception& e) {
    write_api_error(res, 500, "internal.error", e.what());
  }
}

Handle parse_handle(const std::string& text) {
  auto h = Handle::parse(text);
  if (!h) fail(Err::NotFound, "unparseable handle: " + text);
  return *h;
}

nlohmann::json parse_body(const httplib::Request& req) {
  nlohmann::json doc = nlohmann::json::parse(req.body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    fail(Err::ValidationFailed, "request body must be a JSON object");
  return doc;
}

AuthHeaders headers_of(const httplib::Request& req) {
  return AuthHeaders{req.get_header_value("X-NCore-Agent"),
                     req.get_header_value("X-NCore-Timestamp"),
                     req.get_header_value("X-NCore-Nonce"),
                     req.get_header_value("X-NCore-Signature")};
}

// Anonymous when no auth header is present at all; a partial or invalid set
// of headers is an error rather than a silent downgrade to public access.
std::optional<Handle> maybe_auth(Service& svc, const httplib::Request& req) {
  AuthHeaders h = headers_of(req);
  if (h.agent.empty() && h.timestamp.empty() && h.nonce.empty() &&
      h.signature.empty())
    return std::nullopt;
  return svc.auth().authenticate(req.method, req.path, req.body, h);
}

Handle require_auth(Service& svc, const httplib::Request& req) {
  auto actor = maybe_auth(svc, req);
  if (!actor) fail(Err::AuthMissing, "this endpoint requires a signed request");
  return *actor;
}

const ViewSpec& require_public_view(Service& svc) {
  const ViewSpec* view = svc.public_view();
  if (!view) fail(Err::NotPublic, "no public view is configured");
  return *view;
}

// Visibility of one object to anonymous readers under the public view.
bool publicly_visible(Service& svc, const ViewSpec& view, const Handle& h,
                      const DigitalObject& obj) {
  if (is_deleted(obj)) return false;
  switch (h.kind) {
    case Kind::Agent:
      return false;
    case Kind::Metadata: {
      const auto& md = std::get<MetadataObject>(obj);
      if (!svc.repo().is_in_view(md.target, view)) return false;
      return view.provider_passes(svc.repo().provider_of(h));
    }
    default:
      return svc.repo().is_in_view(h, view);
  }
}

// Reads of one object: authenticated agents see everything, anonymous
// readers only live objects inside the public view.
DigitalObject readable_object(Service& svc, const httplib::Request& req,
                              const Handle& h) {
  auto obj = svc.repo().try_get_object(h);
  if (!obj) fail(Err::NotFound, "no such object", h.text());
  if (!maybe_auth(svc, req)) {
    const ViewSpec& view = require_public_view(svc);
    if (!publicly_visible(svc, view, h, *obj))
      fail(Err::NotPublic, "object is not publicly readable", h.text());
  }
  return *obj;
}

uint64_t parse_u64(const std::string& text, const std::string& what) {
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size())
    fail(Err::ValidationFailed, what + " must be a non-negative integer");
  return v;
}

nlohmann::json handles_json(const std::set<Handle>& handles) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Handle& h : handles) arr.push_back(h.text());
  return arr;
}

std::string object_title(const DigitalObject& obj) {
  if (const auto* r = std::get_if<ResourceObject>(&obj))
    return r->url.empty() ? r->handle.text() : r->url;
  if (const auto* a = std::get_if<AggregationObject>(&obj)) return a->label;
  if (const auto* g = std::get_if<AgentObject>(&obj)) return g->display_name;
  return handle_of(obj).text();
}

}  // namespace

HttpFront::HttpFront(Service& svc) : svc_(svc) { install(); }

bool HttpFront::listen(const std::string& host, int port) {
  return srv_.listen(host, port);
}

int HttpFront::bind_any_port(const std::string& host) {
  return srv_.bind_to_any_port(host);
}

bool HttpFront::serve_after_bind() { return srv_.listen_after_bind(); }

void HttpFront::stop() { srv_.stop(); }

void HttpFront::install() {
  auto& svc = svc_;

  // --- objects ---

  srv_.Post("/objects", [&svc](const httplib::Request& req,
                               httplib::Response& res) {
    guarded(res, [&] {
      Handle actor = require_auth(svc, req);
      nlohmann::json body = parse_body(req);
      std::string kind = body.at("kind").get<std::string>();
      Handle h;
      if (kind == "resource") {
        ResourceInit init;
        if (body.contains("url")) init.url = body["url"].get<std::string>();
        if (body.contains("inline")) {
          auto data = base64_decode(body["inline"].at("data").get<std::string>());
          if (!data) fail(Err::ValidationFailed, "inline.data must be base64");
          init.inline_content = InlineContent{
              body["inline"].at("media_type").get<std::string>(), *data};
        }
        h = svc.repo().create_resource(actor, init);
      } else if (kind == "metadata") {
        MetadataInit init;
        init.target = parse_handle(body.at("target").get<std::string>());
        for (auto it = body.at("datastreams").begin();
             it != body.at("datastreams").end(); ++it) {
          auto payload = base64_decode(it.value().get<std::string>());
          if (!payload)
            fail(Err::ValidationFailed, "datastream payloads must be base64");
          init.datastreams[it.key()] = *payload;
        }
        h = svc.repo().create_metadata(actor, init);
      } else if (kind == "aggregation" || kind == "metadata_provider") {
        Handle owner = actor;
        if (body.contains("owner"))
          owner = parse_handle(body["owner"].get<std::string>());
        h = svc.repo().create_aggregation(actor, kind == "metadata_provider",
                                          body.at("label").get<std::string>(),
                                          owner);
      } else if (kind == "agent") {
        fail(Err::WrongKind, "agents are registered via POST /agents");
      } else {
        fail(Err::ValidationFailed, "unknown kind: " + kind);
      }
      write_json(res, 201, {{"handle", h.text()}});
    });
  });

  srv_.Get(R"(/objects/([^/]+))", [&svc](const httplib::Request& req,
                                         httplib::Response& res) {
    guarded(res, [&] {
      Handle h = parse_handle(req.matches[1].str());
      DigitalObject obj = readable_object(svc, req, h);
      write_json(res, 200, object_to_json(obj));
    });
  });

  srv_.Delete(R"(/objects/([^/]+))", [&svc](const httplib::Request& req,
                                            httplib::Response& res) {
    guarded(res, [&] {
      Handle actor = require_auth(svc, req);
      Handle h = parse_handle(req.matches[1].str());
      bool acted = svc.repo().tombstone(actor, h);
      if (!acted) {
        write_idempotent(res, "object", {{"handle", h.text()}});
        return;
      }
      write_json(res, 200, {{"handle", h.text()}, {"tombstoned", true}});
    });
  });

  srv_.Put(R"(/objects/([^/]+)/datastreams/([^/]+))",
           [&svc](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               Handle actor = require_auth(svc, req);
               Handle h = parse_handle(req.matches[1].str());
               std::string key = req.matches[2].str();
               nlohmann::json body = parse_body(req);
               auto payload =
                   base64_decode(body.at("payload").get<std::string>());
               if (!payload)
                 fail(Err::ValidationFailed, "payload must be base64");
               svc.repo().add_datastream(actor, h, key, *payload);
               write_json(res, 200, {{"handle", h.text()}, {"key", key}});
             });
           });

  // --- relationships ---

  srv_.Post("/relationships", [&svc](const httplib::Request& req,
                                     httplib::Response& res) {
    guarded(res, [&] {
      Handle actor = require_auth(svc, req);
      Relationship rel = rel_from_json(parse_body(req));
      bool inserted = svc.repo().assert_rel(actor, rel);
      if (!inserted) {
        write_idempotent(res, "relationship", {{"triple", rel.line()}});
        return;
      }
      write_json(res, 201, {{"triple", rel.line()}, {"created", true}});
    });
  });

  srv_.Delete("/relationships", [&svc](const httplib::Request& req,
                                       httplib::Response& res) {
    guarded(res, [&] {
      Handle actor = require_auth(svc, req);
      Relationship rel = rel_from_json(parse_body(req));
      svc.repo().retract_rel(actor, rel);
      write_json(res, 200, {{"triple", rel.line()}, {"retracted", true}});
    });
  });

  srv_.Get(R"(/aggregations/([^/]+)/members)",
           [&svc](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               Handle h = parse_handle(req.matches[1].str());
               readable_object(svc, req, h);
               bool transitive = req.get_param_value("transitive") == "true";
               std::set<Handle> members =
                   transitive ? svc.repo().transitive_members(h)
                              : svc.repo().direct_members(h);
               write_json(res, 200,
                          {{"aggregation", h.text()},
                           {"transitive", transitive},
                           {"members", handles_json(members)}});
             });
           });

  srv_.Get(R"(/objects/([^/]+)/ancestors)",
           [&svc](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               Handle h = parse_handle(req.matches[1].str());
               readable_object(svc, req, h);
               write_json(res, 200,
                          {{"handle", h.text()},
                           {"ancestors", handles_json(svc.repo().ancestors(h))}});
             });
           });

  srv_.Get("/find", [&svc](const httplib::Request& req,
                           httplib::Response& res) {
    guarded(res, [&] {
      // Pattern queries sweep the whole graph, so they are never anonymous.
      require_auth(svc, req);
      RelationshipPattern pattern;
      if (req.has_param("s"))
        pattern.subject = parse_handle(req.get_param_value("s"));
      if (req.has_param("p")) {
        auto pred = Predicate::parse(req.get_param_value("p"));
        if (!pred)
          fail(Err::ValidationFailed,
               "unparseable predicate: " + req.get_param_value("p"));
        pattern.predicate = *pred;
      }
      if (req.has_param("o"))
        pattern.object = parse_handle(req.get_param_value("o"));
      nlohmann::json arr = nlohmann::json::array();
      for (const Relationship& rel : svc.repo().find(pattern))
        arr.push_back(rel_to_json(rel));
      write_json(res, 200, {{"triples", arr}});
    });
  });

  // --- views ---

  srv_.Get(R"(/views/([^/]+)/resolve)", [&svc](const httplib::Request& req,
                                               httplib::Response& res) {
    guarded(res, [&] {
      std::string name = req.matches[1].str();
      if (!maybe_auth(svc, req)) {
        // Anonymous callers may resolve only the public view itself.
        const ViewSpec* pub = svc.public_view();
        if (!pub || pub->name != name)
          fail(Err::NotPublic, "view is not public: " + name);
      }
      write_json(res, 200,
                 {{"view", name},
                  {"members", handles_json(svc.repo().resolve_view(name))}});
    });
  });

  srv_.Get(R"(/views/([^/]+)/contains/([^/]+))",
           [&svc](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               std::string name = req.matches[1].str();
               Handle h = parse_handle(req.matches[2].str());
               if (!maybe_auth(svc, req)) {
                 const ViewSpec* pub = svc.public_view();
                 if (!pub || pub->name != name)
                   fail(Err::NotPublic, "view is not public: " + name);
               }
               ViewSpec spec = svc.repo().get_view(name);
               if (!svc.repo().exists(h))
                 fail(Err::NotFound, "no such object", h.text());
               write_json(res, 200,
                          {{"view", name},
                           {"handle", h.text()},
                           {"contains", svc.repo().is_in_view(h, spec)}});
             });
           });

  srv_.Get(R"(/resources/([^/]+)/metadata)",
           [&svc](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               Handle h = parse_handle(req.matches[1].str());
               auto actor = maybe_auth(svc, req);
               std::optional<ViewSpec> spec;
               if (req.has_param("view"))
                 spec = svc.repo().get_view(req.get_param_value("view"));
               if (!actor) {
                 const ViewSpec& pub = require_public_view(svc);
                 if (spec && spec->name != pub.name)
                   fail(Err::NotPublic, "view is not public: " + spec->name);
                 if (!spec) spec = pub;
                 auto obj = svc.repo().try_get_object(h);
                 if (!obj) fail(Err::NotFound, "no such object", h.text());
                 if (!publicly_visible(svc, pub, h, *obj))
                   fail(Err::NotPublic, "resource is not publicly readable",
                        h.text());
               } else if (!svc.repo().exists(h)) {
                 fail(Err::NotFound, "no such object", h.text());
               }
               nlohmann::json arr = nlohmann::json::array();
               if (spec) {
                 for (Handle md : svc.repo().metadata_in_view(h, *spec))
                   arr.push_back(object_to_json(svc.repo().get_object(md)));
               } else {
                 for (Handle md : svc.repo().metadata_for(h)) {
                   auto obj = svc.repo().get_object(md);
                   if (!is_deleted(obj)) arr.push_back(object_to_json(obj));
                 }
               }
               write_json(res, 200,
                          {{"resource", h.text()}, {"metadata", arr}});
             });
           });

  // --- feeds ---

  srv_.Get(R"(/aggregations/([^/]+)/feed\.atom)",
           [&svc](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               Handle agg = parse_handle(req.matches[1].str());
               auto obj = svc.repo().try_get_object(agg);
               if (!obj || is_deleted(*obj))
                 fail(Err::NotFound, "no such aggregation", agg.text());
               if (!agg.is_aggregation_like())
                 fail(Err::WrongKind, "feeds exist for aggregations only",
                      agg.text());
               // Feeds are outward-facing by definition: the aggregation must
               // sit inside the public view no matter who asks.
               const ViewSpec& pub = require_public_view(svc);
               if (!svc.repo().is_in_view(agg, pub))
                 fail(Err::NotPublic, "aggregation is outside the public view",
                      agg.text());

               struct Row {
                 Handle h;
                 Timestamp modified;
                 DigitalObject obj;
               };
               std::vector<Row> rows;
               for (Handle m : svc.repo().direct_members(agg)) {
                 auto member = svc.repo().try_get_object(m);
                 if (!member || is_deleted(*member)) continue;
                 if (!publicly_visible(svc, pub, m, *member)) continue;
                 rows.push_back({m, modified_of(*member), std::move(*member)});
               }
               std::sort(rows.begin(), rows.end(),
                         [](const Row& a, const Row& b) {
                           if (a.modified != b.modified)
                             return a.modified > b.modified;
                           return a.h.serial < b.h.serial;
                         });

               const size_t page_size = 100;
               size_t page = 0;
               if (req.has_param("page"))
                 page = parse_u64(req.get_param_value("page"), "page");
               size_t begin = page * page_size;
               size_t end = std::min(rows.size(), begin + page_size);

               std::vector<AtomEntry> entries;
               for (size_t i = begin; i < end; ++i) {
                 AtomEntry e;
                 e.id = rows[i].h.text();
                 e.title = object_title(rows[i].obj);
                 e.updated = rows[i].modified;
                 if (const auto* r = std::get_if<ResourceObject>(&rows[i].obj);
                     r && !r->url.empty() && r->url.rfind("urn:", 0) != 0)
                   e.link = r->url;
                 entries.push_back(std::move(e));
               }

               const auto& a = std::get<AggregationObject>(*obj);
               std::string self = req.path + "?page=" + std::to_string(page);
               std::optional<std::string> next;
               if (end < rows.size())
                 next = req.path + "?page=" + std::to_string(page + 1);
               Timestamp updated =
                   rows.empty() ? a.modified : rows.front().modified;
               res.set_content(
                   atom_feed(agg.text(), a.label, updated, self, next, entries),
                   "application/atom+xml; charset=utf-8");
             });
           });

  // --- search ---

  srv_.Get("/search", [&svc](const httplib::Request& req,
                             httplib::Response& res) {
    guarded(res, [&] {
      if (!req.has_param("q"))
        fail(Err::BadQuery, "q parameter is required");
      auto actor = maybe_auth(svc, req);

      std::optional<ViewSpec> view;
      if (req.has_param("view"))
        view = svc.repo().get_view(req.get_param_value("view"));
      if (!actor) {
        const ViewSpec& pub = require_public_view(svc);
        if (view && view->name != pub.name)
          fail(Err::NotPublic, "view is not public: " + view->name);
        if (!view) view = pub;
      }

      std::optional<Handle> agg;
      if (req.has_param("agg"))
        agg = parse_handle(req.get_param_value("agg"));

      size_t limit = 10;
      if (req.has_param("limit")) {
        limit = parse_u64(req.get_param_value("limit"), "limit");
        if (limit == 0) fail(Err::BadQuery, "limit must be at least 1");
        limit = std::min<size_t>(limit, 100);
      }
      size_t offset = 0;
      if (req.has_param("offset"))
        offset = parse_u64(req.get_param_value("offset"), "offset");

      SearchResults results =
          svc.index().query_text(req.get_param_value("q"), agg,
                                 view ? &*view : nullptr, limit, offset);
      nlohmann::json hits = nlohmann::json::array();
      for (const SearchHit& hit : results.hits) {
        hits.push_back({{"resource", hit.resource.text()},
                        {"score", hit.score},
                        {"title", hit.title},
                        {"description", hit.description}});
      }
      write_json(res, 200,
                 {{"total", results.total},
                  {"limit", limit},
                  {"offset", offset},
                  {"hits", hits}});
    });
  });

  // --- agents and grants ---

  srv_.Post("/agents", [&svc](const httplib::Request& req,
                              httplib::Response& res) {
    guarded(res, [&] {
      Handle actor = require_auth(svc, req);
      nlohmann::json body = parse_body(req);
      auto key = base64_decode(body.at("public_key").get<std::string>());
      if (!key) fail(Err::MalformedKey, "public_key must be base64");
      Handle h = svc.repo().register_agent(
          actor, body.at("display_name").get<std::string>(), *key,
          body.value("admin", false));
      write_json(res, 201, {{"handle", h.text()}});
    });
  });

  srv_.Post("/grants", [&svc](const httplib::Request& req,
                              httplib::Response& res) {
    guarded(res, [&] {
      Handle actor = require_auth(svc, req);
      nlohmann::json body = parse_body(req);
      auto cap = capability_from_name(body.at("capability").get<std::string>());
      if (!cap) fail(Err::ValidationFailed, "unknown capability");
      Handle grantee = parse_handle(body.at("grantee").get<std::string>());
      Handle scope = parse_handle(body.at("scope").get<std::string>());
      bool created = svc.repo().add_grant(actor, grantee, scope, *cap);
      if (!created) {
        write_idempotent(res, "grant", {{"grantee", grantee.text()}});
        return;
      }
      write_json(res, 201,
                 {{"grantee", grantee.text()},
                  {"scope", scope.text()},
                  {"capability", std::string(capability_name(*cap))}});
    });
  });

  srv_.Delete("/grants", [&svc](const httplib::Request& req,
                                httplib::Response& res) {
    guarded(res, [&] {
      Handle actor = require_auth(svc, req);
      nlohmann::json body = parse_body(req);
      auto cap = capability_from_name(body.at("capability").get<std::string>());
      if (!cap) fail(Err::ValidationFailed, "unknown capability");
      Handle grantee = parse_handle(body.at("grantee").get<std::string>());
      Handle scope = parse_handle(body.at("scope").get<std::string>());
      try {
        svc.repo().revoke_grant(actor, grantee, scope, *cap);
      } catch (const NcoreError& e) {
        if (e.code() != Err::GrantNotFound) throw;
        write_idempotent(res, "grant", {{"grantee", grantee.text()}});
        return;
      }
      write_json(res, 200, {{"grantee", grantee.text()}, {"revoked", true}});
    });
  });

  // --- status ---

  srv_.Get("/status", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { write_json(res, 200, svc.status()); });
  });

  // --- OAI-PMH ---

  srv_.Get("/oai", [&svc](const httplib::Request& req,
                          httplib::Response& res) {
    guarded(res, [&] {
      res.set_content(svc.oai().handle_request(req.params),
                      "text/xml; charset=utf-8");
    });
  });

  // --- replication feed ---

  srv_.Get("/replication/entries", [&svc](const httplib::Request& req,
                                          httplib::Response& res) {
    guarded(res, [&] {
      uint64_t from = 1;
      if (req.has_param("from"))
        from = parse_u64(req.get_param_value("from"), "from");
      if (from == 0) from = 1;
      int wait_ms = 0;
      if (req.has_param("wait_ms"))
        wait_ms = static_cast<int>(std::min<uint64_t>(
            parse_u64(req.get_param_value("wait_ms"), "wait_ms"), 30000));
      if (wait_ms > 0) svc.repo().wait_for_seq(from, wait_ms);

      uint64_t last = 0;
      std::string batch =
          svc.repo().read_entry_batch(from, 1000, 4u << 20, &last);
      res.set_header("X-NCore-Leader-Seq",
                     std::to_string(svc.repo().last_seq()));
      res.set_header("X-NCore-Batch-Last", std::to_string(last));
      if (auto cp = svc.repo().latest_checkpoint(
              last ? last : svc.repo().last_seq())) {
        res.set_header("X-NCore-Checkpoint-Seq", std::to_string(cp->first));
        res.set_header("X-NCore-Checkpoint-Hash", cp->second);
      }
      res.set_content(batch, "application/octet-stream");
    });
  });

  srv_.Get("/replication/checkpoint", [&svc](const httplib::Request& req,
                                             httplib::Response& res) {
    guarded(res, [&] {
      uint64_t seq = parse_u64(req.get_param_value("seq"), "seq");
      auto hash = svc.repo().checkpoint_hash(seq);
      if (!hash)
        fail(Err::NotFound, "no checkpoint at seq " + std::to_string(seq));
      write_json(res, 200, {{"seq", seq}, {"hash", *hash}});
    });
  });
}

}  // namespace ncore
