#include "ncore/oai_provider.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include <json.hpp>

#include "ncore/errors.hpp"
#include "ncore/util.hpp"
#include "ncore/xml.hpp"

namespace ncore {

namespace {

constexpr std::string_view kOaiNs = "http://www.openarchives.org/OAI/2.0/";

// Legal protocol arguments per verb (verb itself excluded).
const std::map<std::string, std::vector<std::string>>& legal_args() {
  static const std::map<std::string, std::vector<std::string>> m = {
      {"Identify", {}},
      {"ListMetadataFormats", {"identifier"}},
      {"ListSets", {"resumptionToken"}},
      {"GetRecord", {"identifier", "metadataPrefix"}},
      {"ListIdentifiers",
       {"from", "until", "metadataPrefix", "set", "resumptionToken"}},
      {"ListRecords",
       {"from", "until", "metadataPrefix", "set", "resumptionToken"}},
  };
  return m;
}

std::optional<std::string> arg_of(const OaiParams& params,
                                  const std::string& key) {
  auto it = params.find(key);
  if (it == params.end()) return std::nullopt;
  return it->second;
}

// Duplicate, unknown, or empty arguments are all badArgument.
std::optional<std::string> check_args(const OaiParams& params,
                                      const std::string& verb) {
  const auto& legal = legal_args().at(verb);
  std::set<std::string> seen;
  for (const auto& [k, v] : params) {
    if (k == "verb") {
      if (!seen.insert(k).second) return "repeated argument: verb";
      continue;
    }
    if (std::find(legal.begin(), legal.end(), k) == legal.end())
      return "illegal argument for " + verb + ": " + k;
    if (!seen.insert(k).second) return "repeated argument: " + k;
    if (v.empty()) return "empty argument: " + k;
  }
  return std::nullopt;
}

bool date_only(std::string_view s) { return s.size() == 10; }

// Known metadata formats get their published schema locations; anything else
// is announced with a synthesized URN so ListMetadataFormats stays valid XML.
void format_uris(const std::string& prefix, const std::string& base_url,
                 std::string* schema, std::string* ns) {
  if (prefix == "nsdl_dc") {
    *schema = "https://ns.nsdl.org/schemas/nsdl_dc/nsdl_dc_v1.02.xsd";
    *ns = "https://ns.nsdl.org/nsdl_dc_v1.02/";
  } else if (prefix == "oai_dc") {
    *schema = "http://www.openarchives.org/OAI/2.0/oai_dc.xsd";
    *ns = "http://www.openarchives.org/OAI/2.0/oai_dc/";
  } else {
    *schema = base_url + "/formats/" + prefix + ".xsd";
    *ns = "urn:ncore:format:" + prefix;
  }
}

}  // namespace

std::string xml_payload_for_embedding(const std::string& payload) {
  std::string s = trim(payload);
  if (s.substr(0, 5) == "<?xml") {
    auto end = s.find("?>");
    if (end != std::string::npos) s = trim(s.substr(end + 2));
  }
  return s;
}

struct OaiProvider::Selected {
  Handle handle;
  Handle target = kNoHandle;
  Timestamp modified = 0;
  bool deleted = false;
  std::vector<std::string> set_specs;
  std::string payload;  // already stripped for embedding; empty if deleted
};

OaiProvider::OaiProvider(Repository& repo, OaiConfig cfg, Clock clock)
    : repo_(repo), cfg_(std::move(cfg)), clock_(std::move(clock)) {
  if (!clock_) clock_ = system_now;
}

std::string OaiProvider::set_spec_of(const Handle& agg) {
  std::string spec = agg.text();
  std::replace(spec.begin(), spec.end(), ':', '_');
  return spec;
}

void OaiProvider::register_set(const Handle& agg) {
  if (agg.kind != Kind::Aggregation)
    fail(Err::WrongKind, "OAI sets are backed by aggregations", agg.text());
  if (std::find(sets_.begin(), sets_.end(), agg) == sets_.end())
    sets_.push_back(agg);
}

std::vector<Handle> OaiProvider::sets() const { return sets_; }

std::string OaiProvider::envelope(const std::string& verb,
                                  const OaiParams& params,
                                  const std::string& body,
                                  bool echo_args) const {
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<OAI-PMH xmlns=\"";
  out += kOaiNs;
  out +=
      "\" xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\""
      " xsi:schemaLocation=\"http://www.openarchives.org/OAI/2.0/"
      " http://www.openarchives.org/OAI/2.0/OAI-PMH.xsd\">\n";
  out += "  <responseDate>" + format_rfc3339(clock_()) + "</responseDate>\n";
  out += "  <request";
  if (echo_args && !verb.empty()) {
    out += " verb=\"" + xml_escape_attr(verb) + "\"";
    for (const char* key : {"identifier", "metadataPrefix", "from", "until",
                            "set", "resumptionToken"}) {
      if (auto v = arg_of(params, key))
        out += std::string(" ") + key + "=\"" + xml_escape_attr(*v) + "\"";
    }
  }
  out += ">" + xml_escape(cfg_.base_url) + "</request>\n";
  out += body;
  out += "</OAI-PMH>\n";
  return out;
}

std::string OaiProvider::error_response(const std::string& verb,
                                        const OaiParams& params,
                                        const std::string& code,
                                        const std::string& message) const {
  // badVerb/badArgument responses must not echo the failed arguments.
  bool echo = code != "badVerb" && code != "badArgument";
  std::string body = "  <error code=\"" + code + "\">" + xml_escape(message) +
                     "</error>\n";
  return envelope(verb, params, body, echo);
}

std::vector<std::string> OaiProvider::supported_prefixes() const {
  std::set<std::string> keys = {"nsdl_dc"};
  repo_.for_each_object([&](const DigitalObject& obj) {
    if (const auto* md = std::get_if<MetadataObject>(&obj)) {
      if (md->deleted) return;
      for (const auto& [k, v] : md->datastreams) keys.insert(k);
    }
  });
  return {keys.begin(), keys.end()};
}

std::string OaiProvider::verb_identify(const OaiParams& params) {
  Timestamp earliest = 0;
  bool any = false;
  repo_.for_each_object([&](const DigitalObject& obj) {
    if (const auto* md = std::get_if<MetadataObject>(&obj)) {
      if (!any || md->modified < earliest) earliest = md->modified;
      any = true;
    }
  });
  std::string body;
  body += "  <Identify>\n";
  body += "    <repositoryName>" + xml_escape(cfg_.repository_name) +
          "</repositoryName>\n";
  body += "    <baseURL>" + xml_escape(cfg_.base_url) + "</baseURL>\n";
  body += "    <protocolVersion>2.0</protocolVersion>\n";
  body += "    <adminEmail>" + xml_escape(cfg_.admin_email) + "</adminEmail>\n";
  body += "    <earliestDatestamp>" + format_rfc3339(any ? earliest : 0) +
          "</earliestDatestamp>\n";
  body += "    <deletedRecord>persistent</deletedRecord>\n";
  body += "    <granularity>YYYY-MM-DDThh:mm:ssZ</granularity>\n";
  body += "  </Identify>\n";
  return envelope("Identify", params, body, true);
}

std::string OaiProvider::verb_list_metadata_formats(const OaiParams& params) {
  std::vector<std::string> prefixes;
  if (auto ident = arg_of(params, "identifier")) {
    const std::string oai_prefix = "oai:" + cfg_.repo_id + ":";
    if (!ident->starts_with(oai_prefix))
      return error_response("ListMetadataFormats", params, "idDoesNotExist",
                            "unknown identifier");
    auto h = Handle::parse(ident->substr(oai_prefix.size()));
    if (!h || h->kind != Kind::Metadata)
      return error_response("ListMetadataFormats", params, "idDoesNotExist",
                            "unknown identifier");
    auto obj = repo_.try_get_object(*h);
    if (!obj)
      return error_response("ListMetadataFormats", params, "idDoesNotExist",
                            "unknown identifier");
    const auto& md = std::get<MetadataObject>(*obj);
    for (const auto& [k, v] : md.datastreams) prefixes.push_back(k);
  } else {
    prefixes = supported_prefixes();
  }
  std::string body = "  <ListMetadataFormats>\n";
  for (const auto& p : prefixes) {
    std::string schema, ns;
    format_uris(p, cfg_.base_url, &schema, &ns);
    body += "    <metadataFormat>\n";
    body += "      <metadataPrefix>" + xml_escape(p) + "</metadataPrefix>\n";
    body += "      <schema>" + xml_escape(schema) + "</schema>\n";
    body += "      <metadataNamespace>" + xml_escape(ns) +
            "</metadataNamespace>\n";
    body += "    </metadataFormat>\n";
  }
  body += "  </ListMetadataFormats>\n";
  return envelope("ListMetadataFormats", params, body, true);
}

std::string OaiProvider::verb_list_sets(const OaiParams& params) {
  if (arg_of(params, "resumptionToken"))
    return error_response("ListSets", params, "badResumptionToken",
                          "set listings are never paged here");
  std::string body = "  <ListSets>\n";
  size_t count = 0;
  for (const Handle& agg : sets_) {
    auto obj = repo_.try_get_object(agg);
    if (!obj || is_deleted(*obj)) continue;
    const auto& a = std::get<AggregationObject>(*obj);
    body += "    <set>\n";
    body += "      <setSpec>" + xml_escape(set_spec_of(agg)) + "</setSpec>\n";
    body += "      <setName>" + xml_escape(a.label) + "</setName>\n";
    body += "    </set>\n";
    ++count;
  }
  body += "  </ListSets>\n";
  if (count == 0)
    return error_response("ListSets", params, "noSetHierarchy",
                          "no sets are configured");
  return envelope("ListSets", params, body, true);
}

std::string OaiProvider::render_header(const Selected& rec) const {
  std::string out;
  out += rec.deleted ? "      <header status=\"deleted\">\n"
                     : "      <header>\n";
  out += "        <identifier>oai:" + cfg_.repo_id + ":" + rec.handle.text() +
         "</identifier>\n";
  out += "        <datestamp>" + format_rfc3339(rec.modified) +
         "</datestamp>\n";
  for (const auto& s : rec.set_specs)
    out += "        <setSpec>" + xml_escape(s) + "</setSpec>\n";
  out += "      </header>\n";
  return out;
}

std::string OaiProvider::render_record(const Selected& rec,
                                       const std::string&) const {
  std::string out = "    <record>\n";
  out += render_header(rec);
  if (!rec.deleted) {
    out += "      <metadata>";
    out += rec.payload;
    out += "</metadata>\n";
  }
  out += "    </record>\n";
  return out;
}

std::vector<OaiProvider::Selected> OaiProvider::select_records(
    const std::string& prefix, const std::string& set_spec,
    const std::string& from, const std::string& until, std::string* error_code,
    std::string* error_msg) const {
  Timestamp from_t = 0;
  Timestamp until_t = std::numeric_limits<Timestamp>::max();
  if (!from.empty()) {
    auto t = parse_oai_datestamp(from);
    if (!t) {
      *error_code = "badArgument";
      *error_msg = "unparseable from argument";
      return {};
    }
    from_t = *t;
  }
  if (!until.empty()) {
    auto t = parse_oai_datestamp(until);
    if (!t) {
      *error_code = "badArgument";
      *error_msg = "unparseable until argument";
      return {};
    }
    // A date-only until means the whole day.
    until_t = date_only(until) ? *t + 86399 : *t;
  }
  if (!from.empty() && !until.empty() && date_only(from) != date_only(until)) {
    *error_code = "badArgument";
    *error_msg = "from and until must share a granularity";
    return {};
  }
  if (from_t > until_t) {
    *error_code = "badArgument";
    *error_msg = "from is later than until";
    return {};
  }

  Handle filter_agg = kNoHandle;
  if (!set_spec.empty()) {
    bool known = false;
    for (const Handle& agg : sets_) {
      if (set_spec_of(agg) == set_spec) {
        filter_agg = agg;
        known = true;
        break;
      }
    }
    if (!known) {
      *error_code = "noRecordsMatch";
      *error_msg = "no such set";
      return {};
    }
  }

  std::vector<Selected> out;
  repo_.for_each_object([&](const DigitalObject& obj) {
    const auto* md = std::get_if<MetadataObject>(&obj);
    if (!md) return;
    if (md->modified < from_t || md->modified > until_t) return;
    auto it = md->datastreams.find(prefix);
    if (it == md->datastreams.end()) return;
    Selected rec;
    rec.handle = md->handle;
    rec.target = md->target;
    rec.modified = md->modified;
    rec.deleted = md->deleted;
    if (!md->deleted) {
      rec.payload = xml_payload_for_embedding(it->second);
      // A payload that is not well-formed XML cannot be embedded in a
      // schema-valid response; the record is not disseminable in this format.
      if (!xml_well_formed(rec.payload)) return;
    }
    out.push_back(std::move(rec));
  });

  // Set membership: the metadata itself or its described target is a
  // transitive member of the set aggregation.
  std::map<Handle, std::set<Handle>> closures;
  for (const Handle& agg : sets_) closures[agg] = repo_.transitive_members(agg);
  auto in_set = [&](const Selected& r, const Handle& agg) {
    const auto& tm = closures[agg];
    return tm.count(r.handle) > 0 || tm.count(r.target) > 0;
  };
  std::vector<Selected> kept;
  for (auto& rec : out) {
    if (filter_agg != kNoHandle && !in_set(rec, filter_agg)) continue;
    for (const Handle& agg : sets_)
      if (in_set(rec, agg)) rec.set_specs.push_back(set_spec_of(agg));
    kept.push_back(std::move(rec));
  }
  std::sort(kept.begin(), kept.end(), [](const Selected& a, const Selected& b) {
    if (a.modified != b.modified) return a.modified < b.modified;
    return a.handle.serial < b.handle.serial;
  });
  return kept;
}

std::string OaiProvider::verb_get_record(const OaiParams& params) {
  auto ident = arg_of(params, "identifier");
  auto prefix = arg_of(params, "metadataPrefix");
  if (!ident || !prefix)
    return error_response("GetRecord", params, "badArgument",
                          "identifier and metadataPrefix are required");
  const std::string oai_prefix = "oai:" + cfg_.repo_id + ":";
  std::optional<Handle> h;
  if (ident->starts_with(oai_prefix))
    h = Handle::parse(ident->substr(oai_prefix.size()));
  if (!h || h->kind != Kind::Metadata)
    return error_response("GetRecord", params, "idDoesNotExist",
                          "unknown identifier");
  auto obj = repo_.try_get_object(*h);
  if (!obj)
    return error_response("GetRecord", params, "idDoesNotExist",
                          "unknown identifier");
  const auto& md = std::get<MetadataObject>(*obj);

  Selected rec;
  rec.handle = md.handle;
  rec.target = md.target;
  rec.modified = md.modified;
  rec.deleted = md.deleted;
  auto it = md.datastreams.find(*prefix);
  if (it == md.datastreams.end())
    return error_response("GetRecord", params, "cannotDisseminateFormat",
                          "record has no datastream for this prefix");
  if (!md.deleted) {
    rec.payload = xml_payload_for_embedding(it->second);
    if (!xml_well_formed(rec.payload))
      return error_response("GetRecord", params, "cannotDisseminateFormat",
                            "datastream is not well-formed XML");
  }
  for (const Handle& agg : sets_) {
    auto tm = repo_.transitive_members(agg);
    if (tm.count(rec.handle) > 0 || tm.count(rec.target) > 0)
      rec.set_specs.push_back(set_spec_of(agg));
  }
  std::string body = "  <GetRecord>\n" + render_record(rec, *prefix) +
                     "  </GetRecord>\n";
  return envelope("GetRecord", params, body, true);
}

std::string OaiProvider::page_response(const std::string& verb,
                                       const OaiParams& params,
                                       const TokenState& st, std::size_t page,
                                       const std::string& token_id) {
  const std::size_t batch = cfg_.batch_size == 0 ? 100 : cfg_.batch_size;
  const std::size_t begin = page * batch;
  const std::size_t end = std::min(st.complete_size, begin + batch);
  std::string body = "  <" + verb + ">\n";
  for (std::size_t i = begin; i < end; ++i) body += st.rendered[i];
  bool more = end < st.complete_size;
  if (begin > 0 || more) {
    std::string attrs = " completeListSize=\"" +
                        std::to_string(st.complete_size) + "\" cursor=\"" +
                        std::to_string(begin) + "\"";
    if (more) {
      nlohmann::json tok = {
          {"id", token_id},   {"cursor", end},       {"seq", st.seq},
          {"prefix", st.prefix}, {"set", st.set},    {"from", st.from},
          {"until", st.until},
      };
      std::string expires =
          format_rfc3339(st.created + cfg_.token_ttl_seconds);
      body += "    <resumptionToken" + attrs + " expirationDate=\"" + expires +
              "\">" + base64_encode(tok.dump()) + "</resumptionToken>\n";
    } else {
      // Final chunk of a paged list carries an empty token.
      body += "    <resumptionToken" + attrs + "/>\n";
    }
  }
  body += "  </" + verb + ">\n";
  return envelope(verb, params, body, true);
}

std::string OaiProvider::verb_list(const OaiParams& params, bool with_payload) {
  const std::string verb = with_payload ? "ListRecords" : "ListIdentifiers";
  const std::size_t batch = cfg_.batch_size == 0 ? 100 : cfg_.batch_size;

  if (auto token_text = arg_of(params, "resumptionToken")) {
    // resumptionToken is exclusive: only verb may accompany it.
    if (params.size() != 2)
      return error_response(verb, params, "badArgument",
                            "resumptionToken must be the only argument");
    auto decoded = base64_decode(*token_text);
    if (!decoded)
      return error_response(verb, params, "badResumptionToken",
                            "token is not decodable");
    std::string id;
    std::size_t cursor = 0;
    try {
      auto doc = nlohmann::json::parse(*decoded);
      id = doc.at("id").get<std::string>();
      cursor = doc.at("cursor").get<std::size_t>();
    } catch (const nlohmann::json::exception&) {
      return error_response(verb, params, "badResumptionToken",
                            "token is not decodable");
    }
    std::lock_guard lk(token_mu_);
    prune_tokens_locked(clock_());
    auto it = tokens_.find(id);
    if (it == tokens_.end() || it->second.verb != verb ||
        cursor % batch != 0 || cursor >= it->second.complete_size)
      return error_response(verb, params, "badResumptionToken",
                            "token is unknown or expired");
    return page_response(verb, params, it->second, cursor / batch, id);
  }

  auto prefix = arg_of(params, "metadataPrefix");
  if (!prefix)
    return error_response(verb, params, "badArgument",
                          "metadataPrefix is required");
  auto supported = supported_prefixes();
  if (std::find(supported.begin(), supported.end(), *prefix) ==
      supported.end())
    return error_response(verb, params, "cannotDisseminateFormat",
                          "unsupported metadataPrefix");

  std::string set = arg_of(params, "set").value_or("");
  std::string from = arg_of(params, "from").value_or("");
  std::string until = arg_of(params, "until").value_or("");
  std::string code, msg;
  auto records = select_records(*prefix, set, from, until, &code, &msg);
  if (!code.empty()) return error_response(verb, params, code, msg);
  if (records.empty())
    return error_response(verb, params, "noRecordsMatch",
                          "no records satisfy the request");

  TokenState st;
  st.rendered.reserve(records.size());
  for (const Selected& rec : records)
    st.rendered.push_back(with_payload ? render_record(rec, *prefix)
                                       : render_header(rec));
  st.complete_size = st.rendered.size();
  st.created = clock_();
  st.verb = verb;
  st.prefix = *prefix;
  st.set = set;
  st.from = from;
  st.until = until;
  st.seq = repo_.last_seq();

  if (st.complete_size <= batch) {
    return page_response(verb, params, st, 0, "");
  }
  std::lock_guard lk(token_mu_);
  prune_tokens_locked(st.created);
  std::string id = std::to_string(next_token_++) + "." +
                   hex_encode(random_bytes(8));
  auto [it, inserted] = tokens_.emplace(id, std::move(st));
  return page_response(verb, params, it->second, 0, id);
}

void OaiProvider::prune_tokens_locked(Timestamp now) {
  for (auto it = tokens_.begin(); it != tokens_.end();) {
    if (it->second.created + cfg_.token_ttl_seconds < now)
      it = tokens_.erase(it);
    else
      ++it;
  }
}

std::string OaiProvider::handle_request(const OaiParams& params) {
  auto verb = arg_of(params, "verb");
  if (!verb || legal_args().find(*verb) == legal_args().end())
    return error_response(verb.value_or(""), params, "badVerb",
                          "unknown or missing verb");
  if (auto problem = check_args(params, *verb))
    return error_response(*verb, params, "badArgument", *problem);
  try {
    if (*verb == "Identify") return verb_identify(params);
    if (*verb == "ListMetadataFormats")
      return verb_list_metadata_formats(params);
    if (*verb == "ListSets") return verb_list_sets(params);
    if (*verb == "GetRecord") return verb_get_record(params);
    if (*verb == "ListIdentifiers") return verb_list(params, false);
    return verb_list(params, true);
  } catch (const NcoreError& e) {
    return error_response(*verb, params, "badArgument", e.what());
  }
}

}  // namespace ncore
