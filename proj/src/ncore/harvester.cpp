#include "ncore/harvester.hpp"

#include <algorithm>

#include "ncore/errors.hpp"
#include "ncore/url.hpp"
#include "ncore/util.hpp"
#include "ncore/xml.hpp"

namespace ncore {

namespace {

struct RawRecord {
  std::string oai_id;
  std::string datestamp;
  bool deleted = false;
  std::string payload;  // raw bytes of the first element under <metadata>
};

// Pulls the records and the resumption token out of one ListRecords page.
// A protocol error element aborts the harvest, except noRecordsMatch which
// is an empty but successful result.
std::vector<RawRecord> parse_page(const std::string& body,
                                  std::string* resumption) {
  auto doc = xml_parse(body);
  if (!doc) fail(Err::NetworkFailure, "remote response is not well-formed XML");
  if (const XmlElement* err = doc->first("error")) {
    std::string code = err->attr("code").value_or("");
    if (code == "noRecordsMatch") return {};
    fail(Err::NetworkFailure, "remote OAI error: " + code + " " + trim(err->text));
  }
  const XmlElement* list = doc->first("ListRecords");
  if (!list) fail(Err::NetworkFailure, "response lacks a ListRecords element");

  std::vector<RawRecord> out;
  for (const XmlElement* rec : list->all("record")) {
    RawRecord r;
    const XmlElement* header = rec->first("header");
    if (!header) continue;
    r.deleted = header->attr("status").value_or("") == "deleted";
    if (const XmlElement* ident = header->first("identifier"))
      r.oai_id = trim(ident->text);
    if (const XmlElement* ds = header->first("datestamp"))
      r.datestamp = trim(ds->text);
    if (const XmlElement* md = rec->first("metadata")) {
      // The payload is the metadata element's first child, kept byte-exact.
      if (!md->children.empty()) {
        const XmlElement& child = md->children.front();
        r.payload = body.substr(child.begin, child.end - child.begin);
      }
    }
    out.push_back(std::move(r));
  }
  if (const XmlElement* tok = list->first("resumptionToken"))
    *resumption = trim(tok->text);
  return out;
}

// The record's own dc:identifier elements, first usable http(s) URL wins.
std::optional<std::string> record_url(const std::string& payload) {
  auto doc = xml_parse(payload);
  if (!doc) return std::nullopt;
  std::vector<std::string> found;
  std::function<void(const XmlElement&)> walk = [&](const XmlElement& el) {
    if (el.local_name() == "identifier") {
      std::string v = trim(el.text);
      if (!v.empty()) found.push_back(std::move(v));
    }
    for (const XmlElement& c : el.children) walk(c);
  };
  walk(*doc);
  for (const std::string& v : found) {
    if (!is_http_url(v)) continue;
    try {
      return normalize_url(v);
    } catch (const NcoreError&) {
      continue;
    }
  }
  return std::nullopt;
}

}  // namespace

std::string synthetic_urn(const std::string& source_id,
                          const std::string& oai_id) {
  return "urn:ncore:harvest:" + source_id + ":" + oai_id;
}

HarvestReport harvest(Repository& repo, Handle actor,
                      const std::string& source_id, bool full,
                      const FetchFn& fetch) {
  auto src = repo.get_source(source_id);
  if (!src) fail(Err::HarvestSourceNotFound, "no such source: " + source_id);

  HarvestReport report;
  std::map<std::string, Handle> records = src->records;
  std::map<std::string, Handle> delta;

  std::string max_datestamp = full ? "" : src->last_successful_until;
  Timestamp max_parsed = 0;
  if (!max_datestamp.empty())
    max_parsed = parse_oai_datestamp(max_datestamp).value_or(0);

  auto note = [&](const std::string& text) {
    if (report.notes.size() < 200) report.notes.push_back(text);
  };

  auto process = [&](const RawRecord& raw) {
    if (raw.oai_id.empty()) fail(Err::BadRecord, "record without identifier");
    auto stamp = parse_oai_datestamp(raw.datestamp);
    if (!stamp) fail(Err::BadRecord, "unparseable datestamp: " + raw.datestamp);

    auto known = records.find(raw.oai_id);

    if (raw.deleted) {
      if (known == records.end()) {
        note("delete for unknown record " + raw.oai_id + ", ignored");
      } else if (repo.tombstoned(known->second)) {
        ++report.unchanged;
      } else {
        repo.tombstone(actor, known->second);
        ++report.deleted;
      }
      return;
    }

    if (raw.payload.empty()) fail(Err::BadRecord, "record without payload");

    // Resolve the resource identity.
    std::string ref;
    if (auto url = record_url(raw.payload)) {
      ref = *url;
    } else {
      ref = synthetic_urn(source_id, raw.oai_id);
      note("no usable URL in " + raw.oai_id + ", synthetic identity " + ref);
    }
    Handle resource = kNoHandle;
    if (auto existing = repo.resource_by_url(ref)) {
      if (repo.tombstoned(*existing))
        fail(Err::BadRecord, "resource for " + ref + " is tombstoned");
      resource = *existing;
    } else {
      resource = repo.create_resource(actor, ResourceInit{ref, std::nullopt});
    }
    repo.assert_rel(actor, {resource, Predicate::member_of(), src->resource_agg});

    if (known != records.end() && !repo.tombstoned(known->second)) {
      Handle md = known->second;
      auto obj = repo.get_object(md);
      const auto& m = std::get<MetadataObject>(obj);
      if (m.target != resource) {
        // The record moved to a different resource; the old statement no
        // longer describes anything we can update in place.
        repo.tombstone(actor, md);
        known = records.end();
        note("record " + raw.oai_id + " changed resource, remapped");
      } else {
        auto it = m.datastreams.find(src->metadata_prefix);
        if (it != m.datastreams.end() && it->second == raw.payload) {
          ++report.unchanged;
          return;
        }
        repo.add_datastream(actor, md, src->metadata_prefix, raw.payload);
        ++report.updated;
        return;
      }
    } else if (known != records.end()) {
      // Previously deleted upstream and now live again: tombstones are
      // permanent, so a fresh metadata object takes over the mapping.
      known = records.end();
      note("record " + raw.oai_id + " reappeared after deletion");
    }

    MetadataInit init;
    init.target = resource;
    init.datastreams[src->metadata_prefix] = raw.payload;
    Handle md = repo.create_metadata(actor, init);
    repo.assert_rel(actor, {md, Predicate::metadata_for(), resource});
    repo.assert_rel(actor, {md, Predicate::member_of(), src->provider});
    repo.assert_rel(actor, {md, Predicate::member_of(), src->metadata_agg});
    records[raw.oai_id] = md;
    delta[raw.oai_id] = md;
    ++report.created;
  };

  // First request carries the filters; follow-ups carry only the token.
  std::string url = src->base_url + "?verb=ListRecords&metadataPrefix=" +
                    url_encode_component(src->metadata_prefix);
  if (!src->set_spec.empty())
    url += "&set=" + url_encode_component(src->set_spec);
  if (!full && !src->last_successful_until.empty())
    url += "&from=" + url_encode_component(src->last_successful_until);

  while (true) {
    std::string body = fetch(url);
    std::string resumption;
    std::vector<RawRecord> page = parse_page(body, &resumption);
    for (const RawRecord& raw : page) {
      try {
        process(raw);
      } catch (const NcoreError& e) {
        ++report.errors;
        note(std::string("bad record ") + raw.oai_id + ": " + e.what());
      }
      if (auto stamp = parse_oai_datestamp(raw.datestamp)) {
        if (max_datestamp.empty() || *stamp > max_parsed ||
            (*stamp == max_parsed && raw.datestamp > max_datestamp)) {
          max_parsed = *stamp;
          max_datestamp = raw.datestamp;
        }
      }
    }
    if (resumption.empty()) break;
    url = src->base_url + "?verb=ListRecords&resumptionToken=" +
          url_encode_component(resumption);
  }

  report.complete = true;
  std::string watermark;
  if (!max_datestamp.empty() && max_datestamp != src->last_successful_until)
    watermark = max_datestamp;
  if (!watermark.empty() || !delta.empty()) {
    repo.harvest_checkpoint(actor, source_id, watermark, delta);
    report.until = watermark;
  }
  return report;
}

}  // namespace ncore
