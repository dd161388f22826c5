#include "support/xmlcheck.hpp"

#include <set>

#include "ncore/time.hpp"
#include "ncore/xml.hpp"

namespace ncore::test {

namespace {

const std::set<std::string> kVerbs = {
    "Identify",        "ListMetadataFormats", "ListSets",
    "ListIdentifiers", "ListRecords",         "GetRecord"};

const std::set<std::string> kErrorCodes = {
    "badArgument",       "badResumptionToken", "badVerb",
    "cannotDisseminateFormat", "idDoesNotExist", "noRecordsMatch",
    "noMetadataFormats", "noSetHierarchy"};

bool utc_datetime(const std::string& s) {
    auto t = parse_oai_datestamp(s);
    return t.has_value() && s.size() == 20 && s.back() == 'Z';
}

bool oai_datestamp(const std::string& s) {
    return parse_oai_datestamp(s).has_value();
}

void check_header(const XmlElement& h, std::vector<std::string>& out) {
    if (auto status = h.attr("status"); status && *status != "deleted")
        out.push_back("header status must be 'deleted', got " + *status);
    const XmlElement* id = h.first("identifier");
    if (!id)
        out.push_back("header missing identifier");
    else if (id->text.rfind("oai:", 0) != 0)
        out.push_back("identifier lacks oai: scheme: " + id->text);
    const XmlElement* ds = h.first("datestamp");
    if (!ds)
        out.push_back("header missing datestamp");
    else if (!oai_datestamp(ds->text))
        out.push_back("bad header datestamp: " + ds->text);
    // Sequence order: identifier, datestamp, setSpec*.
    size_t phase = 0;
    for (const XmlElement& c : h.children) {
        std::string n(c.local_name());
        size_t want = n == "identifier" ? 0 : n == "datestamp" ? 1 : n == "setSpec" ? 2 : 99;
        if (want == 99) {
            out.push_back("unexpected header child: " + n);
        } else if (want < phase) {
            out.push_back("header children out of order at " + n);
        } else {
            phase = want;
        }
    }
}

void check_record(const XmlElement& rec, std::vector<std::string>& out) {
    const XmlElement* h = rec.first("header");
    if (!h) {
        out.push_back("record missing header");
        return;
    }
    check_header(*h, out);
    bool deleted = h->attr("status").has_value();
    const XmlElement* md = rec.first("metadata");
    if (deleted && md) out.push_back("deleted record carries metadata");
    if (!deleted && !md) out.push_back("live record missing metadata");
    if (md && md->children.size() != 1)
        out.push_back("metadata must wrap exactly one root element");
}

void check_resumption_token(const XmlElement& rt, std::vector<std::string>& out) {
    if (auto e = rt.attr("expirationDate"); e && !utc_datetime(*e))
        out.push_back("bad resumptionToken expirationDate");
    for (const char* attr : {"completeListSize", "cursor"}) {
        if (auto v = rt.attr(attr)) {
            for (char c : *v)
                if (c < '0' || c > '9') {
                    out.push_back(std::string("non-numeric resumptionToken ") + attr);
                    break;
                }
        }
    }
}

void check_identify(const XmlElement& e, std::vector<std::string>& out) {
    const char* order[] = {"repositoryName", "baseURL",           "protocolVersion",
                           "adminEmail",     "earliestDatestamp", "deletedRecord",
                           "granularity"};
    size_t phase = 0;
    std::set<std::string> seen;
    for (const XmlElement& c : e.children) {
        std::string n(c.local_name());
        size_t want = 99;
        for (size_t i = 0; i < 7; ++i)
            if (n == order[i]) want = i;
        if (n == "description") want = 7;
        if (want == 99) {
            out.push_back("unexpected Identify child: " + n);
            continue;
        }
        if (want < phase) out.push_back("Identify children out of order at " + n);
        phase = want;
        seen.insert(n);
    }
    for (size_t i = 0; i < 7; ++i)
        if (!seen.count(order[i]))
            out.push_back(std::string("Identify missing ") + order[i]);
    if (const XmlElement* pv = e.first("protocolVersion"); pv && pv->text != "2.0")
        out.push_back("protocolVersion must be 2.0");
    if (const XmlElement* ed = e.first("earliestDatestamp"); ed && !oai_datestamp(ed->text))
        out.push_back("bad earliestDatestamp");
    if (const XmlElement* dr = e.first("deletedRecord");
        dr && dr->text != "no" && dr->text != "persistent" && dr->text != "transient")
        out.push_back("illegal deletedRecord value: " + dr->text);
    if (const XmlElement* g = e.first("granularity");
        g && g->text != "YYYY-MM-DD" && g->text != "YYYY-MM-DDThh:mm:ssZ")
        out.push_back("illegal granularity: " + g->text);
}

void check_verb_payload(const std::string& verb, const XmlElement& e,
                        std::vector<std::string>& out) {
    if (verb == "Identify") {
        check_identify(e, out);
        return;
    }
    if (verb == "ListMetadataFormats") {
        auto formats = e.all("metadataFormat");
        if (formats.empty()) out.push_back("ListMetadataFormats has no formats");
        for (const XmlElement* f : formats)
            for (const char* part : {"metadataPrefix", "schema", "metadataNamespace"})
                if (!f->first(part))
                    out.push_back(std::string("metadataFormat missing ") + part);
        return;
    }
    if (verb == "ListSets") {
        auto sets = e.all("set");
        if (sets.empty()) out.push_back("ListSets has no sets");
        for (const XmlElement* s : sets) {
            if (!s->first("setSpec")) out.push_back("set missing setSpec");
            if (!s->first("setName")) out.push_back("set missing setName");
        }
        if (const XmlElement* rt = e.first("resumptionToken"))
            check_resumption_token(*rt, out);
        return;
    }
    if (verb == "GetRecord") {
        auto recs = e.all("record");
        if (recs.size() != 1)
            out.push_back("GetRecord must contain exactly one record");
        for (const XmlElement* r : recs) check_record(*r, out);
        return;
    }
    if (verb == "ListRecords") {
        auto recs = e.all("record");
        if (recs.empty()) out.push_back("ListRecords has no records");
        for (const XmlElement* r : recs) check_record(*r, out);
        for (const XmlElement& c : e.children) {
            std::string n(c.local_name());
            if (n != "record" && n != "resumptionToken")
                out.push_back("unexpected ListRecords child: " + n);
        }
        if (const XmlElement* rt = e.first("resumptionToken")) {
            if (std::string(e.children.back().local_name()) != "resumptionToken")
                out.push_back("resumptionToken must be the last child");
            check_resumption_token(*rt, out);
        }
        return;
    }
    if (verb == "ListIdentifiers") {
        auto headers = e.all("header");
        if (headers.empty()) out.push_back("ListIdentifiers has no headers");
        for (const XmlElement* h : headers) check_header(*h, out);
        if (const XmlElement* rt = e.first("resumptionToken"))
            check_resumption_token(*rt, out);
        return;
    }
}

}  // namespace

std::vector<std::string> check_oai_response(const std::string& xml) {
    std::vector<std::string> out;
    std::string err;
    auto root = xml_parse(xml, &err);
    if (!root) {
        out.push_back("not well-formed: " + err);
        return out;
    }
    if (root->local_name() != "OAI-PMH") {
        out.push_back("root element is not OAI-PMH");
        return out;
    }
    bool has_ns = false;
    for (const XmlAttr& a : root->attrs)
        if (a.name == "xmlns" && a.value == "http://www.openarchives.org/OAI/2.0/")
            has_ns = true;
    if (!has_ns) out.push_back("missing OAI-PMH namespace declaration");

    const auto& kids = root->children;
    if (kids.size() < 3) {
        out.push_back("envelope must contain responseDate, request, and a payload");
        return out;
    }
    if (std::string(kids[0].local_name()) != "responseDate")
        out.push_back("first child must be responseDate");
    else if (!utc_datetime(kids[0].text))
        out.push_back("responseDate must be second-granularity UTC: " + kids[0].text);
    if (std::string(kids[1].local_name()) != "request") {
        out.push_back("second child must be request");
        return out;
    }

    bool error_response = std::string(kids[2].local_name()) == "error";
    if (error_response) {
        for (size_t i = 2; i < kids.size(); ++i) {
            if (std::string(kids[i].local_name()) != "error") {
                out.push_back("mixed error and content children");
                continue;
            }
            auto code = kids[i].attr("code");
            if (!code || !kErrorCodes.count(*code))
                out.push_back("illegal error code: " + code.value_or("(none)"));
            // badVerb/badArgument responses must not echo the failed
            // attributes on <request>.
            if (code && (*code == "badVerb" || *code == "badArgument") &&
                !kids[1].attrs.empty())
                out.push_back("request must carry no attributes for " + *code);
        }
        return out;
    }

    if (kids.size() != 3) {
        out.push_back("exactly one verb payload expected");
        return out;
    }
    std::string verb(kids[2].local_name());
    if (!kVerbs.count(verb)) {
        out.push_back("unknown payload element: " + verb);
        return out;
    }
    auto req_verb = kids[1].attr("verb");
    if (!req_verb || *req_verb != verb)
        out.push_back("request verb attribute does not match payload");
    check_verb_payload(verb, kids[2], out);
    return out;
}

std::vector<std::string> check_atom_feed(const std::string& xml) {
    std::vector<std::string> out;
    std::string err;
    auto root = xml_parse(xml, &err);
    if (!root) {
        out.push_back("not well-formed: " + err);
        return out;
    }
    if (root->local_name() != "feed") out.push_back("root element is not feed");
    bool has_ns = false;
    for (const XmlAttr& a : root->attrs)
        if (a.name == "xmlns" && a.value == "http://www.w3.org/2005/Atom") has_ns = true;
    if (!has_ns) out.push_back("missing Atom namespace");
    for (const char* part : {"id", "title", "updated"})
        if (!root->first(part))
            out.push_back(std::string("feed missing ") + part);
    if (const XmlElement* u = root->first("updated"); u && !parse_rfc3339(u->text))
        out.push_back("feed updated is not RFC 3339");
    bool self = false;
    for (const XmlElement* l : root->all("link"))
        if (l->attr("rel").value_or("") == "self") self = true;
    if (!self) out.push_back("feed missing rel=self link");
    for (const XmlElement* entry : root->all("entry")) {
        for (const char* part : {"id", "title", "updated"})
            if (!entry->first(part))
                out.push_back(std::string("entry missing ") + part);
        if (const XmlElement* u = entry->first("updated"); u && !parse_rfc3339(u->text))
            out.push_back("entry updated is not RFC 3339");
    }
    return out;
}

}  // namespace ncore::test
