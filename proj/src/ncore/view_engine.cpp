#include "ncore/view_engine.hpp"

#include "ncore/errors.hpp"

namespace ncore {

namespace {

Handle parse_handle_or_fail(const std::string& text) {
    auto h = Handle::parse(text);
    if (!h) fail(Err::ValidationFailed, "bad handle in view spec: " + text);
    return *h;
}

}  // namespace

bool ViewSpec::provider_passes(std::optional<Handle> provider) const {
    if (md_include) {
        if (!provider) return false;
        if (!md_include->count(*provider)) return false;
    }
    if (provider && md_exclude.count(*provider)) return false;
    return true;
}

nlohmann::json view_to_json(const ViewSpec& v) {
    nlohmann::json j{{"name", v.name}, {"in", v.in_agg.text()}};
    j["not_in"] = v.not_in_agg ? nlohmann::json(v.not_in_agg->text()) : nlohmann::json();
    if (v.md_include) {
        auto arr = nlohmann::json::array();
        for (Handle h : *v.md_include) arr.push_back(h.text());
        j["md_include"] = arr;
    } else {
        j["md_include"] = nullptr;
    }
    auto excl = nlohmann::json::array();
    for (Handle h : v.md_exclude) excl.push_back(h.text());
    j["md_exclude"] = excl;
    return j;
}

ViewSpec view_from_json(const nlohmann::json& j) {
    ViewSpec v;
    v.name = j.at("name").get<std::string>();
    v.in_agg = parse_handle_or_fail(j.at("in").get<std::string>());
    if (j.contains("not_in") && !j.at("not_in").is_null())
        v.not_in_agg = parse_handle_or_fail(j.at("not_in").get<std::string>());
    if (j.contains("md_include") && !j.at("md_include").is_null()) {
        std::set<Handle> inc;
        for (const auto& e : j.at("md_include")) inc.insert(parse_handle_or_fail(e.get<std::string>()));
        v.md_include = std::move(inc);
    }
    if (j.contains("md_exclude"))
        for (const auto& e : j.at("md_exclude"))
            v.md_exclude.insert(parse_handle_or_fail(e.get<std::string>()));
    return v;
}

std::set<Handle> resolve_view(const RelationGraph& graph, const ObjectDirectory& dir,
                              const ViewSpec& spec) {
    auto in = graph.transitive_members(spec.in_agg);
    std::set<Handle> out;
    if (spec.not_in_agg) {
        auto excluded = graph.transitive_members(*spec.not_in_agg);
        for (Handle h : *in)
            if (!excluded->count(h) && !dir.tombstoned(h)) out.insert(h);
    } else {
        for (Handle h : *in)
            if (!dir.tombstoned(h)) out.insert(h);
    }
    return out;
}

bool is_in_view(const RelationGraph& graph, const ObjectDirectory& dir, Handle obj,
                const ViewSpec& spec) {
    if (!dir.exists(obj)) fail(Err::NotFound, "no such object", obj.text());
    if (dir.tombstoned(obj)) return false;
    auto anc = graph.ancestors(obj);
    if (!anc.count(spec.in_agg)) return false;
    if (spec.not_in_agg && anc.count(*spec.not_in_agg)) return false;
    return true;
}

std::vector<Handle> metadata_in_view(const RelationGraph& graph, const ObjectDirectory& dir,
                                     Handle resource, const ViewSpec& spec) {
    if (!dir.exists(resource)) fail(Err::NotFound, "no such object", resource.text());
    std::vector<Handle> out;
    for (Handle md : graph.metadata_for(resource)) {
        if (dir.tombstoned(md)) continue;
        if (spec.provider_passes(graph.provider_of(md))) out.push_back(md);
    }
    return out;
}

}  // namespace ncore
