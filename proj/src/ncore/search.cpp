#include "ncore/search.hpp"

#include <algorithm>
#include <cmath>

#include "ncore/errors.hpp"
#include "ncore/util.hpp"

namespace ncore {

namespace {

constexpr double kBm25K1 = 1.2;
constexpr double kBm25B = 0.75;
constexpr size_t kSnippetCap = 200;

const std::vector<std::string> kDefaultLeafFields = {"title", "description", "subject"};

std::string snippet(const std::string& s) {
    if (s.size() <= kSnippetCap) return s;
    return s.substr(0, kSnippetCap);
}

// Occurrences of `phrase` (as consecutive tokens) inside one token stream.
size_t phrase_count(const std::vector<std::string>& tokens,
                    const std::vector<std::string>& phrase) {
    if (phrase.empty() || tokens.size() < phrase.size()) return 0;
    size_t n = 0;
    for (size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
        bool hit = true;
        for (size_t j = 0; j < phrase.size(); ++j)
            if (tokens[i + j] != phrase[j]) {
                hit = false;
                break;
            }
        if (hit) ++n;
    }
    return n;
}

}  // namespace

const std::set<std::string>& propagatable_fields() {
    static const std::set<std::string> fields = {"subject", "audience", "educationLevel",
                                                 "rights"};
    return fields;
}

SearchIndex::SearchIndex(const Repository& repo) : repo_(repo) {}

void SearchIndex::rebuild() {
    uint64_t seq = repo_.last_seq();
    std::unique_lock lock(mu_);
    rebuild_locked(seq);
}

void SearchIndex::rebuild_locked(uint64_t seq) {
    docs_.clear();
    postings_.clear();
    field_total_len_.clear();
    field_doc_count_.clear();
    std::vector<Handle> live;
    repo_.for_each_object([&](const DigitalObject& obj) {
        if (handle_of(obj).kind == Kind::Resource && !is_deleted(obj))
            live.push_back(handle_of(obj));
    });
    for (Handle r : live) index_doc(r.serial);
    cursor_ = seq;
    ready_ = true;
}

void SearchIndex::update_from_journal(uint64_t upto) {
    uint64_t committed = repo_.last_seq();
    if (upto == 0 || upto > committed) upto = committed;
    std::unique_lock lock(mu_);
    if (!ready_) {
        rebuild_locked(upto);
        return;
    }
    if (upto <= cursor_) return;
    apply_entries_locked(upto);
}

void SearchIndex::apply_entries_locked(uint64_t upto) {
    std::set<uint64_t> stale;
    std::set<uint64_t> dead;
    repo_.journal().for_each(cursor_ + 1, upto, [&](const JournalEntry& e) {
        if (e.op == Op::Tombstone) {
            auto h = Handle::parse(e.payload.at("handle").get<std::string>());
            if (h && h->kind == Kind::Resource) {
                dead.insert(h->serial);
                stale.erase(h->serial);
            }
        }
        for (uint64_t s : affected_resources(e))
            if (!dead.count(s)) stale.insert(s);
    });
    for (uint64_t s : dead) remove_doc(s);
    for (uint64_t s : stale) index_doc(s);
    cursor_ = upto;
}

std::set<uint64_t> SearchIndex::resources_under(Handle h) const {
    std::set<uint64_t> out;
    if (h.kind == Kind::Resource) {
        out.insert(h.serial);
        return out;
    }
    if (!h.is_aggregation_like() || !repo_.exists(h)) return out;
    for (Handle m : repo_.transitive_members(h))
        if (m.kind == Kind::Resource) out.insert(m.serial);
    return out;
}

std::set<uint64_t> SearchIndex::affected_resources(const JournalEntry& e) const {
    std::set<uint64_t> out;
    auto via_target = [&](Handle target) {
        for (uint64_t s : resources_under(target)) out.insert(s);
    };
    auto via_metadata = [&](Handle md) {
        auto obj = repo_.try_get_object(md);
        if (!obj) return;
        if (const auto* m = std::get_if<MetadataObject>(&*obj)) via_target(m->target);
    };
    auto via_rel = [&](const Relationship& rel) {
        if (rel.predicate.tag == Predicate::Tag::MemberOf) {
            // A metadata -> provider edge changes who the fields come from.
            if (rel.subject.kind == Kind::Metadata)
                via_metadata(rel.subject);
            else
                via_target(rel.subject);
        } else if (rel.predicate.tag == Predicate::Tag::MetadataFor) {
            via_target(rel.object);
        }
    };
    switch (e.op) {
        case Op::CreateObject: {
            auto h = Handle::parse(e.payload.at("handle").get<std::string>());
            if (h && h->kind == Kind::Resource) out.insert(h->serial);
            break;
        }
        case Op::AddDatastream: {
            auto md = Handle::parse(e.payload.at("md").get<std::string>());
            if (md) via_metadata(*md);
            break;
        }
        case Op::Tombstone: {
            auto h = Handle::parse(e.payload.at("handle").get<std::string>());
            if (h && h->kind == Kind::Metadata) via_metadata(*h);
            for (const auto& rj : e.payload.at("retracted")) via_rel(rel_from_json(rj));
            break;
        }
        case Op::Assert:
        case Op::Retract:
            via_rel(rel_from_json(e.payload));
            break;
        default:
            break;
    }
    return out;
}

SearchIndex::Doc SearchIndex::build_doc(Handle resource) const {
    Doc doc;
    doc.resource = resource;

    auto bundle_from_md = [&](Handle md, bool propagated,
                              const std::set<std::string>* keep) -> std::optional<Bundle> {
        auto obj = repo_.try_get_object(md);
        if (!obj || is_deleted(*obj)) return std::nullopt;
        const auto& m = std::get<MetadataObject>(*obj);
        auto it = m.datastreams.find("nsdl_dc");
        if (it == m.datastreams.end()) return std::nullopt;
        auto fields = extract_dc_fields(it->second);
        if (!fields) return std::nullopt;
        Bundle b;
        b.source_md = md;
        b.propagated = propagated;
        if (auto p = repo_.provider_of(md)) b.provider = *p;
        for (auto& [field, values] : *fields) {
            if (keep && !keep->count(field)) continue;
            std::vector<std::string>& toks = b.tokens[field];
            for (const std::string& v : values) {
                for (auto& t : tokenize(v)) toks.push_back(std::move(t));
                if (!b.first_values.count(field)) b.first_values[field] = v;
            }
            if (toks.empty()) b.tokens.erase(field);
        }
        if (b.tokens.empty() && b.first_values.empty()) return std::nullopt;
        return b;
    };

    // The resource's own metadata, in handle order.
    for (Handle md : repo_.metadata_for(resource)) {
        if (auto b = bundle_from_md(md, false, nullptr)) doc.bundles.push_back(std::move(*b));
    }
    // Fields inherited from ancestor aggregations' collection metadata.
    for (Handle anc : repo_.ancestors(resource)) {
        auto cfg = propagation_.find(anc);
        if (cfg == propagation_.end()) continue;
        for (Handle md : repo_.metadata_for(anc)) {
            if (auto b = bundle_from_md(md, true, &cfg->second))
                doc.bundles.push_back(std::move(*b));
        }
    }
    // Inline text content feeds the body field.
    auto obj = repo_.try_get_object(resource);
    if (obj) {
        const auto& r = std::get<ResourceObject>(*obj);
        if (r.content && starts_with_ci(r.content->media_type, "text/")) {
            Bundle b;
            b.tokens["body"] = tokenize(r.content->data);
            if (!b.tokens["body"].empty()) doc.bundles.push_back(std::move(b));
        }
    }
    for (const Bundle& b : doc.bundles)
        for (const auto& [field, toks] : b.tokens) doc.field_len[field] += toks.size();
    return doc;
}

void SearchIndex::add_postings(const Doc& doc, uint64_t serial) {
    for (const Bundle& b : doc.bundles)
        for (const auto& [field, toks] : b.tokens)
            for (const std::string& t : toks) postings_[field][t].insert(serial);
    for (const auto& [field, len] : doc.field_len) {
        field_total_len_[field] += len;
        if (len) ++field_doc_count_[field];
    }
}

void SearchIndex::erase_postings(const Doc& doc, uint64_t serial) {
    for (const Bundle& b : doc.bundles)
        for (const auto& [field, toks] : b.tokens)
            for (const std::string& t : toks) {
                auto f = postings_.find(field);
                if (f == postings_.end()) continue;
                auto p = f->second.find(t);
                if (p == f->second.end()) continue;
                p->second.erase(serial);
                if (p->second.empty()) f->second.erase(p);
                if (f->second.empty()) postings_.erase(f);
            }
    for (const auto& [field, len] : doc.field_len) {
        field_total_len_[field] -= len;
        if (len && field_doc_count_[field]) --field_doc_count_[field];
    }
}

void SearchIndex::index_doc(uint64_t serial) {
    Handle r{Kind::Resource, serial};
    remove_doc(serial);
    if (!repo_.exists(r) || repo_.tombstoned(r)) return;
    Doc doc = build_doc(r);
    add_postings(doc, serial);
    docs_.emplace(serial, std::move(doc));
}

void SearchIndex::remove_doc(uint64_t serial) {
    auto it = docs_.find(serial);
    if (it == docs_.end()) return;
    erase_postings(it->second, serial);
    docs_.erase(it);
}

uint64_t SearchIndex::cursor() const {
    std::shared_lock lock(mu_);
    return cursor_;
}

bool SearchIndex::ready() const {
    std::shared_lock lock(mu_);
    return ready_;
}

size_t SearchIndex::doc_count() const {
    std::shared_lock lock(mu_);
    return docs_.size();
}

void SearchIndex::set_propagation(Handle agg, const std::set<std::string>& fields) {
    if (!agg.is_aggregation_like() || !repo_.exists(agg))
        fail(Err::NotFound, "no such aggregation", agg.text());
    for (const std::string& f : fields)
        if (!propagatable_fields().count(f))
            fail(Err::FieldNotPropagatable, "field cannot be propagated: " + f, f);
    std::unique_lock lock(mu_);
    if (fields.empty())
        propagation_.erase(agg);
    else
        propagation_[agg] = fields;
    if (ready_)
        for (uint64_t s : resources_under(agg)) index_doc(s);
}

std::map<Handle, std::set<std::string>> SearchIndex::propagation() const {
    std::shared_lock lock(mu_);
    return propagation_;
}

// --- query evaluation ----------------------------------------------------

struct SearchIndex::EvalContext {
    const ViewSpec* view = nullptr;
};

double SearchIndex::bm25(double tf, double df, double doc_len, const std::string& field) const {
    auto dc = field_doc_count_.find(field);
    double docs_with_field = dc == field_doc_count_.end() ? 0.0 : double(dc->second);
    if (docs_with_field == 0.0) return 0.0;
    auto tl = field_total_len_.find(field);
    double avgdl = double(tl == field_total_len_.end() ? 0 : tl->second) / docs_with_field;
    if (avgdl <= 0.0) return 0.0;
    double n = double(docs_.size());
    double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    double norm = kBm25K1 * (1.0 - kBm25B + kBm25B * doc_len / avgdl);
    return idf * tf * (kBm25K1 + 1.0) / (tf + norm);
}

std::map<uint64_t, double> SearchIndex::eval_leaf(const QueryNode& node,
                                                  const EvalContext& ctx) const {
    std::vector<std::string> phrase = tokenize(node.text);
    std::map<uint64_t, double> out;
    if (phrase.empty()) return out;

    std::vector<std::string> fields;
    if (!node.field.empty())
        fields.push_back(node.field);
    else
        fields = kDefaultLeafFields;

    for (const std::string& field : fields) {
        auto f = postings_.find(field);
        if (f == postings_.end()) continue;

        // Candidates must contain every token of the leaf in this field.
        std::set<uint64_t> candidates;
        bool first = true;
        for (const std::string& t : phrase) {
            auto p = f->second.find(t);
            if (p == f->second.end()) {
                candidates.clear();
                break;
            }
            if (first) {
                candidates = p->second;
                first = false;
            } else {
                std::set<uint64_t> next;
                std::set_intersection(candidates.begin(), candidates.end(), p->second.begin(),
                                      p->second.end(), std::inserter(next, next.begin()));
                candidates = std::move(next);
            }
        }
        if (candidates.empty()) continue;

        // tf per doc: unfiltered for df bookkeeping, view-filtered for scores.
        std::map<uint64_t, double> tf_all;
        std::map<uint64_t, double> tf_visible;
        for (uint64_t serial : candidates) {
            const Doc& doc = docs_.at(serial);
            for (const Bundle& b : doc.bundles) {
                auto toks = b.tokens.find(field);
                if (toks == b.tokens.end()) continue;
                size_t n = phrase.size() == 1
                               ? size_t(std::count(toks->second.begin(), toks->second.end(),
                                                   phrase[0]))
                               : phrase_count(toks->second, phrase);
                if (!n) continue;
                tf_all[serial] += double(n);
                bool visible = !ctx.view ||
                               ctx.view->provider_passes(
                                   b.provider == kNoHandle ? std::optional<Handle>{}
                                                           : std::optional<Handle>{b.provider});
                // The body bundle is resource content, not a metadata
                // statement; it is always visible.
                if (b.source_md == kNoHandle) visible = true;
                if (visible) tf_visible[serial] += double(n);
            }
        }
        double df = double(tf_all.size());
        for (const auto& [serial, tf] : tf_visible) {
            const Doc& doc = docs_.at(serial);
            auto len = doc.field_len.find(field);
            double dl = len == doc.field_len.end() ? 0.0 : double(len->second);
            out[serial] += bm25(tf, df, dl, field);
        }
    }
    return out;
}

std::map<uint64_t, double> SearchIndex::eval(const QueryNode& node,
                                             const EvalContext& ctx) const {
    switch (node.type) {
        case QueryNode::Type::Term:
        case QueryNode::Type::Phrase:
            return eval_leaf(node, ctx);
        case QueryNode::Type::Or: {
            std::map<uint64_t, double> out;
            for (const QueryNode& c : node.children)
                for (const auto& [serial, score] : eval(c, ctx)) out[serial] += score;
            return out;
        }
        case QueryNode::Type::And: {
            std::map<uint64_t, double> out;
            bool first = true;
            std::vector<const QueryNode*> negative;
            for (const QueryNode& c : node.children) {
                if (c.type == QueryNode::Type::Not) {
                    negative.push_back(&c.children.at(0));
                    continue;
                }
                auto m = eval(c, ctx);
                if (first) {
                    out = std::move(m);
                    first = false;
                } else {
                    std::map<uint64_t, double> next;
                    for (const auto& [serial, score] : out) {
                        auto it = m.find(serial);
                        if (it != m.end()) next.emplace(serial, score + it->second);
                    }
                    out = std::move(next);
                }
                if (out.empty()) break;
            }
            if (first) {
                // Only negative children: complement against the universe.
                for (const auto& [serial, doc] : docs_) out.emplace(serial, 0.0);
            }
            for (const QueryNode* n : negative) {
                if (out.empty()) break;
                for (const auto& [serial, score] : eval(*n, ctx)) out.erase(serial);
            }
            return out;
        }
        case QueryNode::Type::Not: {
            auto m = eval(node.children.at(0), ctx);
            std::map<uint64_t, double> out;
            for (const auto& [serial, doc] : docs_)
                if (!m.count(serial)) out.emplace(serial, 0.0);
            return out;
        }
    }
    return {};
}

SearchResults SearchIndex::query(const QueryNode& ast, std::optional<Handle> filter_agg,
                                 const ViewSpec* view, size_t limit, size_t offset) const {
    std::shared_lock lock(mu_);
    if (!ready_) fail(Err::IndexUnavailable, "index has not been built yet");

    EvalContext ctx{view};
    std::map<uint64_t, double> matched = eval(ast, ctx);

    if (filter_agg) {
        std::set<uint64_t> allowed = resources_under(*filter_agg);
        for (auto it = matched.begin(); it != matched.end();)
            it = allowed.count(it->first) ? std::next(it) : matched.erase(it);
    }
    if (view) {
        for (auto it = matched.begin(); it != matched.end();) {
            Handle r{Kind::Resource, it->first};
            it = repo_.is_in_view(r, *view) ? std::next(it) : matched.erase(it);
        }
    }

    std::vector<std::pair<uint64_t, double>> ranked(matched.begin(), matched.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    SearchResults res;
    res.total = ranked.size();
    for (size_t i = offset; i < ranked.size() && res.hits.size() < limit; ++i) {
        const Doc& doc = docs_.at(ranked[i].first);
        SearchHit hit;
        hit.resource = doc.resource;
        hit.score = ranked[i].second;
        for (const Bundle& b : doc.bundles) {
            bool visible = b.source_md == kNoHandle || !view ||
                           view->provider_passes(b.provider == kNoHandle
                                                     ? std::optional<Handle>{}
                                                     : std::optional<Handle>{b.provider});
            if (!visible) continue;
            auto t = b.first_values.find("title");
            if (hit.title.empty() && t != b.first_values.end()) hit.title = snippet(t->second);
            auto d = b.first_values.find("description");
            if (hit.description.empty() && d != b.first_values.end())
                hit.description = snippet(d->second);
        }
        res.hits.push_back(std::move(hit));
    }
    return res;
}

SearchResults SearchIndex::query_text(std::string_view q, std::optional<Handle> filter_agg,
                                      const ViewSpec* view, size_t limit, size_t offset) const {
    return query(parse_query(q), filter_agg, view, limit, offset);
}

}  // namespace ncore
