#include "ncore/relation_graph.hpp"

#include <algorithm>

#include "ncore/errors.hpp"

namespace ncore {

namespace {

bool valid_custom_name(std::string_view s) {
    if (s.empty() || s.size() > 64) return false;
    if (!((s[0] >= 'a' && s[0] <= 'z') || (s[0] >= 'A' && s[0] <= 'Z'))) return false;
    for (char c : s.substr(1)) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                  (c >= '0' && c <= '9') || c == '_';
        if (!ok) return false;
    }
    return true;
}

}  // namespace

std::optional<Predicate> Predicate::parse(std::string_view text) {
    if (text == "memberOf") return member_of();
    if (text == "metadataFor") return metadata_for();
    if (text == "annotates") return annotates();
    if (!valid_custom_name(text)) return std::nullopt;
    return Predicate{Tag::Custom, std::string(text)};
}

std::string_view Predicate::text() const {
    switch (tag) {
        case Tag::MemberOf: return "memberOf";
        case Tag::MetadataFor: return "metadataFor";
        case Tag::Annotates: return "annotates";
        case Tag::Custom: return name;
    }
    return name;
}

std::string Relationship::line() const {
    std::string out;
    out.reserve(64);
    out += '<';
    out += subject.text();
    out += "> <";
    out += predicate.text();
    out += "> <";
    out += object.text();
    out += "> .";
    return out;
}

void RelationGraph::check_endpoints(const Relationship& rel) const {
    for (Handle h : {rel.subject, rel.object}) {
        if (!dir_.exists(h) || dir_.tombstoned(h))
            fail(Err::EndpointNotFound, "relationship endpoint unavailable", h.text());
    }
}

bool RelationGraph::would_cycle(Handle subject, Handle agg) const {
    if (subject == agg) return true;
    // Walk upward from the target; a path back to the subject means the new
    // edge would close a loop.
    std::vector<Handle> stack{agg};
    std::set<Handle> seen{agg};
    while (!stack.empty()) {
        Handle h = stack.back();
        stack.pop_back();
        auto it = parents_.find(h);
        if (it == parents_.end()) continue;
        for (Handle parent : it->second) {
            if (parent == subject) return true;
            if (seen.insert(parent).second) stack.push_back(parent);
        }
    }
    return false;
}

RelationGraph::AssertOutcome RelationGraph::assert_rel(const Relationship& rel) {
    if (rel.predicate.tag == Predicate::Tag::Custom &&
        !valid_custom_name(rel.predicate.name))
        fail(Err::InvariantViolation, "bad custom predicate name");
    check_endpoints(rel);

    if (rel.predicate.tag == Predicate::Tag::MemberOf) {
        if (!rel.object.is_aggregation_like())
            fail(Err::WrongKind, "memberOf target must be an aggregation", rel.object.text());
    } else if (rel.predicate.tag == Predicate::Tag::MetadataFor) {
        if (rel.subject.kind != Kind::Metadata)
            fail(Err::WrongKind, "metadataFor subject must be metadata", rel.subject.text());
        if (rel.object.kind != Kind::Resource && rel.object.kind != Kind::Aggregation)
            fail(Err::WrongKind, "metadataFor target must be a resource or aggregation",
                 rel.object.text());
    }

    if (triples_.count(rel)) return AssertOutcome::Duplicate;

    if (rel.predicate.tag == Predicate::Tag::MemberOf) {
        if (rel.subject.kind == Kind::Metadata &&
            rel.object.kind == Kind::MetadataProvider && provider_.count(rel.subject))
            fail(Err::ProviderAlreadySet, "metadata already has a provider",
                 rel.subject.text());
        if (rel.subject.is_aggregation_like() && would_cycle(rel.subject, rel.object))
            fail(Err::CycleDetected, "membership edge would create a cycle",
                 rel.subject.text());
    }

    triples_.insert(rel);
    index_insert(rel);
    if (rel.predicate.tag == Predicate::Tag::MemberOf) invalidate_closures();
    return AssertOutcome::Inserted;
}

void RelationGraph::retract(const Relationship& rel, bool allow_provider_retract) {
    auto it = triples_.find(rel);
    if (it == triples_.end()) fail(Err::NotFound, "no such relationship");
    if (!allow_provider_retract && rel.predicate.tag == Predicate::Tag::MemberOf &&
        rel.subject.kind == Kind::Metadata && rel.object.kind == Kind::MetadataProvider)
        fail(Err::ProviderEdgeProtected, "provider edges only go away with the metadata",
             rel.subject.text());
    triples_.erase(it);
    index_erase(rel);
    if (rel.predicate.tag == Predicate::Tag::MemberOf) invalidate_closures();
}

bool RelationGraph::contains(const Relationship& rel) const {
    return triples_.count(rel) != 0;
}

void RelationGraph::insert_unchecked(const Relationship& rel) {
    if (!triples_.insert(rel).second) return;
    index_insert(rel);
    if (rel.predicate.tag == Predicate::Tag::MemberOf) invalidate_closures();
}

void RelationGraph::index_insert(const Relationship& rel) {
    by_object_[rel.object].insert(rel);
    if (rel.predicate.tag == Predicate::Tag::MemberOf) {
        members_[rel.object].insert(rel.subject);
        parents_[rel.subject].insert(rel.object);
        if (rel.subject.kind == Kind::Metadata && rel.object.kind == Kind::MetadataProvider)
            provider_.emplace(rel.subject, rel.object);
    } else if (rel.predicate.tag == Predicate::Tag::MetadataFor) {
        described_by_[rel.object].insert(rel.subject);
    }
}

void RelationGraph::index_erase(const Relationship& rel) {
    auto erase_from = [](auto& map, Handle key, const auto& value) {
        auto it = map.find(key);
        if (it == map.end()) return;
        it->second.erase(value);
        if (it->second.empty()) map.erase(it);
    };
    erase_from(by_object_, rel.object, rel);
    if (rel.predicate.tag == Predicate::Tag::MemberOf) {
        erase_from(members_, rel.object, rel.subject);
        erase_from(parents_, rel.subject, rel.object);
        if (rel.subject.kind == Kind::Metadata && rel.object.kind == Kind::MetadataProvider)
            provider_.erase(rel.subject);
    } else if (rel.predicate.tag == Predicate::Tag::MetadataFor) {
        erase_from(described_by_, rel.object, rel.subject);
    }
}

std::set<Handle> RelationGraph::direct_members(Handle agg) const {
    if (!agg.is_aggregation_like())
        fail(Err::WrongKind, "not an aggregation", agg.text());
    if (!dir_.exists(agg)) fail(Err::NotFound, "no such aggregation", agg.text());
    auto it = members_.find(agg);
    if (it == members_.end()) return {};
    return it->second;
}

std::shared_ptr<const std::set<Handle>> RelationGraph::transitive_members(
    Handle agg) const {
    if (!agg.is_aggregation_like())
        fail(Err::WrongKind, "not an aggregation", agg.text());
    if (!dir_.exists(agg)) fail(Err::NotFound, "no such aggregation", agg.text());

    {
        std::lock_guard<std::mutex> lock(cache_mu_);
        auto it = closure_cache_.find(agg);
        if (it != closure_cache_.end()) return it->second;
    }

    auto closure = std::make_shared<std::set<Handle>>();
    std::vector<Handle> stack{agg};
    std::set<Handle> visited{agg};
    while (!stack.empty()) {
        Handle h = stack.back();
        stack.pop_back();
        auto mit = members_.find(h);
        if (mit == members_.end()) continue;
        for (Handle m : mit->second) {
            if (!closure->insert(m).second) continue;
            if (m.is_aggregation_like() && visited.insert(m).second) {
                // Absorb an already-memoized sub-closure instead of walking it.
                std::shared_ptr<const std::set<Handle>> sub;
                {
                    std::lock_guard<std::mutex> lock(cache_mu_);
                    auto cit = closure_cache_.find(m);
                    if (cit != closure_cache_.end()) sub = cit->second;
                }
                if (sub)
                    closure->insert(sub->begin(), sub->end());
                else
                    stack.push_back(m);
            }
        }
    }
    closure->erase(agg);

    std::shared_ptr<const std::set<Handle>> result = closure;
    std::lock_guard<std::mutex> lock(cache_mu_);
    auto [it, inserted] = closure_cache_.emplace(agg, result);
    return it->second;
}

std::set<Handle> RelationGraph::ancestors(Handle obj) const {
    if (!dir_.exists(obj)) fail(Err::NotFound, "no such object", obj.text());
    std::set<Handle> out;
    std::vector<Handle> stack{obj};
    while (!stack.empty()) {
        Handle h = stack.back();
        stack.pop_back();
        auto it = parents_.find(h);
        if (it == parents_.end()) continue;
        for (Handle parent : it->second)
            if (out.insert(parent).second) stack.push_back(parent);
    }
    return out;
}

std::vector<Relationship> RelationGraph::find(const RelationshipPattern& p) const {
    if (!p.subject && !p.predicate && !p.object)
        fail(Err::UnboundPattern, "at least one of subject, predicate, object required");

    auto matches = [&](const Relationship& r) {
        if (p.subject && r.subject != *p.subject) return false;
        if (p.predicate && r.predicate != *p.predicate) return false;
        if (p.object && r.object != *p.object) return false;
        return true;
    };

    std::vector<Relationship> out;
    if (p.subject) {
        // Triples sort by subject first, so this is a contiguous range.
        Relationship lo{*p.subject, Predicate{Predicate::Tag::MemberOf, {}}, Handle{}};
        for (auto it = triples_.lower_bound(lo);
             it != triples_.end() && it->subject == *p.subject; ++it)
            if (matches(*it)) out.push_back(*it);
    } else if (p.object) {
        auto it = by_object_.find(*p.object);
        if (it != by_object_.end())
            for (const auto& r : it->second)
                if (matches(r)) out.push_back(r);
        std::sort(out.begin(), out.end());
    } else {
        for (const auto& r : triples_)
            if (matches(r)) out.push_back(r);
    }
    return out;
}

std::optional<Handle> RelationGraph::provider_of(Handle md) const {
    auto it = provider_.find(md);
    if (it == provider_.end()) return std::nullopt;
    return it->second;
}

std::set<Handle> RelationGraph::metadata_for(Handle target) const {
    auto it = described_by_.find(target);
    if (it == described_by_.end()) return {};
    return it->second;
}

std::set<Handle> RelationGraph::parents_of(Handle h) const {
    auto it = parents_.find(h);
    if (it == parents_.end()) return {};
    return it->second;
}

void RelationGraph::invalidate_closures() {
    std::lock_guard<std::mutex> lock(cache_mu_);
    closure_cache_.clear();
}

void RelationGraph::set_generation(uint64_t seq) {
    std::lock_guard<std::mutex> lock(cache_mu_);
    generation_ = seq;
}

uint64_t RelationGraph::generation() const {
    std::lock_guard<std::mutex> lock(cache_mu_);
    return generation_;
}

}  // namespace ncore
