#include "support/oracle.hpp"

#include <functional>

namespace ncore::test {

namespace {

bool is_member_edge(const Relationship& r) {
    return r.predicate.tag == Predicate::Tag::MemberOf;
}

}  // namespace

std::set<Handle> oracle_transitive_members(
    const std::vector<Relationship>& edges, Handle agg) {
    std::set<Handle> out;
    std::function<void(Handle)> visit = [&](Handle container) {
        for (const Relationship& r : edges) {
            if (!is_member_edge(r) || r.object != container) continue;
            if (out.insert(r.subject).second) visit(r.subject);
        }
    };
    visit(agg);
    out.erase(agg);
    return out;
}

std::set<Handle> oracle_ancestors(const std::vector<Relationship>& edges,
                                  Handle obj) {
    std::set<Handle> out;
    std::function<void(Handle)> visit = [&](Handle child) {
        for (const Relationship& r : edges) {
            if (!is_member_edge(r) || r.subject != child) continue;
            if (out.insert(r.object).second) visit(r.object);
        }
    };
    visit(obj);
    out.erase(obj);
    return out;
}

}  // namespace ncore::test
