#pragma once

#include <compare>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ncore/handle.hpp"

namespace ncore {

struct Predicate {
    enum class Tag : uint8_t { MemberOf, MetadataFor, Annotates, Custom };

    Tag tag = Tag::Custom;
    std::string name;  // only for Custom

    static Predicate member_of() { return {Tag::MemberOf, {}}; }
    static Predicate metadata_for() { return {Tag::MetadataFor, {}}; }
    static Predicate annotates() { return {Tag::Annotates, {}}; }
    // Validates [a-zA-Z][a-zA-Z0-9_]{0,63}; builtin names parse to their tags.
    static std::optional<Predicate> parse(std::string_view text);

    std::string_view text() const;
    auto operator<=>(const Predicate&) const = default;
};

// A typed directed edge among handles. memberOf and metadataFor are the
// structural predicates; everything else is context.
struct Relationship {
    Handle subject;
    Predicate predicate;
    Handle object;

    auto operator<=>(const Relationship&) const = default;
    // N-Triples-style line: "<ncore:res:1> <memberOf> <ncore:agg:2> ."
    std::string line() const;
};

struct RelationshipPattern {
    std::optional<Handle> subject;
    std::optional<Predicate> predicate;
    std::optional<Handle> object;
};

// What the graph needs to know about objects without owning them.
class ObjectDirectory {
public:
    virtual ~ObjectDirectory() = default;
    virtual bool exists(Handle h) const = 0;
    virtual bool tombstoned(Handle h) const = 0;
};

// Triple store with referential integrity, the one-provider-per-metadata rule,
// and an acyclic memberOf subgraph. Membership closures are memoized and
// invalidated wholesale on any memberOf change. Authorization is the caller's
// job; everything here is structural.
class RelationGraph {
public:
    explicit RelationGraph(const ObjectDirectory& dir) : dir_(dir) {}

    enum class AssertOutcome { Inserted, Duplicate };

    // Structural validation + insert. Throws EndpointNotFound, WrongKind,
    // ProviderAlreadySet, CycleDetected.
    AssertOutcome assert_rel(const Relationship& rel);

    // Throws NotFound, ProviderEdgeProtected (unless the tombstone path sets
    // allow_provider_retract).
    void retract(const Relationship& rel, bool allow_provider_retract = false);

    // Snapshot restore: inserts without endpoint/cycle checks. Edges asserted
    // before an endpoint was tombstoned legitimately outlive those checks.
    void insert_unchecked(const Relationship& rel);

    bool contains(const Relationship& rel) const;

    std::set<Handle> direct_members(Handle agg) const;

    // Least fixpoint of membership reachability; the aggregation itself is
    // excluded, intermediate aggregations included. Memoized.
    std::shared_ptr<const std::set<Handle>> transitive_members(Handle agg) const;

    // All aggregations/providers that obj is directly or transitively under.
    std::set<Handle> ancestors(Handle obj) const;

    std::vector<Relationship> find(const RelationshipPattern& pattern) const;

    // The unique memberOf target of kind MetadataProvider, when set.
    std::optional<Handle> provider_of(Handle md) const;

    // Inbound metadataFor edges (metadata describing the given object).
    std::set<Handle> metadata_for(Handle target) const;

    // Outgoing memberOf targets.
    std::set<Handle> parents_of(Handle h) const;

    // Would adding subject -> agg close a memberOf cycle?
    bool would_cycle(Handle subject, Handle agg) const;

    const std::set<Relationship>& all() const { return triples_; }
    size_t size() const { return triples_.size(); }

    // Ties the closure cache to the journal position for observability.
    void set_generation(uint64_t seq);
    uint64_t generation() const;

private:
    void invalidate_closures();
    void index_insert(const Relationship& rel);
    void index_erase(const Relationship& rel);
    void check_endpoints(const Relationship& rel) const;

    const ObjectDirectory& dir_;
    std::set<Relationship> triples_;
    std::map<Handle, std::set<Relationship>> by_object_;   // object -> triples
    std::map<Handle, std::set<Handle>> members_;           // agg -> direct member subjects
    std::map<Handle, std::set<Handle>> parents_;           // subject -> memberOf targets
    std::map<Handle, std::set<Handle>> described_by_;      // target -> metadata handles
    std::map<Handle, Handle> provider_;                    // metadata -> its provider

    mutable std::mutex cache_mu_;
    mutable std::map<Handle, std::shared_ptr<const std::set<Handle>>> closure_cache_;
    uint64_t generation_ = 0;
};

}  // namespace ncore
