#pragma once

#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "ncore/dc.hpp"
#include "ncore/handle.hpp"
#include "ncore/query_parser.hpp"
#include "ncore/repository.hpp"
#include "ncore/view_engine.hpp"

namespace ncore {

// Fields an aggregation may push down to its transitive members.
const std::set<std::string>& propagatable_fields();

struct SearchHit {
    Handle resource;
    double score = 0.0;
    std::string title;        // first title value visible to the query
    std::string description;  // first description value, truncated
};

struct SearchResults {
    uint64_t total = 0;  // matches before limit/offset
    std::vector<SearchHit> hits;
};

// In-memory fielded index over live resources. Documents are rebuilt from
// repository state; the journal tells the updater which documents are stale.
// Queries run under a shared lock against the fully swapped-in state, so
// readers never observe a half-applied update.
class SearchIndex {
public:
    explicit SearchIndex(const Repository& repo);

    // Drops everything and reindexes every live resource.
    void rebuild();

    // Applies journal entries after the cursor, through `upto` (0 = committed
    // tip). Affected documents are rebuilt from current repository state, so
    // converging on the tip yields the same index as rebuild().
    void update_from_journal(uint64_t upto = 0);

    uint64_t cursor() const;
    bool ready() const;

    // Configures which DC fields `agg` pushes down to members. Throws
    // NotFound for unknown aggregations, FieldNotPropagatable outside the
    // allowed set. Replaces any previous configuration for the aggregation;
    // empty set removes it.
    void set_propagation(Handle agg, const std::set<std::string>& fields);
    std::map<Handle, std::set<std::string>> propagation() const;

    // BM25-ranked evaluation (k1=1.2, b=0.75), ties broken by serial
    // ascending. filter_agg restricts results to the aggregation's transitive
    // members without changing scores. A view restricts results to the view
    // and lets only passing providers' metadata contribute fields.
    SearchResults query(const QueryNode& ast, std::optional<Handle> filter_agg,
                        const ViewSpec* view, size_t limit, size_t offset) const;

    SearchResults query_text(std::string_view q, std::optional<Handle> filter_agg,
                             const ViewSpec* view, size_t limit, size_t offset) const;

    size_t doc_count() const;

private:
    // One metadata object's (or the resource body's) contribution.
    struct Bundle {
        Handle provider;   // kNoHandle for the body bundle
        Handle source_md;  // kNoHandle for the body bundle
        bool propagated = false;
        std::map<std::string, std::vector<std::string>> tokens;
        std::map<std::string, std::string> first_values;
    };

    struct Doc {
        Handle resource;
        std::vector<Bundle> bundles;
        std::map<std::string, size_t> field_len;  // tokens per field, all bundles
    };

    void rebuild_locked(uint64_t seq);
    void apply_entries_locked(uint64_t upto);
    void index_doc(uint64_t serial);    // build or replace from repository state
    void remove_doc(uint64_t serial);
    Doc build_doc(Handle resource) const;
    void add_postings(const Doc& doc, uint64_t serial);
    void erase_postings(const Doc& doc, uint64_t serial);
    std::set<uint64_t> affected_resources(const JournalEntry& e) const;
    std::set<uint64_t> resources_under(Handle h) const;

    struct EvalContext;
    std::map<uint64_t, double> eval(const QueryNode& node, const EvalContext& ctx) const;
    std::map<uint64_t, double> eval_leaf(const QueryNode& node, const EvalContext& ctx) const;
    double bm25(double tf, double df, double doc_len, const std::string& field) const;

    const Repository& repo_;

    mutable std::shared_mutex mu_;
    bool ready_ = false;
    uint64_t cursor_ = 0;
    std::map<uint64_t, Doc> docs_;  // resource serial -> doc
    // field -> term -> docs containing it (any bundle; view-independent)
    std::map<std::string, std::map<std::string, std::set<uint64_t>>> postings_;
    std::map<std::string, size_t> field_total_len_;
    std::map<std::string, size_t> field_doc_count_;  // docs with a non-empty field
    std::map<Handle, std::set<std::string>> propagation_;
};

}  // namespace ncore
