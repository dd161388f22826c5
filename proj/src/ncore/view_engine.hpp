#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "ncore/relation_graph.hpp"

namespace ncore {

// A named library boundary: everything under in_agg, minus everything under
// not_in_agg, optionally restricted to metadata from listed providers.
struct ViewSpec {
    std::string name;
    Handle in_agg;
    std::optional<Handle> not_in_agg;
    std::optional<std::set<Handle>> md_include;
    std::set<Handle> md_exclude;

    bool provider_passes(std::optional<Handle> provider) const;
};

nlohmann::json view_to_json(const ViewSpec& v);
ViewSpec view_from_json(const nlohmann::json& j);

// Membership in both closures implies not in the view. Tombstoned objects are
// never in a view.
std::set<Handle> resolve_view(const RelationGraph& graph, const ObjectDirectory& dir,
                              const ViewSpec& spec);

// Equivalent to membership in resolve_view but answered from ancestors(obj)
// without materializing the closure.
bool is_in_view(const RelationGraph& graph, const ObjectDirectory& dir, Handle obj,
                const ViewSpec& spec);

// Non-tombstoned metadata describing `resource` whose provider passes the
// view's include/exclude filter. Sorted ascending.
std::vector<Handle> metadata_in_view(const RelationGraph& graph, const ObjectDirectory& dir,
                                     Handle resource, const ViewSpec& spec);

}  // namespace ncore
