#pragma once

#include <string>

#include "ncore/crypto.hpp"
#include "ncore/repository.hpp"

namespace ncore::test {

struct AgentCred {
    Handle handle;
    Keypair keys;
};

// The collection-of-collections scenario used across the suites: a library
// collection containing an editorially owned report, which contains an issue,
// which contains leaf resources; one resource is simultaneously a member of a
// personal blog aggregation that sits outside the library.
//
//   nsdl_coll  (admin)          blog (carol)
//     |- report (carol)           |- r4
//     |    |- issue (editor)
//     |    |    |- r1, r2
//     |    |- r4
//     |- branch (admin, the second direct member)
//
// A view named "nsdl" rooted at nsdl_coll is registered.
struct Whiteboard {
    AgentCred admin;
    AgentCred carol;
    AgentCred editor;

    Handle nsdl_coll;
    Handle branch;
    Handle report;
    Handle issue;
    Handle blog;
    Handle r1, r2, r4;

    std::string view_name = "nsdl";
};

// Builds the scenario in a fresh repository (bootstraps the admin).
Whiteboard build_whiteboard(Repository& repo);

Relationship member_of(Handle subject, Handle agg);
Relationship metadata_for(Handle md, Handle target);

// Minimal oai_dc/nsdl_dc document with the given title and identifier URL;
// extra is injected verbatim before the closing tag.
std::string dc_payload(const std::string& title, const std::string& url,
                       const std::string& extra = "");

}  // namespace ncore::test
