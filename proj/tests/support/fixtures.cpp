#include "support/fixtures.hpp"

namespace ncore::test {

Relationship member_of(Handle subject, Handle agg) {
    return Relationship{subject, Predicate::member_of(), agg};
}

Relationship metadata_for(Handle md, Handle target) {
    return Relationship{md, Predicate::metadata_for(), target};
}

Whiteboard build_whiteboard(Repository& repo) {
    Whiteboard w;

    w.admin.keys = generate_keypair();
    w.admin.handle = repo.bootstrap_admin("library admin", w.admin.keys.public_key);
    w.carol.keys = generate_keypair();
    w.carol.handle =
        repo.register_agent(w.admin.handle, "carol", w.carol.keys.public_key);
    w.editor.keys = generate_keypair();
    w.editor.handle =
        repo.register_agent(w.admin.handle, "editor in chief", w.editor.keys.public_key);

    w.nsdl_coll =
        repo.create_aggregation(w.admin.handle, false, "library collection", w.admin.handle);
    w.branch =
        repo.create_aggregation(w.admin.handle, false, "science branch", w.admin.handle);
    w.report =
        repo.create_aggregation(w.admin.handle, false, "whiteboard report", w.carol.handle);
    w.issue = repo.create_aggregation(w.admin.handle, false, "issue 42", w.editor.handle);
    w.blog = repo.create_aggregation(w.admin.handle, false, "carol's blog", w.carol.handle);

    w.r1 = repo.create_resource(w.editor.handle,
                                {.url = "http://example.edu/articles/whiteboards"});
    w.r2 = repo.create_resource(w.editor.handle,
                                {.url = "http://example.edu/articles/erasers"});
    w.r4 = repo.create_resource(w.carol.handle,
                                {.url = "http://example.edu/blog/classroom-video"});

    // Each edge is asserted by an agent with authority over its target.
    repo.assert_rel(w.editor.handle, member_of(w.r1, w.issue));
    repo.assert_rel(w.editor.handle, member_of(w.r2, w.issue));
    repo.assert_rel(w.carol.handle, member_of(w.issue, w.report));
    repo.assert_rel(w.carol.handle, member_of(w.r4, w.report));
    repo.assert_rel(w.carol.handle, member_of(w.r4, w.blog));
    repo.assert_rel(w.admin.handle, member_of(w.report, w.nsdl_coll));
    repo.assert_rel(w.admin.handle, member_of(w.branch, w.nsdl_coll));

    ViewSpec view;
    view.name = w.view_name;
    view.in_agg = w.nsdl_coll;
    repo.register_view(w.admin.handle, view);

    return w;
}

std::string dc_payload(const std::string& title, const std::string& url,
                       const std::string& extra) {
    std::string out;
    out += "<nsdl_dc xmlns:dc=\"http://purl.org/dc/elements/1.1/\">";
    out += "<dc:title>" + title + "</dc:title>";
    if (!url.empty()) out += "<dc:identifier>" + url + "</dc:identifier>";
    out += extra;
    out += "</nsdl_dc>";
    return out;
}

}  // namespace ncore::test
