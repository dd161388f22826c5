#pragma once

#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "ncore/journal.hpp"
#include "ncore/objects.hpp"
#include "ncore/relation_graph.hpp"
#include "ncore/time.hpp"
#include "ncore/view_engine.hpp"

namespace ncore {

enum class Capability : uint8_t { ManageMembership, WriteMetadata };

std::string_view capability_name(Capability c);
std::optional<Capability> capability_from_name(std::string_view s);

struct Grant {
    Handle grantor;
    Handle grantee;
    Handle scope;
    Capability capability = Capability::ManageMembership;
    Timestamp created = 0;
};

// Delegation key: one grant per (grantee, scope, capability).
struct GrantKey {
    Handle grantee;
    Handle scope;
    Capability capability;
    auto operator<=>(const GrantKey&) const = default;
};

// A registered OAI-PMH upstream and the engine objects it feeds. The record
// map remembers which metadata handle each upstream identifier produced so
// re-harvests update instead of duplicating.
struct HarvestSource {
    std::string id;
    std::string base_url;
    std::string set_spec;        // empty means whole repository
    std::string metadata_prefix;
    std::string organization;
    std::string schedule;        // cron-like; empty means manual runs only
    std::string last_successful_until;  // OAI datestamp; empty before first success
    Handle provider;
    Handle resource_agg;
    Handle metadata_agg;
    std::map<std::string, Handle> records;  // OAI identifier -> metadata handle
};

nlohmann::json source_to_json(const HarvestSource& s);
HarvestSource source_from_json(const nlohmann::json& j);

struct RepoStats {
    uint64_t resources = 0, metadata = 0, aggregations = 0, providers = 0, agents = 0;
    uint64_t tombstoned = 0;
    uint64_t triples = 0, grants = 0, views = 0, sources = 0;
    uint64_t last_seq = 0;
    Timestamp last_timestamp = 0;
};

struct ResourceInit {
    std::optional<std::string> url;  // normalized before journaling
    std::optional<InlineContent> inline_content;
};

struct MetadataInit {
    Handle target;
    std::map<std::string, std::string> datastreams;
};

struct RepositoryOptions {
    std::string data_dir;
    JournalStore::Options journal;
    uint64_t checkpoint_interval = 1000;  // state-hash cadence, entries
    Clock clock = system_now;
    bool follower = false;
    size_t inline_payload_cap = 16u << 20;
};

nlohmann::json rel_to_json(const Relationship& rel);
Relationship rel_from_json(const nlohmann::json& j);

// The engine: all state, all rules. Every mutation validates against current
// state, becomes a journal entry carrying every minted value, and is applied
// by the same pure code that replay uses. Reads take a shared lock and see
// committed state only.
class Repository : public ObjectDirectory {
public:
    static std::unique_ptr<Repository> open(RepositoryOptions options);
    ~Repository() override;

    // ObjectDirectory
    bool exists(Handle h) const override;
    bool tombstoned(Handle h) const override;

    // --- reads ---
    DigitalObject get_object(Handle h) const;
    std::optional<DigitalObject> try_get_object(Handle h) const;
    std::set<Handle> direct_members(Handle agg) const;
    std::set<Handle> transitive_members(Handle agg) const;
    std::set<Handle> ancestors(Handle obj) const;
    std::vector<Relationship> find(const RelationshipPattern& pattern) const;
    std::optional<Handle> provider_of(Handle md) const;
    std::set<Handle> metadata_for(Handle target) const;

    ViewSpec get_view(const std::string& name) const;
    std::vector<ViewSpec> list_views() const;
    std::set<Handle> resolve_view(const ViewSpec& spec) const;
    std::set<Handle> resolve_view(const std::string& name) const;
    bool is_in_view(Handle obj, const ViewSpec& spec) const;
    std::vector<Handle> metadata_in_view(Handle resource, const ViewSpec& spec) const;

    bool is_admin(Handle agent) const;
    bool is_active_agent(Handle agent) const;
    // Owner, grant, or admin.
    bool authorized(Handle agent, Capability cap, Handle scope) const;
    std::vector<Grant> list_grants() const;

    std::optional<Handle> resource_by_url(const std::string& normalized_url) const;
    std::vector<HarvestSource> list_sources() const;
    std::optional<HarvestSource> get_source(const std::string& id) const;

    // Iterates every object (tombstones included) under the read lock; fn
    // must not call back into the repository.
    void for_each_object(const std::function<void(const DigitalObject&)>& fn) const;

    RepoStats stats() const;
    std::string state_hash() const;
    void serialize_state(const std::function<void(std::string_view)>& sink) const;
    uint64_t last_seq() const { return journal_->last_seq(); }
    Timestamp last_timestamp() const;
    bool is_follower() const;

    // Full-state invariant check; returns human-readable violations (empty
    // when healthy).
    std::vector<std::string> validate() const;

    // Blocks until last_seq() >= min_seq or the timeout passes; returns the
    // current last seq either way. Drives replication long-polling.
    uint64_t wait_for_seq(uint64_t min_seq, int timeout_ms) const;

    const JournalStore& journal() const { return *journal_; }
    // Batch of raw journal records for the replication feed.
    std::string read_entry_batch(uint64_t from, size_t max_entries, size_t max_bytes,
                                 uint64_t* last_included) const;
    // Retained state-hash checkpoint at exactly `seq`, if any.
    std::optional<std::string> checkpoint_hash(uint64_t seq) const;
    // Highest retained checkpoint at or below `upto`: (seq, hash).
    std::optional<std::pair<uint64_t, std::string>> latest_checkpoint(uint64_t upto) const;
    uint64_t checkpoint_interval() const { return opt_.checkpoint_interval; }

    // --- mutations (leader only; follower throws ReadOnly) ---

    // First entry of a fresh repository: the admin agent registers itself.
    Handle bootstrap_admin(const std::string& display_name, const std::string& public_key);

    Handle register_agent(Handle actor, const std::string& display_name,
                          const std::string& public_key, bool admin = false);
    Handle create_resource(Handle actor, const ResourceInit& init);
    Handle create_metadata(Handle actor, const MetadataInit& init);
    Handle create_aggregation(Handle actor, bool metadata_provider, const std::string& label,
                              Handle owner);
    void add_datastream(Handle actor, Handle md, const std::string& key,
                        const std::string& payload);
    // False when the object was already tombstoned (idempotent).
    bool tombstone(Handle actor, Handle h);
    // False when the triple already existed (idempotent, no journal entry).
    bool assert_rel(Handle actor, const Relationship& rel);
    void retract_rel(Handle actor, const Relationship& rel);
    // False when an identical grant existed (idempotent).
    bool add_grant(Handle actor, Handle grantee, Handle scope, Capability cap);
    void revoke_grant(Handle actor, Handle grantee, Handle scope, Capability cap);
    void register_view(Handle actor, const ViewSpec& spec);

    // Registration and progress of harvest sources ride one journal op; the
    // payload is a partial upsert.
    void upsert_source(Handle actor, const HarvestSource& source);
    void harvest_checkpoint(Handle actor, const std::string& source_id,
                            const std::string& watermark,
                            const std::map<std::string, Handle>& record_delta);

    // Follower ingestion: decode, chain-check, persist, and apply records
    // produced by a leader. Returns the number of entries applied.
    size_t apply_replicated(std::string_view batch);

    void promote_to_leader();

    // Re-creates a dumped state as journal entries in this empty repository,
    // then verifies the serialized result is byte-identical to the input.
    void import_state(const std::string& dump_text);

    // Snapshot files live under <data_dir>/snapshots.
    std::string write_snapshot() const;

private:
    explicit Repository(RepositoryOptions options);

    // State mutated only under unique lock.
    struct State;

    void replay_all();
    uint64_t maybe_load_snapshot();
    void install_state(const std::string& text);
    void apply_entry(const JournalEntry& e);
    void post_apply(const JournalEntry& e);
    JournalEntry make_entry(Handle actor, Op op, nlohmann::json payload);
    JournalEntry make_entry_at(Handle actor, Op op, nlohmann::json payload, Timestamp ts);
    void append_and_apply(JournalEntry e);
    Handle mint(Kind kind);
    void require_leader() const;
    void require_active(Handle actor) const;
    void require_admin(Handle actor) const;
    Handle owner_of_locked(Handle scope) const;
    bool authorized_locked(Handle agent, Capability cap, Handle scope) const;
    bool is_admin_locked(Handle agent) const;
    bool is_active_locked(Handle agent) const;
    const DigitalObject& get_locked(Handle h) const;
    DigitalObject& get_mutable(Handle h);
    bool exists_locked(Handle h) const;
    bool tombstoned_locked(Handle h) const;
    std::vector<Relationship> tombstone_retractions(Handle h) const;
    void validate_datastreams(const std::map<std::string, std::string>& streams) const;
    void check_assert(Handle actor, const Relationship& rel) const;
    void serialize_state_locked(const std::function<void(std::string_view)>& sink) const;
    std::string state_hash_locked() const;
    RepoStats stats_locked() const;

    RepositoryOptions opt_;
    std::unique_ptr<JournalStore> journal_;

    mutable std::shared_mutex mu_;
    std::map<Handle, DigitalObject> objects_;
    std::unique_ptr<RelationGraph> graph_;
    std::map<GrantKey, Grant> grants_;
    std::map<std::string, ViewSpec> views_;
    std::map<std::string, HarvestSource> sources_;
    std::set<Handle> admins_;
    std::map<std::string, Handle> url_index_;  // normalized url -> first resource
    uint64_t next_serial_ = 1;
    uint64_t applied_seq_ = 0;
    Timestamp last_ts_ = 0;
    bool follower_ = false;
    std::map<uint64_t, std::string> checkpoints_;  // seq -> state hash

    mutable std::mutex seq_mu_;
    mutable std::condition_variable seq_cv_;

    // Directory adapter that reads objects_ without locking; safe because the
    // graph is only consulted while the repository lock is already held.
    struct DirView;
    std::unique_ptr<DirView> dir_view_;
};

}  // namespace ncore
