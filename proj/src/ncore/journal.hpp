#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ncore/handle.hpp"
#include "ncore/time.hpp"

namespace ncore {

enum class Op : uint8_t {
    CreateObject,
    AddDatastream,
    Tombstone,
    Assert,
    Retract,
    RegisterAgent,
    Grant,
    Revoke,
    RegisterView,
    HarvestCheckpoint,
};

std::string_view op_name(Op op);
std::optional<Op> op_from_name(std::string_view name);

// One mutation. The payload carries every engine-minted value (handles,
// timestamps) so replay never consults a clock or counter.
struct JournalEntry {
    uint64_t seq = 0;
    Timestamp timestamp = 0;
    Handle actor;
    Op op = Op::CreateObject;
    nlohmann::json payload;
    uint32_t prev_checksum = 0;  // trailer checksum of seq-1; 0 for seq 1
    uint32_t checksum = 0;       // CRC-32C of the serialized body, filled on encode/decode
};

// Canonical JSON body bytes (sorted keys, compact). The checksum chain is
// computed over exactly these bytes.
std::string encode_entry_body(const JournalEntry& e);

// On-disk record: u32 body length | body | u32 CRC-32C, little-endian.
std::string encode_record(const JournalEntry& e);

// Decodes one record at `off`, advancing it. Verifies the trailer checksum.
// Throws ChecksumMismatch / ValidationFailed on bad bytes.
JournalEntry decode_record(std::string_view buf, size_t& off);

// Append-only segmented log. One file per `entries_per_file` entries; the
// last file's torn tail is truncated on open, corruption anywhere else is an
// error. Single writer; readers see only acknowledged entries.
class JournalStore {
public:
    enum class FsyncPolicy { Always, Batch };

    struct Options {
        uint64_t entries_per_file = 1ull << 20;
        FsyncPolicy fsync = FsyncPolicy::Always;
        uint64_t batch_flush_every = 64;
    };

    static std::unique_ptr<JournalStore> open(const std::string& dir, Options options);
    ~JournalStore();

    JournalStore(const JournalStore&) = delete;
    JournalStore& operator=(const JournalStore&) = delete;

    uint64_t last_seq() const { return committed_seq_.load(std::memory_order_acquire); }
    uint32_t last_checksum() const;

    // Requires e.seq == last_seq()+1 and e.prev_checksum == last_checksum().
    // Durable per the fsync policy before returning.
    void append(const JournalEntry& e);

    // Entries [from, to]; to == 0 means through the last committed entry.
    // Verifies the checksum chain across the range it reads.
    void for_each(uint64_t from, uint64_t to,
                  const std::function<void(const JournalEntry&)>& fn) const;
    std::vector<JournalEntry> read(uint64_t from, uint64_t to = 0) const;

    // Raw record bytes starting at `from`, capped by count and size; the wire
    // format of the replication feed. Returns the last seq included.
    std::string read_batch(uint64_t from, size_t max_entries, size_t max_bytes,
                           uint64_t* last_included) const;

    void flush();

private:
    JournalStore(std::string dir, Options options);
    void recover();
    std::string file_path(uint64_t first_seq) const;
    void open_segment_for_append(uint64_t first_seq);
    // Scans one segment, calling fn with each record's bytes; returns the
    // offset past the last good record. expected_first is the seq the segment
    // must start at.
    uint64_t scan_segment(const std::string& path, uint64_t expected_first, bool is_last,
                          const std::function<void(const JournalEntry&, std::string_view)>& fn,
                          uint64_t* valid_end) const;

    std::string dir_;
    Options opt_;

    mutable std::mutex write_mu_;
    int fd_ = -1;
    uint64_t fd_first_seq_ = 0;
    uint64_t unflushed_ = 0;
    uint32_t last_checksum_ = 0;
    std::atomic<uint64_t> committed_seq_{0};
};

}  // namespace ncore
