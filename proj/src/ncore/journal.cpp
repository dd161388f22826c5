#include "ncore/journal.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ncore/crc32c.hpp"
#include "ncore/errors.hpp"

namespace fs = std::filesystem;

namespace ncore {

namespace {

constexpr size_t kMaxBody = 64u << 20;

void put_u32(std::string& out, uint32_t v) {
    out.push_back(char(v & 0xff));
    out.push_back(char((v >> 8) & 0xff));
    out.push_back(char((v >> 16) & 0xff));
    out.push_back(char((v >> 24) & 0xff));
}

uint32_t get_u32(std::string_view buf, size_t off) {
    return uint32_t(uint8_t(buf[off])) | uint32_t(uint8_t(buf[off + 1])) << 8 |
           uint32_t(uint8_t(buf[off + 2])) << 16 | uint32_t(uint8_t(buf[off + 3])) << 24;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Err::IoError, "cannot open " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

}  // namespace

std::string_view op_name(Op op) {
    switch (op) {
        case Op::CreateObject: return "create_object";
        case Op::AddDatastream: return "add_datastream";
        case Op::Tombstone: return "tombstone";
        case Op::Assert: return "assert";
        case Op::Retract: return "retract";
        case Op::RegisterAgent: return "register_agent";
        case Op::Grant: return "grant";
        case Op::Revoke: return "revoke";
        case Op::RegisterView: return "register_view";
        case Op::HarvestCheckpoint: return "harvest_checkpoint";
    }
    return "";
}

std::optional<Op> op_from_name(std::string_view name) {
    for (int i = 0; i <= int(Op::HarvestCheckpoint); ++i)
        if (op_name(Op(i)) == name) return Op(i);
    return std::nullopt;
}

std::string encode_entry_body(const JournalEntry& e) {
    nlohmann::json body{
        {"actor", e.actor.text()},
        {"op", op_name(e.op)},
        {"payload", e.payload},
        {"prev_checksum", e.prev_checksum},
        {"seq", e.seq},
        {"timestamp", e.timestamp},
    };
    return body.dump();
}

std::string encode_record(const JournalEntry& e) {
    std::string body = encode_entry_body(e);
    std::string out;
    out.reserve(body.size() + 8);
    put_u32(out, uint32_t(body.size()));
    out += body;
    put_u32(out, crc32c(body));
    return out;
}

JournalEntry decode_record(std::string_view buf, size_t& off) {
    if (buf.size() - off < 8) fail(Err::ChecksumMismatch, "truncated journal record");
    uint32_t len = get_u32(buf, off);
    if (len > kMaxBody || buf.size() - off < size_t(len) + 8)
        fail(Err::ChecksumMismatch, "truncated journal record");
    std::string_view body = buf.substr(off + 4, len);
    uint32_t stored = get_u32(buf, off + 4 + len);
    uint32_t actual = crc32c(body);
    if (stored != actual) fail(Err::ChecksumMismatch, "journal record checksum mismatch");

    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        fail(Err::ValidationFailed, "journal record body is not an object");

    JournalEntry e;
    try {
        e.seq = j.at("seq").get<uint64_t>();
        e.timestamp = j.at("timestamp").get<int64_t>();
        auto actor = Handle::parse(j.at("actor").get<std::string>());
        if (!actor) fail(Err::ValidationFailed, "bad actor handle in journal record");
        e.actor = *actor;
        auto op = op_from_name(j.at("op").get<std::string>());
        if (!op) fail(Err::ValidationFailed, "unknown journal op");
        e.op = *op;
        e.payload = j.at("payload");
        e.prev_checksum = j.at("prev_checksum").get<uint32_t>();
    } catch (const nlohmann::json::exception&) {
        fail(Err::ValidationFailed, "malformed journal record body");
    }
    e.checksum = stored;
    off += 4 + size_t(len) + 4;
    return e;
}

JournalStore::JournalStore(std::string dir, Options options)
    : dir_(std::move(dir)), opt_(options) {}

JournalStore::~JournalStore() {
    if (fd_ >= 0) {
        if (unflushed_) ::fdatasync(fd_);
        ::close(fd_);
    }
}

std::unique_ptr<JournalStore> JournalStore::open(const std::string& dir, Options options) {
    if (options.entries_per_file == 0) fail(Err::ConfigInvalid, "entries_per_file must be positive");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(Err::IoError, "cannot create journal dir " + dir);
    std::unique_ptr<JournalStore> store(new JournalStore(dir, options));
    store->recover();
    return store;
}

std::string JournalStore::file_path(uint64_t first_seq) const {
    char name[48];
    std::snprintf(name, sizeof(name), "journal-%020llu.log",
                  static_cast<unsigned long long>(first_seq));
    return dir_ + "/" + name;
}

uint64_t JournalStore::scan_segment(
    const std::string& path, uint64_t expected_first, bool is_last,
    const std::function<void(const JournalEntry&, std::string_view)>& fn,
    uint64_t* valid_end) const {
    std::string data = read_file(path);
    size_t off = 0;
    uint64_t expected = expected_first;
    while (off < data.size()) {
        size_t record_start = off;
        JournalEntry e;
        try {
            e = decode_record(data, off);
        } catch (const NcoreError& err) {
            if (is_last) {
                // Torn tail from an interrupted write: drop it. Anything bad
                // with valid data past it is real corruption.
                *valid_end = record_start;
                return expected;
            }
            fail(Err::ChecksumMismatch,
                 "journal corruption at seq " + std::to_string(expected) + " in " + path);
        }
        if (e.seq != expected)
            fail(Err::GapDetected, "journal seq gap: expected " + std::to_string(expected) +
                                       " found " + std::to_string(e.seq));
        if (fn) fn(e, std::string_view(data).substr(record_start, off - record_start));
        ++expected;
    }
    *valid_end = data.size();
    return expected;
}

void JournalStore::recover() {
    std::vector<uint64_t> firsts;
    for (const auto& ent : fs::directory_iterator(dir_)) {
        std::string name = ent.path().filename().string();
        unsigned long long first = 0;
        if (std::sscanf(name.c_str(), "journal-%20llu.log", &first) == 1)
            firsts.push_back(first);
    }
    std::sort(firsts.begin(), firsts.end());

    uint64_t expected = 1;
    uint32_t last_crc = 0;
    for (size_t i = 0; i < firsts.size(); ++i) {
        if (firsts[i] != expected)
            fail(Err::GapDetected, "journal segment sequence broken at " + file_path(firsts[i]));
        bool is_last = (i + 1 == firsts.size());
        std::string path = file_path(firsts[i]);
        uint64_t valid_end = 0;
        uint64_t next = scan_segment(
            path, expected, is_last,
            [&](const JournalEntry& e, std::string_view) {
                if (e.prev_checksum != last_crc)
                    fail(Err::ChecksumMismatch,
                         "checksum chain broken at seq " + std::to_string(e.seq));
                last_crc = e.checksum;
            },
            &valid_end);
        std::error_code ec;
        if (valid_end < fs::file_size(path, ec)) {
            fs::resize_file(path, valid_end, ec);
            if (ec) fail(Err::IoError, "cannot truncate torn journal tail in " + path);
        }
        if (!is_last && next != firsts[i] + opt_.entries_per_file)
            fail(Err::GapDetected, "journal segment " + path + " is short");
        expected = next;
    }

    committed_seq_.store(expected - 1, std::memory_order_release);
    last_checksum_ = last_crc;
}

uint32_t JournalStore::last_checksum() const {
    std::lock_guard<std::mutex> lock(write_mu_);
    return last_checksum_;
}

void JournalStore::open_segment_for_append(uint64_t first_seq) {
    if (fd_ >= 0) {
        if (unflushed_) {
            ::fdatasync(fd_);
            unflushed_ = 0;
        }
        ::close(fd_);
        fd_ = -1;
    }
    std::string path = file_path(first_seq);
    fd_ = ::open(path.c_str(), O_CREAT | O_WRONLY | O_APPEND, 0644);
    if (fd_ < 0) fail(Err::IoError, "cannot open journal segment " + path);
    fd_first_seq_ = first_seq;
}

void JournalStore::append(const JournalEntry& e) {
    std::lock_guard<std::mutex> lock(write_mu_);
    uint64_t expected = committed_seq_.load(std::memory_order_relaxed) + 1;
    if (e.seq != expected)
        fail(Err::GapDetected, "append out of order: expected seq " + std::to_string(expected));
    if (e.prev_checksum != last_checksum_)
        fail(Err::ChecksumMismatch, "append breaks the checksum chain");

    uint64_t segment_first = ((e.seq - 1) / opt_.entries_per_file) * opt_.entries_per_file + 1;
    if (fd_ < 0 || segment_first != fd_first_seq_) open_segment_for_append(segment_first);

    std::string record = encode_record(e);
    uint32_t crc = get_u32(record, record.size() - 4);

    const char* p = record.data();
    size_t left = record.size();
    while (left > 0) {
        ssize_t n = ::write(fd_, p, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail(Err::IoError, std::string("journal write failed: ") + std::strerror(errno));
        }
        p += n;
        left -= size_t(n);
    }

    ++unflushed_;
    bool flush_now = opt_.fsync == FsyncPolicy::Always ||
                     (opt_.batch_flush_every && unflushed_ >= opt_.batch_flush_every);
    if (flush_now) {
        if (::fdatasync(fd_) != 0) fail(Err::IoError, "journal fsync failed");
        unflushed_ = 0;
    }

    last_checksum_ = crc;
    committed_seq_.store(e.seq, std::memory_order_release);
}

void JournalStore::flush() {
    std::lock_guard<std::mutex> lock(write_mu_);
    if (fd_ >= 0 && unflushed_) {
        if (::fdatasync(fd_) != 0) fail(Err::IoError, "journal fsync failed");
        unflushed_ = 0;
    }
}

void JournalStore::for_each(uint64_t from, uint64_t to,
                            const std::function<void(const JournalEntry&)>& fn) const {
    uint64_t last = committed_seq_.load(std::memory_order_acquire);
    if (to == 0 || to > last) to = last;
    if (from == 0) from = 1;
    if (from > to) return;

    uint64_t segment_first = ((from - 1) / opt_.entries_per_file) * opt_.entries_per_file + 1;
    uint64_t expected = segment_first;
    std::optional<uint32_t> prev_crc;
    while (segment_first <= to) {
        std::string data = read_file(file_path(segment_first));
        size_t off = 0;
        while (off < data.size() && expected <= to) {
            JournalEntry e = decode_record(data, off);
            if (e.seq != expected)
                fail(Err::GapDetected, "journal seq gap at " + std::to_string(expected));
            if (prev_crc && e.prev_checksum != *prev_crc)
                fail(Err::ChecksumMismatch,
                     "checksum chain broken at seq " + std::to_string(e.seq));
            prev_crc = e.checksum;
            if (e.seq >= from) fn(e);
            ++expected;
        }
        segment_first += opt_.entries_per_file;
    }
    if (expected <= to)
        fail(Err::GapDetected, "journal ends at " + std::to_string(expected - 1) +
                                   " before requested " + std::to_string(to));
}

std::vector<JournalEntry> JournalStore::read(uint64_t from, uint64_t to) const {
    std::vector<JournalEntry> out;
    for_each(from, to, [&](const JournalEntry& e) { out.push_back(e); });
    return out;
}

std::string JournalStore::read_batch(uint64_t from, size_t max_entries, size_t max_bytes,
                                     uint64_t* last_included) const {
    std::string out;
    uint64_t last = 0;
    uint64_t committed = committed_seq_.load(std::memory_order_acquire);
    if (from == 0) from = 1;
    if (last_included) *last_included = 0;
    if (from > committed) return out;

    uint64_t segment_first = ((from - 1) / opt_.entries_per_file) * opt_.entries_per_file + 1;
    uint64_t expected = segment_first;
    size_t count = 0;
    while (segment_first <= committed) {
        std::string data = read_file(file_path(segment_first));
        size_t off = 0;
        while (off < data.size() && expected <= committed) {
            size_t start = off;
            JournalEntry e = decode_record(data, off);
            if (e.seq != expected)
                fail(Err::GapDetected, "journal seq gap at " + std::to_string(expected));
            ++expected;
            if (e.seq < from) continue;
            if (count && (count >= max_entries || out.size() + (off - start) > max_bytes)) {
                if (last_included) *last_included = last;
                return out;
            }
            out.append(data, start, off - start);
            last = e.seq;
            ++count;
            if (count >= max_entries) {
                if (last_included) *last_included = last;
                return out;
            }
        }
        segment_first += opt_.entries_per_file;
    }
    if (last_included) *last_included = last;
    return out;
}

}  // namespace ncore
