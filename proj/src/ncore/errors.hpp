#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ncore {

// Every engine failure carries exactly one of these. The API layer maps each
// code to a stable "<area>.<cause>" machine string plus an HTTP status; the
// mapping lives in errors.cpp and is part of the wire contract.
enum class Err {
    // core-model
    UnknownActor,
    NotAuthorized,
    InvariantViolation,
    NotFound,
    InvalidFormatKey,
    AggregationNotEmpty,
    ReadOnly,  // follower received a mutation
    // relation-graph
    EndpointNotFound,
    ProviderAlreadySet,
    CycleDetected,
    ProviderEdgeProtected,
    WrongKind,
    UnboundPattern,
    // policy-auth
    BadSignature,
    StaleTimestamp,
    ReplayedNonce,
    UnknownAgent,
    InactiveAgent,
    MalformedKey,
    GrantNotFound,
    AuthMissing,
    // journal-store
    ChecksumMismatch,
    GapDetected,
    ValidationFailed,
    IoError,
    HashMismatch,
    Divergence,
    // view-engine
    ViewNotFound,
    DuplicateView,
    NotPublic,
    // search
    SyntaxError,
    UnknownField,
    IndexUnavailable,
    FieldNotPropagatable,
    BadQuery,
    // oai / harvest
    UnparseableUrl,
    NetworkFailure,
    BadRecord,
    WatermarkRegression,
    HarvestSourceNotFound,
    // cli / config
    ConfigInvalid,
    NonEmptyDataDir,
    NotAFollower,
    LaggingFollower,
    LoadIntoNonempty,
};

class NcoreError : public std::runtime_error {
public:
    NcoreError(Err code, std::string message, std::string handle = {})
        : std::runtime_error(std::move(message)), code_(code), handle_(std::move(handle)) {}

    Err code() const { return code_; }
    // Offending handle text, when one applies.
    const std::string& handle() const { return handle_; }

private:
    Err code_;
    std::string handle_;
};

// "<area>.<cause>" string for the API error body.
std::string_view machine_code(Err code);
int http_status(Err code);

[[noreturn]] inline void fail(Err code, std::string message, std::string handle = {}) {
    throw NcoreError(code, std::move(message), std::move(handle));
}

}  // namespace ncore
