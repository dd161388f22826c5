#include "ncore/errors.hpp"

namespace ncore {

std::string_view machine_code(Err code) {
    switch (code) {
        case Err::UnknownActor: return "auth.unknown-actor";
        case Err::NotAuthorized: return "auth.not-authorized";
        case Err::InvariantViolation: return "object.invariant";
        case Err::NotFound: return "object.not-found";
        case Err::InvalidFormatKey: return "object.invalid-format-key";
        case Err::AggregationNotEmpty: return "object.aggregation-not-empty";
        case Err::ReadOnly: return "repo.not-leader";
        case Err::EndpointNotFound: return "graph.endpoint-not-found";
        case Err::ProviderAlreadySet: return "graph.provider-already-set";
        case Err::CycleDetected: return "graph.cycle";
        case Err::ProviderEdgeProtected: return "graph.provider-edge-protected";
        case Err::WrongKind: return "graph.wrong-kind";
        case Err::UnboundPattern: return "graph.unbound-pattern";
        case Err::BadSignature: return "auth.bad-signature";
        case Err::StaleTimestamp: return "auth.stale-timestamp";
        case Err::ReplayedNonce: return "auth.replayed-nonce";
        case Err::UnknownAgent: return "auth.unknown-agent";
        case Err::InactiveAgent: return "auth.inactive-agent";
        case Err::MalformedKey: return "auth.malformed-key";
        case Err::GrantNotFound: return "auth.grant-not-found";
        case Err::AuthMissing: return "auth.missing";
        case Err::ChecksumMismatch: return "journal.checksum-mismatch";
        case Err::GapDetected: return "journal.gap";
        case Err::ValidationFailed: return "journal.validation-failed";
        case Err::IoError: return "journal.io";
        case Err::HashMismatch: return "journal.hash-mismatch";
        case Err::Divergence: return "replication.divergence";
        case Err::ViewNotFound: return "view.not-found";
        case Err::DuplicateView: return "view.duplicate";
        case Err::NotPublic: return "view.not-public";
        case Err::SyntaxError: return "search.syntax-error";
        case Err::UnknownField: return "search.unknown-field";
        case Err::IndexUnavailable: return "search.unavailable";
        case Err::FieldNotPropagatable: return "search.field-not-propagatable";
        case Err::BadQuery: return "search.bad-query";
        case Err::UnparseableUrl: return "url.unparseable";
        case Err::NetworkFailure: return "harvest.network";
        case Err::BadRecord: return "harvest.bad-record";
        case Err::WatermarkRegression: return "harvest.watermark-regression";
        case Err::HarvestSourceNotFound: return "harvest.source-not-found";
        case Err::ConfigInvalid: return "config.invalid";
        case Err::NonEmptyDataDir: return "cli.non-empty-data-dir";
        case Err::NotAFollower: return "cli.not-a-follower";
        case Err::LaggingFollower: return "cli.lagging-follower";
        case Err::LoadIntoNonempty: return "cli.load-into-nonempty";
    }
    return "internal.unknown";
}

int http_status(Err code) {
    switch (code) {
        case Err::NotFound:
        case Err::EndpointNotFound:
        case Err::ViewNotFound:
        case Err::GrantNotFound:
        case Err::HarvestSourceNotFound: return 404;
        case Err::NotAuthorized:
        case Err::NotPublic: return 403;
        case Err::AuthMissing:
        case Err::BadSignature:
        case Err::StaleTimestamp:
        case Err::ReplayedNonce:
        case Err::UnknownAgent:
        case Err::InactiveAgent:
        case Err::UnknownActor: return 401;
        case Err::CycleDetected:
        case Err::ProviderAlreadySet:
        case Err::ProviderEdgeProtected:
        case Err::AggregationNotEmpty:
        case Err::DuplicateView:
        case Err::ReadOnly: return 409;
        case Err::IndexUnavailable: return 503;
        case Err::IoError:
        case Err::ChecksumMismatch:
        case Err::GapDetected:
        case Err::HashMismatch:
        case Err::Divergence: return 500;
        default: return 400;
    }
}

}  // namespace ncore
