#pragma once

#include <stdexcept>
#include <string>

namespace rerank {

/// Machine-readable error category, mirrored into the HTTP error payloads.
enum class ErrorCode {
    domain,            // value outside an attribute domain
    kind,              // operation not valid for the attribute kind
    schema,            // unknown or missing attribute
    validation,        // malformed user input
    transient_source,  // retryable backend failure
    source,            // non-retryable backend failure
    indistinguishable, // > k identical rows, cannot be crawled apart
    no_matches,
    config,
    storage,
    not_found,
    expired,
    busy,
    auth,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::domain: return "domain_error";
    case ErrorCode::kind: return "kind_error";
    case ErrorCode::schema: return "schema_error";
    case ErrorCode::validation: return "validation_error";
    case ErrorCode::transient_source: return "transient_source_error";
    case ErrorCode::source: return "source_error";
    case ErrorCode::indistinguishable: return "indistinguishable_tuples";
    case ErrorCode::no_matches: return "no_matches";
    case ErrorCode::config: return "config_error";
    case ErrorCode::storage: return "storage_error";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::expired: return "expired";
    case ErrorCode::busy: return "busy";
    case ErrorCode::auth: return "auth_error";
    }
    return "error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string field = {})
        : std::runtime_error(message), code_(code), field_(std::move(field)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& field() const noexcept { return field_; }

private:
    ErrorCode code_;
    std::string field_;
};

} // namespace rerank
