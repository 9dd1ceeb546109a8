#pragma once

#include <stdexcept>
#include <string>

namespace gdfo {

// Error taxonomy. Everything user-facing derives from Error so callers can
// catch the whole family or a specific kind.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/width conflicts between tensors, prompts, or projections.
struct DimensionError : Error {
    using Error::Error;
};

// A caller violated an operation's precondition (missing grad, length
// mismatch, label out of range, ...).
struct ContractError : Error {
    using Error::Error;
};

// Invalid configuration values (population size < 2, alpha outside [0,1], ...).
struct ConfigError : Error {
    using Error::Error;
};

// API misuse that is only detectable at runtime (double backward, ask/tell
// protocol violations).
struct UsageError : Error {
    using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
    using Error::Error;
};

// Token id outside the vocabulary.
struct VocabError : Error {
    using Error::Error;
};

// Malformed wire messages or framing violations.
struct ProtocolError : Error {
    using Error::Error;
};

// The metered API call budget is exhausted.
struct BudgetError : Error {
    using Error::Error;
};

// Transport/service failures (bind, connect, teacher-side faults).
struct ServiceError : Error {
    using Error::Error;
};

// Teacher pre-training failed to reach its accuracy bar.
struct PretrainError : Error {
    using Error::Error;
};

}  // namespace gdfo
