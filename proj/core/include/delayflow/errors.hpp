#pragma once

#include <stdexcept>
#include <string>

namespace delayflow {

/// Base class for everything this library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable or truncated input stream.
class InputError : public Error {
public:
    using Error::Error;
};

/// Input file does not match the expected column layout.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A value violates a documented invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Repository cross-reference failure (e.g. event names an unknown station).
class CrossRefError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

/// Fewer history bins available than the task demands.
class HistoryUnderflowError : public Error {
public:
    using Error::Error;
};

/// Mandatory prompt sections alone exceed the template's character budget.
class PromptBudgetError : public Error {
public:
    using Error::Error;
};

/// A prompt's embedded data block is missing or does not parse.
class MalformedPromptError : public Error {
public:
    using Error::Error;
};

class BackendError : public Error {
public:
    using Error::Error;
};

/// Transport kept failing after all retry attempts.
class BackendUnavailableError : public BackendError {
public:
    using BackendError::BackendError;
};

/// Backend replied, but the reply fails validation. Carries the reply verbatim.
class MalformedReplyError : public BackendError {
public:
    MalformedReplyError(const std::string& what, std::string raw)
        : BackendError(what), raw_reply(std::move(raw)) {}
    std::string raw_reply;
};

class ReplyNoJsonError : public MalformedReplyError {
public:
    using MalformedReplyError::MalformedReplyError;
};

class ReplyMissingFieldError : public MalformedReplyError {
public:
    using MalformedReplyError::MalformedReplyError;
};

class ReplyLengthError : public MalformedReplyError {
public:
    using MalformedReplyError::MalformedReplyError;
};

class ReplyNegativeError : public MalformedReplyError {
public:
    using MalformedReplyError::MalformedReplyError;
};

class ReplyNonNumericError : public MalformedReplyError {
public:
    using MalformedReplyError::MalformedReplyError;
};

}  // namespace delayflow
