#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace phalanx {

// Common base so callers can catch everything from this library at once.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

enum class CodecFault {
    bad_magic,
    truncated,
    length_mismatch,
    field_out_of_range,
    invariant_violation,
};

// Parse failures carry the byte offset of the offending field so a bad
// capture file can be diagnosed with a hex dump.
class CodecError : public Error {
public:
    CodecError(CodecFault fault, std::size_t offset, const std::string& msg)
        : Error(msg), fault_(fault), offset_(offset) {}
    CodecFault fault() const { return fault_; }
    std::size_t offset() const { return offset_; }

private:
    CodecFault fault_;
    std::size_t offset_;
};

class MatcherError : public Error {
public:
    using Error::Error;
};

enum class ProtocolFault {
    schema,
    range,
    duplicate_entry,
    missing_template,
    unknown_id,
};

class ProtocolError : public Error {
public:
    ProtocolError(ProtocolFault fault, const std::string& msg) : Error(msg), fault_(fault) {}
    ProtocolFault fault() const { return fault_; }

private:
    ProtocolFault fault_;
};

enum class FusionFault {
    range,
    missing_static_weight,
    invalid_static_weights,
    zero_weight_sum,
    incomplete_channel,
    unknown_template,
    channel_conflict,
};

class FusionError : public Error {
public:
    FusionError(FusionFault fault, const std::string& msg) : Error(msg), fault_(fault) {}
    FusionFault fault() const { return fault_; }

private:
    FusionFault fault_;
};

enum class EvalFault {
    empty_score_list,
    range,
    degenerate_variance,
};

class EvalError : public Error {
public:
    EvalError(EvalFault fault, const std::string& msg) : Error(msg), fault_(fault) {}
    EvalFault fault() const { return fault_; }

private:
    EvalFault fault_;
};

// Bad run/synth configuration (unknown keys where they matter, values out of
// range, unsatisfiable scenario definitions). CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Raised in strict mode when a requested FAR target has no admissible
// threshold. CLI maps this to exit code 4.
class UnattainableError : public Error {
public:
    using Error::Error;
};

}  // namespace phalanx
