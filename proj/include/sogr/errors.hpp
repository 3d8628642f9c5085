#pragma once

#include <stdexcept>
#include <string>

namespace sogr {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor/op shape contract violations (mismatched dims, bad axes, ...).
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Value-domain contract violations (non-scalar backward root, probabilities
/// outside [0,1], ...).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration (invariant violations on config structs, bad flags).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Dataset / filesystem problems (missing counterpart, undecodable image, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// Checkpoint file problems; `kind()` distinguishes the failure modes.
class CheckpointError : public DataError {
public:
    enum class Kind { bad_magic, bad_version, truncated, shape_mismatch, malformed };

    CheckpointError(Kind k, const std::string& msg) : DataError(msg), kind_(k) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Numerical failures (NaN/Inf losses, indefinite matrices, ...).
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace sogr
