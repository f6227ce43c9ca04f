#pragma once

#include <stdexcept>
#include <string>

namespace flowids {

// Shape or extent mismatch between tensors / tables.
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// Invalid scalar argument (rates, ranges, thresholds).
class ParameterError : public std::invalid_argument {
public:
    explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

// Invalid architecture / run configuration.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Dataset problems: parse failures, empty tables, stratification violations,
// schema mismatches.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Misuse of the API, e.g. running backward twice on one cache.
class UsageError : public std::logic_error {
public:
    explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

// Training produced a non-finite loss; carries the epoch/batch it happened in.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, int epoch, int batch)
        : std::runtime_error(what), epoch(epoch), batch(batch) {}
    int epoch;
    int batch;
};

// Model file errors, one class per failure mode so callers can tell them apart.
class ModelLoadError : public std::runtime_error {
public:
    explicit ModelLoadError(const std::string& what) : std::runtime_error(what) {}
};

class BadMagicError : public ModelLoadError {
public:
    explicit BadMagicError(const std::string& what) : ModelLoadError(what) {}
};

class UnsupportedVersionError : public ModelLoadError {
public:
    explicit UnsupportedVersionError(const std::string& what) : ModelLoadError(what) {}
};

class TruncatedFileError : public ModelLoadError {
public:
    explicit TruncatedFileError(const std::string& what) : ModelLoadError(what) {}
};

class ShapeMismatchError : public ModelLoadError {
public:
    explicit ShapeMismatchError(const std::string& what) : ModelLoadError(what) {}
};

}  // namespace flowids
