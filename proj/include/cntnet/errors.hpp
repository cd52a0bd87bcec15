#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cntnet {

/// Machine-readable failure category; the CLI maps each one to an exit code.
enum class ErrorCategory { Usage, Structural, Parameter, Parse, Io, Numeric };

std::string_view to_string(ErrorCategory category);

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

// Shapes that do not chain, nodes out of range, unsupported layer kinds.
class StructuralError : public Error {
public:
    explicit StructuralError(const std::string& what) : Error(ErrorCategory::Structural, what) {}
};

// Out-of-domain numeric arguments (sigma <= 0, too few samples, ...).
class ParameterError : public Error {
public:
    explicit ParameterError(const std::string& what) : Error(ErrorCategory::Parameter, what) {}
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ErrorCategory::Usage, what) {}
};

class IoError : public Error {
public:
    IoError(const std::string& path, const std::string& what)
        : Error(ErrorCategory::Io, path + ": " + what), path_(path) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Malformed binary or text input. `offset` is the byte position where
/// the reader gave up.
class ParseError : public Error {
public:
    ParseError(std::size_t offset, const std::string& what)
        : Error(ErrorCategory::Parse, "at byte " + std::to_string(offset) + ": " + what),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Node disparity with |strength| <= epsilon: signed weights cancel and
/// the ratio w / s is meaningless.
class IllConditionedDisparity : public Error {
public:
    explicit IllConditionedDisparity(const std::string& what) : Error(ErrorCategory::Numeric, what) {}
};

class DivergenceError : public Error {
public:
    DivergenceError(std::size_t epoch, std::size_t batch, const std::string& what)
        : Error(ErrorCategory::Numeric, "epoch " + std::to_string(epoch) + ", batch " +
                                            std::to_string(batch) + ": " + what),
          epoch_(epoch),
          batch_(batch) {}

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t batch() const noexcept { return batch_; }

private:
    std::size_t epoch_;
    std::size_t batch_;
};

}  // namespace cntnet
