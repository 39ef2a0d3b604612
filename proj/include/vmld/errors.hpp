#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace vmld
{
    /// Base of every error raised by the library.
    class Error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// A trace row (or header) that does not follow the file grammar.
    class ParseError : public Error
    {
    public:
        ParseError(std::size_t line, const std::string &what)
            : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

        std::size_t line() const noexcept { return line_; }

    private:
        std::size_t line_;
    };

    /// A well-formed value that breaks a record or dataset invariant.
    class ValidationError : public Error
    {
    public:
        ValidationError(std::string field, const std::string &what)
            : Error(field + ": " + what), field_(std::move(field)) {}

        const std::string &field() const noexcept { return field_; }

    private:
        std::string field_;
    };

    /// Scenario configuration rejected before the simulation starts.
    class ConfigError : public Error
    {
    public:
        ConfigError(std::string field, const std::string &what)
            : Error(field + ": " + what), field_(std::move(field)) {}

        const std::string &field() const noexcept { return field_; }

    private:
        std::string field_;
    };

    class IoError : public Error
    {
    public:
        IoError(std::uint64_t byte_offset, const std::string &what)
            : Error(what + " (at byte " + std::to_string(byte_offset) + ")"), offset_(byte_offset) {}

        std::uint64_t byte_offset() const noexcept { return offset_; }

    private:
        std::uint64_t offset_;
    };

    /// An analysis input that violates the operation's precondition.
    class PreconditionError : public Error
    {
    public:
        using Error::Error;
    };

    class LengthMismatchError : public PreconditionError
    {
    public:
        using PreconditionError::PreconditionError;
    };

    /// Pearson correlation is undefined when either series is constant.
    class ZeroVarianceError : public PreconditionError
    {
    public:
        using PreconditionError::PreconditionError;
    };

    class EmptySubsetError : public PreconditionError
    {
    public:
        using PreconditionError::PreconditionError;
    };
} // namespace vmld
