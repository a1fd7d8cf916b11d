#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tsigan {

/// Coarse error category; the CLI maps it onto its exit code.
enum class ErrorKind { usage, data, numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define TSIGAN_DATA_ERROR(Name)                                                   \
    class Name : public Error {                                                   \
    public:                                                                       \
        explicit Name(const std::string& what) : Error(ErrorKind::data, what) {}  \
    }

#define TSIGAN_NUMERIC_ERROR(Name)                                                  \
    class Name : public Error {                                                     \
    public:                                                                         \
        explicit Name(const std::string& what) : Error(ErrorKind::numeric, what) {} \
    }

TSIGAN_DATA_ERROR(InvalidArgument);
TSIGAN_DATA_ERROR(SeriesTooShort);
TSIGAN_DATA_ERROR(ShapeMismatch);
TSIGAN_DATA_ERROR(EmptyBatch);
TSIGAN_DATA_ERROR(EmptyList);
TSIGAN_DATA_ERROR(EmptyFile);
TSIGAN_DATA_ERROR(MalformedName);
TSIGAN_DATA_ERROR(CheckpointError);

TSIGAN_NUMERIC_ERROR(GraphError);
TSIGAN_NUMERIC_ERROR(NonFiniteGradient);
TSIGAN_NUMERIC_ERROR(NumericalFailure);

#undef TSIGAN_DATA_ERROR
#undef TSIGAN_NUMERIC_ERROR

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(ErrorKind::data, "line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NonFiniteLoss : public Error {
public:
    NonFiniteLoss(std::size_t iteration, const std::string& what)
        : Error(ErrorKind::numeric,
                "non-finite loss at iteration " + std::to_string(iteration) + ": " + what),
          iteration_(iteration) {}
    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

} // namespace tsigan
