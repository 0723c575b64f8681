#pragma once

#include <stdexcept>
#include <string>

namespace d3g {

// Base class for every error raised by the engine. Subclasses carry the
// failure category; the message names the offending input.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// -- embedding algebra -------------------------------------------------------

class ZeroVectorError : public Error {
public:
    explicit ZeroVectorError(const std::string& msg = "vector has (near-)zero norm")
        : Error(msg) {}
};

class DimMismatchError : public Error {
public:
    explicit DimMismatchError(const std::string& msg) : Error(msg) {}
};

class EmptyInputError : public Error {
public:
    explicit EmptyInputError(const std::string& msg) : Error(msg) {}
};

// -- taxonomy / prompts ------------------------------------------------------

class UnknownAxisError : public Error {
public:
    explicit UnknownAxisError(const std::string& axis_id)
        : Error("unknown demographic axis: " + axis_id) {}
};

class UnknownAxisValueError : public Error {
public:
    UnknownAxisValueError(const std::string& axis_id, const std::string& value)
        : Error("unknown value for axis '" + axis_id + "': " + value) {}
};

class UnknownTemplateError : public Error {
public:
    UnknownTemplateError(const std::string& target_axis, const std::string& augment_axis)
        : Error("no prompt template registered for (target=" + target_axis +
                ", augment=" + augment_axis + ")") {}
};

// -- backends ----------------------------------------------------------------

class BackendUnavailableError : public Error {
public:
    explicit BackendUnavailableError(const std::string& msg) : Error(msg) {}
};

class GenerationUnsupportedError : public Error {
public:
    explicit GenerationUnsupportedError(const std::string& backend_id)
        : Error("backend '" + backend_id + "' does not support image generation") {}
};

class InvalidConfigError : public Error {
public:
    explicit InvalidConfigError(const std::string& msg) : Error(msg) {}
};

// -- dataset / cache ---------------------------------------------------------

class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg) {}
    ParseError(const std::string& file, size_t line, const std::string& msg)
        : Error(file + ":" + std::to_string(line) + ": " + msg) {}
};

class NoLabeledRowsError : public Error {
public:
    explicit NoLabeledRowsError(const std::string& axis_id)
        : Error("no rows carry a label for axis: " + axis_id) {}
};

class CacheMissError : public Error {
public:
    explicit CacheMissError(const std::string& key) : Error("cache miss: " + key) {}
};

class PayloadConflictError : public Error {
public:
    explicit PayloadConflictError(const std::string& key)
        : Error("cache key already holds a different payload: " + key) {}
};

// -- reporting ---------------------------------------------------------------

class UnknownFormatError : public Error {
public:
    explicit UnknownFormatError(const std::string& fmt)
        : Error("unknown report format: " + fmt) {}
};

}  // namespace d3g
