#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace snake_story {

// Root of every error the library throws. Callers that only care about
// "something in the game went wrong" catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Operation issued in a phase that does not accept it (e.g. step while paused).
class PhaseError : public Error {
public:
    using Error::Error;
};

// Not enough free, reachable tiles to continue. Sessions end gracefully on it.
class EngineJammed : public Error {
public:
    using Error::Error;
};

class ConsistencyError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class ProviderUnavailable : public Error {
public:
    using Error::Error;
};

class ProviderProtocol : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ReplayError : public Error {
public:
    using Error::Error;
};

class SequencingError : public Error {
public:
    using Error::Error;
};

class VersionError : public Error {
public:
    using Error::Error;
};

class TerminalError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

// Every paired difference was zero; the signed-rank test is undefined.
class AllZeroError : public Error {
public:
    using Error::Error;
};

}  // namespace snake_story
