#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hc3l {

// Malformed file contents; carries the byte offset where parsing stopped.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Operation called in a state that does not admit it (e.g. backward before
// forward, double fft-shift).
class StateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A required input file or artifact is absent. CLI exit code 3.
class MissingInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values or other numerical breakdown. CLI exit code 4.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A quantity whose definition degenerates (e.g. passing rate over zero voxels).
class UndefinedResultError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hc3l
