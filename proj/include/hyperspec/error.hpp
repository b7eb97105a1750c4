#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace hyperspec {

/// Base of all pipeline errors. `code()` is a short machine-parsable tag
/// (e.g. "bad_magic", "unsorted"); `position()` carries a record index or
/// byte offset when the failure is localized.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message,
          std::optional<std::size_t> position = std::nullopt)
        : std::runtime_error(message), code_(std::move(code)), position_(position) {}

    const std::string& code() const noexcept { return code_; }
    std::optional<std::size_t> position() const noexcept { return position_; }

private:
    std::string code_;
    std::optional<std::size_t> position_;
};

/// Invalid parameters or configuration (CLI exit status 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input data that cannot be processed (CLI exit status 3).
class DataError : public Error {
public:
    using Error::Error;
};

}  // namespace hyperspec
