#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace patchbench {

/// Base class for every error raised by the toolkit.
class error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A dataset record could not be read. `line()` is 1-based.
class load_error : public error {
  public:
    load_error(std::size_t line, const std::string& what)
        : error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class schema_error : public error {
  public:
    using error::error;
};

/// A single record is missing fields or holds values of the wrong shape.
class record_error : public error {
  public:
    using error::error;
};

class extraction_error : public error {
  public:
    using error::error;
};

class split_error : public error {
  public:
    using error::error;
};

class sampling_error : public error {
  public:
    using error::error;
};

class template_parse_error : public error {
  public:
    template_parse_error(const std::string& token, const std::string& what)
        : error(what + " (at '" + token + "')"), token_(token) {}
    const std::string& token() const noexcept { return token_; }

  private:
    std::string token_;
};

class instantiation_error : public error {
  public:
    using error::error;
};

class unsupported_language : public error {
  public:
    using error::error;
};

class aggregation_error : public error {
  public:
    using error::error;
};

class validation_error : public error {
  public:
    using error::error;
};

/// The backend could not be reached. Carries how many attempts were made.
class transport_error : public error {
  public:
    transport_error(const std::string& what, int attempts, bool retryable)
        : error(what), attempts_(attempts), retryable_(retryable) {}
    int attempts() const noexcept { return attempts_; }
    bool retryable() const noexcept { return retryable_; }

  private:
    int attempts_;
    bool retryable_;
};

/// The peer answered, but not in a way the protocol allows.
class protocol_error : public error {
  public:
    protocol_error(int status, const std::string& what) : error(what), status_(status) {}
    int status() const noexcept { return status_; }

  private:
    int status_;
};

class layout_error : public error {
  public:
    using error::error;
};

class comparison_error : public error {
  public:
    using error::error;
};

class config_error : public error {
  public:
    using error::error;
};

} // namespace patchbench
