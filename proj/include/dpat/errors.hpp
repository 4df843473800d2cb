#pragma once

#include <stdexcept>
#include <string>

namespace dpat {

// Exit codes surfaced by the CLI. Every library error maps to one of these.
enum class ExitCode : int {
    ok = 0,
    config = 2,
    data = 3,
    provider = 4,
    numeric = 5,
    integrity = 6,
};

class Error : public std::runtime_error {
  public:
    Error(ExitCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    ExitCode exit_code() const { return code_; }

  private:
    ExitCode code_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(ExitCode::config, msg) {}
};

struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(ExitCode::data, msg) {}
};

struct ProviderError : Error {
    explicit ProviderError(const std::string& msg) : Error(ExitCode::provider, msg) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(ExitCode::numeric, msg) {}
};

struct IntegrityError : Error {
    explicit IntegrityError(const std::string& msg) : Error(ExitCode::integrity, msg) {}
};

}  // namespace dpat
