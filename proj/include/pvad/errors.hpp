#pragma once

#include <stdexcept>
#include <string>

namespace pvad {

// Error categories map 1:1 onto CLI exit codes (see tools/pvad.cpp).
class Error : public std::runtime_error {
public:
    Error(const std::string& msg, int exit_code)
        : std::runtime_error(msg), exit_code_(exit_code) {}
    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error(m, 2) {}
};
struct FileError : Error {
    explicit FileError(const std::string& m) : Error(m, 3) {}
};
struct FormatError : Error {
    explicit FormatError(const std::string& m) : Error(m, 4) {}
};
struct NumericError : Error {
    explicit NumericError(const std::string& m) : Error(m, 5) {}
};
struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error(m, 6) {}
};

} // namespace pvad
