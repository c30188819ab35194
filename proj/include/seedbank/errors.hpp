#pragma once

#include <stdexcept>
#include <string>

namespace seedbank {

// Schema violations in a run configuration. The message starts with the key path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& key_path, const std::string& what)
        : std::runtime_error(key_path + ": " + what), key_path_(key_path) {}
    const std::string& key_path() const { return key_path_; }

private:
    std::string key_path_;
};

// A run whose projected cost exceeds the configured budget.
class BudgetRefusal : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical diagnostics that failed (non-equilibration, mixing not reached, ...).
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace seedbank
