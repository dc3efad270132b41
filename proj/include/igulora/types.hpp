#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace igulora {

// All numeric state is dense, double precision, row-major.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class NonFiniteError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    ConfigError(const std::string& key, const std::string& message)
        : Error("config key '" + key + "': " + message), key_(key) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_finite(const char* what, const Matrix& m) {
    if (!m.allFinite()) {
        throw NonFiniteError(std::string(what) + ": non-finite entries");
    }
}

} // namespace igulora
