#ifndef NNGCD_ERRORS_HPP
#define NNGCD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace nngcd {

// Bad input: wrong shape, out-of-range hyperparameter, malformed file.
class ValidationError : public std::invalid_argument {
  public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// A computation produced NaN/Inf or otherwise diverged.
class NumericError : public std::runtime_error {
  public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw ValidationError(message);
    }
}

}  // namespace nngcd

#endif  // NNGCD_ERRORS_HPP
