#pragma once

#include <stdexcept>
#include <string>

namespace thetacf {

/// Bad user-supplied input (invalid m, point outside [0, theta], bad digits, ...).
class validation_error : public std::invalid_argument {
public:
    explicit validation_error(const std::string& what) : std::invalid_argument(what) {}
};

/// A point was supplied outside the domain [0, theta] of the map.
class domain_error : public validation_error {
public:
    explicit domain_error(const std::string& what) : validation_error(what) {}
};

/// A numerical procedure could not reach its tolerance, or an exact identity failed.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

/// An expansion ended (hit 0) before the requested index.
class termination_error : public std::runtime_error {
public:
    explicit termination_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace thetacf
