#pragma once

#include <stdexcept>
#include <string>

namespace splatguide {

// Precondition violated by the caller (bad shapes, out-of-range parameters).
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

// The operation cannot proceed from the current state (missing artifact, empty store).
class InvalidState : public std::logic_error {
public:
    explicit InvalidState(const std::string& what) : std::logic_error(what) {}
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidInput(what);
}

}  // namespace splatguide
