#pragma once

#include <stdexcept>
#include <string>

namespace polysketch {

// Input violates an operation's preconditions or a type invariant.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// File missing, unreadable, or unwritable.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace polysketch
