#pragma once

#include <stdexcept>
#include <string>

namespace flatflow {

/// Malformed or invalid configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A numerical stage could not produce a usable result (CLI exit code 3).
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The evolving set came too close to the edge of the computational box (CLI exit code 4).
class FrameContact : public std::runtime_error {
public:
  FrameContact(const std::string& what, int step) : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

private:
  int step_;
};

}  // namespace flatflow
