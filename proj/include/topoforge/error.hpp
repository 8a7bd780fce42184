#pragma once

#include <stdexcept>
#include <string>

#include "topoforge/tensor.hpp"

namespace topoforge {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A callback produced NaN/Inf.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, Point where)
      : Error(what + " at (" + std::to_string(where[0]) + ", " + std::to_string(where[1]) + ")"),
        where_(where) {}
  Point where() const { return where_; }

 private:
  Point where_;
};

class MeshError : public Error {
 public:
  using Error::Error;
};

// Numerical failure in a named pipeline stage ("state", "adjoint", "corrector", ...).
class SolverError : public Error {
 public:
  SolverError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace topoforge
