#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace chopil {

// Contract violations on user-supplied data (files, configs, CLI args).
// The CLI maps these to exit code 2; everything else unexpected is 3.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed record in an on-disk artifact; carries the offending line.
class ParseError : public ValidationError {
public:
  ParseError(const std::string& msg, long line)
      : ValidationError(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  long line() const { return line_; }

private:
  long line_;
};

class InsufficientDataError : public ValidationError {
public:
  explicit InsufficientDataError(const std::string& msg) : ValidationError(msg) {}
};

// Training diverged; carries the per-epoch loss trace observed so far.
class TrainingFailure : public std::runtime_error {
public:
  TrainingFailure(const std::string& msg, std::vector<double> trace)
      : std::runtime_error(msg), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

private:
  std::vector<double> trace_;
};

}  // namespace chopil
