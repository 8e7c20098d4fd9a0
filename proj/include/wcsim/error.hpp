#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wcsim {

using TeamId = std::string;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input files.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A numerical fit could not be produced.
class FitError : public Error {
 public:
  explicit FitError(const std::string& what, std::vector<double> trace = {})
      : Error(what), trace_(std::move(trace)) {}

  /// Log-likelihood per iteration up to the failure, when available.
  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

/// A team has too few retained observations for the requested fit.
class InsufficientDataError : public FitError {
 public:
  InsufficientDataError(TeamId team, std::size_t have, std::size_t need)
      : FitError("insufficient data for " + team + ": " + std::to_string(have) +
                 " observations, need at least " + std::to_string(need)),
        team_(std::move(team)) {}

  const TeamId& team() const noexcept { return team_; }

 private:
  TeamId team_;
};

}  // namespace wcsim
