#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace lmmsdp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(const std::string& what, std::size_t pivot)
      : Error(what), pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

// Carries a Farkas ray y over the calibration rows: sum y_k b_k > 0 and
// sum y_k A_k <= 0.
class InfeasibleCalibration : public Error {
 public:
  InfeasibleCalibration(const std::string& what, std::vector<double> certificate)
      : Error(what), certificate_(std::move(certificate)) {}
  const std::vector<double>& certificate() const noexcept { return certificate_; }

 private:
  std::vector<double> certificate_;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class Unbounded : public Error {
 public:
  using Error::Error;
};

class SingularOperator : public Error {
 public:
  SingularOperator(const std::string& what, double condition)
      : Error(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

class RankDeficientScenario : public Error {
 public:
  using Error::Error;
};

class NotAvailable : public Error {
 public:
  using Error::Error;
};

class DegenerateVega : public Error {
 public:
  DegenerateVega(const std::string& what, std::size_t instrument)
      : Error(what), instrument_(instrument) {}
  std::size_t instrument() const noexcept { return instrument_; }

 private:
  std::size_t instrument_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string location)
      : Error(what + " (at " + location + ")"), location_(std::move(location)) {}
  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace lmmsdp
