#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ltrc {

// Base of every error raised by the library. Each subclass carries the
// values a caller needs to produce a diagnostic without parsing what().
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptySample : public Error {
 public:
  EmptySample() : Error("empty sample") {}
};

class InvalidRecord : public Error {
 public:
  InvalidRecord(std::size_t index, std::string reason)
      : Error("invalid record " + std::to_string(index) + ": " + reason),
        index_(index),
        reason_(std::move(reason)) {}

  std::size_t index() const noexcept { return index_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t index_;
  std::string reason_;
};

class ZeroRiskSet : public Error {
 public:
  explicit ZeroRiskSet(double y)
      : Error("empty risk set at y=" + std::to_string(y)), y_(y) {}
  double y() const noexcept { return y_; }

 private:
  double y_;
};

class InvarianceViolation : public Error {
 public:
  explicit InvarianceViolation(double spread)
      : Error("truncation probability estimate depends on evaluation point (spread " +
              std::to_string(spread) + ")"),
        spread_(spread) {}
  double spread() const noexcept { return spread_; }

 private:
  double spread_;
};

class InvalidInterval : public Error {
 public:
  InvalidInterval(double lo, double hi)
      : Error("invalid interval [" + std::to_string(lo) + ", " + std::to_string(hi) + "]") {}
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class NoEffectiveData : public Error {
 public:
  NoEffectiveData() : Error("no observation carries a positive weight") {}
  explicit NoEffectiveData(const std::string& what) : Error(what) {}
};

class NotEstimable : public Error {
 public:
  NotEstimable(std::size_t n_effective, std::size_t floor)
      : Error("only " + std::to_string(n_effective) + " effective observations (need " +
              std::to_string(floor) + ")"),
        n_effective_(n_effective) {}
  std::size_t n_effective() const noexcept { return n_effective_; }

 private:
  std::size_t n_effective_;
};

class BracketFailure : public Error {
 public:
  BracketFailure() : Error("no sign change found while expanding the root bracket") {}
};

class DegenerateDerivative : public Error {
 public:
  DegenerateDerivative() : Error("score derivative vanishes at the estimate") {}
};

class AcceptanceTooLow : public Error {
 public:
  AcceptanceTooLow(std::size_t accepted, std::size_t drawn)
      : Error("accepted " + std::to_string(accepted) + " records out of " + std::to_string(drawn) +
              " draws") {}
};

class CalibrationFailed : public Error {
 public:
  using Error::Error;
};

class AllReplicationsFailed : public Error {
 public:
  AllReplicationsFailed() : Error("every Monte Carlo replication failed") {}
};

// Short stable name used in CSV status columns and failure tallies.
inline std::string error_code(const std::exception& e) {
  if (dynamic_cast<const NoEffectiveData*>(&e)) return "NoEffectiveData";
  if (dynamic_cast<const NotEstimable*>(&e)) return "NotEstimable";
  if (dynamic_cast<const DegenerateDerivative*>(&e)) return "DegenerateDerivative";
  if (dynamic_cast<const BracketFailure*>(&e)) return "BracketFailure";
  if (dynamic_cast<const ZeroRiskSet*>(&e)) return "ZeroRiskSet";
  if (dynamic_cast<const InvarianceViolation*>(&e)) return "InvarianceViolation";
  if (dynamic_cast<const AcceptanceTooLow*>(&e)) return "AcceptanceTooLow";
  if (dynamic_cast<const InvalidRecord*>(&e)) return "InvalidRecord";
  if (dynamic_cast<const EmptySample*>(&e)) return "EmptySample";
  if (dynamic_cast<const CalibrationFailed*>(&e)) return "CalibrationFailed";
  if (dynamic_cast<const InvalidConfig*>(&e)) return "InvalidConfig";
  return "Error";
}

}  // namespace ltrc
