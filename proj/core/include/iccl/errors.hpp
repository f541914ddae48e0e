#pragma once

#include <stdexcept>
#include <string>

namespace iccl {

// Scene generation exhausted its retry budget without a non-overlapping layout.
class PlacementFailure : public std::runtime_error {
 public:
  PlacementFailure(const std::string& what, int budget)
      : std::runtime_error(what), budget_(budget) {}
  int budget() const { return budget_; }

 private:
  int budget_;
};

// Training loss became non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, int epoch)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// Anchor geometry does not determine a position (collinear or rank-deficient).
class DegenerateGeometry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace iccl
