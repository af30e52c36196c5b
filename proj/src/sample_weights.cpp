#include "rescore/sample_weights.hpp"

#include <cmath>
#include <string>

#include "rescore/errors.hpp"

namespace rescore {

SampleWeights::SampleWeights(Eigen::VectorXd values, double tau) : values_(std::move(values)), tau_(tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidParameter("tau must lie in (0, 1], got " + std::to_string(tau));
  if (values_.size() < 1) throw InvalidParameter("sample weights need n >= 1");
  const double lo = floor() - kBoundTolerance;
  const double hi = cap() + kBoundTolerance;
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    const double w = values_[i];
    if (!std::isfinite(w) || w < lo || w > hi) {
      throw InvalidParameter("weight " + std::to_string(i) + " = " + std::to_string(w) + " outside [tau/n, 1/(tau n)]");
    }
  }
  if (std::abs(values_.sum() - 1.0) > kSumTolerance) {
    throw InvalidParameter("weights must sum to 1, got " + std::to_string(values_.sum()));
  }
}

SampleWeights SampleWeights::uniform(Eigen::Index n, double tau) {
  if (n < 1) throw InvalidParameter("sample weights need n >= 1");
  return SampleWeights(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)), tau);
}

}  // namespace rescore
