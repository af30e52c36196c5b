#include "rescore/scoring.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/LU>

#include "rescore/errors.hpp"

namespace rescore {

namespace {

class NeumaierSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      carry_ += (sum_ - t) + v;
    } else {
      carry_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  [[nodiscard]] double value() const noexcept { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

void require_finite(const Eigen::MatrixXd& a, const char* what) {
  if (a.rows() != a.cols()) throw InvalidParameter(std::string(what) + ": matrix must be square");
  if (!a.allFinite()) throw InvalidParameter(std::string(what) + ": non-finite input");
}

// Pade numerator coefficients (Higham 2005); denominators share them with alternating sign.
constexpr std::array<double, 4> kPade3 = {120.0, 60.0, 12.0, 1.0};
constexpr std::array<double, 6> kPade5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
constexpr std::array<double, 8> kPade7 = {17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0};
constexpr std::array<double, 10> kPade9 = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                                           2162160.0,     110880.0,     3960.0,       90.0,        1.0};
constexpr std::array<double, 14> kPade13 = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                            1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                            670442572800.0,      33522128640.0,       1323241920.0,
                                            40840800.0,          960960.0,            16380.0,
                                            182.0,               1.0};
// Largest 1-norm for which each degree meets unit roundoff without scaling.
constexpr std::array<double, 5> kTheta = {1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1,
                                          2.097847961257068e0, 5.371920351148152e0};

template <size_t N>
Eigen::MatrixXd pade_low(const Eigen::MatrixXd& a, const std::array<double, N>& b) {
  const Eigen::Index d = a.rows();
  const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd a2 = a * a;
  Eigen::MatrixXd power = ident;
  Eigen::MatrixXd odd = b[1] * ident;
  Eigen::MatrixXd even = b[0] * ident;
  for (size_t k = 2; k < N; k += 2) {
    power = power * a2;
    even += b[k] * power;
    if (k + 1 < N) odd += b[k + 1] * power;
  }
  const Eigen::MatrixXd u = a * odd;
  return (even - u).partialPivLu().solve(even + u);
}

Eigen::MatrixXd pade13(const Eigen::MatrixXd& a) {
  const auto& b = kPade13;
  const Eigen::Index d = a.rows();
  const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd a2 = a * a;
  const Eigen::MatrixXd a4 = a2 * a2;
  const Eigen::MatrixXd a6 = a4 * a2;
  const Eigen::MatrixXd u =
      a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident);
  const Eigen::MatrixXd v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;
  return (v - u).partialPivLu().solve(v + u);
}

}  // namespace

Eigen::VectorXd losses_from_residuals(const Eigen::MatrixXd& residuals, const ScoreConfig& cfg) {
  const Eigen::Index d = residuals.cols();
  if (cfg.loss == LossKind::least_squares) return 0.5 * residuals.rowwise().squaredNorm();

  Eigen::VectorXd sigma = cfg.sigma.size() == 0 ? Eigen::VectorXd::Ones(d) : cfg.sigma;
  if (sigma.size() != d) throw InvalidParameter("sigma length differs from variable count");
  if ((sigma.array() <= 0.0).any()) throw InvalidParameter("sigma entries must be positive");
  const double offset = (sigma.array() * std::sqrt(2.0 * std::numbers::pi)).log().sum();
  const Eigen::RowVectorXd inv_two_var = (0.5 / sigma.array().square()).matrix().transpose();
  Eigen::VectorXd out(residuals.rows());
  for (Eigen::Index i = 0; i < residuals.rows(); ++i) {
    out[i] = offset + (residuals.row(i).array().square() * inv_two_var.array()).sum();
  }
  return out;
}

Eigen::VectorXd per_sample_losses(const WeightedAdjacency& b, const DataMatrix& x, const ScoreConfig& cfg) {
  if (b.rows() != b.cols() || b.rows() != x.cols()) {
    throw InvalidParameter("coefficient matrix does not match data dimension");
  }
  return losses_from_residuals(x.values - x.values * b, cfg);
}

double weighted_score(std::span<const double> losses, const SampleWeights& w, double sparsity) {
  if (static_cast<Eigen::Index>(losses.size()) != w.size()) {
    throw InvalidParameter("loss and weight vectors differ in length");
  }
  NeumaierSum sum;
  for (size_t i = 0; i < losses.size(); ++i) sum.add(w[static_cast<Eigen::Index>(i)] * losses[i]);
  return sum.value() + sparsity;
}

double weighted_score(const Eigen::VectorXd& losses, const SampleWeights& w, double sparsity) {
  return weighted_score(std::span<const double>(losses.data(), static_cast<size_t>(losses.size())), w, sparsity);
}

double average_score(const Eigen::VectorXd& losses, double sparsity) {
  if (losses.size() < 1) throw InvalidParameter("average_score needs at least one loss");
  return weighted_score(losses, SampleWeights::uniform(losses.size()), sparsity);
}

Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& a) {
  require_finite(a, "matrix_exp");
  if (a.rows() == 0) return a;
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  if (norm <= kTheta[0]) return pade_low(a, kPade3);
  if (norm <= kTheta[1]) return pade_low(a, kPade5);
  if (norm <= kTheta[2]) return pade_low(a, kPade7);
  if (norm <= kTheta[3]) return pade_low(a, kPade9);
  int squarings = 0;
  if (norm > kTheta[4]) squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / kTheta[4]))));
  Eigen::MatrixXd result = pade13(a / std::ldexp(1.0, squarings));
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

AcyclicityValue h_expm(const Eigen::MatrixXd& a) {
  require_finite(a, "h_expm");
  const Eigen::MatrixXd e = matrix_exp(a.cwiseProduct(a));
  return {e.trace() - static_cast<double>(a.rows()), e.transpose().cwiseProduct(2.0 * a)};
}

AcyclicityValue h_poly(const Eigen::MatrixXd& a, double c) {
  require_finite(a, "h_poly");
  const Eigen::Index d = a.rows();
  if (c <= 0.0) c = 1.0 / static_cast<double>(d);
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d) + c * a.cwiseProduct(a);
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(d, d);  // m^(d-1)
  for (Eigen::Index k = 1; k < d; ++k) power = power * m;
  const double value = (power.array() * m.transpose().array()).sum() - static_cast<double>(d);
  return {value, static_cast<double>(d) * power.transpose().cwiseProduct(2.0 * c * a)};
}

AcyclicityValue acyclicity(AcyclicityKind kind, const Eigen::MatrixXd& a) {
  return kind == AcyclicityKind::poly ? h_poly(a) : h_expm(a);
}

}  // namespace rescore
