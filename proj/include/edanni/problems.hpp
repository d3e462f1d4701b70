#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "edanni/types.hpp"

namespace edanni {

// One machine's smooth empirical loss L_j. Implementations are immutable
// after construction and safe to share across concurrent readers.
class LocalLoss {
 public:
  virtual ~LocalLoss() = default;

  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;
  virtual Eigen::Index dim() const = 0;

  // Upper bound on the Lipschitz constant of the gradient.
  virtual double lipschitz_bound() const = 0;

  // Strong-convexity modulus; 0 when the loss is not (provably) strongly
  // convex.
  virtual double strong_convexity_modulus() const = 0;

  virtual bool is_convex() const = 0;
};

using LocalLossPtr = std::shared_ptr<const LocalLoss>;

// The m per-machine losses making up (1/m) sum_j L_j(x).
struct SmoothLossSet {
  int m = 0;
  Eigen::Index dim = 0;
  std::vector<LocalLossPtr> losses;

  double average_value(const Vector& x) const;
  // Sum in ascending machine order, then divide; fixed order keeps runs
  // bit-reproducible.
  Vector average_gradient(const Vector& x) const;
  double max_lipschitz() const;
  double min_strong_convexity() const;
};

// Convex nonsmooth term h(x).
struct Regularizer {
  enum class Kind { None, L1, L1Ball };

  Kind kind = Kind::None;
  double theta = 0.0;            // l1 weight
  double radius = 0.0;           // euclidean-ball radius (L1Ball only)
  double convex_modulus = 0.0;   // 0 for every supported kind

  static Regularizer none() { return {}; }
  static Regularizer l1(double theta);
  static Regularizer l1_ball(double theta, double radius);

  // +inf outside the ball for L1Ball.
  double value(const Vector& x) const;
  bool feasible(const Vector& x) const;
};

// Least squares (1/2n) ||X w - y||^2 for one machine's n samples.
class LeastSquaresLoss : public LocalLoss {
 public:
  LeastSquaresLoss(Matrix X, Vector y, double lipschitz, double modulus);

  double value(const Vector& w) const override;
  Vector gradient(const Vector& w) const override;
  Eigen::Index dim() const override { return X_.cols(); }
  double lipschitz_bound() const override { return lipschitz_; }
  double strong_convexity_modulus() const override { return modulus_; }
  bool is_convex() const override { return true; }

  const Matrix& data_matrix() const { return X_; }
  const Vector& targets() const { return y_; }

 private:
  Matrix X_;
  Vector y_;
  double lipschitz_;
  double modulus_;
};

// (1/2) x^T A x - b^T x with symmetric A; min_eigenvalue may be negative
// (concave directions), in which case the loss reports itself nonconvex.
class QuadraticLoss : public LocalLoss {
 public:
  QuadraticLoss(Matrix A, Vector b, double lipschitz, double min_eigenvalue);

  double value(const Vector& x) const override;
  Vector gradient(const Vector& x) const override;
  Eigen::Index dim() const override { return A_.rows(); }
  double lipschitz_bound() const override { return lipschitz_; }
  double strong_convexity_modulus() const override {
    return min_eigenvalue_ > 0.0 ? min_eigenvalue_ : 0.0;
  }
  bool is_convex() const override { return min_eigenvalue_ >= 0.0; }

  const Matrix& matrix() const { return A_; }
  const Vector& linear_term() const { return b_; }

 private:
  Matrix A_;
  Vector b_;
  double lipschitz_;
  double min_eigenvalue_;
};

// -(1/n) sum_i w^T B_i B_i^T w for one machine: a concave quadratic form;
// gradients go through the sparse factors, never an assembled p x p matrix.
class NegSquaredFactorLoss : public LocalLoss {
 public:
  NegSquaredFactorLoss(std::vector<Eigen::SparseMatrix<double>> factors,
                       double lipschitz);

  double value(const Vector& w) const override;
  Vector gradient(const Vector& w) const override;
  Eigen::Index dim() const override { return p_; }
  double lipschitz_bound() const override { return lipschitz_; }
  double strong_convexity_modulus() const override { return 0.0; }
  bool is_convex() const override { return false; }

  const std::vector<Eigen::SparseMatrix<double>>& factors() const {
    return factors_;
  }

 private:
  std::vector<Eigen::SparseMatrix<double>> factors_;
  Eigen::Index p_ = 0;
  double lipschitz_ = 0.0;
};

// ---------------------------------------------------------------------------
// Generator specs
// ---------------------------------------------------------------------------

// Sparse regression instance:
//   rows x_ji ~ N(0, Sigma), Sigma_rt = decay^|r-t|
//   y_ji = x_ji^T w* + noise,  w* s-sparse on the first s coordinates
struct LassoGenSpec {
  int m = 1;
  int n = 1;
  int p = 1;
  int s = 1;
  double theta = 0.0;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  double covariance_decay = 0.5;

  void validate() const;
};

// Sparse PCA instance:
//   minimize -(1/mn) sum_ji w^T B_ji B_ji^T w + theta ||w||_1,  ||w|| <= 1
// with each B_ji a p x q sparse random matrix with nnz nonzeros.
struct SpcaGenSpec {
  int m = 1;
  int n = 1;
  int p = 1;
  int q = 1;
  int nnz = 1;
  double theta = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct QuadGenSpec {
  int m = 1;
  int p = 1;
  double sigma2 = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Generated datasets (raw data kept so instances can be persisted and
// replayed without regeneration)
// ---------------------------------------------------------------------------

struct LassoDataset {
  LassoGenSpec spec;
  std::vector<Matrix> X;  // per machine, n x p
  std::vector<Vector> y;  // per machine, n
  Vector ground_truth;    // w*, p
};

struct SpcaDataset {
  SpcaGenSpec spec;
  // factors[j][i] is B_ji, p x q sparse
  std::vector<std::vector<Eigen::SparseMatrix<double>>> factors;
};

struct QuadDataset {
  QuadGenSpec spec;
  std::vector<Matrix> A;  // symmetric, lambda_min >= sigma2
  std::vector<Vector> b;
};

LassoDataset generate_lasso_dataset(const LassoGenSpec& spec);
SpcaDataset generate_spca_dataset(const SpcaGenSpec& spec);
QuadDataset generate_quad_dataset(const QuadGenSpec& spec);

SmoothLossSet make_losses(const LassoDataset& data);
SmoothLossSet make_losses(const SpcaDataset& data);
SmoothLossSet make_losses(const QuadDataset& data);

struct GeneratedLasso {
  SmoothLossSet losses;
  Regularizer reg;
  Vector ground_truth;
};

struct GeneratedSpca {
  SmoothLossSet losses;
  Regularizer reg;
};

GeneratedLasso generate_lasso(const LassoGenSpec& spec);
GeneratedSpca generate_spca(const SpcaGenSpec& spec);
SmoothLossSet generate_strongly_convex_quadratic(int m, int p, double sigma2,
                                                 std::uint64_t seed);

// Full composite objective (1/m) sum_j L_j(x) + h(x); +inf when h is
// infeasible at x.
double objective(const SmoothLossSet& losses, const Regularizer& h,
                 const Vector& x);

// Largest eigenvalue of a symmetric PSD operator given by matvec, by power
// iteration (relative tolerance on the Rayleigh quotient).
double power_iteration_lambda_max(
    const std::function<Vector(const Vector&)>& matvec, Eigen::Index p,
    std::uint64_t seed, int max_iter = 500, double rel_tol = 1e-8);

// ---------------------------------------------------------------------------
// Dataset container: magic "EDN1", little-endian u32 m, n, p, then raw
// row-major f64 blocks per machine (layout per problem type), so a run can
// be replayed byte-for-byte without regeneration.
// ---------------------------------------------------------------------------

void save_dataset(const std::string& path, const LassoDataset& data);
void save_dataset(const std::string& path, const SpcaDataset& data);
void save_dataset(const std::string& path, const QuadDataset& data);

LassoDataset load_lasso_dataset(const std::string& path,
                                const LassoGenSpec& spec);
SpcaDataset load_spca_dataset(const std::string& path, const SpcaGenSpec& spec);
QuadDataset load_quad_dataset(const std::string& path, const QuadGenSpec& spec);

}  // namespace edanni
