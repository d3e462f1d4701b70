#include "edanni/problems.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "edanni/rng.hpp"

namespace edanni {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidSpecError(msg);
}

void check_dim(const Vector& x, Eigen::Index p, const char* what) {
  if (x.size() != p) {
    throw DimensionError(std::string(what) + ": expected dimension " +
                         std::to_string(p) + ", got " +
                         std::to_string(x.size()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// SmoothLossSet
// ---------------------------------------------------------------------------

double SmoothLossSet::average_value(const Vector& x) const {
  double s = 0.0;
  for (const auto& loss : losses) s += loss->value(x);
  return s / double(m);
}

Vector SmoothLossSet::average_gradient(const Vector& x) const {
  Vector g = Vector::Zero(dim);
  for (const auto& loss : losses) g += loss->gradient(x);
  return g / double(m);
}

double SmoothLossSet::max_lipschitz() const {
  double L = 0.0;
  for (const auto& loss : losses) L = std::max(L, loss->lipschitz_bound());
  return L;
}

double SmoothLossSet::min_strong_convexity() const {
  double s = std::numeric_limits<double>::infinity();
  for (const auto& loss : losses)
    s = std::min(s, loss->strong_convexity_modulus());
  return losses.empty() ? 0.0 : s;
}

// ---------------------------------------------------------------------------
// Regularizer
// ---------------------------------------------------------------------------

Regularizer Regularizer::l1(double theta) {
  if (theta < 0) throw InvalidSpecError("l1 weight must be >= 0");
  Regularizer r;
  r.kind = Kind::L1;
  r.theta = theta;
  return r;
}

Regularizer Regularizer::l1_ball(double theta, double radius) {
  if (theta < 0) throw InvalidSpecError("l1 weight must be >= 0");
  if (radius <= 0) throw InvalidSpecError("ball radius must be > 0");
  Regularizer r;
  r.kind = Kind::L1Ball;
  r.theta = theta;
  r.radius = radius;
  return r;
}

bool Regularizer::feasible(const Vector& x) const {
  if (kind == Kind::L1Ball) return x.norm() <= radius * (1.0 + 1e-12);
  return true;
}

double Regularizer::value(const Vector& x) const {
  switch (kind) {
    case Kind::None:
      return 0.0;
    case Kind::L1:
      return theta * x.lpNorm<1>();
    case Kind::L1Ball:
      if (!feasible(x)) return std::numeric_limits<double>::infinity();
      return theta * x.lpNorm<1>();
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Concrete losses
// ---------------------------------------------------------------------------

LeastSquaresLoss::LeastSquaresLoss(Matrix X, Vector y, double lipschitz,
                                   double modulus)
    : X_(std::move(X)), y_(std::move(y)), lipschitz_(lipschitz),
      modulus_(modulus) {
  if (X_.rows() != y_.size())
    throw DimensionError("least squares: X rows must match y size");
}

double LeastSquaresLoss::value(const Vector& w) const {
  check_dim(w, X_.cols(), "least squares value");
  return (X_ * w - y_).squaredNorm() / (2.0 * double(X_.rows()));
}

Vector LeastSquaresLoss::gradient(const Vector& w) const {
  check_dim(w, X_.cols(), "least squares gradient");
  return X_.transpose() * (X_ * w - y_) / double(X_.rows());
}

QuadraticLoss::QuadraticLoss(Matrix A, Vector b, double lipschitz,
                             double min_eigenvalue)
    : A_(std::move(A)), b_(std::move(b)), lipschitz_(lipschitz),
      min_eigenvalue_(min_eigenvalue) {
  if (A_.rows() != A_.cols() || A_.rows() != b_.size())
    throw DimensionError("quadratic: A must be square and match b");
}

double QuadraticLoss::value(const Vector& x) const {
  check_dim(x, A_.rows(), "quadratic value");
  return 0.5 * x.dot(A_ * x) - b_.dot(x);
}

Vector QuadraticLoss::gradient(const Vector& x) const {
  check_dim(x, A_.rows(), "quadratic gradient");
  return A_ * x - b_;
}

NegSquaredFactorLoss::NegSquaredFactorLoss(
    std::vector<Eigen::SparseMatrix<double>> factors, double lipschitz)
    : factors_(std::move(factors)), lipschitz_(lipschitz) {
  if (factors_.empty())
    throw InvalidSpecError("factor loss needs at least one factor");
  p_ = factors_.front().rows();
  for (const auto& B : factors_)
    if (B.rows() != p_)
      throw DimensionError("factor loss: inconsistent factor row counts");
}

double NegSquaredFactorLoss::value(const Vector& w) const {
  check_dim(w, p_, "factor loss value");
  double s = 0.0;
  for (const auto& B : factors_) s += (B.transpose() * w).squaredNorm();
  return -s / double(factors_.size());
}

Vector NegSquaredFactorLoss::gradient(const Vector& w) const {
  check_dim(w, p_, "factor loss gradient");
  Vector g = Vector::Zero(p_);
  for (const auto& B : factors_) g += B * (B.transpose() * w);
  return g * (-2.0 / double(factors_.size()));
}

// ---------------------------------------------------------------------------
// Power iteration
// ---------------------------------------------------------------------------

double power_iteration_lambda_max(
    const std::function<Vector(const Vector&)>& matvec, Eigen::Index p,
    std::uint64_t seed, int max_iter, double rel_tol) {
  Rng rng(mix_seed(seed, 0x70775f6974ULL));
  Vector v = rng.unit_vector(p);
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = matvec(v);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;  // operator annihilates the probe
    v = w / norm;
    const double estimate = v.dot(matvec(v));
    if (it > 0 && std::abs(estimate - lambda) <= rel_tol * std::abs(estimate)) {
      return estimate;
    }
    lambda = estimate;
  }
  return lambda;
}

namespace {

// lambda_min of symmetric PSD A via power iteration on (lambda_max I - A).
double lambda_min_shifted(const std::function<Vector(const Vector&)>& matvec,
                          Eigen::Index p, double lambda_max,
                          std::uint64_t seed) {
  if (lambda_max == 0.0) return 0.0;
  auto shifted = [&](const Vector& v) -> Vector {
    return lambda_max * v - matvec(v);
  };
  const double top = power_iteration_lambda_max(shifted, p, seed, 1000, 1e-10);
  return std::max(0.0, lambda_max - top);
}

}  // namespace

// ---------------------------------------------------------------------------
// Spec validation
// ---------------------------------------------------------------------------

void LassoGenSpec::validate() const {
  require(m >= 1, "lasso spec: machine count m must be >= 1");
  require(n >= 1, "lasso spec: per-machine sample count n must be >= 1");
  require(p >= 1, "lasso spec: dimension p must be >= 1");
  require(s >= 0, "lasso spec: sparsity s must be >= 0");
  require(s <= p, "lasso spec: sparsity s must satisfy s <= p");
  require(theta >= 0, "lasso spec: theta must be >= 0");
  require(noise_std >= 0, "lasso spec: noise_std must be >= 0");
  require(covariance_decay >= 0 && covariance_decay < 1,
          "lasso spec: covariance_decay must lie in [0, 1)");
}

void SpcaGenSpec::validate() const {
  require(m >= 1, "spca spec: machine count m must be >= 1");
  require(n >= 1, "spca spec: per-machine matrix count n must be >= 1");
  require(p >= 1, "spca spec: dimension p must be >= 1");
  require(q >= 1, "spca spec: factor columns q must be >= 1");
  require(nnz >= 0, "spca spec: nnz must be >= 0");
  require(nnz <= p * q, "spca spec: nnz must be <= p*q");
  require(theta >= 0, "spca spec: theta must be >= 0");
}

void QuadGenSpec::validate() const {
  require(m >= 1, "quad spec: machine count m must be >= 1");
  require(p >= 1, "quad spec: dimension p must be >= 1");
  require(sigma2 > 0, "quad spec: sigma2 must be > 0");
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

LassoDataset generate_lasso_dataset(const LassoGenSpec& spec) {
  spec.validate();
  const int m = spec.m, n = spec.n, p = spec.p;

  Rng wrng(mix_seed(spec.seed, 1));
  Vector w_star = Vector::Zero(p);
  for (int i = 0; i < spec.s; ++i) w_star[i] = wrng.uniform();

  LassoDataset out;
  out.spec = spec;
  out.ground_truth = w_star;
  out.X.reserve(m);
  out.y.reserve(m);

  // Rows are AR(1) with cov decay^|r-t|: the recursion
  //   x_1 = z_1,  x_r = phi x_{r-1} + sqrt(1-phi^2) z_r
  // applies the (lower-triangular) Cholesky factor of that covariance.
  const double phi = spec.covariance_decay;
  const double innov = std::sqrt(1.0 - phi * phi);

  for (int j = 0; j < m; ++j) {
    Rng rng(mix_seed(spec.seed, 1000 + std::uint64_t(j)));
    Matrix X(n, p);
    for (int i = 0; i < n; ++i) {
      double prev = rng.normal();
      X(i, 0) = prev;
      for (int r = 1; r < p; ++r) {
        prev = phi * prev + innov * rng.normal();
        X(i, r) = prev;
      }
    }
    Vector y = X * w_star;
    for (int i = 0; i < n; ++i) y[i] += spec.noise_std * rng.normal();
    out.X.push_back(std::move(X));
    out.y.push_back(std::move(y));
  }
  return out;
}

SmoothLossSet make_losses(const LassoDataset& data) {
  const int m = data.spec.m, n = data.spec.n, p = data.spec.p;
  SmoothLossSet set;
  set.m = m;
  set.dim = p;
  set.losses.reserve(m);
  for (int j = 0; j < m; ++j) {
    const Matrix& X = data.X[std::size_t(j)];
    auto matvec = [&X, n](const Vector& v) -> Vector {
      return X.transpose() * (X * v) / double(n);
    };
    const double lmax = power_iteration_lambda_max(
        matvec, p, mix_seed(data.spec.seed, 2000 + std::uint64_t(j)));
    // rank(X^T X) <= n, so the spectrum has an exact zero when n < p
    const double lmin =
        n < p ? 0.0
              : lambda_min_shifted(
                    matvec, p, lmax,
                    mix_seed(data.spec.seed, 3000 + std::uint64_t(j)));
    set.losses.push_back(std::make_shared<LeastSquaresLoss>(
        X, data.y[std::size_t(j)], lmax, lmin));
  }
  return set;
}

GeneratedLasso generate_lasso(const LassoGenSpec& spec) {
  LassoDataset data = generate_lasso_dataset(spec);
  GeneratedLasso out;
  out.losses = make_losses(data);
  out.reg = Regularizer::l1(spec.theta);
  out.ground_truth = std::move(data.ground_truth);
  return out;
}

SpcaDataset generate_spca_dataset(const SpcaGenSpec& spec) {
  spec.validate();
  SpcaDataset out;
  out.spec = spec;
  out.factors.resize(std::size_t(spec.m));

  const std::int64_t cells = std::int64_t(spec.p) * spec.q;
  for (int j = 0; j < spec.m; ++j) {
    Rng rng(mix_seed(spec.seed, 5000 + std::uint64_t(j)));
    auto& machine = out.factors[std::size_t(j)];
    machine.reserve(std::size_t(spec.n));
    for (int i = 0; i < spec.n; ++i) {
      // nnz distinct positions (Floyd's subset sampling), values standard
      // normal
      std::vector<std::int64_t> chosen;
      chosen.reserve(std::size_t(spec.nnz));
      for (std::int64_t k = cells - spec.nnz; k < cells; ++k) {
        std::int64_t t = std::int64_t(rng.below(std::uint64_t(k + 1)));
        if (std::find(chosen.begin(), chosen.end(), t) != chosen.end()) t = k;
        chosen.push_back(t);
      }
      std::vector<Eigen::Triplet<double>> trips;
      trips.reserve(std::size_t(spec.nnz));
      for (std::int64_t cell : chosen) {
        const int r = int(cell / spec.q);
        const int c = int(cell % spec.q);
        trips.emplace_back(r, c, rng.normal());
      }
      Eigen::SparseMatrix<double> B(spec.p, spec.q);
      B.setFromTriplets(trips.begin(), trips.end());
      machine.push_back(std::move(B));
    }
  }
  return out;
}

SmoothLossSet make_losses(const SpcaDataset& data) {
  SmoothLossSet set;
  set.m = data.spec.m;
  set.dim = data.spec.p;
  set.losses.reserve(std::size_t(data.spec.m));
  for (int j = 0; j < data.spec.m; ++j) {
    const auto& factors = data.factors[std::size_t(j)];
    const double n = double(factors.size());
    auto matvec = [&factors, n](const Vector& v) -> Vector {
      Vector g = Vector::Zero(v.size());
      for (const auto& B : factors) g += B * (B.transpose() * v);
      return g * (2.0 / n);
    };
    const double lip = power_iteration_lambda_max(
        matvec, data.spec.p, mix_seed(data.spec.seed, 7000 + std::uint64_t(j)),
        2000, 1e-8);
    set.losses.push_back(
        std::make_shared<NegSquaredFactorLoss>(factors, lip));
  }
  return set;
}

GeneratedSpca generate_spca(const SpcaGenSpec& spec) {
  SpcaDataset data = generate_spca_dataset(spec);
  GeneratedSpca out;
  out.losses = make_losses(data);
  out.reg = Regularizer::l1_ball(spec.theta, 1.0);
  return out;
}

QuadDataset generate_quad_dataset(const QuadGenSpec& spec) {
  spec.validate();
  QuadDataset out;
  out.spec = spec;
  const int p = spec.p;
  for (int j = 0; j < spec.m; ++j) {
    Rng rng(mix_seed(spec.seed, 9000 + std::uint64_t(j)));
    // Spectrum fixed on [sigma2, 2 sigma2]; random orthogonal basis.
    Matrix G(p, p);
    for (int r = 0; r < p; ++r)
      for (int c = 0; c < p; ++c) G(r, c) = rng.normal();
    Eigen::HouseholderQR<Matrix> qr(G);
    Matrix Q = qr.householderQ();
    Vector eigs(p);
    for (int i = 0; i < p; ++i)
      eigs[i] = spec.sigma2 * (p == 1 ? 1.0 : 1.0 + double(i) / double(p - 1));
    Matrix A = Q * eigs.asDiagonal() * Q.transpose();
    A = 0.5 * (A + A.transpose());  // kill asymmetry from roundoff
    Vector b(p);
    for (int i = 0; i < p; ++i) b[i] = rng.normal();
    out.A.push_back(std::move(A));
    out.b.push_back(std::move(b));
  }
  return out;
}

SmoothLossSet make_losses(const QuadDataset& data) {
  SmoothLossSet set;
  set.m = data.spec.m;
  set.dim = data.spec.p;
  for (int j = 0; j < data.spec.m; ++j) {
    const Matrix& A = data.A[std::size_t(j)];
    Eigen::SelfAdjointEigenSolver<Matrix> es(A);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    set.losses.push_back(
        std::make_shared<QuadraticLoss>(A, data.b[std::size_t(j)], lmax, lmin));
  }
  return set;
}

SmoothLossSet generate_strongly_convex_quadratic(int m, int p, double sigma2,
                                                 std::uint64_t seed) {
  QuadGenSpec spec;
  spec.m = m;
  spec.p = p;
  spec.sigma2 = sigma2;
  spec.seed = seed;
  return make_losses(generate_quad_dataset(spec));
}

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

double objective(const SmoothLossSet& losses, const Regularizer& h,
                 const Vector& x) {
  check_dim(x, losses.dim, "objective");
  const double hx = h.value(x);
  if (std::isinf(hx)) return hx;
  return losses.average_value(x) + hx;
}

// ---------------------------------------------------------------------------
// Dataset container
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'E', 'D', 'N', '1'};

void write_u32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

void write_block(std::ofstream& os, const double* data, std::size_t count) {
  os.write(reinterpret_cast<const char*>(data),
           std::streamsize(count * sizeof(double)));
}

void read_block(std::ifstream& is, double* data, std::size_t count) {
  is.read(reinterpret_cast<char*>(data),
          std::streamsize(count * sizeof(double)));
  if (!is) throw IoError("dataset container truncated");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  return os;
}

std::ifstream open_in(const std::string& path, std::uint32_t expect_m,
                      std::uint32_t expect_n, std::uint32_t expect_p) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("bad dataset magic in " + path);
  const std::uint32_t m = read_u32(is), n = read_u32(is), p = read_u32(is);
  if (m != expect_m || n != expect_n || p != expect_p)
    throw IoError("dataset header mismatch in " + path);
  return is;
}

// Row-major copy helpers: the container stores row-major regardless of
// Eigen's default column-major layout.
void write_matrix(std::ofstream& os, const Matrix& M) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = M;
  write_block(os, R.data(), std::size_t(R.size()));
}

Matrix read_matrix(std::ifstream& is, Eigen::Index rows, Eigen::Index cols) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R(
      rows, cols);
  read_block(is, R.data(), std::size_t(rows * cols));
  return R;
}

}  // namespace

void save_dataset(const std::string& path, const LassoDataset& data) {
  auto os = open_out(path);
  os.write(kMagic, 4);
  write_u32(os, std::uint32_t(data.spec.m));
  write_u32(os, std::uint32_t(data.spec.n));
  write_u32(os, std::uint32_t(data.spec.p));
  for (int j = 0; j < data.spec.m; ++j) {
    write_matrix(os, data.X[std::size_t(j)]);
    write_block(os, data.y[std::size_t(j)].data(), std::size_t(data.spec.n));
  }
  write_block(os, data.ground_truth.data(), std::size_t(data.spec.p));
  if (!os) throw IoError("write failed: " + path);
}

LassoDataset load_lasso_dataset(const std::string& path,
                                const LassoGenSpec& spec) {
  spec.validate();
  auto is = open_in(path, std::uint32_t(spec.m), std::uint32_t(spec.n),
                    std::uint32_t(spec.p));
  LassoDataset out;
  out.spec = spec;
  for (int j = 0; j < spec.m; ++j) {
    out.X.push_back(read_matrix(is, spec.n, spec.p));
    Vector y(spec.n);
    read_block(is, y.data(), std::size_t(spec.n));
    out.y.push_back(std::move(y));
  }
  out.ground_truth.resize(spec.p);
  read_block(is, out.ground_truth.data(), std::size_t(spec.p));
  return out;
}

void save_dataset(const std::string& path, const SpcaDataset& data) {
  auto os = open_out(path);
  os.write(kMagic, 4);
  write_u32(os, std::uint32_t(data.spec.m));
  write_u32(os, std::uint32_t(data.spec.n));
  write_u32(os, std::uint32_t(data.spec.p));
  for (const auto& machine : data.factors) {
    for (const auto& B : machine) {
      write_matrix(os, Matrix(B));
    }
  }
  if (!os) throw IoError("write failed: " + path);
}

SpcaDataset load_spca_dataset(const std::string& path,
                              const SpcaGenSpec& spec) {
  spec.validate();
  auto is = open_in(path, std::uint32_t(spec.m), std::uint32_t(spec.n),
                    std::uint32_t(spec.p));
  SpcaDataset out;
  out.spec = spec;
  out.factors.resize(std::size_t(spec.m));
  for (int j = 0; j < spec.m; ++j) {
    for (int i = 0; i < spec.n; ++i) {
      Matrix dense = read_matrix(is, spec.p, spec.q);
      out.factors[std::size_t(j)].push_back(dense.sparseView());
    }
  }
  return out;
}

void save_dataset(const std::string& path, const QuadDataset& data) {
  auto os = open_out(path);
  os.write(kMagic, 4);
  write_u32(os, std::uint32_t(data.spec.m));
  write_u32(os, 1u);
  write_u32(os, std::uint32_t(data.spec.p));
  for (int j = 0; j < data.spec.m; ++j) {
    write_matrix(os, data.A[std::size_t(j)]);
    write_block(os, data.b[std::size_t(j)].data(), std::size_t(data.spec.p));
  }
  if (!os) throw IoError("write failed: " + path);
}

QuadDataset load_quad_dataset(const std::string& path,
                              const QuadGenSpec& spec) {
  spec.validate();
  auto is = open_in(path, std::uint32_t(spec.m), 1u, std::uint32_t(spec.p));
  QuadDataset out;
  out.spec = spec;
  for (int j = 0; j < spec.m; ++j) {
    out.A.push_back(read_matrix(is, spec.p, spec.p));
    Vector b(spec.p);
    read_block(is, b.data(), std::size_t(spec.p));
    out.b.push_back(std::move(b));
  }
  return out;
}

}  // namespace edanni
