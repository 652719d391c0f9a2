#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace topocirc {

using cplx = std::complex<double>;

template <typename Scalar> using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar> using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Default tolerances shared by all modules.
namespace tol {
inline constexpr double hermitian = 1e-12;
inline constexpr double unitary = 1e-12;
inline constexpr double eig_residual = 1e-10;
inline constexpr double degeneracy = 1e-8;
}  // namespace tol

enum class ErrorKind {
  invalid_size,
  out_of_range,
  resource,
  convergence,
  degeneracy,
  symmetry,
  ill_posed,
  truncation,
  sector,
  reduction,
  inconsistent_rep,
  classification,
  input,
  unsupported,
  format,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

/// Kronecker product of two dense matrices, first factor most significant.
template <typename DA, typename DB>
auto kron(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DA::Scalar;
  MatrixX<Scalar> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

template <typename Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& m, double tolerance = tol::hermitian) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tolerance;
}

template <typename Derived>
bool is_unitary(const Eigen::MatrixBase<Derived>& m, double tolerance = tol::unitary) {
  if (m.rows() != m.cols()) return false;
  using Scalar = typename Derived::Scalar;
  const MatrixX<Scalar> prod = m.adjoint() * m;
  return (prod - MatrixX<Scalar>::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff() <= tolerance;
}

template <typename Derived>
bool is_antisymmetric(const Eigen::MatrixBase<Derived>& m, double tolerance) {
  if (m.rows() != m.cols()) return false;
  return (m + m.transpose()).cwiseAbs().maxCoeff() <= tolerance;
}

/// exp(-i * t * h) for Hermitian h via eigendecomposition.
MatrixXcd expm_hermitian(const MatrixXcd& h, double t);

/// exp(i * angle * h) for Hermitian h.
MatrixXcd expi_hermitian(const MatrixXcd& h, double angle);

/// Largest singular value. Power iteration on M^dagger M above `dense_cutoff`
/// rows, dense SVD below.
double spectral_norm(const MatrixXcd& m, double tolerance = 1e-9, Eigen::Index dense_cutoff = 48);

/// Multiplies a matrix by a unit phase so that its first entry with modulus
/// above `threshold` is positive real.
MatrixXcd fix_phase_first_entry(const MatrixXcd& m, double threshold = 1e-12);

/// Same, using the largest-modulus entry.
MatrixXcd fix_phase_largest_entry(const MatrixXcd& m);

/// Integer power with overflow guard. Returns -1 on overflow past `cap`.
std::int64_t checked_pow(std::int64_t base, int exponent, std::int64_t cap);

/// Haar-ish random unitary from the QR of a complex Gaussian matrix.
MatrixXcd random_unitary(Eigen::Index dim, std::mt19937_64& rng);

/// Random Hermitian matrix with Gaussian entries, normalized to spectral norm 1.
MatrixXcd random_hermitian(Eigen::Index dim, std::mt19937_64& rng);

VectorXcd random_unit_vector(Eigen::Index dim, std::mt19937_64& rng);

MatrixXcd random_complex_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

/// Log-linear least-squares fit of log(y) against x.
struct LogLinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

LogLinearFit fit_log_linear(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace topocirc
