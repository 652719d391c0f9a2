#include "topocirc/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace topocirc {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_size: return "invalid-size";
    case ErrorKind::out_of_range: return "out-of-range";
    case ErrorKind::resource: return "resource";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::degeneracy: return "degeneracy";
    case ErrorKind::symmetry: return "symmetry";
    case ErrorKind::ill_posed: return "ill-posed";
    case ErrorKind::truncation: return "truncation";
    case ErrorKind::sector: return "sector";
    case ErrorKind::reduction: return "reduction";
    case ErrorKind::inconsistent_rep: return "inconsistent-rep";
    case ErrorKind::classification: return "classification";
    case ErrorKind::input: return "input";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::format: return "format";
  }
  return "unknown";
}

MatrixXcd expi_hermitian(const MatrixXcd& h, double angle) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::convergence, "expi_hermitian: eigensolver failed");
  VectorXcd phases(es.eigenvalues().size());
  for (Eigen::Index i = 0; i < phases.size(); ++i)
    phases(i) = std::exp(cplx(0.0, angle * es.eigenvalues()(i)));
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

MatrixXcd expm_hermitian(const MatrixXcd& h, double t) { return expi_hermitian(h, -t); }

double spectral_norm(const MatrixXcd& m, double tolerance, Eigen::Index dense_cutoff) {
  if (m.size() == 0) return 0.0;
  if (std::min(m.rows(), m.cols()) <= dense_cutoff) {
    Eigen::JacobiSVD<MatrixXcd> svd(m);
    return svd.singularValues()(0);
  }
  // Power iteration on M^dagger M from a fixed pseudo-random start.
  std::mt19937_64 rng(0x5eed);
  VectorXcd v = random_unit_vector(m.cols(), rng);
  double estimate = 0.0;
  constexpr int max_iter = 20000;
  for (int it = 0; it < max_iter; ++it) {
    VectorXcd w = m * v;
    VectorXcd u = m.adjoint() * w;
    const double norm_u = u.norm();
    if (norm_u == 0.0) return 0.0;
    const double next = std::sqrt(w.squaredNorm());
    v = u / norm_u;
    if (it > 2 && std::abs(next - estimate) <= tolerance * std::max(1.0, next)) return next;
    estimate = next;
  }
  throw Error(ErrorKind::convergence, "spectral_norm: power iteration did not converge");
}

MatrixXcd fix_phase_first_entry(const MatrixXcd& m, double threshold) {
  // Row-major scan order.
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (std::abs(m(i, j)) > threshold) return m * (std::conj(m(i, j)) / std::abs(m(i, j)));
  return m;
}

MatrixXcd fix_phase_largest_entry(const MatrixXcd& m) {
  Eigen::Index bi = 0, bj = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (std::abs(m(i, j)) > best + 1e-12) {
        best = std::abs(m(i, j));
        bi = i;
        bj = j;
      }
  if (best <= 0.0) return m;
  return m * (std::conj(m(bi, bj)) / best);
}

std::int64_t checked_pow(std::int64_t base, int exponent, std::int64_t cap) {
  std::int64_t out = 1;
  for (int i = 0; i < exponent; ++i) {
    if (out > cap / base) return -1;
    out *= base;
  }
  return out > cap ? -1 : out;
}

MatrixXcd random_complex_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXcd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = cplx(gauss(rng), gauss(rng));
  return m;
}

MatrixXcd random_unitary(Eigen::Index dim, std::mt19937_64& rng) {
  const MatrixXcd z = random_complex_matrix(dim, dim, rng);
  Eigen::HouseholderQR<MatrixXcd> qr(z);
  MatrixXcd q = qr.householderQ();
  const MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < dim; ++i) {
    const cplx d = r(i, i);
    if (std::abs(d) > 0.0) q.col(i) *= d / std::abs(d);
  }
  return q;
}

MatrixXcd random_hermitian(Eigen::Index dim, std::mt19937_64& rng) {
  const MatrixXcd z = random_complex_matrix(dim, dim, rng);
  MatrixXcd h = (z + z.adjoint()) * 0.5;
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
  if (scale > 0.0) h /= scale;
  return h;
}

VectorXcd random_unit_vector(Eigen::Index dim, std::mt19937_64& rng) {
  VectorXcd v = random_complex_matrix(dim, 1, rng);
  return v / v.norm();
}

LogLinearFit fit_log_linear(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorKind::input, "fit_log_linear: need at least two points");
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> ly(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0)) throw Error(ErrorKind::input, "fit_log_linear: values must be positive");
    ly[i] = std::log(y[i]);
    sx += x[i];
    sy += ly[i];
    sxx += x[i] * x[i];
    sxy += x[i] * ly[i];
  }
  LogLinearFit fit;
  const double denom = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  const double mean = sy / n;
  double ss_tot = 0, ss_res = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double pred = fit.intercept + fit.slope * x[i];
    ss_res += (ly[i] - pred) * (ly[i] - pred);
    ss_tot += (ly[i] - mean) * (ly[i] - mean);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

}  // namespace topocirc
