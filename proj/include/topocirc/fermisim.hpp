#pragma once

// Fermionic Gaussian backend for the Majorana chain.
//
// Mode j (0-based) owns Majorana indices 2j and 2j+1:
//   c_{2j} = a_j + a_j^dagger,   c_{2j+1} = (a_j - a_j^dagger) / i.
// Jordan-Wigner: a_j -> prod_{l<j}(-Z_l) sigma^-_j, so an occupied mode is
// spin up, c_{2j} -> S_j X_j, c_{2j+1} -> -S_j Y_j with S_j = prod_{l<j}(-Z_l),
// and the parity operator is prod_l(-Z_l).

#include "topocirc/circuits.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace topocirc {

enum class FermionBoundary { open, antiperiodic };

/// H = (i/4) sum_{jk} A_{jk} c_j c_k with A real antisymmetric.
struct QuadraticFermionHamiltonian {
  int n_modes = 0;
  MatrixXd coupling;
  FermionBoundary boundary = FermionBoundary::antiperiodic;
  /// Chemical potential when built by build_majorana_chain.
  std::optional<double> mu;

  void validate(double tolerance = 1e-12) const;
};

/// Gamma_{jk} = (i/2) <[c_j, c_k]>.
struct CovarianceMatrix {
  int n_modes = 0;
  MatrixXd gamma;

  bool is_pure(double tolerance = 1e-8) const;
  void validate(double tolerance = 1e-10) const;
};

/// Polynomial in Majorana operators. Monomials are strictly increasing index
/// lists; c_j^2 = 1 and distinct Majoranas anticommute.
class MajoranaPolynomial {
public:
  using Monomial = std::vector<int>;

  MajoranaPolynomial() = default;
  explicit MajoranaPolynomial(int n_majoranas) : n_majoranas_(n_majoranas) {}

  static MajoranaPolynomial identity(int n_majoranas, cplx coefficient = 1.0);
  static MajoranaPolynomial majorana(int n_majoranas, int index, cplx coefficient = 1.0);

  int n_majoranas() const { return n_majoranas_; }
  const std::map<Monomial, cplx>& terms() const { return terms_; }

  /// Adds coefficient * (product of `indices` in the given order).
  void add(std::vector<int> indices, cplx coefficient);
  void prune(double threshold = 1e-14);

  bool is_even() const;
  MajoranaPolynomial adjoint() const;

  MajoranaPolynomial operator+(const MajoranaPolynomial& o) const;
  MajoranaPolynomial operator-(const MajoranaPolynomial& o) const;
  MajoranaPolynomial operator*(const MajoranaPolynomial& o) const;
  MajoranaPolynomial operator*(cplx s) const;

private:
  int n_majoranas_ = 0;
  std::map<Monomial, cplx> terms_;
};

/// Sum of Pauli strings; letters 0 = I, 1 = X, 2 = Y, 3 = Z per site.
class PauliSum {
public:
  using String = std::vector<std::uint8_t>;

  PauliSum() = default;
  explicit PauliSum(int n_sites) : n_sites_(n_sites) {}

  int n_sites() const { return n_sites_; }
  const std::map<String, cplx>& terms() const { return terms_; }

  void add(const String& s, cplx coefficient);
  void prune(double threshold = 1e-14);

  PauliSum operator*(const PauliSum& o) const;
  PauliSum operator+(const PauliSum& o) const;

  MatrixXcd to_matrix() const;
  VectorXcd apply(const VectorXcd& psi) const;

private:
  int n_sites_ = 0;
  std::map<String, cplx> terms_;
};

/// Sites on which a Pauli string acts non-trivially.
std::vector<int> pauli_support(const PauliSum::String& s);

struct GaussianGate {
  std::vector<int> support_majoranas;  // sorted
  MatrixXd rotation;                   // U^dagger c_a U = sum_b R_ab c_b on the support
  MajoranaPolynomial unitary;          // the gate as an even Majorana polynomial
};

/// Gates applied in list order.
struct GaussianCircuit {
  int n_modes = 0;
  std::vector<GaussianGate> layers;

  int depth() const { return static_cast<int>(layers.size()); }
};

/// Majorana chain with coupling 1 and on-site potential mu, antiperiodic
/// boundary. mu = +infinity gives the on-site limit H = i sum c_{2j} c_{2j+1}.
QuadraticFermionHamiltonian build_majorana_chain(int n, double mu);

CovarianceMatrix gaussian_ground_state(const QuadraticFermionHamiltonian& h);

/// (1/4) sum A_jk Gamma_jk.
double gaussian_energy(const QuadraticFermionHamiltonian& h, const CovarianceMatrix& gamma);

/// Rotation of an even unitary Majorana polynomial supported on `support`,
/// computed from U^dagger c_a U. Throws unless the result is real orthogonal.
GaussianGate make_gaussian_gate(const MajoranaPolynomial& unitary, std::vector<int> support);

/// Gate between modes j and j+1 (0 <= j <= n-2) exchanging Majoranas 2j+1 and
/// 2j+3 (with a sign on 2j+2).
GaussianGate majorana_swap_gate(int n_modes, int j);

CovarianceMatrix apply_gaussian(const CovarianceMatrix& gamma, const GaussianGate& gate);
CovarianceMatrix apply_gaussian(const CovarianceMatrix& gamma, const GaussianCircuit& circuit);

/// n-1 swap gates, j = 0 first; maps the mu = infinity ground state to the
/// mu = 0 ground state.
GaussianCircuit build_fermionic_swap_circuit(int n);

/// Pfaffian of a skew-symmetric matrix (Parlett-Reid with pivoting).
template <typename Derived>
typename Derived::Scalar pfaffian(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = m.rows();
  if (m.cols() != n) throw Error(ErrorKind::invalid_size, "pfaffian: matrix not square");
  if (n % 2 == 1) return Scalar(0);
  MatrixX<Scalar> a = m;
  Scalar pf(1);
  for (Eigen::Index k = 0; k + 1 < n; k += 2) {
    Eigen::Index kp = 0;
    a.col(k).tail(n - k - 1).cwiseAbs().maxCoeff(&kp);
    kp += k + 1;
    if (kp != k + 1) {
      a.row(k + 1).swap(a.row(kp));
      a.col(k + 1).swap(a.col(kp));
      pf = -pf;
    }
    if (a(k + 1, k) == Scalar(0)) return Scalar(0);
    pf *= a(k, k + 1);
    if (k + 2 < n) {
      const MatrixX<Scalar> tau = a.row(k).tail(n - k - 2) / a(k, k + 1);
      const MatrixX<Scalar> col = a.col(k + 1).tail(n - k - 2);
      a.bottomRightCorner(n - k - 2, n - k - 2) += tau.transpose() * col.transpose() - col * tau;
    }
  }
  return pf;
}

/// <(a_i^dag + a_i) prod_{k=i}^{j-1} e^{i pi n_k} (a_j^dag + a_j)>, 0-based i < j.
double string_order(const CovarianceMatrix& gamma, int i, int j);

/// <P> for an arbitrary Majorana polynomial by Wick's theorem.
cplx gaussian_expect(const CovarianceMatrix& gamma, const MajoranaPolynomial& p);

/// Majorana polynomial of the string operator between modes i < j.
MajoranaPolynomial string_operator_polynomial(int n_modes, int i, int j);

/// Exact operator image on spins.
PauliSum jw_map(const MajoranaPolynomial& p);

/// Replaces each Pauli string by its product with prod(-Z) when that lowers
/// its weight. Valid in the even-parity sector only; odd polynomials throw a
/// sector error.
PauliSum reduce_even_sector(const PauliSum& s);

/// Spin Hamiltonian equal to h in the even sector. Antiperiodic chains map to
/// periodic spin chains.
LocalHamiltonian jw_map(const QuadraticFermionHamiltonian& h);

/// Spin circuit equal to the Gaussian circuit in the even sector; gate k acts
/// on the sites spanned by its Majorana support.
LocalCircuit jw_map(const GaussianCircuit& c);

/// Matrix of a Pauli sum restricted to the listed sites. Throws if a term acts
/// outside them.
MatrixXcd local_matrix(const PauliSum& s, const std::vector<int>& sites);

}  // namespace topocirc
