#pragma once

// Periodic matrix-product states
//   |Psi> = sum tr(A^(0)_{i_0} A^(1)_{i_1} ... A^(n-1)_{i_{n-1}}) |i_0 ... i_{n-1}>.
// Bond b sits to the left of site b; bond n is identified with bond 0.

#include "topocirc/circuits.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace topocirc {

using SiteTensor = std::vector<MatrixXcd>;  // one D_k x D_{k+1} matrix per physical index

struct MatrixProductState {
  int n_sites = 0;
  int local_dim = 0;
  std::vector<SiteTensor> tensors;
  /// Diagonal left environments after canonicalization; entry k holds M on
  /// bond k+1 (to the right of site k).
  std::optional<std::vector<VectorXd>> canonical_envs;
  /// Weight dropped by truncations since construction.
  double discarded_weight = 0.0;

  int bond_dim(int bond) const;
  void validate() const;
};

/// n copies of one site tensor.
MatrixProductState uniform_mps(int n, const SiteTensor& tensor);

bool is_translation_invariant(const MatrixProductState& mps, double tolerance = 1e-12);

MatrixProductState product_mps(int n, const VectorXcd& site_state);

enum class FixedPointKind { trivial, dimer };
FixedPointKind parse_fixed_point_kind(const std::string& name);

/// Sites carry two spin-1/2 constituents (left, right), local index 2l + r.
/// trivial: each site holds a singlet. dimer: singlets join the right
/// constituent of site k with the left constituent of site k+1 (ring).
MatrixProductState fixed_point_state(FixedPointKind kind, int n);

/// Spin-1 AKLT state with A+ = sqrt(2/3) sigma+, A0 = -sqrt(1/3) sigma^z,
/// A- = -sqrt(2/3) sigma-, canonicalized.
MatrixProductState aklt_state(int n);

/// Maps each two-constituent site onto its spin-1 (triplet) subspace.
MatrixProductState project_to_spin1(const MatrixProductState& mps);

/// Isometry from spin-1 (S^z = +1, 0, -1) into two spin-1/2.
MatrixXcd triplet_isometry();

/// E(X) = sum_i A_i X A_i^dagger and E*(X) = sum_i A_i^dagger X A_i.
MatrixXcd apply_transfer(const SiteTensor& a, const MatrixXcd& x);
MatrixXcd apply_transfer_adjoint(const SiteTensor& a, const MatrixXcd& x);

/// Dense double-layer transfer matrix sum_{pq} O_{pq} conj(A_p) (x) B_q. `a`
/// and `b` list consecutive site tensors; `op` acts on all of them.
MatrixXcd transfer_matrix(const std::vector<SiteTensor>& a, const std::vector<SiteTensor>& b, const MatrixXcd& op);
MatrixXcd transfer_matrix(const SiteTensor& a);

/// Right-canonical gauge sum_i A_i A_i^dagger = I with diagonal left
/// environments; bonds are restricted to the support of the fixed points.
MatrixProductState canonicalize(const MatrixProductState& mps);

struct CanonicalResidual {
  double right = 0.0;  // max_k |E_k(I) - I|
  double left = 0.0;   // max_k |E*_k(M_{k-1}) - M_k|
};
CanonicalResidual canonical_residual(const MatrixProductState& mps);

/// Transfer-map spectrum of a translation-invariant MPS, sorted by modulus and
/// scaled so the leading modulus is 1.
std::vector<cplx> transfer_spectrum(const MatrixProductState& mps);

/// |nu_2| / |nu_1| of the transfer map.
double correlation_gap(const MatrixProductState& mps);

cplx overlap(const MatrixProductState& a, const MatrixProductState& b);
double norm_squared(const MatrixProductState& mps);
double fidelity(const MatrixProductState& a, const MatrixProductState& b);

/// <Psi|Q|Psi> / <Psi|Psi>.
cplx expect_string(const MatrixProductState& mps, const StringOperator& q);

/// <Psi|P|Psi> / <Psi|Psi> for a product of operators on disjoint windows.
cplx expect(const MatrixProductState& mps, const ProductOp& op);

struct TruncationOptions {
  int chi_max = 64;
  double trunc_tol = 1e-10;
};

/// One- or two-site gate; two-site gates act on (k, k+1) with k < n-1. The
/// weight dropped by the SVD is added to `discarded_weight`.
MatrixProductState apply_gate_mps(const MatrixProductState& mps, const Gate& gate, const TruncationOptions& opt = {});
MatrixProductState apply_circuit(const LocalCircuit& c, const MatrixProductState& mps, const TruncationOptions& opt = {});

Statevector mps_to_statevector(const MatrixProductState& mps, std::int64_t max_dim = std::int64_t{1} << 22);

/// Groups `block` consecutive sites into one site of dimension d^block.
MatrixProductState block_sites(const MatrixProductState& mps, int block);

/// Operator Schmidt decomposition G = sum_s L_s (x) R_s of a two-factor
/// operator with factor dimensions (d1, d2).
struct OperatorSchmidt {
  std::vector<MatrixXcd> left, right;
};
OperatorSchmidt operator_schmidt(const MatrixXcd& g, int d1, int d2, double threshold = 1e-14);

/// Translation-invariant layer of on-site operators.
MatrixProductState apply_uniform_onsite(const MatrixProductState& mps, const MatrixXcd& op);

/// Translation-invariant layer of operators on (right half of site k, left
/// half of site k+1), including the wrap pair. Sites have dimension
/// half_dim^2 with the left half most significant.
MatrixProductState apply_uniform_cross(const MatrixProductState& mps, const MatrixXcd& gate, int half_dim);

/// Brick-wall circuit on a translation-invariant state of two-half sites:
/// even layers act inside sites, odd layers across neighbouring sites.
MatrixProductState apply_uniform_brick(const MatrixProductState& mps, const std::vector<MatrixXcd>& gates, int half_dim);

void write_mps(std::ostream& os, const MatrixProductState& mps);
MatrixProductState read_mps(std::istream& is);

}  // namespace topocirc
