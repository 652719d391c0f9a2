#pragma once

// Dense exact backend for spin chains.
//
// Basis convention: site 0 is the most significant digit of a basis index, so
// a product state |s_0 s_1 ... s_{n-1}> has index sum_k s_k d^(n-1-k). For
// spin-1/2 the local state 0 is spin up (sigma^z = +1); for spin-1 the local
// states are ordered S^z = +1, 0, -1.

#include "topocirc/linalg.hpp"

#include <Eigen/SparseCore>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace topocirc {

enum class Boundary { open, periodic };

/// An operator acting on the listed sites; the matrix factor order follows
/// `sites` (first listed site is the most significant).
struct LocalOp {
  std::vector<int> sites;
  MatrixXcd matrix;
};

/// Product of local operators on pairwise disjoint supports.
using ProductOp = std::vector<LocalOp>;

struct Statevector {
  int n_sites = 0;
  int local_dim = 2;
  VectorXcd amplitudes;
  std::map<std::string, int> sector_tags;

  Statevector() = default;
  Statevector(int n, int d, VectorXcd amps);

  std::int64_t dim() const { return amplitudes.size(); }
  double norm() const { return amplitudes.norm(); }
  void normalize();
};

Statevector product_state(int n_sites, const VectorXcd& site_state);

struct LocalHamiltonian {
  int n_sites = 0;
  int local_dim = 2;
  std::vector<LocalOp> terms;
  Boundary boundary = Boundary::open;

  /// Throws unless every term is Hermitian and supported on at most two
  /// neighbouring sites of the chain (ring neighbours when periodic).
  void validate() const;
};

/// On-site representation of a finite group. `table[a][b]` is the index of
/// the product a*b.
struct SymmetryRep {
  std::vector<std::string> labels;
  std::vector<std::vector<int>> table;
  std::vector<MatrixXcd> site_unitary;

  int size() const { return static_cast<int>(labels.size()); }
  int local_dim() const { return site_unitary.empty() ? 0 : static_cast<int>(site_unitary.front().rows()); }
  int index(const std::string& label) const;
  int identity() const;
  int inverse(int g) const;
  bool is_abelian() const;
  void validate(double tolerance = tol::unitary) const;
};

/// Spin operators for local dimension 2 (spin-1/2), 3 (spin-1) or 4 (two
/// spin-1/2 constituents, total spin).
struct SpinMatrices {
  MatrixXcd x, y, z;
};

SpinMatrices spin_matrices(int local_dim);
MatrixXcd pauli(char which);

LocalHamiltonian build_tfim(int n, double mu, Boundary boundary);

enum class Spin1Kind { heisenberg, aklt };
Spin1Kind parse_spin1_kind(const std::string& name);
LocalHamiltonian build_spin1_chain(int n, Spin1Kind kind, Boundary boundary);

/// Restricts a ground-state search to the eigenspace of prod_k u with the
/// given eigenvalue. `u` must have finite order.
struct SectorFilter {
  MatrixXcd site_unitary;
  cplx eigenvalue{1.0, 0.0};
};

/// Even fermion parity after Jordan-Wigner: prod_k (-sigma^z_k) = +1.
SectorFilter even_parity_sector();

struct GroundStateOptions {
  std::optional<SectorFilter> sector;
  std::int64_t max_dim = std::int64_t{1} << 26;  // 4^13
  int krylov_dim = 80;
  int max_restarts = 300;
  double residual_tol = tol::eig_residual;
  double degeneracy_tol = tol::degeneracy;
  bool allow_degenerate = false;
  std::uint64_t seed = 7;
};

struct GroundState {
  Statevector state;
  double energy = 0.0;
  /// Distance to the next eigenvalue inside the searched sector.
  double gap = 0.0;
};

GroundState ground_state(const LocalHamiltonian& h, const GroundStateOptions& options = {});

Eigen::SparseMatrix<cplx, Eigen::RowMajor> assemble_sparse(const LocalHamiltonian& h);
MatrixXcd assemble_dense(const LocalHamiltonian& h);

VectorXcd apply_local(const VectorXcd& psi, int n_sites, int local_dim, const LocalOp& op);
VectorXcd apply_product(const VectorXcd& psi, int n_sites, int local_dim, const ProductOp& op);

/// <psi|P|psi> for a product operator; the empty product is the identity.
cplx expect(const Statevector& state, const ProductOp& op);
double energy(const LocalHamiltonian& h, const Statevector& state);

/// Z2 x Z2 as pi rotations {1, e^{i pi S^x}, e^{i pi S^y}, e^{i pi S^z}},
/// labelled e, x, y, z.
SymmetryRep build_z2z2_rep(int local_dim = 3);

/// Block `block` consecutive sites into one: u(g) -> u(g)^{(x) block}.
SymmetryRep block_rep(const SymmetryRep& rep, int block);

}  // namespace topocirc
