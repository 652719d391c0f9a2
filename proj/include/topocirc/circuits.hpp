#pragma once

// Layered local circuits, symmetric-gate checks, SWAP and Trotter circuit
// builders, string operators and their causal-cone reduction.

#include "topocirc/spinsim.hpp"

#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace topocirc {

/// A gate on one site or two ring-neighbouring sites. `sites` is sorted and
/// the matrix factor order follows it.
struct Gate {
  std::vector<int> sites;
  MatrixXcd matrix;
};

using Layer = std::vector<Gate>;

/// Layers are stored in application order: layers[0] acts first.
struct LocalCircuit {
  int n_sites = 0;
  int local_dim = 2;
  std::vector<Layer> layers;

  int depth() const { return static_cast<int>(layers.size()); }
  std::size_t gate_count() const;
};

/// `first` then `second`; depths add.
LocalCircuit compose(const LocalCircuit& first, const LocalCircuit& second);

/// Inverse circuit: layers reversed, gates adjoint.
LocalCircuit adjoint(const LocalCircuit& c);

struct CircuitViolation {
  int layer = -1;
  int gate = -1;
  std::string message;
};

struct CircuitReport {
  bool valid = true;
  int depth = 0;
  int max_gate_size = 0;
  std::vector<CircuitViolation> violations;
};

CircuitReport validate_circuit(const LocalCircuit& c, double tolerance = tol::unitary);

/// True iff the gate commutes with u(g)^{(x) k} on its support for every g,
/// up to a global phase.
bool is_symmetric(const Gate& gate, const SymmetryRep& rep, double tolerance = tol::unitary);
bool is_symmetric(const LocalCircuit& c, const SymmetryRep& rep, double tolerance = tol::unitary);

/// Two-site gate on local_dim 4 sites that exchanges the right constituent
/// spin-1/2 of the first site with the right constituent of the second.
MatrixXcd swap_right_constituents();

/// Depth n-1 circuit of SWAP gates turning on-site singlets into inter-site
/// singlets. Layer k (k = 0..n-2) swaps the right constituents of sites k, k+1.
LocalCircuit build_singlet_swap_circuit(int n);

Statevector apply_circuit(const LocalCircuit& c, const Statevector& state);

/// Dense unitary of the whole circuit (columns = images of basis states).
MatrixXcd circuit_unitary(const LocalCircuit& c);

/// Operator on consecutive sites [start, start + width).
struct WindowOp {
  int start = 0;
  int width = 1;
  MatrixXcd matrix;

  int end() const { return start + width; }
};

/// left_end (x) prod_{k in [string_begin, string_end)} string_factor_k (x) right_end.
struct StringOperator {
  int n_sites = 0;
  int local_dim = 0;
  WindowOp left_end;
  MatrixXcd string_factor;
  int string_begin = 0;
  int string_end = 0;
  WindowOp right_end;

  void validate() const;
  ProductOp to_product_op() const;
};

/// End operator `end_op` on `left_site` and `right_site`, string factor on the
/// sites strictly between.
StringOperator make_string_operator(int n_sites, int left_site, int right_site, const MatrixXcd& end_op,
                                    const MatrixXcd& string_factor);

struct ConeReduction {
  StringOperator reduced;
  MatrixXcd left_cone_unitary;   // merged gates of the left cone, phase-normalized
  MatrixXcd right_cone_unitary;
  int left_cone_gates = 0;
  int right_cone_gates = 0;
  int cancelled_gates = 0;
};

/// Q' = C^dagger Q C for a circuit whose gates commute (up to phase) with the
/// string factor. Gates outside both cones cancel; gates inside are merged.
ConeReduction causal_cone_reduce_detailed(const LocalCircuit& c, const StringOperator& q,
                                          double tolerance = 1e-10);
StringOperator causal_cone_reduce(const LocalCircuit& c, const StringOperator& q, double tolerance = 1e-10);

/// Nearest-neighbour bond terms. Single-site terms on site j are folded into
/// bond max(j-1, 0); bond n-1 is the periodic wrap bond {0, n-1}.
std::vector<LocalOp> bond_terms(const LocalHamiltonian& h);

/// First-order Trotter circuit: per step, one layer of odd bonds (0-based
/// 1, 3, ...) then one layer of even bonds; depth 2s.
LocalCircuit trotterize(const LocalHamiltonian& h, double t, int steps);

MatrixXcd random_symmetric_gate(const SymmetryRep& rep, int support, std::mt19937_64& rng);

/// Brick-wall circuit on an open chain; layer l uses bonds starting at l % 2.
LocalCircuit random_symmetric_circuit(int n, int depth, const SymmetryRep& rep, std::mt19937_64& rng);

/// Brick-wall circuit of arbitrary random unitaries on an open chain.
LocalCircuit random_circuit(int n, int local_dim, int depth, std::mt19937_64& rng);

void write_circuit(std::ostream& os, const LocalCircuit& c);
LocalCircuit read_circuit(std::istream& is);

}  // namespace topocirc
