#pragma once

// Symmetry-protected topological phase diagnostics for translation-invariant
// matrix-product states: string operators, projective representations,
// factor systems and the Z2 x Z2 cohomology class.

#include "topocirc/fermisim.hpp"
#include "topocirc/mpsengine.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace topocirc {

/// S^y at floor(n/3) and floor(2n/3) with e^{i pi S^y} on the sites between.
/// local_dim 3 is spin-1; local_dim 4 uses the total spin of two spin-1/2.
StringOperator haldane_string_operator(int n, int local_dim = 3);

/// Rewrites a string operator for a chain blocked `block` sites at a time.
/// End windows grow to whole blocks.
StringOperator block_string_operator(const StringOperator& q, int block);

struct FermionicStringOperator {
  int n_modes = 0;
  int left_mode = 0;
  int right_mode = 0;
  MajoranaPolynomial polynomial;
};

/// (a^dag + a) prod e^{i pi n} (a^dag + a) between floor(n/3) and floor(2n/3).
FermionicStringOperator fermionic_string_operator(int n);

struct ProjectiveRep {
  std::vector<MatrixXcd> v;      // V(g), unitary, largest entry positive real
  std::vector<double> theta;     // phase of the twisted transfer eigenvalue
  std::vector<double> residual;  // max_i |(U(g)A)_i - e^{i theta} V^dag A_i V|
};

/// Solves (U(g)A)_i = e^{i theta(g)} V(g)^dag A_i V(g) for every g from the
/// dominant eigenvector of the twisted transfer map.
ProjectiveRep extract_projective_rep(const MatrixProductState& mps, const SymmetryRep& rep);

struct FactorSystem {
  std::vector<std::string> labels;
  std::vector<std::vector<int>> table;
  std::vector<std::vector<cplx>> omega;  // V(a) V(b) = omega[a][b] V(ab)
  double residual = 0.0;
};

FactorSystem factor_system(const std::vector<MatrixXcd>& vs, const SymmetryRep& group, double tolerance = 1e-8);

/// max |w(b,c) w(a,bc) - w(a,b) w(ab,c)|.
double cocycle_residual(const FactorSystem& fs);

/// tr(V1 V2 V1^-1 V2^-1) / D.
cplx commutator_phase(const MatrixXcd& v1, const MatrixXcd& v2);

enum class SptLabel { trivial, nontrivial };
const char* to_string(SptLabel label);

struct ProjectiveClass {
  std::vector<std::string> labels;
  /// omega(a,b) / omega(b,a) for every ordered pair of non-identity elements.
  std::map<std::pair<int, int>, cplx> invariant_phases;
  cplx commutator_xz{1.0, 0.0};
  SptLabel label = SptLabel::trivial;
};

ProjectiveClass cohomology_class_z2z2(const FactorSystem& fs, double tolerance = 1e-6);

struct ClassificationReport {
  std::string state_id;
  SptLabel label = SptLabel::trivial;
  std::map<std::string, double> commutator_phases;  // keyed "a,b"
  std::map<std::string, double> theta;
  std::map<std::string, double> string_order_values;
  double symmetry_residual = 0.0;
  double factor_residual = 0.0;
  double cocycle_residual = 0.0;
  double correlation_gap = 0.0;
  int bond_dim = 0;
};

/// Full pipeline. `string_ops` are evaluated and stored under their keys.
ClassificationReport classify(const MatrixProductState& mps, const SymmetryRep& rep, const std::string& state_id,
                              const std::map<std::string, StringOperator>& string_ops = {});

nlohmann::json to_json(const ClassificationReport& r);

/// Trivial fixed point dressed by prod_k exp(-tau S_{R_k} . S_{L_{k+1}}).
MatrixProductState perturbed_trivial_state(int n, double tau);

/// |<psi|Q'|psi>| with Q' the cone reduction of the Haldane string operator
/// under `circuit`.
double verify_string_vanishing(const MatrixProductState& mps, const LocalCircuit& circuit);

struct InvarianceSample {
  SptLabel label = SptLabel::trivial;
  double commutator_xz = 0.0;
  double string_order = 0.0;
  double symmetry_residual = 0.0;
  int bond_dim = 0;
};

struct InvarianceReport {
  std::string state_id;
  SptLabel initial_label = SptLabel::trivial;
  int depth = 0;
  double string_order_before = 0.0;
  std::vector<InvarianceSample> samples;
  double agreement_fraction = 0.0;
};

/// Evolves a translation-invariant state by `samples` random translation-
/// invariant symmetric brick circuits of the given depth (on the chain
/// blocked in pairs) and reclassifies each result.
InvarianceReport invariance_experiment(const MatrixProductState& state, const SymmetryRep& rep, int depth, int samples,
                                       std::uint64_t seed, const std::string& state_id);

nlohmann::json to_json(const InvarianceReport& r);

}  // namespace topocirc
