#include "topocirc/sptclass.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace topocirc {

namespace {

constexpr double pi = std::numbers::pi;

std::string pair_key(const std::vector<std::string>& labels, int a, int b) { return labels[a] + "," + labels[b]; }

MatrixXcd identity_power(int d, int count) {
  const auto dim = checked_pow(d, count, 1 << 24);
  return MatrixXcd::Identity(dim, dim);
}

// Matrix on sites [first, first + count) of the operator q restricted there;
// `window` occupies its own sites, every other site gets its string or
// identity factor.
MatrixXcd widened_window(const StringOperator& q, const WindowOp& window, int first, int count) {
  MatrixXcd m = MatrixXcd::Identity(1, 1);
  int s = first;
  while (s < first + count) {
    if (s == window.start) {
      m = kron(m, window.matrix);
      s += window.width;
      continue;
    }
    const bool on_string = q.string_begin <= s && s < q.string_end;
    m = kron(m, on_string ? q.string_factor : identity_power(q.local_dim, 1));
    ++s;
  }
  return m;
}

MatrixProductState ensure_canonical(const MatrixProductState& mps) {
  if (mps.canonical_envs) {
    const auto r = canonical_residual(mps);
    if (r.right <= 1e-10 && r.left <= 1e-10) return mps;
  }
  return canonicalize(mps);
}

void check_z2z2(const std::vector<std::string>& labels, const std::vector<std::vector<int>>& table) {
  const std::vector<std::string> expect = {"e", "x", "y", "z"};
  if (labels != expect || table.size() != 4) throw Error(ErrorKind::input, "cohomology_class_z2z2: group is not Z2 x Z2 {e, x, y, z}");
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      if (table[a][b] != (a ^ b)) throw Error(ErrorKind::input, "cohomology_class_z2z2: multiplication table is not Z2 x Z2");
}

// exp(-tau h) for Hermitian h.
MatrixXcd exp_minus(const MatrixXcd& h, double tau) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h);
  const VectorXd w = (-tau * es.eigenvalues().array()).exp();
  return es.eigenvectors() * w.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

// Dominant eigenpair of X -> sum_i (UA)_i X A_i^dagger by power iteration.
// For a symmetric state its eigenvector is proportional to V^dagger and the
// subleading modulus equals `gap`.
struct TwistedEigen {
  MatrixXcd x;
  cplx lambda{0.0, 0.0};
  bool converged = false;
};

TwistedEigen twisted_fixed_point(const SiteTensor& a, const SiteTensor& ua, double gap) {
  const auto dim = a.front().rows();
  auto apply = [&](const MatrixXcd& x) {
    MatrixXcd y = MatrixXcd::Zero(dim, dim);
    for (std::size_t i = 0; i < a.size(); ++i) y.noalias() += ua[i] * x * a[i].adjoint();
    return y;
  };
  // Steps to shrink the subleading component below round-off, with margin.
  const double rate = std::max(gap, 1e-3);
  const int max_iter = std::min(200000, 200 + static_cast<int>(std::ceil(40.0 / -std::log(rate))));
  TwistedEigen out;
  std::mt19937_64 rng(0x5eed);
  MatrixXcd x = random_complex_matrix(dim, dim, rng);
  x /= x.norm();
  double log_growth = 0.0;
  int counted = 0;
  for (int it = 0; it < max_iter; ++it) {
    const MatrixXcd y = apply(x);
    const cplx lambda = (x.adjoint() * y).trace();
    const double ny = y.norm();
    out.x = x;
    out.lambda = lambda;
    if ((y - lambda * x).norm() <= 1e-14 * std::max(1.0, std::abs(lambda))) {
      out.converged = true;
      return out;
    }
    if (ny == 0.0) return out;
    if (it >= max_iter - 100) {
      log_growth += std::log(ny);
      ++counted;
    }
    x = y / ny;
  }
  // No convergence: report the mean growth rate as the eigenvalue modulus.
  if (counted > 0) out.lambda = std::polar(std::exp(log_growth / counted), std::arg(out.lambda));
  // A residual at round-off level still identifies the fixed point.
  const MatrixXcd y = apply(out.x);
  out.converged = (y - out.lambda * out.x).norm() <= 1e-11;
  return out;
}

}  // namespace

StringOperator haldane_string_operator(int n, int local_dim) {
  if (n < 9) throw Error(ErrorKind::invalid_size, "haldane_string_operator: need n >= 9");
  if (local_dim != 3 && local_dim != 4) throw Error(ErrorKind::invalid_size, "haldane_string_operator: local_dim must be 3 or 4");
  const MatrixXcd sy = spin_matrices(local_dim).y;
  return make_string_operator(n, n / 3, 2 * n / 3, sy, expi_hermitian(sy, pi));
}

StringOperator block_string_operator(const StringOperator& q, int block) {
  q.validate();
  if (block < 1 || q.n_sites % block != 0) throw Error(ErrorKind::invalid_size, "block_string_operator: block must divide n");
  const int lb0 = q.left_end.start / block;
  const int lb1 = (q.left_end.end() + block - 1) / block;
  const int rb0 = q.right_end.start / block;
  const int rb1 = (q.right_end.end() + block - 1) / block;
  if (lb1 > rb0) throw Error(ErrorKind::unsupported, "block_string_operator: end windows share a block");
  if (lb1 < rb0 && (q.string_begin > lb1 * block || q.string_end < rb0 * block))
    throw Error(ErrorKind::unsupported, "block_string_operator: a block mixes string and identity factors");

  StringOperator out;
  out.n_sites = q.n_sites / block;
  out.local_dim = static_cast<int>(checked_pow(q.local_dim, block, 1 << 24));
  out.left_end = {lb0, lb1 - lb0, widened_window(q, q.left_end, lb0 * block, (lb1 - lb0) * block)};
  out.right_end = {rb0, rb1 - rb0, widened_window(q, q.right_end, rb0 * block, (rb1 - rb0) * block)};
  out.string_factor = MatrixXcd::Identity(1, 1);
  for (int k = 0; k < block; ++k) out.string_factor = kron(out.string_factor, q.string_factor);
  out.string_begin = lb1;
  out.string_end = rb0;
  out.validate();
  return out;
}

FermionicStringOperator fermionic_string_operator(int n) {
  if (n < 9) throw Error(ErrorKind::invalid_size, "fermionic_string_operator: need n >= 9");
  FermionicStringOperator f;
  f.n_modes = n;
  f.left_mode = n / 3;
  f.right_mode = 2 * n / 3;
  f.polynomial = string_operator_polynomial(n, f.left_mode, f.right_mode);
  return f;
}

namespace {

ProjectiveRep extract_canonical(const MatrixProductState& mps, const SymmetryRep& rep, double gap) {
  if (gap >= 1.0 - 1e-8) throw Error(ErrorKind::ill_posed, "extract_projective_rep: state is not short-range correlated");
  const SiteTensor& a = mps.tensors.front();
  const auto dim = a.front().rows();
  const int d = mps.local_dim;
  ProjectiveRep out;
  for (int g = 0; g < rep.size(); ++g) {
    const MatrixXcd& u = rep.site_unitary[g];
    SiteTensor ua(d, MatrixXcd::Zero(dim, dim));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (u(i, j) != cplx(0.0)) ua[i] += u(i, j) * a[j];

    const TwistedEigen te = twisted_fixed_point(a, ua, gap);
    const cplx lambda = te.lambda;
    if (std::abs(lambda) < 1.0 - 1e-6)
      throw Error(ErrorKind::symmetry, "extract_projective_rep: state is not symmetric under " + rep.labels[g]);
    if (!te.converged)
      throw Error(ErrorKind::ill_posed, "extract_projective_rep: twisted transfer map has no isolated dominant eigenvalue for " + rep.labels[g]);

    MatrixXcd v = te.x.adjoint();
    v *= std::sqrt(static_cast<double>(dim)) / v.norm();
    v = fix_phase_largest_entry(v);

    const double theta = std::arg(lambda);
    const cplx phase = std::polar(1.0, theta);
    double residual = 0.0;
    for (int i = 0; i < d; ++i)
      residual = std::max(residual, (ua[i] - phase * v.adjoint() * a[i] * v).cwiseAbs().maxCoeff());
    out.v.push_back(v);
    out.theta.push_back(theta);
    out.residual.push_back(residual);
  }
  return out;
}

}  // namespace

ProjectiveRep extract_projective_rep(const MatrixProductState& input, const SymmetryRep& rep) {
  rep.validate();
  input.validate();
  if (rep.local_dim() != input.local_dim) throw Error(ErrorKind::invalid_size, "extract_projective_rep: rep and state local dimensions differ");
  if (!is_translation_invariant(input)) throw Error(ErrorKind::unsupported, "extract_projective_rep: state is not translation invariant");
  const MatrixProductState mps = ensure_canonical(input);
  return extract_canonical(mps, rep, correlation_gap(mps));
}

FactorSystem factor_system(const std::vector<MatrixXcd>& vs, const SymmetryRep& group, double tolerance) {
  const int g = group.size();
  if (static_cast<int>(vs.size()) != g) throw Error(ErrorKind::invalid_size, "factor_system: one matrix per group element required");
  FactorSystem fs;
  fs.labels = group.labels;
  fs.table = group.table;
  fs.omega.assign(g, std::vector<cplx>(g));
  std::vector<MatrixXcd> inv(g);
  for (int a = 0; a < g; ++a) {
    Eigen::FullPivLU<MatrixXcd> lu(vs[a]);
    if (!lu.isInvertible()) throw Error(ErrorKind::inconsistent_rep, "factor_system: V(" + group.labels[a] + ") is singular");
    inv[a] = lu.inverse();
  }
  for (int a = 0; a < g; ++a)
    for (int b = 0; b < g; ++b) {
      const int ab = group.table[a][b];
      const MatrixXcd prod = vs[a] * vs[b];
      const cplx w = (inv[ab] * prod).trace() / static_cast<double>(prod.rows());
      const double r = (prod - w * vs[ab]).cwiseAbs().maxCoeff();
      fs.residual = std::max(fs.residual, r);
      fs.omega[a][b] = w;
    }
  if (fs.residual > tolerance)
    throw Error(ErrorKind::inconsistent_rep, "factor_system: V(a)V(b) is not proportional to V(ab)");
  return fs;
}

double cocycle_residual(const FactorSystem& fs) {
  const auto g = fs.omega.size();
  double r = 0.0;
  for (std::size_t a = 0; a < g; ++a)
    for (std::size_t b = 0; b < g; ++b)
      for (std::size_t c = 0; c < g; ++c) {
        const cplx lhs = fs.omega[b][c] * fs.omega[a][fs.table[b][c]];
        const cplx rhs = fs.omega[a][b] * fs.omega[fs.table[a][b]][c];
        r = std::max(r, std::abs(lhs - rhs));
      }
  return r;
}

cplx commutator_phase(const MatrixXcd& v1, const MatrixXcd& v2) {
  if (v1.rows() != v2.rows() || v1.rows() != v1.cols() || v2.rows() != v2.cols())
    throw Error(ErrorKind::invalid_size, "commutator_phase: size mismatch");
  const MatrixXcd c = v1 * v2 * v1.inverse() * v2.inverse();
  return c.trace() / static_cast<double>(c.rows());
}

const char* to_string(SptLabel label) { return label == SptLabel::trivial ? "trivial" : "nontrivial"; }

ProjectiveClass cohomology_class_z2z2(const FactorSystem& fs, double tolerance) {
  check_z2z2(fs.labels, fs.table);
  ProjectiveClass pc;
  pc.labels = fs.labels;
  for (int a = 1; a < 4; ++a)
    for (int b = 1; b < 4; ++b) {
      if (a == b) continue;
      const cplx p = fs.omega[a][b] / fs.omega[b][a];
      if (std::abs(p - 1.0) > tolerance && std::abs(p + 1.0) > tolerance)
        throw Error(ErrorKind::classification, "cohomology_class_z2z2: commutator phase " + pair_key(fs.labels, a, b) + " is not +-1");
      pc.invariant_phases[{a, b}] = p;
    }
  pc.commutator_xz = pc.invariant_phases.at({1, 3});
  pc.label = std::abs(pc.commutator_xz + 1.0) <= tolerance ? SptLabel::nontrivial : SptLabel::trivial;
  return pc;
}

ClassificationReport classify(const MatrixProductState& input, const SymmetryRep& rep, const std::string& state_id,
                              const std::map<std::string, StringOperator>& string_ops) {
  rep.validate();
  input.validate();
  if (rep.local_dim() != input.local_dim) throw Error(ErrorKind::invalid_size, "classify: rep and state local dimensions differ");
  if (!is_translation_invariant(input)) throw Error(ErrorKind::unsupported, "classify: state is not translation invariant");
  const MatrixProductState mps = ensure_canonical(input);
  ClassificationReport r;
  r.state_id = state_id;
  r.bond_dim = mps.bond_dim(0);
  r.correlation_gap = correlation_gap(mps);
  const ProjectiveRep pr = extract_canonical(mps, rep, r.correlation_gap);
  for (int g = 0; g < rep.size(); ++g) {
    r.theta[rep.labels[g]] = pr.theta[g];
    r.symmetry_residual = std::max(r.symmetry_residual, pr.residual[g]);
  }
  const FactorSystem fs = factor_system(pr.v, rep);
  r.factor_residual = fs.residual;
  r.cocycle_residual = cocycle_residual(fs);
  const ProjectiveClass pc = cohomology_class_z2z2(fs);
  r.label = pc.label;
  for (const auto& [key, phase] : pc.invariant_phases) r.commutator_phases[pair_key(fs.labels, key.first, key.second)] = phase.real();
  for (const auto& [name, q] : string_ops) r.string_order_values[name] = expect_string(mps, q).real();
  return r;
}

nlohmann::json to_json(const ClassificationReport& r) {
  nlohmann::json j;
  j["state_id"] = r.state_id;
  j["class"] = to_string(r.label);
  j["commutator_phases"] = r.commutator_phases;
  j["theta"] = r.theta;
  j["string_order_values"] = r.string_order_values;
  j["residuals"] = {{"symmetry_condition", r.symmetry_residual}, {"factor_system", r.factor_residual}, {"cocycle", r.cocycle_residual}};
  j["correlation_gap"] = r.correlation_gap;
  j["bond_dim"] = r.bond_dim;
  return j;
}

MatrixProductState perturbed_trivial_state(int n, double tau) {
  const SpinMatrices s = spin_matrices(2);
  const MatrixXcd heis = kron(s.x, s.x) + kron(s.y, s.y) + kron(s.z, s.z);
  return canonicalize(apply_uniform_cross(fixed_point_state(FixedPointKind::trivial, n), exp_minus(heis, tau), 2));
}

double verify_string_vanishing(const MatrixProductState& mps, const LocalCircuit& circuit) {
  const StringOperator q = causal_cone_reduce(circuit, haldane_string_operator(mps.n_sites, mps.local_dim));
  return std::abs(expect_string(mps, q));
}

InvarianceReport invariance_experiment(const MatrixProductState& state, const SymmetryRep& rep, int depth, int samples,
                                       std::uint64_t seed, const std::string& state_id) {
  if (depth < 0 || samples < 0) throw Error(ErrorKind::input, "invariance_experiment: negative depth or sample count");
  const int d = state.local_dim;
  const MatrixProductState blocked = canonicalize(block_sites(state, 2));
  const SymmetryRep brep = block_rep(rep, 2);
  const StringOperator q = block_string_operator(haldane_string_operator(state.n_sites, d), 2);
  const std::map<std::string, StringOperator> ops = {{"haldane", q}};

  InvarianceReport out;
  out.state_id = state_id;
  out.depth = depth;
  const ClassificationReport initial = classify(blocked, brep, state_id, ops);
  out.initial_label = initial.label;
  out.string_order_before = initial.string_order_values.at("haldane");

  std::mt19937_64 rng(seed);
  int agree = 0;
  for (int s = 0; s < samples; ++s) {
    std::vector<MatrixXcd> gates;
    for (int l = 0; l < depth; ++l) gates.push_back(random_symmetric_gate(rep, 2, rng));
    const MatrixProductState evolved = canonicalize(apply_uniform_brick(blocked, gates, d));
    const ClassificationReport r = classify(evolved, brep, state_id, ops);
    InvarianceSample smp;
    smp.label = r.label;
    smp.commutator_xz = r.commutator_phases.at("x,z");
    smp.string_order = r.string_order_values.at("haldane");
    smp.symmetry_residual = r.symmetry_residual;
    smp.bond_dim = r.bond_dim;
    if (smp.label == out.initial_label) ++agree;
    out.samples.push_back(smp);
  }
  out.agreement_fraction = samples == 0 ? 1.0 : static_cast<double>(agree) / samples;
  return out;
}

nlohmann::json to_json(const InvarianceReport& r) {
  nlohmann::json j;
  j["state_id"] = r.state_id;
  j["initial_class"] = to_string(r.initial_label);
  j["depth"] = r.depth;
  j["string_order_before"] = r.string_order_before;
  j["agreement_fraction"] = r.agreement_fraction;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : r.samples)
    arr.push_back({{"class", to_string(s.label)},
                   {"commutator_xz", s.commutator_xz},
                   {"string_order", s.string_order},
                   {"symmetry_residual", s.symmetry_residual},
                   {"bond_dim", s.bond_dim}});
  j["samples"] = arr;
  return j;
}

}  // namespace topocirc
