#include "topocirc/fermisim.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace topocirc {

namespace {

// Sorts indices in place and returns the sign of the permutation; pairs of
// equal indices are then removed (c^2 = 1).
double normal_order(std::vector<int>& idx) {
  double sign = 1.0;
  for (std::size_t i = 1; i < idx.size(); ++i)
    for (std::size_t k = i; k > 0 && idx[k - 1] > idx[k]; --k) {
      std::swap(idx[k - 1], idx[k]);
      sign = -sign;
    }
  std::vector<int> out;
  out.reserve(idx.size());
  for (int x : idx) {
    if (!out.empty() && out.back() == x) out.pop_back();
    else out.push_back(x);
  }
  idx = std::move(out);
  return sign;
}

// sigma_a sigma_b = phase * sigma_{a^b} with X = 1, Y = 2, Z = 3.
cplx pauli_product_phase(std::uint8_t a, std::uint8_t b) {
  if (a == 0 || b == 0 || a == b) return 1.0;
  const bool cyclic = (a == 1 && b == 2) || (a == 2 && b == 3) || (a == 3 && b == 1);
  return cyclic ? cplx(0, 1) : cplx(0, -1);
}

cplx multiply_strings(const PauliSum::String& a, const PauliSum::String& b, PauliSum::String& out) {
  out.resize(a.size());
  cplx phase = 1.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    phase *= pauli_product_phase(a[k], b[k]);
    out[k] = a[k] ^ b[k];
  }
  return phase;
}

// Action of one Pauli letter on a single spin basis state (0 = up, 1 = down).
cplx pauli_on_bit(std::uint8_t letter, int bit, int& out_bit) {
  switch (letter) {
    case 1: out_bit = bit ^ 1; return 1.0;
    case 2: out_bit = bit ^ 1; return bit == 0 ? cplx(0, 1) : cplx(0, -1);
    case 3: out_bit = bit; return bit == 0 ? 1.0 : -1.0;
    default: out_bit = bit; return 1.0;
  }
}

int weight(const PauliSum::String& s) {
  return static_cast<int>(std::count_if(s.begin(), s.end(), [](std::uint8_t c) { return c != 0; }));
}

int y_count(const PauliSum::String& s) {
  return static_cast<int>(std::count(s.begin(), s.end(), std::uint8_t{2}));
}

void check_mode(int n_modes, int j, const char* where) {
  if (j < 0 || j >= n_modes) throw Error(ErrorKind::out_of_range, std::string(where) + ": mode index out of range");
}

LocalOp grouped_op(const std::vector<int>& sites, const PauliSum& sum) { return {sites, local_matrix(sum, sites)}; }

}  // namespace

void QuadraticFermionHamiltonian::validate(double tolerance) const {
  if (n_modes < 1 || coupling.rows() != 2 * n_modes || coupling.cols() != 2 * n_modes)
    throw Error(ErrorKind::invalid_size, "QuadraticFermionHamiltonian: coupling must be 2n x 2n");
  if (!is_antisymmetric(coupling, tolerance))
    throw Error(ErrorKind::input, "QuadraticFermionHamiltonian: coupling not antisymmetric");
}

bool CovarianceMatrix::is_pure(double tolerance) const {
  const MatrixXd sq = gamma * gamma + MatrixXd::Identity(gamma.rows(), gamma.cols());
  return sq.cwiseAbs().maxCoeff() <= tolerance;
}

void CovarianceMatrix::validate(double tolerance) const {
  if (gamma.rows() != 2 * n_modes || gamma.cols() != 2 * n_modes)
    throw Error(ErrorKind::invalid_size, "CovarianceMatrix: gamma must be 2n x 2n");
  if (!is_antisymmetric(gamma, tolerance)) throw Error(ErrorKind::input, "CovarianceMatrix: gamma not antisymmetric");
}

// ---------------------------------------------------------------------------
// Majorana polynomials

MajoranaPolynomial MajoranaPolynomial::identity(int n_majoranas, cplx coefficient) {
  MajoranaPolynomial p(n_majoranas);
  p.add({}, coefficient);
  return p;
}

MajoranaPolynomial MajoranaPolynomial::majorana(int n_majoranas, int index, cplx coefficient) {
  if (index < 0 || index >= n_majoranas) throw Error(ErrorKind::out_of_range, "majorana index out of range");
  MajoranaPolynomial p(n_majoranas);
  p.add({index}, coefficient);
  return p;
}

void MajoranaPolynomial::add(std::vector<int> indices, cplx coefficient) {
  for (int i : indices)
    if (i < 0 || i >= n_majoranas_) throw Error(ErrorKind::out_of_range, "MajoranaPolynomial: index out of range");
  const double sign = normal_order(indices);
  terms_[indices] += sign * coefficient;
}

void MajoranaPolynomial::prune(double threshold) {
  std::erase_if(terms_, [&](const auto& kv) { return std::abs(kv.second) <= threshold; });
}

bool MajoranaPolynomial::is_even() const {
  return std::all_of(terms_.begin(), terms_.end(), [](const auto& kv) { return kv.first.size() % 2 == 0; });
}

MajoranaPolynomial MajoranaPolynomial::adjoint() const {
  MajoranaPolynomial out(n_majoranas_);
  for (const auto& [mono, c] : terms_) {
    const std::size_t k = mono.size();
    const double sign = ((k * (k - 1) / 2) % 2 == 0) ? 1.0 : -1.0;
    out.terms_[mono] += sign * std::conj(c);
  }
  return out;
}

MajoranaPolynomial MajoranaPolynomial::operator+(const MajoranaPolynomial& o) const {
  MajoranaPolynomial out(std::max(n_majoranas_, o.n_majoranas_));
  out.terms_ = terms_;
  for (const auto& [mono, c] : o.terms_) out.terms_[mono] += c;
  return out;
}

MajoranaPolynomial MajoranaPolynomial::operator-(const MajoranaPolynomial& o) const { return *this + o * cplx(-1.0); }

MajoranaPolynomial MajoranaPolynomial::operator*(const MajoranaPolynomial& o) const {
  MajoranaPolynomial out(std::max(n_majoranas_, o.n_majoranas_));
  for (const auto& [ma, ca] : terms_)
    for (const auto& [mb, cb] : o.terms_) {
      std::vector<int> idx = ma;
      idx.insert(idx.end(), mb.begin(), mb.end());
      out.add(std::move(idx), ca * cb);
    }
  return out;
}

MajoranaPolynomial MajoranaPolynomial::operator*(cplx s) const {
  MajoranaPolynomial out = *this;
  for (auto& kv : out.terms_) kv.second *= s;
  return out;
}

// ---------------------------------------------------------------------------
// Pauli sums

void PauliSum::add(const String& s, cplx coefficient) {
  if (static_cast<int>(s.size()) != n_sites_) throw Error(ErrorKind::invalid_size, "PauliSum: string length mismatch");
  terms_[s] += coefficient;
}

void PauliSum::prune(double threshold) {
  std::erase_if(terms_, [&](const auto& kv) { return std::abs(kv.second) <= threshold; });
}

PauliSum PauliSum::operator*(const PauliSum& o) const {
  if (n_sites_ != o.n_sites_) throw Error(ErrorKind::invalid_size, "PauliSum: site count mismatch");
  PauliSum out(n_sites_);
  String s;
  for (const auto& [a, ca] : terms_)
    for (const auto& [b, cb] : o.terms_) {
      const cplx phase = multiply_strings(a, b, s);
      out.terms_[s] += phase * ca * cb;
    }
  return out;
}

PauliSum PauliSum::operator+(const PauliSum& o) const {
  if (n_sites_ != o.n_sites_) throw Error(ErrorKind::invalid_size, "PauliSum: site count mismatch");
  PauliSum out = *this;
  for (const auto& [s, c] : o.terms_) out.terms_[s] += c;
  return out;
}

VectorXcd PauliSum::apply(const VectorXcd& psi) const {
  const std::int64_t dim = std::int64_t{1} << n_sites_;
  if (psi.size() != dim) throw Error(ErrorKind::invalid_size, "PauliSum::apply: vector size mismatch");
  VectorXcd out = VectorXcd::Zero(dim);
  for (const auto& [s, c] : terms_) {
    for (std::int64_t b = 0; b < dim; ++b) {
      std::int64_t target = 0;
      cplx phase = c;
      for (int k = 0; k < n_sites_; ++k) {
        const int shift = n_sites_ - 1 - k;
        int bit = static_cast<int>((b >> shift) & 1);
        int nb = 0;
        phase *= pauli_on_bit(s[k], bit, nb);
        target |= static_cast<std::int64_t>(nb) << shift;
      }
      out(target) += phase * psi(b);
    }
  }
  return out;
}

MatrixXcd PauliSum::to_matrix() const {
  if (n_sites_ > 12) throw Error(ErrorKind::resource, "PauliSum::to_matrix: too many sites");
  const std::int64_t dim = std::int64_t{1} << n_sites_;
  MatrixXcd out(dim, dim);
  for (std::int64_t b = 0; b < dim; ++b) out.col(b) = apply(VectorXcd::Unit(dim, b));
  return out;
}

std::vector<int> pauli_support(const PauliSum::String& s) {
  std::vector<int> out;
  for (int k = 0; k < static_cast<int>(s.size()); ++k)
    if (s[k] != 0) out.push_back(k);
  return out;
}

MatrixXcd local_matrix(const PauliSum& s, const std::vector<int>& sites) {
  const auto dim = checked_pow(2, static_cast<int>(sites.size()), 1 << 20);
  MatrixXcd out = MatrixXcd::Zero(dim, dim);
  const char letters[] = {'i', 'x', 'y', 'z'};
  for (const auto& [str, c] : s.terms()) {
    for (int k : pauli_support(str))
      if (std::find(sites.begin(), sites.end(), k) == sites.end())
        throw Error(ErrorKind::out_of_range, "local_matrix: Pauli string acts outside the given sites");
    MatrixXcd m = MatrixXcd::Identity(1, 1);
    for (int k : sites) m = kron(m, pauli(letters[str[k]]));
    out += c * m;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Majorana chain and Gaussian states

QuadraticFermionHamiltonian build_majorana_chain(int n, double mu) {
  if (n < 2) throw Error(ErrorKind::invalid_size, "build_majorana_chain: need n >= 2");
  if (!(mu >= 0.0)) throw Error(ErrorKind::input, "build_majorana_chain: need mu >= 0");
  QuadraticFermionHamiltonian h;
  h.n_modes = n;
  h.boundary = FermionBoundary::antiperiodic;
  h.mu = mu;
  h.coupling = MatrixXd::Zero(2 * n, 2 * n);
  // A term i t c_p c_q contributes A_pq = 2t, A_qp = -2t.
  auto pair = [&](int p, int q, double t) {
    h.coupling(p, q) += 2.0 * t;
    h.coupling(q, p) -= 2.0 * t;
  };
  if (std::isinf(mu)) {
    for (int j = 0; j < n; ++j) pair(2 * j, 2 * j + 1, 1.0);
    return h;
  }
  for (int j = 0; j < n; ++j)
    if (mu != 0.0) pair(2 * j, 2 * j + 1, mu);
  for (int j = 0; j + 1 < n; ++j) pair(2 * j + 1, 2 * j + 2, 1.0);
  pair(2 * n - 1, 0, -1.0);
  return h;
}

CovarianceMatrix gaussian_ground_state(const QuadraticFermionHamiltonian& h) {
  h.validate();
  if (h.mu && std::abs(*h.mu - 1.0) < 1e-10)
    throw Error(ErrorKind::degeneracy, "gaussian_ground_state: gapless point mu = 1");
  const MatrixXd& a = h.coupling;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a.transpose() * a);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::convergence, "gaussian_ground_state: eigensolver failed");
  const VectorXd s2 = es.eigenvalues();
  if (s2.minCoeff() < 1e-20) throw Error(ErrorKind::degeneracy, "gaussian_ground_state: zero mode (gapless)");
  const VectorXd inv_s = s2.cwiseSqrt().cwiseInverse();
  MatrixXd g = -a * es.eigenvectors() * inv_s.asDiagonal() * es.eigenvectors().transpose();
  g = (g - g.transpose()) * 0.5;
  CovarianceMatrix out{h.n_modes, g};
  out.validate();
  return out;
}

double gaussian_energy(const QuadraticFermionHamiltonian& h, const CovarianceMatrix& gamma) {
  if (h.coupling.rows() != gamma.gamma.rows()) throw Error(ErrorKind::invalid_size, "gaussian_energy: size mismatch");
  return 0.25 * h.coupling.cwiseProduct(gamma.gamma).sum();
}

GaussianGate make_gaussian_gate(const MajoranaPolynomial& unitary, std::vector<int> support) {
  std::sort(support.begin(), support.end());
  const int n = unitary.n_majoranas();
  for (int s : support)
    if (s < 0 || s >= n) throw Error(ErrorKind::out_of_range, "make_gaussian_gate: support out of range");
  if (!unitary.is_even()) throw Error(ErrorKind::sector, "make_gaussian_gate: gate must be parity even");
  MajoranaPolynomial check = unitary.adjoint() * unitary - MajoranaPolynomial::identity(n);
  check.prune(1e-12);
  if (!check.terms().empty()) throw Error(ErrorKind::input, "make_gaussian_gate: polynomial is not unitary");

  const int k = static_cast<int>(support.size());
  MatrixXd r = MatrixXd::Zero(k, k);
  for (int a = 0; a < k; ++a) {
    MajoranaPolynomial img = unitary.adjoint() * MajoranaPolynomial::majorana(n, support[a]) * unitary;
    img.prune(1e-14);
    for (const auto& [mono, c] : img.terms()) {
      const auto it = mono.size() == 1 ? std::find(support.begin(), support.end(), mono[0]) : support.end();
      if (it == support.end() || std::abs(c.imag()) > 1e-12)
        throw Error(ErrorKind::input, "make_gaussian_gate: conjugation is not a real rotation of the support");
      r(a, it - support.begin()) = c.real();
    }
  }
  if ((r * r.transpose() - MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-12 || r.determinant() < 0.0)
    throw Error(ErrorKind::input, "make_gaussian_gate: rotation not special orthogonal");
  return {support, r, unitary};
}

GaussianGate majorana_swap_gate(int n_modes, int j) {
  if (j < 0 || j + 1 >= n_modes) throw Error(ErrorKind::out_of_range, "majorana_swap_gate: need 0 <= j <= n-2");
  const int n = 2 * n_modes;
  const int a = 2 * j + 1, b = 2 * j + 2, c = 2 * j + 3;
  // (c_c c_b + c_b c_a) / sqrt(2)
  MajoranaPolynomial u(n);
  u.add({c, b}, 1.0 / std::sqrt(2.0));
  u.add({b, a}, 1.0 / std::sqrt(2.0));
  return make_gaussian_gate(u, {a, b, c});
}

CovarianceMatrix apply_gaussian(const CovarianceMatrix& gamma, const GaussianGate& gate) {
  const auto n = gamma.gamma.rows();
  for (int s : gate.support_majoranas)
    if (s < 0 || s >= n) throw Error(ErrorKind::out_of_range, "apply_gaussian: support out of range");
  MatrixXd full = MatrixXd::Identity(n, n);
  const auto k = gate.support_majoranas.size();
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) full(gate.support_majoranas[a], gate.support_majoranas[b]) = gate.rotation(a, b);
  CovarianceMatrix out = gamma;
  out.gamma = full * gamma.gamma * full.transpose();
  return out;
}

CovarianceMatrix apply_gaussian(const CovarianceMatrix& gamma, const GaussianCircuit& circuit) {
  if (circuit.n_modes != gamma.n_modes) throw Error(ErrorKind::invalid_size, "apply_gaussian: mode count mismatch");
  CovarianceMatrix out = gamma;
  for (const auto& g : circuit.layers) out = apply_gaussian(out, g);
  return out;
}

GaussianCircuit build_fermionic_swap_circuit(int n) {
  if (n < 2) throw Error(ErrorKind::invalid_size, "build_fermionic_swap_circuit: need n >= 2");
  GaussianCircuit c;
  c.n_modes = n;
  for (int j = 0; j + 1 < n; ++j) c.layers.push_back(majorana_swap_gate(n, j));
  return c;
}

double string_order(const CovarianceMatrix& gamma, int i, int j) {
  check_mode(gamma.n_modes, i, "string_order");
  check_mode(gamma.n_modes, j, "string_order");
  if (i >= j) throw Error(ErrorKind::input, "string_order: need i < j");
  const int m = j - i;
  const MatrixXd sub = gamma.gamma.block(2 * i + 1, 2 * i + 1, 2 * m, 2 * m);
  const double pf = pfaffian(sub);
#ifndef NDEBUG
  if (std::abs(pf * pf - sub.determinant()) > 1e-8 * std::max(1.0, std::abs(sub.determinant())))
    throw Error(ErrorKind::convergence, "string_order: Pfaffian check |Pf|^2 = det failed");
#endif
  return (m % 2 == 0 ? 1.0 : -1.0) * pf;
}

cplx gaussian_expect(const CovarianceMatrix& gamma, const MajoranaPolynomial& p) {
  if (p.n_majoranas() > gamma.gamma.rows()) throw Error(ErrorKind::invalid_size, "gaussian_expect: polynomial too large");
  cplx total = 0.0;
  for (const auto& [mono, c] : p.terms()) {
    if (mono.size() % 2 == 1) continue;
    if (mono.empty()) {
      total += c;
      continue;
    }
    const auto k = static_cast<Eigen::Index>(mono.size());
    MatrixXcd sub(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b) sub(a, b) = cplx(0, -1) * gamma.gamma(mono[a], mono[b]);
    total += c * pfaffian(sub);
  }
  return total;
}

MajoranaPolynomial string_operator_polynomial(int n_modes, int i, int j) {
  check_mode(n_modes, i, "string_operator_polynomial");
  check_mode(n_modes, j, "string_operator_polynomial");
  if (i >= j) throw Error(ErrorKind::input, "string_operator_polynomial: need i < j");
  const int n = 2 * n_modes;
  MajoranaPolynomial p = MajoranaPolynomial::majorana(n, 2 * i);
  for (int k = i; k < j; ++k) {
    // e^{i pi n_k} = 1 - 2 n_k = -i c_{2k} c_{2k+1}
    MajoranaPolynomial parity(n);
    parity.add({2 * k, 2 * k + 1}, cplx(0, -1));
    p = p * parity;
  }
  p = p * MajoranaPolynomial::majorana(n, 2 * j);
  p.prune();
  return p;
}

// ---------------------------------------------------------------------------
// Jordan-Wigner

PauliSum jw_map(const MajoranaPolynomial& p) {
  if (p.n_majoranas() % 2 == 1) throw Error(ErrorKind::invalid_size, "jw_map: odd Majorana count");
  const int n = p.n_majoranas() / 2;
  PauliSum out(n);
  PauliSum::String s, tmp;
  for (const auto& [mono, c] : p.terms()) {
    PauliSum::String acc(n, 0);
    cplx coef = c;
    for (int idx : mono) {
      const int mode = idx / 2;
      PauliSum::String img(n, 0);
      for (int l = 0; l < mode; ++l) img[l] = 3;
      img[mode] = (idx % 2 == 0) ? 1 : 2;
      coef *= (mode % 2 == 0 ? 1.0 : -1.0) * (idx % 2 == 0 ? 1.0 : -1.0);
      coef *= multiply_strings(acc, img, tmp);
      acc = tmp;
    }
    out.add(acc, coef);
  }
  out.prune();
  return out;
}

PauliSum reduce_even_sector(const PauliSum& s) {
  const int n = s.n_sites();
  PauliSum out(n);
  PauliSum::String parity(n, 3), alt;
  const cplx parity_sign = (n % 2 == 0) ? 1.0 : -1.0;
  for (const auto& [str, c] : s.terms()) {
    const auto flips = std::count_if(str.begin(), str.end(), [](std::uint8_t x) { return x == 1 || x == 2; });
    if (flips % 2 == 1) throw Error(ErrorKind::sector, "reduce_even_sector: parity-odd term");
    const cplx phase = multiply_strings(str, parity, alt) * parity_sign;
    const bool better = weight(alt) < weight(str) || (weight(alt) == weight(str) && y_count(alt) < y_count(str));
    if (better) out.add(alt, c * phase);
    else out.add(str, c);
  }
  out.prune();
  return out;
}

LocalHamiltonian jw_map(const QuadraticFermionHamiltonian& h) {
  h.validate();
  const int n = h.n_modes;
  MajoranaPolynomial poly(2 * n);
  for (int p = 0; p < 2 * n; ++p)
    for (int q = 0; q < 2 * n; ++q)
      if (p != q && h.coupling(p, q) != 0.0) poly.add({p, q}, cplx(0, 0.25) * h.coupling(p, q));
  PauliSum spins = jw_map(poly);
  if (h.boundary == FermionBoundary::antiperiodic) spins = reduce_even_sector(spins);

  LocalHamiltonian out;
  out.n_sites = n;
  out.local_dim = 2;
  out.boundary = h.boundary == FermionBoundary::antiperiodic ? Boundary::periodic : Boundary::open;
  std::map<std::vector<int>, PauliSum> grouped;
  for (const auto& [str, c] : spins.terms()) {
    std::vector<int> sup = pauli_support(str);
    if (sup.empty()) throw Error(ErrorKind::unsupported, "jw_map: constant term in Hamiltonian");
    if (sup.size() > 2) throw Error(ErrorKind::unsupported, "jw_map: Hamiltonian term is not 2-local");
    auto [it, fresh] = grouped.try_emplace(sup, PauliSum(n));
    it->second.add(str, c);
  }
  for (const auto& [sup, sum] : grouped) out.terms.push_back(grouped_op(sup, sum));
  out.validate();
  return out;
}

LocalCircuit jw_map(const GaussianCircuit& c) {
  LocalCircuit out;
  out.n_sites = c.n_modes;
  out.local_dim = 2;
  for (const auto& g : c.layers) {
    if (g.support_majoranas.empty()) continue;
    const int lo = g.support_majoranas.front() / 2;
    const int hi = g.support_majoranas.back() / 2;
    if (hi - lo > 1) throw Error(ErrorKind::unsupported, "jw_map: gate spans more than two modes");
    std::vector<int> sites;
    for (int k = lo; k <= hi; ++k) sites.push_back(k);
    const PauliSum spins = reduce_even_sector(jw_map(g.unitary));
    out.layers.push_back({Gate{sites, local_matrix(spins, sites)}});
  }
  return out;
}

}  // namespace topocirc
