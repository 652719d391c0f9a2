#include "topocirc/spinsim.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <functional>
#include <limits>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace topocirc {

namespace {

std::int64_t full_dim(int n, int d, std::int64_t cap) {
  const auto dim = checked_pow(d, n, cap);
  if (dim < 0) {
    std::ostringstream os;
    os << "dimension " << d << "^" << n << " exceeds cap " << cap;
    throw Error(ErrorKind::resource, os.str());
  }
  return dim;
}

std::vector<std::int64_t> site_strides(int n, int d) {
  std::vector<std::int64_t> stride(n);
  std::int64_t s = 1;
  for (int k = n - 1; k >= 0; --k) {
    stride[k] = s;
    s *= d;
  }
  return stride;
}

// Offsets of every local basis state of `sites` inside the full index.
std::vector<std::int64_t> local_offsets(const std::vector<int>& sites, int d, const std::vector<std::int64_t>& stride) {
  const int k = static_cast<int>(sites.size());
  std::int64_t local = 1;
  for (int q = 0; q < k; ++q) local *= d;
  std::vector<std::int64_t> off(local, 0);
  for (std::int64_t l = 0; l < local; ++l) {
    std::int64_t rem = l;
    std::int64_t o = 0;
    for (int q = k - 1; q >= 0; --q) {
      o += (rem % d) * stride[sites[q]];
      rem /= d;
    }
    off[l] = o;
  }
  return off;
}

bool is_base(std::int64_t idx, const std::vector<int>& sites, int d, const std::vector<std::int64_t>& stride) {
  for (int s : sites)
    if ((idx / stride[s]) % d != 0) return false;
  return true;
}

void check_support(const std::vector<int>& sites, int n, const char* where) {
  std::set<int> seen;
  for (int s : sites) {
    if (s < 0 || s >= n) {
      std::ostringstream os;
      os << where << ": site " << s << " outside chain of " << n;
      throw Error(ErrorKind::out_of_range, os.str());
    }
    if (!seen.insert(s).second) throw Error(ErrorKind::input, std::string(where) + ": repeated site in support");
  }
}

int finite_order(const MatrixXcd& u) {
  MatrixXcd p = u;
  const MatrixXcd id = MatrixXcd::Identity(u.rows(), u.cols());
  for (int k = 1; k <= 64; ++k) {
    if ((p - id).cwiseAbs().maxCoeff() < 1e-10) return k;
    p = p * u;
  }
  throw Error(ErrorKind::input, "sector filter: site unitary has no small finite order");
}

struct LanczosResult {
  double value = 0.0;
  VectorXcd vector;
};

template <typename Apply, typename Project>
LanczosResult lowest_eigenpair(const Apply& apply, const Project& project, VectorXcd start,
                               const GroundStateOptions& opt) {
  const Eigen::Index dim = start.size();
  VectorXcd v = project(start);
  if (v.norm() < 1e-12) throw Error(ErrorKind::input, "ground_state: sector is empty");
  v.normalize();
  const int m_max = static_cast<int>(std::min<Eigen::Index>(opt.krylov_dim, dim));

  for (int restart = 0; restart < opt.max_restarts; ++restart) {
    MatrixXcd basis(dim, m_max + 1);
    std::vector<double> alpha, beta;
    basis.col(0) = v;
    int m = 0;
    bool invariant = false;
    for (int k = 0; k < m_max; ++k) {
      VectorXcd w = apply(basis.col(k));
      const double a = std::real(basis.col(k).dot(w));
      alpha.push_back(a);
      w = project(w);
      // Full reorthogonalization, twice.
      for (int pass = 0; pass < 2; ++pass) {
        const VectorXcd coeff = basis.leftCols(k + 1).adjoint() * w;
        w -= basis.leftCols(k + 1) * coeff;
      }
      m = k + 1;
      const double b = w.norm();
      if (b < 1e-12) {
        invariant = true;
        break;
      }
      if (k + 1 < m_max) {
        beta.push_back(b);
        basis.col(k + 1) = w / b;
      }
    }
    MatrixXd t = MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) t(i, i) = alpha[i];
    for (int i = 0; i + 1 < m; ++i) t(i, i + 1) = t(i + 1, i) = beta[i];
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(t);
    const VectorXd y = es.eigenvectors().col(0);
    VectorXcd x = basis.leftCols(m) * y.cast<cplx>();
    x = project(x);
    x.normalize();
    const VectorXcd hx = apply(x);
    const double theta = std::real(x.dot(hx));
    const double residual = (hx - theta * x).norm();
    if (residual <= opt.residual_tol || (invariant && residual <= 1e3 * opt.residual_tol)) return {theta, x};
    v = x;
  }
  throw Error(ErrorKind::convergence, "ground_state: Lanczos did not converge");
}

}  // namespace

Statevector::Statevector(int n, int d, VectorXcd amps) : n_sites(n), local_dim(d), amplitudes(std::move(amps)) {
  const auto dim = checked_pow(d, n, std::int64_t{1} << 40);
  if (dim != amplitudes.size()) throw Error(ErrorKind::invalid_size, "Statevector: amplitude count != local_dim^n_sites");
}

void Statevector::normalize() {
  const double nrm = amplitudes.norm();
  if (nrm == 0.0) throw Error(ErrorKind::input, "Statevector: cannot normalize the zero vector");
  amplitudes /= nrm;
}

Statevector product_state(int n_sites, const VectorXcd& site_state) {
  const int d = static_cast<int>(site_state.size());
  VectorXcd amps = VectorXcd::Ones(1);
  for (int k = 0; k < n_sites; ++k) amps = kron(amps, site_state);
  return Statevector(n_sites, d, amps);
}

void LocalHamiltonian::validate() const {
  for (const auto& term : terms) {
    check_support(term.sites, n_sites, "LocalHamiltonian");
    if (term.sites.size() > 2) throw Error(ErrorKind::unsupported, "LocalHamiltonian: term acts on more than two sites");
    if (term.sites.size() == 2) {
      const int a = std::min(term.sites[0], term.sites[1]);
      const int b = std::max(term.sites[0], term.sites[1]);
      const bool adjacent = (b == a + 1) || (boundary == Boundary::periodic && a == 0 && b == n_sites - 1);
      if (!adjacent) throw Error(ErrorKind::unsupported, "LocalHamiltonian: two-site term on non-neighbouring sites");
    }
    const auto expected = checked_pow(local_dim, static_cast<int>(term.sites.size()), 1 << 20);
    if (term.matrix.rows() != expected || term.matrix.cols() != expected)
      throw Error(ErrorKind::invalid_size, "LocalHamiltonian: term matrix size does not match support");
    if (!is_hermitian(term.matrix)) throw Error(ErrorKind::input, "LocalHamiltonian: term is not Hermitian");
  }
}

int SymmetryRep::index(const std::string& label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw Error(ErrorKind::input, "SymmetryRep: unknown label " + label);
  return static_cast<int>(it - labels.begin());
}

int SymmetryRep::identity() const {
  for (int a = 0; a < size(); ++a) {
    bool ok = true;
    for (int b = 0; b < size(); ++b) ok = ok && table[a][b] == b && table[b][a] == b;
    if (ok) return a;
  }
  throw Error(ErrorKind::input, "SymmetryRep: multiplication table has no identity");
}

int SymmetryRep::inverse(int g) const {
  const int e = identity();
  for (int b = 0; b < size(); ++b)
    if (table[g][b] == e) return b;
  throw Error(ErrorKind::input, "SymmetryRep: element without inverse");
}

bool SymmetryRep::is_abelian() const {
  for (int a = 0; a < size(); ++a)
    for (int b = 0; b < size(); ++b)
      if (table[a][b] != table[b][a]) return false;
  return true;
}

void SymmetryRep::validate(double tolerance) const {
  const int g = size();
  if (static_cast<int>(table.size()) != g || static_cast<int>(site_unitary.size()) != g)
    throw Error(ErrorKind::invalid_size, "SymmetryRep: inconsistent sizes");
  const int e = identity();
  const int d = local_dim();
  if ((site_unitary[e] - MatrixXcd::Identity(d, d)).cwiseAbs().maxCoeff() > tolerance)
    throw Error(ErrorKind::input, "SymmetryRep: identity label does not map to the identity matrix");
  for (int a = 0; a < g; ++a) {
    if (!is_unitary(site_unitary[a], tolerance)) throw Error(ErrorKind::input, "SymmetryRep: non-unitary element");
    for (int b = 0; b < g; ++b) {
      const MatrixXcd prod = site_unitary[a] * site_unitary[b];
      const MatrixXcd& target = site_unitary[table[a][b]];
      const cplx phase = (target.adjoint() * prod).trace() / static_cast<double>(d);
      if (std::abs(std::abs(phase) - 1.0) > tolerance || (prod - phase * target).cwiseAbs().maxCoeff() > tolerance)
        throw Error(ErrorKind::input, "SymmetryRep: multiplication table violated beyond a global phase");
    }
  }
}

MatrixXcd pauli(char which) {
  MatrixXcd m = MatrixXcd::Zero(2, 2);
  switch (which) {
    case 'i': case 'I': m = MatrixXcd::Identity(2, 2); break;
    case 'x': case 'X': m(0, 1) = m(1, 0) = 1.0; break;
    case 'y': case 'Y': m(0, 1) = cplx(0, -1); m(1, 0) = cplx(0, 1); break;
    case 'z': case 'Z': m(0, 0) = 1.0; m(1, 1) = -1.0; break;
    default: throw Error(ErrorKind::input, std::string("pauli: unknown component ") + which);
  }
  return m;
}

SpinMatrices spin_matrices(int local_dim) {
  switch (local_dim) {
    case 2: return {pauli('x') * 0.5, pauli('y') * 0.5, pauli('z') * 0.5};
    case 3: {
      const double r = std::sqrt(2.0);
      MatrixXcd sp = MatrixXcd::Zero(3, 3);
      sp(0, 1) = r;
      sp(1, 2) = r;
      const MatrixXcd sm = sp.adjoint();
      MatrixXcd sz = MatrixXcd::Zero(3, 3);
      sz(0, 0) = 1.0;
      sz(2, 2) = -1.0;
      return {(sp + sm) * 0.5, (sp - sm) * cplx(0, -0.5), sz};
    }
    case 4: {
      const SpinMatrices half = spin_matrices(2);
      const MatrixXcd id = MatrixXcd::Identity(2, 2);
      return {kron(half.x, id) + kron(id, half.x), kron(half.y, id) + kron(id, half.y),
              kron(half.z, id) + kron(id, half.z)};
    }
    default: throw Error(ErrorKind::unsupported, "spin_matrices: local_dim must be 2, 3 or 4");
  }
}

LocalHamiltonian build_tfim(int n, double mu, Boundary boundary) {
  if (n < 2) throw Error(ErrorKind::invalid_size, "build_tfim: need n >= 2");
  LocalHamiltonian h;
  h.n_sites = n;
  h.local_dim = 2;
  h.boundary = boundary;
  const MatrixXcd xx = -kron(pauli('x'), pauli('x'));
  for (int j = 0; j + 1 < n; ++j) h.terms.push_back({{j, j + 1}, xx});
  if (boundary == Boundary::periodic) h.terms.push_back({{0, n - 1}, xx});
  if (mu != 0.0)
    for (int j = 0; j < n; ++j) h.terms.push_back({{j}, mu * pauli('z')});
  return h;
}

Spin1Kind parse_spin1_kind(const std::string& name) {
  if (name == "heisenberg") return Spin1Kind::heisenberg;
  if (name == "aklt") return Spin1Kind::aklt;
  throw Error(ErrorKind::input, "unknown spin-1 chain kind: " + name);
}

LocalHamiltonian build_spin1_chain(int n, Spin1Kind kind, Boundary boundary) {
  if (n < 2) throw Error(ErrorKind::invalid_size, "build_spin1_chain: need n >= 2");
  const SpinMatrices s = spin_matrices(3);
  MatrixXcd bond = kron(s.x, s.x) + kron(s.y, s.y) + kron(s.z, s.z);
  if (kind == Spin1Kind::aklt) bond += bond * bond / 3.0;
  bond = (bond + bond.adjoint()) * 0.5;
  LocalHamiltonian h;
  h.n_sites = n;
  h.local_dim = 3;
  h.boundary = boundary;
  for (int j = 0; j + 1 < n; ++j) h.terms.push_back({{j, j + 1}, bond});
  if (boundary == Boundary::periodic) h.terms.push_back({{n - 1, 0}, bond});
  return h;
}

SectorFilter even_parity_sector() { return {-pauli('z'), cplx(1.0, 0.0)}; }

VectorXcd apply_local(const VectorXcd& psi, int n_sites, int local_dim, const LocalOp& op) {
  check_support(op.sites, n_sites, "apply_local");
  const auto stride = site_strides(n_sites, local_dim);
  const auto off = local_offsets(op.sites, local_dim, stride);
  const auto local = static_cast<Eigen::Index>(off.size());
  if (op.matrix.rows() != local || op.matrix.cols() != local)
    throw Error(ErrorKind::invalid_size, "apply_local: matrix size does not match support");
  VectorXcd out(psi.size());
  VectorXcd x(local), y(local);
  for (std::int64_t base = 0; base < psi.size(); ++base) {
    if (!is_base(base, op.sites, local_dim, stride)) continue;
    for (Eigen::Index l = 0; l < local; ++l) x(l) = psi(base + off[l]);
    y.noalias() = op.matrix * x;
    for (Eigen::Index l = 0; l < local; ++l) out(base + off[l]) = y(l);
  }
  return out;
}

VectorXcd apply_product(const VectorXcd& psi, int n_sites, int local_dim, const ProductOp& op) {
  VectorXcd out = psi;
  for (const auto& factor : op) out = apply_local(out, n_sites, local_dim, factor);
  return out;
}

cplx expect(const Statevector& state, const ProductOp& op) {
  const VectorXcd phi = apply_product(state.amplitudes, state.n_sites, state.local_dim, op);
  return state.amplitudes.dot(phi);
}

Eigen::SparseMatrix<cplx, Eigen::RowMajor> assemble_sparse(const LocalHamiltonian& h) {
  const auto dim = full_dim(h.n_sites, h.local_dim, std::int64_t{1} << 30);
  const auto stride = site_strides(h.n_sites, h.local_dim);
  std::vector<Eigen::Triplet<cplx>> triplets;
  for (const auto& term : h.terms) {
    check_support(term.sites, h.n_sites, "assemble_sparse");
    const auto off = local_offsets(term.sites, h.local_dim, stride);
    const auto local = static_cast<Eigen::Index>(off.size());
    for (std::int64_t base = 0; base < dim; ++base) {
      if (!is_base(base, term.sites, h.local_dim, stride)) continue;
      for (Eigen::Index c = 0; c < local; ++c)
        for (Eigen::Index r = 0; r < local; ++r) {
          const cplx v = term.matrix(r, c);
          if (v != cplx(0.0, 0.0)) triplets.emplace_back(base + off[r], base + off[c], v);
        }
    }
  }
  Eigen::SparseMatrix<cplx, Eigen::RowMajor> m(dim, dim);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

MatrixXcd assemble_dense(const LocalHamiltonian& h) { return MatrixXcd(assemble_sparse(h)); }

double energy(const LocalHamiltonian& h, const Statevector& state) {
  double e = 0.0;
  for (const auto& term : h.terms) e += std::real(expect(state, {term}));
  return e;
}

GroundState ground_state(const LocalHamiltonian& h, const GroundStateOptions& options) {
  h.validate();
  const auto dim = full_dim(h.n_sites, h.local_dim, options.max_dim);
  const auto hs = assemble_sparse(h);
  const int n = h.n_sites;
  const int d = h.local_dim;

  std::function<VectorXcd(const VectorXcd&)> sector_project = [](const VectorXcd& v) { return v; };
  if (options.sector) {
    const MatrixXcd u = options.sector->site_unitary;
    if (u.rows() != d) throw Error(ErrorKind::invalid_size, "ground_state: sector filter dimension mismatch");
    const int order = finite_order(u);
    const cplx lambda_bar = std::conj(options.sector->eigenvalue);
    sector_project = [u, order, lambda_bar, n, d](const VectorXcd& v) {
      VectorXcd acc = v;
      VectorXcd term = v;
      for (int m = 1; m < order; ++m) {
        for (int k = 0; k < n; ++k) term = apply_local(term, n, d, {{k}, u});
        term *= lambda_bar;
        acc += term;
      }
      return VectorXcd(acc / static_cast<double>(order));
    };
  }
  auto apply = [&hs](const VectorXcd& v) { return VectorXcd(hs * v); };

  std::mt19937_64 rng(options.seed);
  const VectorXcd start0 = random_unit_vector(dim, rng);
  const auto first = lowest_eigenpair(apply, sector_project, start0, options);

  GroundState out;
  out.energy = first.value;
  out.state = Statevector(n, d, first.vector);
  out.state.normalize();
  if (options.sector) out.state.sector_tags["sector_eigenvalue"] = static_cast<int>(std::lround(std::real(options.sector->eigenvalue)));

  // Deflated second run measures the gap inside the searched sector.
  if (dim > 1) {
    const VectorXcd x0 = first.vector;
    auto deflated = [&](const VectorXcd& v) {
      VectorXcd w = sector_project(v);
      w -= x0 * x0.dot(w);
      return w;
    };
    const VectorXcd start1 = random_unit_vector(dim, rng);
    if (deflated(start1).norm() > 1e-10) {
      try {
        const auto second = lowest_eigenpair(apply, deflated, start1, options);
        out.gap = second.value - first.value;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::input) throw;
        out.gap = std::numeric_limits<double>::infinity();
      }
    } else {
      out.gap = std::numeric_limits<double>::infinity();
    }
  } else {
    out.gap = std::numeric_limits<double>::infinity();
  }
  if (out.gap < options.degeneracy_tol && !options.allow_degenerate) {
    std::ostringstream os;
    os << "ground_state: degenerate ground space (gap " << out.gap << "); supply a sector filter";
    throw Error(ErrorKind::degeneracy, os.str());
  }
  return out;
}

SymmetryRep build_z2z2_rep(int local_dim) {
  const SpinMatrices s = spin_matrices(local_dim);
  const double pi = std::numbers::pi;
  SymmetryRep rep;
  rep.labels = {"e", "x", "y", "z"};
  // Klein group via bit codes: x = 01, z = 10, y = 11.
  const int code[4] = {0, 1, 3, 2};
  rep.table.assign(4, std::vector<int>(4));
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const int c = code[a] ^ code[b];
      rep.table[a][b] = static_cast<int>(std::find(code, code + 4, c) - code);
    }
  rep.site_unitary = {MatrixXcd::Identity(local_dim, local_dim), expi_hermitian(s.x, pi), expi_hermitian(s.y, pi),
                      expi_hermitian(s.z, pi)};
  // Clean round-off in exact zeros and signs.
  for (auto& u : rep.site_unitary)
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      cplx& z = u.data()[i];
      z = cplx(std::abs(z.real()) < 1e-14 ? 0.0 : z.real(), std::abs(z.imag()) < 1e-14 ? 0.0 : z.imag());
    }
  return rep;
}

SymmetryRep block_rep(const SymmetryRep& rep, int block) {
  if (block < 1) throw Error(ErrorKind::invalid_size, "block_rep: block must be positive");
  SymmetryRep out = rep;
  for (auto& u : out.site_unitary) {
    MatrixXcd b = u;
    for (int k = 1; k < block; ++k) b = kron(b, u);
    u = b;
  }
  return out;
}

}  // namespace topocirc
