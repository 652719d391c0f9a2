#include "topocirc/mpsengine.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

namespace topocirc {

namespace {

// Matrix with a separately tracked logarithmic scale.
struct Scaled {
  MatrixXcd m;
  double log_scale = 0.0;

  void rescale() {
    const double s = m.cwiseAbs().maxCoeff();
    if (s > 0.0 && std::isfinite(s)) {
      m /= s;
      log_scale += std::log(s);
    }
  }
};

Scaled times(const Scaled& a, const Scaled& b) {
  Scaled out{a.m * b.m, a.log_scale + b.log_scale};
  out.rescale();
  return out;
}

Scaled scaled_power(const MatrixXcd& t, int k) {
  Scaled base{t, 0.0};
  base.rescale();
  Scaled acc{MatrixXcd::Identity(t.rows(), t.cols()), 0.0};
  while (k > 0) {
    if (k & 1) acc = times(acc, base);
    k >>= 1;
    if (k > 0) base = times(base, base);
  }
  return acc;
}

// One factor of a ring contraction: a window of `width` sites starting at
// `start` with operator `op` (nullptr = identity).
struct RingItem {
  int start = 0;
  int width = 1;
  const MatrixXcd* op = nullptr;
};

std::vector<SiteTensor> site_range(const MatrixProductState& m, int start, int width) {
  return {m.tensors.begin() + start, m.tensors.begin() + start + width};
}

// tr(prod_items T_item) as (mantissa, log scale).
std::pair<cplx, double> contract_ring(const MatrixProductState& bra, const MatrixProductState& ket,
                                      const std::vector<RingItem>& items, bool uniform) {
  Scaled acc;
  bool first = true;
  std::size_t i = 0;
  while (i < items.size()) {
    std::size_t j = i + 1;
    if (uniform && items[i].width == 1)
      while (j < items.size() && items[j].width == 1 && items[j].op == items[i].op) ++j;
    const RingItem& it = items[i];
    const MatrixXcd op = it.op ? *it.op : MatrixXcd();
    const MatrixXcd t = transfer_matrix(site_range(bra, it.start, it.width), site_range(ket, it.start, it.width), op);
    Scaled block = (j - i > 1) ? scaled_power(t, static_cast<int>(j - i)) : Scaled{t, 0.0};
    if (j - i == 1) block.rescale();
    acc = first ? block : times(acc, block);
    first = false;
    i = j;
  }
  return {acc.m.trace(), acc.log_scale};
}

void check_same_shape(const MatrixProductState& a, const MatrixProductState& b) {
  if (a.n_sites != b.n_sites || a.local_dim != b.local_dim)
    throw Error(ErrorKind::invalid_size, "MPS shapes differ");
}

// Identity-filled item list for a set of sorted, disjoint windows.
std::vector<RingItem> ring_items(int n, const std::vector<RingItem>& windows) {
  std::vector<RingItem> items;
  int site = 0;
  for (const auto& w : windows) {
    if (w.start < site) throw Error(ErrorKind::input, "operator windows overlap");
    for (; site < w.start; ++site) items.push_back({site, 1, nullptr});
    items.push_back(w);
    site = w.start + w.width;
  }
  if (site > n) throw Error(ErrorKind::out_of_range, "operator window outside chain");
  for (; site < n; ++site) items.push_back({site, 1, nullptr});
  return items;
}

cplx ratio(const std::pair<cplx, double>& num, const std::pair<cplx, double>& den) {
  if (std::abs(den.first) == 0.0) throw Error(ErrorKind::input, "zero-norm state");
  return num.first / den.first * std::exp(num.second - den.second);
}

// Square root and inverse square root of a PSD matrix restricted to its
// support. Diagonal inputs keep the standard basis.
struct RootPair {
  MatrixXcd root;      // D x r
  MatrixXcd inv_root;  // r x D
};

RootPair psd_roots(const MatrixXcd& rho) {
  const auto d = rho.rows();
  MatrixXcd w;
  VectorXd p;
  const MatrixXcd off = rho - MatrixXcd(rho.diagonal().asDiagonal());
  if (off.cwiseAbs().maxCoeff() <= 1e-15 * std::max(1.0, rho.cwiseAbs().maxCoeff())) {
    w = MatrixXcd::Identity(d, d);
    p = rho.diagonal().real();
  } else {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(rho);
    w = es.eigenvectors();
    p = es.eigenvalues();
  }
  const double pmax = p.maxCoeff();
  if (!(pmax > 0.0)) throw Error(ErrorKind::input, "canonicalize: zero-norm state");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < d; ++i)
    if (p(i) > 1e-13 * pmax) keep.push_back(i);
  RootPair out;
  out.root.resize(d, keep.size());
  out.inv_root.resize(keep.size(), d);
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const double s = std::sqrt(p(keep[c]));
    out.root.col(c) = w.col(keep[c]) * s;
    out.inv_root.row(c) = w.col(keep[c]).adjoint() / s;
  }
  return out;
}

MatrixXcd normalized_trace(const MatrixXcd& x) {
  const cplx t = x.trace();
  if (std::abs(t) == 0.0) throw Error(ErrorKind::input, "canonicalize: zero-norm state");
  MatrixXcd y = x / t;
  return (y + y.adjoint()) * 0.5;
}

// Fixed point of X -> step(X), started from the identity.
template <typename Step>
MatrixXcd power_fixed_point(Eigen::Index dim, Step step) {
  MatrixXcd x = MatrixXcd::Identity(dim, dim) / static_cast<double>(dim);
  constexpr int max_iter = 200000;
  double best = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int it = 0; it < max_iter; ++it) {
    const MatrixXcd next = normalized_trace(step(x));
    const double diff = (next - x).cwiseAbs().maxCoeff();
    x = next;
    if (diff < 1e-14) return x;
    // Round-off floor reached.
    if (diff < best) {
      best = diff;
      stalled = 0;
    } else if (++stalled > 100 && best < 1e-12) {
      return x;
    }
  }
  throw Error(ErrorKind::convergence, "canonicalize: fixed-point iteration did not converge");
}

struct CanonicalCycle {
  std::vector<SiteTensor> tensors;
  std::vector<VectorXd> envs;
};

CanonicalCycle canonicalize_cycle(std::vector<SiteTensor> a) {
  const int len = static_cast<int>(a.size());
  auto dim_left = [&](int k) { return a[k].front().rows(); };

  // Right fixed points on every bond.
  const MatrixXcd rho0 = power_fixed_point(dim_left(0), [&](const MatrixXcd& x) {
    MatrixXcd y = x;
    for (int k = len - 1; k >= 0; --k) y = apply_transfer(a[k], y);
    return y;
  });
  std::vector<MatrixXcd> rho(len + 1);
  rho[0] = rho[len] = rho0;
  for (int k = len - 1; k >= 1; --k) rho[k] = normalized_trace(apply_transfer(a[k], rho[k + 1]));

  std::vector<RootPair> roots(len);
  for (int b = 0; b < len; ++b) roots[b] = psd_roots(rho[b]);
  for (int k = 0; k < len; ++k) {
    const RootPair& left = roots[k];
    const RootPair& right = roots[(k + 1) % len];
    for (auto& m : a[k]) m = (left.inv_root * m * right.root).eval();
    MatrixXcd e = MatrixXcd::Zero(a[k].front().rows(), a[k].front().rows());
    for (const auto& m : a[k]) e += m * m.adjoint();
    const double t = e.trace().real() / static_cast<double>(e.rows());
    for (auto& m : a[k]) m /= std::sqrt(t);
  }

  // Left fixed points and unitary gauge making them diagonal.
  const MatrixXcd l0 = power_fixed_point(dim_left(0), [&](const MatrixXcd& x) {
    MatrixXcd y = x;
    for (int k = 0; k < len; ++k) y = apply_transfer_adjoint(a[k], y);
    return y;
  });
  std::vector<MatrixXcd> lm(len);
  lm[0] = l0;
  for (int k = 0; k + 1 < len; ++k) lm[k + 1] = normalized_trace(apply_transfer_adjoint(a[k], lm[k]));

  std::vector<MatrixXcd> u(len);
  std::vector<VectorXd> diag(len);
  for (int b = 0; b < len; ++b) {
    const MatrixXcd off = lm[b] - MatrixXcd(lm[b].diagonal().asDiagonal());
    if (off.cwiseAbs().maxCoeff() <= 1e-15) {
      u[b] = MatrixXcd::Identity(lm[b].rows(), lm[b].cols());
      diag[b] = lm[b].diagonal().real();
    } else {
      Eigen::SelfAdjointEigenSolver<MatrixXcd> es(lm[b]);
      u[b] = es.eigenvectors().rowwise().reverse();
      diag[b] = es.eigenvalues().reverse();
    }
  }
  for (int k = 0; k < len; ++k)
    for (auto& m : a[k]) m = (u[k].adjoint() * m * u[(k + 1) % len]).eval();

  CanonicalCycle out;
  out.tensors = std::move(a);
  out.envs.resize(len);
  for (int k = 0; k < len; ++k) out.envs[k] = diag[(k + 1) % len];
  return out;
}

int check_site(const MatrixProductState& m, int s) {
  if (s < 0 || s >= m.n_sites) throw Error(ErrorKind::out_of_range, "site outside chain");
  return s;
}

}  // namespace

int MatrixProductState::bond_dim(int bond) const {
  const int k = ((bond % n_sites) + n_sites) % n_sites;
  return static_cast<int>(tensors[k].front().rows());
}

void MatrixProductState::validate() const {
  if (n_sites < 1 || static_cast<int>(tensors.size()) != n_sites)
    throw Error(ErrorKind::invalid_size, "MatrixProductState: tensor count differs from n_sites");
  for (int k = 0; k < n_sites; ++k) {
    const auto& t = tensors[k];
    if (static_cast<int>(t.size()) != local_dim) throw Error(ErrorKind::invalid_size, "MatrixProductState: wrong physical dimension");
    const auto& next = tensors[(k + 1) % n_sites].front();
    for (const auto& m : t)
      if (m.rows() != t.front().rows() || m.cols() != next.rows() || m.size() == 0)
        throw Error(ErrorKind::invalid_size, "MatrixProductState: inconsistent bond dimensions");
  }
}

MatrixProductState uniform_mps(int n, const SiteTensor& tensor) {
  if (n < 1 || tensor.empty()) throw Error(ErrorKind::invalid_size, "uniform_mps: empty input");
  MatrixProductState m;
  m.n_sites = n;
  m.local_dim = static_cast<int>(tensor.size());
  m.tensors.assign(n, tensor);
  m.validate();
  return m;
}

bool is_translation_invariant(const MatrixProductState& mps, double tolerance) {
  const auto& first = mps.tensors.front();
  for (const auto& t : mps.tensors)
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i].rows() != first[i].rows() || t[i].cols() != first[i].cols()) return false;
      if ((t[i] - first[i]).cwiseAbs().maxCoeff() > tolerance) return false;
    }
  return true;
}

MatrixProductState product_mps(int n, const VectorXcd& site_state) {
  SiteTensor t(site_state.size());
  for (Eigen::Index i = 0; i < site_state.size(); ++i) t[i] = MatrixXcd::Constant(1, 1, site_state(i));
  return uniform_mps(n, t);
}

FixedPointKind parse_fixed_point_kind(const std::string& name) {
  if (name == "trivial") return FixedPointKind::trivial;
  if (name == "dimer") return FixedPointKind::dimer;
  throw Error(ErrorKind::input, "unknown fixed-point kind: " + name);
}

MatrixProductState fixed_point_state(FixedPointKind kind, int n) {
  if (n < 1) throw Error(ErrorKind::invalid_size, "fixed_point_state: need n >= 1");
  const double h = 1.0 / std::sqrt(2.0);
  // epsilon = [[0, 1], [-1, 0]]
  auto eps = [](int a, int b) { return a == b ? 0.0 : (a == 0 ? 1.0 : -1.0); };
  SiteTensor t(4);
  MatrixProductState m;
  if (kind == FixedPointKind::trivial) {
    for (int l = 0; l < 2; ++l)
      for (int r = 0; r < 2; ++r) t[2 * l + r] = MatrixXcd::Constant(1, 1, eps(l, r) * h);
    m = uniform_mps(n, t);
    m.canonical_envs = std::vector<VectorXd>(n, VectorXd::Ones(1));
    return m;
  }
  if (n % 2 == 1) throw Error(ErrorKind::invalid_size, "fixed_point_state: dimer state needs even n");
  for (int l = 0; l < 2; ++l)
    for (int r = 0; r < 2; ++r) {
      MatrixXcd a = MatrixXcd::Zero(2, 2);
      for (int alpha = 0; alpha < 2; ++alpha) a(alpha, r) = eps(alpha, l) * h;
      t[2 * l + r] = a;
    }
  m = uniform_mps(n, t);
  m.canonical_envs = std::vector<VectorXd>(n, VectorXd::Constant(2, 0.5));
  return m;
}

MatrixProductState aklt_state(int n) {
  if (n < 2) throw Error(ErrorKind::invalid_size, "aklt_state: need n >= 2");
  MatrixXcd sp = MatrixXcd::Zero(2, 2), sm = MatrixXcd::Zero(2, 2);
  sp(0, 1) = 1.0;
  sm(1, 0) = 1.0;
  SiteTensor t = {std::sqrt(2.0 / 3.0) * sp, -std::sqrt(1.0 / 3.0) * pauli('z'), -std::sqrt(2.0 / 3.0) * sm};
  return canonicalize(uniform_mps(n, t));
}

MatrixXcd triplet_isometry() {
  MatrixXcd w = MatrixXcd::Zero(4, 3);
  w(0, 0) = 1.0;
  w(1, 1) = w(2, 1) = 1.0 / std::sqrt(2.0);
  w(3, 2) = 1.0;
  return w;
}

MatrixProductState project_to_spin1(const MatrixProductState& mps) {
  if (mps.local_dim != 4) throw Error(ErrorKind::invalid_size, "project_to_spin1: need local_dim 4");
  const MatrixXcd w = triplet_isometry();
  MatrixProductState out;
  out.n_sites = mps.n_sites;
  out.local_dim = 3;
  for (const auto& t : mps.tensors) {
    SiteTensor s(3);
    for (int m = 0; m < 3; ++m) {
      s[m] = MatrixXcd::Zero(t.front().rows(), t.front().cols());
      for (int p = 0; p < 4; ++p) s[m] += std::conj(w(p, m)) * t[p];
    }
    out.tensors.push_back(std::move(s));
  }
  return canonicalize(out);
}

MatrixXcd apply_transfer(const SiteTensor& a, const MatrixXcd& x) {
  MatrixXcd y = MatrixXcd::Zero(a.front().rows(), a.front().rows());
  for (const auto& m : a) y.noalias() += m * x * m.adjoint();
  return y;
}

MatrixXcd apply_transfer_adjoint(const SiteTensor& a, const MatrixXcd& x) {
  MatrixXcd y = MatrixXcd::Zero(a.front().cols(), a.front().cols());
  for (const auto& m : a) y.noalias() += m.adjoint() * x * m;
  return y;
}

MatrixXcd transfer_matrix(const std::vector<SiteTensor>& a, const std::vector<SiteTensor>& b, const MatrixXcd& op) {
  if (a.size() != b.size() || a.empty()) throw Error(ErrorKind::invalid_size, "transfer_matrix: window mismatch");
  // Products of consecutive tensors per multi-index, first site most significant.
  auto products = [](const std::vector<SiteTensor>& ts) {
    std::vector<MatrixXcd> out = ts.front();
    for (std::size_t k = 1; k < ts.size(); ++k) {
      std::vector<MatrixXcd> next;
      next.reserve(out.size() * ts[k].size());
      for (const auto& p : out)
        for (const auto& m : ts[k]) next.push_back(p * m);
      out = std::move(next);
    }
    return out;
  };
  const auto pa = products(a);
  const auto pb = products(b);
  const auto dim = static_cast<Eigen::Index>(pa.size());
  if (op.size() != 0 && (op.rows() != dim || op.cols() != dim))
    throw Error(ErrorKind::invalid_size, "transfer_matrix: operator size does not match window");
  const auto ra = pa.front().rows(), ca = pa.front().cols();
  const auto rb = pb.front().rows(), cb = pb.front().cols();
  MatrixXcd t = MatrixXcd::Zero(ra * rb, ca * cb);
  for (Eigen::Index p = 0; p < dim; ++p) {
    MatrixXcd y;
    if (op.size() == 0) {
      y = pb[p];
    } else {
      y = MatrixXcd::Zero(rb, cb);
      for (Eigen::Index q = 0; q < dim; ++q)
        if (op(p, q) != cplx(0.0)) y += op(p, q) * pb[q];
    }
    t += kron(pa[p].conjugate(), y);
  }
  return t;
}

MatrixXcd transfer_matrix(const SiteTensor& a) { return transfer_matrix({a}, {a}, MatrixXcd()); }

MatrixProductState canonicalize(const MatrixProductState& mps) {
  mps.validate();
  const bool ti = is_translation_invariant(mps);
  std::vector<SiteTensor> cycle = ti ? std::vector<SiteTensor>{mps.tensors.front()} : mps.tensors;
  CanonicalCycle c = canonicalize_cycle(std::move(cycle));
  MatrixProductState out;
  out.n_sites = mps.n_sites;
  out.local_dim = mps.local_dim;
  out.discarded_weight = mps.discarded_weight;
  if (ti) {
    out.tensors.assign(mps.n_sites, c.tensors.front());
    out.canonical_envs = std::vector<VectorXd>(mps.n_sites, c.envs.front());
  } else {
    out.tensors = std::move(c.tensors);
    out.canonical_envs = std::move(c.envs);
  }
  return out;
}

CanonicalResidual canonical_residual(const MatrixProductState& mps) {
  CanonicalResidual r;
  const int n = mps.n_sites;
  for (int k = 0; k < n; ++k) {
    const MatrixXcd e = apply_transfer(mps.tensors[k], MatrixXcd::Identity(mps.bond_dim(k + 1), mps.bond_dim(k + 1)));
    r.right = std::max(r.right, (e - MatrixXcd::Identity(e.rows(), e.cols())).cwiseAbs().maxCoeff());
  }
  if (!mps.canonical_envs) {
    r.left = std::numeric_limits<double>::infinity();
    return r;
  }
  const auto& env = *mps.canonical_envs;
  for (int k = 0; k < n; ++k) {
    const MatrixXcd prev = env[(k + n - 1) % n].cast<cplx>().asDiagonal();
    const MatrixXcd next = env[k].cast<cplx>().asDiagonal();
    r.left = std::max(r.left, (apply_transfer_adjoint(mps.tensors[k], prev) - next).cwiseAbs().maxCoeff());
  }
  return r;
}

std::vector<cplx> transfer_spectrum(const MatrixProductState& mps) {
  mps.validate();
  if (!is_translation_invariant(mps)) throw Error(ErrorKind::unsupported, "transfer_spectrum: MPS is not translation invariant");
  Eigen::ComplexEigenSolver<MatrixXcd> es(transfer_matrix(mps.tensors.front()), false);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::convergence, "transfer_spectrum: eigensolver failed");
  std::vector<cplx> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(ev.begin(), ev.end(), [](cplx a, cplx b) { return std::abs(a) > std::abs(b); });
  const double lead = std::abs(ev.front());
  if (lead == 0.0) throw Error(ErrorKind::input, "transfer_spectrum: zero transfer map");
  for (auto& v : ev) v /= lead;
  return ev;
}

double correlation_gap(const MatrixProductState& mps) {
  const auto ev = transfer_spectrum(mps);
  return ev.size() < 2 ? 0.0 : std::abs(ev[1]);
}

cplx overlap(const MatrixProductState& a, const MatrixProductState& b) {
  check_same_shape(a, b);
  a.validate();
  b.validate();
  const bool uniform = is_translation_invariant(a) && is_translation_invariant(b);
  const auto r = contract_ring(a, b, ring_items(a.n_sites, {}), uniform);
  return r.first * std::exp(r.second);
}

double norm_squared(const MatrixProductState& mps) { return overlap(mps, mps).real(); }

double fidelity(const MatrixProductState& a, const MatrixProductState& b) {
  check_same_shape(a, b);
  const bool ua = is_translation_invariant(a), ub = is_translation_invariant(b);
  const auto items = ring_items(a.n_sites, {});
  const auto ab = contract_ring(a, b, items, ua && ub);
  const auto aa = contract_ring(a, a, items, ua);
  const auto bb = contract_ring(b, b, items, ub);
  const double mag = std::norm(ab.first) / std::abs(aa.first * bb.first);
  return mag * std::exp(2.0 * ab.second - aa.second - bb.second);
}

cplx expect_string(const MatrixProductState& mps, const StringOperator& q) {
  q.validate();
  if (q.n_sites != mps.n_sites || q.local_dim != mps.local_dim)
    throw Error(ErrorKind::invalid_size, "expect_string: operator and state disagree on chain shape");
  std::vector<RingItem> windows;
  windows.push_back({q.left_end.start, q.left_end.width, &q.left_end.matrix});
  for (int k = q.string_begin; k < q.string_end; ++k) windows.push_back({k, 1, &q.string_factor});
  windows.push_back({q.right_end.start, q.right_end.width, &q.right_end.matrix});
  const bool uniform = is_translation_invariant(mps);
  return ratio(contract_ring(mps, mps, ring_items(mps.n_sites, windows), uniform),
               contract_ring(mps, mps, ring_items(mps.n_sites, {}), uniform));
}

cplx expect(const MatrixProductState& mps, const ProductOp& op) {
  std::vector<RingItem> windows;
  std::vector<MatrixXcd> mats;
  mats.reserve(op.size());
  for (const auto& f : op) {
    for (std::size_t i = 0; i < f.sites.size(); ++i) {
      check_site(mps, f.sites[i]);
      if (i > 0 && f.sites[i] != f.sites[i - 1] + 1)
        throw Error(ErrorKind::unsupported, "expect: operator support must be consecutive ascending sites");
    }
    mats.push_back(f.matrix);
  }
  for (std::size_t i = 0; i < op.size(); ++i)
    windows.push_back({op[i].sites.front(), static_cast<int>(op[i].sites.size()), &mats[i]});
  std::sort(windows.begin(), windows.end(), [](const RingItem& a, const RingItem& b) { return a.start < b.start; });
  const bool uniform = is_translation_invariant(mps);
  return ratio(contract_ring(mps, mps, ring_items(mps.n_sites, windows), uniform),
               contract_ring(mps, mps, ring_items(mps.n_sites, {}), uniform));
}

MatrixProductState apply_gate_mps(const MatrixProductState& mps, const Gate& gate, const TruncationOptions& opt) {
  mps.validate();
  const int d = mps.local_dim;
  MatrixProductState out = mps;
  out.canonical_envs.reset();
  if (gate.sites.size() == 1) {
    const int k = check_site(mps, gate.sites[0]);
    if (gate.matrix.rows() != d || gate.matrix.cols() != d) throw Error(ErrorKind::invalid_size, "apply_gate_mps: gate size mismatch");
    for (int p = 0; p < d; ++p) {
      out.tensors[k][p].setZero();
      for (int q = 0; q < d; ++q) out.tensors[k][p] += gate.matrix(p, q) * mps.tensors[k][q];
    }
    return out;
  }
  if (gate.sites.size() != 2) throw Error(ErrorKind::unsupported, "apply_gate_mps: gates act on one or two sites");
  const int k = check_site(mps, gate.sites[0]);
  check_site(mps, gate.sites[1]);
  if (gate.sites[1] != k + 1) throw Error(ErrorKind::unsupported, "apply_gate_mps: two-site gates need sites (k, k+1)");
  if (gate.matrix.rows() != d * d || gate.matrix.cols() != d * d)
    throw Error(ErrorKind::invalid_size, "apply_gate_mps: gate size mismatch");

  const auto& a = mps.tensors[k];
  const auto& b = mps.tensors[k + 1];
  const auto dl = a.front().rows();
  const auto dr = b.front().cols();
  std::vector<MatrixXcd> pair(d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) pair[i * d + j] = a[i] * b[j];
  MatrixXcd theta(dl * d, d * dr);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      MatrixXcd block = MatrixXcd::Zero(dl, dr);
      for (int q = 0; q < d * d; ++q)
        if (gate.matrix(i * d + j, q) != cplx(0.0)) block += gate.matrix(i * d + j, q) * pair[q];
      for (Eigen::Index al = 0; al < dl; ++al) theta.block(al * d + i, j * dr, 1, dr) = block.row(al);
    }

  Eigen::BDCSVD<MatrixXcd> svd(theta, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd s = svd.singularValues();
  const double total = s.squaredNorm();
  if (total == 0.0) throw Error(ErrorKind::input, "apply_gate_mps: gate annihilates the state");
  Eigen::Index keep = s.size();
  double tail = 0.0;
  while (keep > 1) {
    const double w = s(keep - 1) * s(keep - 1);
    if (s(keep - 1) > 1e-14 * s(0) && tail + w > opt.trunc_tol * total) break;
    tail += w;
    --keep;
  }
  if (keep > opt.chi_max) {
    for (Eigen::Index i = opt.chi_max; i < keep; ++i) tail += s(i) * s(i);
    keep = opt.chi_max;
    if (tail > opt.trunc_tol * total)
      throw Error(ErrorKind::truncation, "apply_gate_mps: chi_max reached before trunc_tol");
  }
  out.discarded_weight += tail / total;

  const MatrixXcd u = svd.matrixU().leftCols(keep);
  const MatrixXcd v = svd.matrixV().leftCols(keep);
  const VectorXd root = s.head(keep).cwiseSqrt();
  for (int i = 0; i < d; ++i) {
    MatrixXcd left(dl, keep);
    for (Eigen::Index al = 0; al < dl; ++al) left.row(al) = u.row(al * d + i);
    out.tensors[k][i] = left * root.asDiagonal();
  }
  for (int j = 0; j < d; ++j)
    out.tensors[k + 1][j] = root.asDiagonal() * v.middleRows(j * dr, dr).adjoint();
  return out;
}

MatrixProductState apply_circuit(const LocalCircuit& c, const MatrixProductState& mps, const TruncationOptions& opt) {
  if (c.n_sites != mps.n_sites || c.local_dim != mps.local_dim)
    throw Error(ErrorKind::invalid_size, "apply_circuit: circuit and state disagree on chain shape");
  MatrixProductState out = mps;
  for (const auto& layer : c.layers)
    for (const auto& g : layer) out = apply_gate_mps(out, g, opt);
  return out;
}

Statevector mps_to_statevector(const MatrixProductState& mps, std::int64_t max_dim) {
  mps.validate();
  const auto dim = checked_pow(mps.local_dim, mps.n_sites, max_dim);
  if (dim < 0) throw Error(ErrorKind::resource, "mps_to_statevector: dimension exceeds cap");
  const int d = mps.local_dim;
  const auto d0 = mps.bond_dim(0);
  VectorXcd amps = VectorXcd::Zero(dim);
  for (Eigen::Index alpha = 0; alpha < d0; ++alpha) {
    std::vector<MatrixXcd> rows;
    for (int i = 0; i < d; ++i) rows.push_back(mps.tensors[0][i].row(alpha));
    for (int k = 1; k < mps.n_sites; ++k) {
      std::vector<MatrixXcd> next;
      next.reserve(rows.size() * d);
      for (const auto& r : rows)
        for (int i = 0; i < d; ++i) next.push_back(r * mps.tensors[k][i]);
      rows = std::move(next);
    }
    for (std::int64_t idx = 0; idx < dim; ++idx) amps(idx) += rows[idx](0, alpha);
  }
  return Statevector(mps.n_sites, d, amps);
}

MatrixProductState block_sites(const MatrixProductState& mps, int block) {
  mps.validate();
  if (block < 1 || mps.n_sites % block != 0) throw Error(ErrorKind::invalid_size, "block_sites: block must divide n");
  MatrixProductState out;
  out.n_sites = mps.n_sites / block;
  out.local_dim = static_cast<int>(checked_pow(mps.local_dim, block, 1 << 20));
  out.discarded_weight = mps.discarded_weight;
  for (int b = 0; b < out.n_sites; ++b) {
    SiteTensor t = mps.tensors[b * block];
    for (int k = 1; k < block; ++k) {
      SiteTensor next;
      for (const auto& p : t)
        for (const auto& m : mps.tensors[b * block + k]) next.push_back(p * m);
      t = std::move(next);
    }
    out.tensors.push_back(std::move(t));
  }
  return out;
}

OperatorSchmidt operator_schmidt(const MatrixXcd& g, int d1, int d2, double threshold) {
  if (g.rows() != d1 * d2 || g.cols() != d1 * d2) throw Error(ErrorKind::invalid_size, "operator_schmidt: size mismatch");
  MatrixXcd m(d1 * d1, d2 * d2);
  for (int i = 0; i < d1; ++i)
    for (int ip = 0; ip < d1; ++ip)
      for (int j = 0; j < d2; ++j)
        for (int jp = 0; jp < d2; ++jp) m(i * d1 + ip, j * d2 + jp) = g(i * d2 + j, ip * d2 + jp);
  Eigen::JacobiSVD<MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd s = svd.singularValues();
  OperatorSchmidt out;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k) <= threshold * s(0)) break;
    const double r = std::sqrt(s(k));
    MatrixXcd l(d1, d1), rr(d2, d2);
    for (int i = 0; i < d1; ++i)
      for (int ip = 0; ip < d1; ++ip) l(i, ip) = r * svd.matrixU()(i * d1 + ip, k);
    for (int j = 0; j < d2; ++j)
      for (int jp = 0; jp < d2; ++jp) rr(j, jp) = r * std::conj(svd.matrixV()(j * d2 + jp, k));
    out.left.push_back(l);
    out.right.push_back(rr);
  }
  return out;
}

MatrixProductState apply_uniform_onsite(const MatrixProductState& mps, const MatrixXcd& op) {
  MatrixProductState out = mps;
  out.canonical_envs.reset();
  const int d = mps.local_dim;
  if (op.rows() != d || op.cols() != d) throw Error(ErrorKind::invalid_size, "apply_uniform_onsite: operator size mismatch");
  for (int k = 0; k < mps.n_sites; ++k)
    for (int p = 0; p < d; ++p) {
      out.tensors[k][p].setZero();
      for (int q = 0; q < d; ++q)
        if (op(p, q) != cplx(0.0)) out.tensors[k][p] += op(p, q) * mps.tensors[k][q];
    }
  return out;
}

MatrixProductState apply_uniform_cross(const MatrixProductState& mps, const MatrixXcd& gate, int half_dim) {
  mps.validate();
  const int h = half_dim;
  if (mps.local_dim != h * h) throw Error(ErrorKind::invalid_size, "apply_uniform_cross: site is not two halves of half_dim");
  const OperatorSchmidt os = operator_schmidt(gate, h, h);
  const int r = static_cast<int>(os.left.size());
  MatrixProductState out;
  out.n_sites = mps.n_sites;
  out.local_dim = mps.local_dim;
  out.discarded_weight = mps.discarded_weight;
  for (const auto& t : mps.tensors) {
    const auto dl = t.front().rows(), dr = t.front().cols();
    SiteTensor nt(h * h, MatrixXcd::Zero(dl * r, dr * r));
    for (int sp = 0; sp < r; ++sp)
      for (int s = 0; s < r; ++s) {
        // Site operator: left half from the previous gate, right half from the next one.
        const MatrixXcd local = kron(os.right[sp], os.left[s]);
        for (int p = 0; p < h * h; ++p) {
          MatrixXcd y = MatrixXcd::Zero(dl, dr);
          for (int q = 0; q < h * h; ++q)
            if (local(p, q) != cplx(0.0)) y += local(p, q) * t[q];
          for (Eigen::Index a = 0; a < dl; ++a)
            for (Eigen::Index b = 0; b < dr; ++b) nt[p](a * r + sp, b * r + s) = y(a, b);
        }
      }
    out.tensors.push_back(std::move(nt));
  }
  return out;
}

MatrixProductState apply_uniform_brick(const MatrixProductState& mps, const std::vector<MatrixXcd>& gates, int half_dim) {
  MatrixProductState out = mps;
  for (std::size_t l = 0; l < gates.size(); ++l)
    out = (l % 2 == 0) ? apply_uniform_onsite(out, gates[l]) : apply_uniform_cross(out, gates[l], half_dim);
  return out;
}

void write_mps(std::ostream& os, const MatrixProductState& mps) {
  mps.validate();
  os << "topocirc-mps 1\n";
  os << "n_sites " << mps.n_sites << "\n";
  os << "local_dim " << mps.local_dim << "\n";
  os << "bond_dims";
  for (int k = 0; k < mps.n_sites; ++k) os << " " << mps.bond_dim(k);
  os << "\n" << std::setprecision(17);
  for (int k = 0; k < mps.n_sites; ++k) {
    os << "site " << k << "\n";
    for (const auto& m : mps.tensors[k])
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << m(i, j).real() << " " << m(i, j).imag();
        os << "\n";
      }
  }
}

MatrixProductState read_mps(std::istream& is) {
  auto expect_word = [&](const std::string& word) {
    std::string got;
    if (!(is >> got) || got != word) throw Error(ErrorKind::format, "read_mps: expected '" + word + "', got '" + got + "'");
  };
  int version = 0;
  expect_word("topocirc-mps");
  if (!(is >> version) || version != 1) throw Error(ErrorKind::format, "read_mps: unsupported version");
  MatrixProductState m;
  expect_word("n_sites");
  is >> m.n_sites;
  expect_word("local_dim");
  is >> m.local_dim;
  if (!is || m.n_sites < 1 || m.local_dim < 1) throw Error(ErrorKind::format, "read_mps: bad header");
  expect_word("bond_dims");
  std::vector<int> dims(m.n_sites);
  for (int& d : dims) {
    is >> d;
    if (!is || d < 1) throw Error(ErrorKind::format, "read_mps: bad bond dimension");
  }
  for (int k = 0; k < m.n_sites; ++k) {
    expect_word("site");
    int index = -1;
    is >> index;
    if (index != k) throw Error(ErrorKind::format, "read_mps: sites out of order");
    SiteTensor t(m.local_dim, MatrixXcd(dims[k], dims[(k + 1) % m.n_sites]));
    for (auto& mat : t)
      for (Eigen::Index i = 0; i < mat.rows(); ++i)
        for (Eigen::Index j = 0; j < mat.cols(); ++j) {
          double re = 0, im = 0;
          is >> re >> im;
          mat(i, j) = cplx(re, im);
        }
    if (!is) throw Error(ErrorKind::format, "read_mps: truncated tensor data");
    m.tensors.push_back(std::move(t));
  }
  m.validate();
  return m;
}

}  // namespace topocirc
