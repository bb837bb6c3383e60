#pragma once

// Finite-dimensional Hilbert-space oracle: the hidden state every simulated
// measurement samples from.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "qfact/error.hpp"
#include "qfact/rng.hpp"

namespace qfact::hilbert {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

inline constexpr double kNormTolerance = 1e-12;
inline constexpr double kUnitaryTolerance = 1e-10;
inline constexpr double kHermitianTolerance = 1e-10;
inline constexpr double kAnnihilationThreshold = 1e-12;
inline constexpr double kDegeneracyGap = 1e-9;

inline double unitarity_defect(const CMatrix& u) {
  return (u.adjoint() * u - CMatrix::Identity(u.cols(), u.cols())).norm();
}

inline double hermiticity_defect(const CMatrix& h) { return (h - h.adjoint()).norm(); }

/// Unit vector of dimension >= 2.
class OracleState {
 public:
  explicit OracleState(CVector amplitudes) : amps_(std::move(amplitudes)) {
    if (amps_.size() < 2) throw InvariantViolationError("state dimension must be >= 2");
    const double n = amps_.norm();
    if (std::abs(n - 1.0) > kNormTolerance)
      throw InvariantViolationError("state is not normalized (norm " + std::to_string(n) + ")");
  }

  static OracleState normalized(const CVector& v) {
    const double n = v.norm();
    if (n < kAnnihilationThreshold)
      throw DestructiveAnnihilationError("vector has (near) zero norm");
    return OracleState(v / n);
  }

  static OracleState basis(std::size_t dim, std::size_t j) {
    CVector v = CVector::Zero(static_cast<Eigen::Index>(dim));
    v(static_cast<Eigen::Index>(j)) = 1.0;
    return OracleState(std::move(v));
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(amps_.size()); }
  const CVector& amplitudes() const noexcept { return amps_; }

 private:
  CVector amps_;
};

/// Non-degenerate observable: strictly increasing eigenvalues and a unitary
/// matrix whose columns are the eigenvectors |u_j>.
class ObservableSpec {
 public:
  ObservableSpec(std::string name, std::vector<double> eigenvalues, CMatrix eigenbasis)
      : name_(std::move(name)), eigenvalues_(std::move(eigenvalues)), basis_(std::move(eigenbasis)) {
    if (basis_.rows() != basis_.cols())
      throw InvariantViolationError("eigenbasis of '" + name_ + "' is not square");
    if (static_cast<Eigen::Index>(eigenvalues_.size()) != basis_.cols())
      throw DimensionMismatchError("eigenvalue count of '" + name_ + "' differs from basis size");
    if (eigenvalues_.size() < 2) throw InvariantViolationError("observable dimension must be >= 2");
    for (std::size_t j = 1; j < eigenvalues_.size(); ++j)
      if (!(eigenvalues_[j] > eigenvalues_[j - 1]))
        throw InvariantViolationError("eigenvalues of '" + name_ + "' must be strictly increasing");
    if (unitarity_defect(basis_) > kUnitaryTolerance)
      throw InvariantViolationError("eigenbasis of '" + name_ + "' is not unitary");
  }

  /// Diagonalizes a Hermitian matrix; degenerate spectra are rejected.
  static ObservableSpec from_hermitian(std::string name, const CMatrix& h) {
    if (h.rows() != h.cols()) throw InvariantViolationError("observable matrix is not square");
    if (hermiticity_defect(h) > kHermitianTolerance)
      throw InvariantViolationError("observable matrix of '" + name + "' is not Hermitian");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
    std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    for (std::size_t j = 1; j < ev.size(); ++j)
      if (ev[j] - ev[j - 1] < kDegeneracyGap)
        throw InvariantViolationError("observable '" + name + "' has a degenerate spectrum");
    return ObservableSpec(std::move(name), std::move(ev), es.eigenvectors());
  }

  /// Eigenbasis = standard basis, eigenvalues 0, 1, ..., dim-1 unless given.
  static ObservableSpec standard(std::string name, std::size_t dim,
                                 std::vector<double> eigenvalues = {}) {
    if (eigenvalues.empty())
      for (std::size_t j = 0; j < dim; ++j) eigenvalues.push_back(static_cast<double>(j));
    const auto d = static_cast<Eigen::Index>(dim);
    return ObservableSpec(std::move(name), std::move(eigenvalues), CMatrix::Identity(d, d));
  }

  const std::string& name() const noexcept { return name_; }
  std::size_t dim() const noexcept { return eigenvalues_.size(); }
  const std::vector<double>& eigenvalues() const noexcept { return eigenvalues_; }
  const CMatrix& eigenbasis() const noexcept { return basis_; }
  CVector eigenvector(std::size_t j) const { return basis_.col(static_cast<Eigen::Index>(j)); }

  /// U diag(a) U^dagger
  CMatrix matrix() const {
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(eigenvalues_.data(),
                                                          static_cast<Eigen::Index>(eigenvalues_.size()));
    return basis_ * a.cast<Complex>().asDiagonal() * basis_.adjoint();
  }

 private:
  std::string name_;
  std::vector<double> eigenvalues_;
  CMatrix basis_;
};

/// Change of eigenbasis: entries(k, j) = <v_k | u_j>, mapping coefficients on
/// the source basis {u_j} to coefficients on the target basis {v_k}.
class TransformMatrix {
 public:
  TransformMatrix(std::string source, std::string target, CMatrix entries)
      : source_(std::move(source)), target_(std::move(target)), entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols())
      throw InvariantViolationError("transform matrix is not square");
    if (unitarity_defect(entries_) > kUnitaryTolerance)
      throw InvariantViolationError("transform " + source_ + "->" + target_ + " is not unitary");
  }

  static TransformMatrix between(const ObservableSpec& from, const ObservableSpec& to) {
    if (from.dim() != to.dim())
      throw DimensionMismatchError("observables " + from.name() + " and " + to.name() +
                                   " differ in dimension");
    return TransformMatrix(from.name(), to.name(), to.eigenbasis().adjoint() * from.eigenbasis());
  }

  TransformMatrix inverse() const { return TransformMatrix(target_, source_, entries_.adjoint()); }

  const std::string& source() const noexcept { return source_; }
  const std::string& target() const noexcept { return target_; }
  const CMatrix& entries() const noexcept { return entries_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(entries_.rows()); }

 private:
  std::string source_;
  std::string target_;
  CMatrix entries_;
};

/// Hermitian generator of evolution; its eigendecomposition is computed once.
class HamiltonianSpec {
 public:
  explicit HamiltonianSpec(CMatrix matrix, double hbar = 1.0) : matrix_(std::move(matrix)), hbar_(hbar) {
    if (matrix_.rows() != matrix_.cols()) throw InvariantViolationError("Hamiltonian is not square");
    if (hermiticity_defect(matrix_) > kHermitianTolerance)
      throw InvariantViolationError("Hamiltonian is not Hermitian");
    if (!(hbar_ > 0.0)) throw InvariantViolationError("hbar must be positive");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(matrix_);
    energies_ = es.eigenvalues();
    modes_ = es.eigenvectors();
  }

  const CMatrix& matrix() const noexcept { return matrix_; }
  double hbar() const noexcept { return hbar_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }
  const Eigen::VectorXd& energies() const noexcept { return energies_; }
  const CMatrix& modes() const noexcept { return modes_; }

 private:
  CMatrix matrix_;
  double hbar_;
  Eigen::VectorXd energies_;
  CMatrix modes_;
};

inline void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw DimensionMismatchError(std::string(what) + ": dimension " + std::to_string(a) +
                                 " vs " + std::to_string(b));
}

/// pi_j = |<u_j|psi>|^2
inline std::vector<double> born_law(const OracleState& state, const ObservableSpec& obs) {
  require_same_dim(state.dim(), obs.dim(), "born_law");
  const CVector c = obs.eigenbasis().adjoint() * state.amplitudes();
  std::vector<double> p(state.dim());
  for (std::size_t j = 0; j < p.size(); ++j) p[j] = std::norm(c(static_cast<Eigen::Index>(j)));
  return p;
}

/// Inverse-CDF draw from a discrete law. Index order fixes the draw, so a
/// given RNG state always maps to the same outcome.
inline std::size_t sample_index(const std::vector<double>& law, Rng& rng) {
  double total = 0.0;
  for (double p : law) total += p;
  const double u = rng.uniform() * total;
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t j = 0; j < law.size(); ++j) {
    if (law[j] <= 0.0) continue;
    cum += law[j];
    last_positive = j;
    if (u < cum) return j;
  }
  return last_positive;
}

inline std::size_t sample_outcome(const OracleState& state, const ObservableSpec& obs, Rng& rng) {
  return sample_index(born_law(state, obs), rng);
}

/// d = tau c
inline CVector dirac_transform(const CVector& coeffs, const TransformMatrix& tau) {
  require_same_dim(static_cast<std::size_t>(coeffs.size()), tau.dim(), "dirac_transform");
  return tau.entries() * coeffs;
}

/// psi' = exp(-i H dt / hbar) psi through the eigendecomposition of H.
inline OracleState evolve(const OracleState& state, const HamiltonianSpec& h, double dt) {
  if (dt < 0.0) throw InvalidArgumentError("evolution time must be non-negative");
  require_same_dim(state.dim(), h.dim(), "evolve");
  if (dt == 0.0) return state;
  const auto& e = h.energies();
  CVector phases(e.size());
  for (Eigen::Index k = 0; k < e.size(); ++k)
    phases(k) = std::polar(1.0, -e(k) * dt / h.hbar());
  CVector out = h.modes() * (phases.asDiagonal() * (h.modes().adjoint() * state.amplitudes()));
  // re-normalize away accumulated rounding so the result passes the 1e-12 check
  return OracleState(out / out.norm());
}

/// Normalized sum_i lambda_i psi_i.
inline OracleState compose_superposition(const std::vector<Complex>& weights,
                                         const std::vector<OracleState>& states) {
  if (weights.empty() || weights.size() != states.size())
    throw InvalidArgumentError("superposition needs one weight per component state");
  if (std::all_of(weights.begin(), weights.end(), [](Complex w) { return w == Complex{}; }))
    throw InvalidArgumentError("at least one superposition weight must be nonzero");
  const auto d = states.front().dim();
  CVector sum = CVector::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < states.size(); ++i) {
    require_same_dim(states[i].dim(), d, "compose_superposition");
    sum += weights[i] * states[i].amplitudes();
  }
  const double n = sum.norm();
  if (n < kAnnihilationThreshold)
    throw DestructiveAnnihilationError("superposition annihilates (norm " + std::to_string(n) + ")");
  return OracleState(sum / n);
}

/// Un-normalized two-component expansion, per eigenvalue index j:
///   |l1 c_j1 + l2 c_j2|^2 = |l1 c_j1|^2 + |l2 c_j2|^2 + [l1 c_j1 (l2 c_j2)* + (l1 c_j1)* l2 c_j2]
struct InterferenceTerms {
  std::vector<double> direct1;
  std::vector<double> direct2;
  std::vector<double> cross;

  std::vector<double> total() const {
    std::vector<double> t(direct1.size());
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = direct1[j] + direct2[j] + cross[j];
    return t;
  }

  /// total() divided by its sum: the Born law of the normalized composite.
  std::vector<double> normalized_total() const {
    auto t = total();
    double s = 0.0;
    for (double x : t) s += x;
    for (double& x : t) x /= s;
    return t;
  }
};

inline InterferenceTerms interference_expansion(Complex l1, const OracleState& psi1, Complex l2,
                                                const OracleState& psi2, const ObservableSpec& obs) {
  require_same_dim(psi1.dim(), obs.dim(), "interference_expansion");
  require_same_dim(psi2.dim(), obs.dim(), "interference_expansion");
  const CVector c1 = obs.eigenbasis().adjoint() * psi1.amplitudes();
  const CVector c2 = obs.eigenbasis().adjoint() * psi2.amplitudes();
  InterferenceTerms t;
  for (Eigen::Index j = 0; j < c1.size(); ++j) {
    const Complex a = l1 * c1(j);
    const Complex b = l2 * c2(j);
    t.direct1.push_back(std::norm(a));
    t.direct2.push_back(std::norm(b));
    t.cross.push_back((a * std::conj(b) + std::conj(a) * b).real());
  }
  return t;
}

/// Frobenius norm of [A, B].
inline double commutator_norm(const ObservableSpec& a, const ObservableSpec& b) {
  require_same_dim(a.dim(), b.dim(), "commutator_norm");
  const CMatrix ma = a.matrix();
  const CMatrix mb = b.matrix();
  return (ma * mb - mb * ma).norm();
}

/// <phi|psi>, exposed as a raw proximity measure between states.
inline Complex overlap(const OracleState& phi, const OracleState& psi) {
  require_same_dim(phi.dim(), psi.dim(), "overlap");
  return phi.amplitudes().dot(psi.amplitudes());  // Eigen's dot conjugates the left operand
}

/// Kronecker product of square matrices, first factor most significant.
inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Random instances for scenarios and property tests.

inline OracleState random_state(std::size_t dim, Rng& rng) {
  CVector v(static_cast<Eigen::Index>(dim));
  for (auto& x : v) x = Complex(rng.normal(), rng.normal());
  return OracleState::normalized(v);
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with R's
/// diagonal phases folded back into Q.
inline CMatrix random_unitary(std::size_t dim, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(dim);
  CMatrix g(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) g(i, j) = Complex(rng.normal(), rng.normal());
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ();
  const CMatrix& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < d; ++j) {
    const double m = std::abs(r(j, j));
    if (m > 0.0) q.col(j) *= r(j, j) / m;
  }
  return q;
}

inline ObservableSpec random_observable(std::string name, std::size_t dim, Rng& rng) {
  std::vector<double> ev;
  double a = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    a += 0.5 + rng.uniform();
    ev.push_back(a);
  }
  return ObservableSpec(std::move(name), std::move(ev), random_unitary(dim, rng));
}

inline HamiltonianSpec random_hamiltonian(std::size_t dim, Rng& rng, double hbar = 1.0) {
  const auto d = static_cast<Eigen::Index>(dim);
  CMatrix g(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) g(i, j) = Complex(rng.normal(), rng.normal());
  return HamiltonianSpec(0.5 * (g + g.adjoint()), hbar);
}

/// Columns (1, e^{i phi})/sqrt2 and (1, -e^{i phi})/sqrt2.
inline CMatrix balanced_basis(double phi = 0.0) {
  CMatrix u(2, 2);
  const double s = 1.0 / std::numbers::sqrt2;
  const Complex e = std::polar(1.0, phi);
  u << s, s, s * e, -s * e;
  return u;
}

/// Discrete Fourier basis: column k has entries e^{2 pi i j k / d} / sqrt(d).
inline CMatrix fourier_basis(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  CMatrix f(d, d);
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index k = 0; k < d; ++k)
      f(j, k) = std::polar(s, 2.0 * std::numbers::pi * static_cast<double>((j * k) % d) / static_cast<double>(d));
  return f;
}

}  // namespace qfact::hilbert
