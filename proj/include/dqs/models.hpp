#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "dqs/statevec.hpp"

// Hamiltonians of the two studied models, exact target evolution
// e^{-i H tau} |psi0>, and the first-order Trotter mapping onto the
// gate set.

namespace dqs {

/// Long-range Ising chain:
///   H = J sum_{j<k} sigma_x_j sigma_x_k / |k-j|^alpha
///     + m_x sum_j sigma_x_j + m_z sum_j sigma_z_j
struct LriParams {
  double J = 1.0;
  double m_x = 2.0;
  double m_z = 2.0;
  double alpha = 3.0;
};

/// Lattice Schwinger model (Kogut-Susskind spin formulation):
///   H = w sum_j [sigma+_j sigma-_{j+1} + h.c.]
///     + (m/2) sum_j (-1)^j sigma_z_j
///     + (J/2) sum_{j=1}^{N-1} [ sum_{l<=j} (sigma_z_l + (-1)^l) ]^2
struct SchwingerParams {
  double w = 1.0;
  double J = 1.0;
  double m = 0.5;
};

struct HamiltonianSpec {
  int n_qubits = 0;
  std::variant<LriParams, SchwingerParams> model;

  static HamiltonianSpec lri(int n_qubits, LriParams p = {}) {
    if (n_qubits < 1) throw std::invalid_argument("lri: N must be >= 1");
    if (p.alpha < 0.0) throw std::invalid_argument("lri: alpha must be >= 0");
    return HamiltonianSpec{n_qubits, p};
  }

  static HamiltonianSpec schwinger(int n_qubits, SchwingerParams p = {}) {
    if (n_qubits < 2) throw std::invalid_argument("schwinger: N must be >= 2");
    return HamiltonianSpec{n_qubits, p};
  }

  bool is_lri() const { return std::holds_alternative<LriParams>(model); }
  const LriParams& lri_params() const { return std::get<LriParams>(model); }
  const SchwingerParams& schwinger_params() const {
    return std::get<SchwingerParams>(model);
  }

  /// Stable identity string; doubles are rendered bit-exactly.
  std::string key() const;
};

namespace detail {

inline std::string double_key(double x) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(x));
  std::memcpy(&bits, &x, sizeof(bits));
  return std::to_string(bits);
}

// The Schwinger gauge term expanded into sigma_z sigma_z pair couplings,
// per-site sigma_z fields (mass term folded in), and a constant.
struct SchwingerDiagonal {
  std::vector<double> zz;  // zz[p * N + q] for p < q (0-based sites)
  std::vector<double> z;   // per-site field
  double constant = 0.0;
};

inline SchwingerDiagonal schwinger_diagonal(const SchwingerParams& p, int n) {
  SchwingerDiagonal d;
  d.zz.assign(std::size_t(n) * n, 0.0);
  d.z.assign(n, 0.0);
  // [sum_{l<=j}(sigma_z_l + (-1)^l)]^2 expands into
  //   j + 2 sum_{l<l'<=j} z_l z_l' + 2 c_j sum_{l<=j} z_l + c_j^2,
  // with c_j = sum_{l<=j} (-1)^l. Summing j = 1..N-1 and collecting
  // terms gives pair weights J (N - q), site fields J sum_{j>=q} c_j,
  // and the constant below.
  auto stagger_sum = [](int j) { return (j % 2 == 1) ? -1.0 : 0.0; };  // c_j
  for (int q = 2; q <= n - 1; ++q) {
    for (int l = 1; l < q; ++l) {
      d.zz[std::size_t(l - 1) * n + (q - 1)] = p.J * double(n - q);
    }
  }
  // pairs with the last site never enter (inner sums stop at N-1)
  for (int site = 1; site <= n; ++site) {
    double csum = 0.0;
    for (int j = std::max(site, 1); j <= n - 1; ++j) csum += stagger_sum(j);
    const double mass_sign = (site % 2 == 1) ? -1.0 : 1.0;  // (-1)^site
    d.z[site - 1] = p.J * csum + 0.5 * p.m * mass_sign;
  }
  for (int j = 1; j <= n - 1; ++j) {
    const double c = stagger_sum(j);
    d.constant += 0.5 * p.J * (double(j) + c * c);
  }
  return d;
}

}  // namespace detail

inline std::string HamiltonianSpec::key() const {
  using detail::double_key;
  if (is_lri()) {
    const auto& p = lri_params();
    return "lri:" + std::to_string(n_qubits) + ":" + double_key(p.J) + ":" +
           double_key(p.m_x) + ":" + double_key(p.m_z) + ":" +
           double_key(p.alpha);
  }
  const auto& p = schwinger_params();
  return "schwinger:" + std::to_string(n_qubits) + ":" + double_key(p.w) + ":" +
         double_key(p.J) + ":" + double_key(p.m);
}

/// H |psi>, matrix-free.
inline StateVector apply_hamiltonian(const HamiltonianSpec& spec,
                                     const StateVector& psi) {
  const int n = spec.n_qubits;
  if (psi.n_qubits() != n) {
    throw std::invalid_argument("apply_hamiltonian: qubit count mismatch");
  }
  const std::size_t dim = psi.dim();
  StateVector out(n);
  out[0] = cplx{0.0, 0.0};

  if (spec.is_lri()) {
    const auto& p = spec.lri_params();
    std::vector<double> weight(n);
    for (int d = 1; d < n; ++d) {
      weight[d] = p.J / std::pow(double(d), p.alpha);
    }
    for (std::size_t m = 0; m < dim; ++m) {
      const cplx amp = psi[m];
      // diagonal: m_z sum_j z_j
      double zsum = 0.0;
      for (int j = 0; j < n; ++j) zsum += ((m >> j) & 1) ? -1.0 : 1.0;
      out[m] += p.m_z * zsum * amp;
      // transverse field: m_x sum_j sigma_x_j
      for (int j = 0; j < n; ++j) {
        out[m ^ (std::size_t{1} << j)] += p.m_x * amp;
      }
      // pair flips: J/|k-j|^alpha sigma_x_j sigma_x_k
      for (int j = 0; j < n; ++j) {
        for (int k = j + 1; k < n; ++k) {
          const std::size_t flipped =
              m ^ (std::size_t{1} << j) ^ (std::size_t{1} << k);
          out[flipped] += weight[k - j] * amp;
        }
      }
    }
    return out;
  }

  const auto& p = spec.schwinger_params();
  const auto diag = detail::schwinger_diagonal(p, n);
  for (std::size_t m = 0; m < dim; ++m) {
    const cplx amp = psi[m];
    double z[32];
    for (int j = 0; j < n; ++j) z[j] = ((m >> j) & 1) ? -1.0 : 1.0;
    double e = diag.constant;
    for (int j = 0; j < n; ++j) {
      e += diag.z[j] * z[j];
      for (int k = j + 1; k < n; ++k) {
        const double w = diag.zz[std::size_t(j) * n + k];
        if (w != 0.0) e += w * z[j] * z[k];
      }
    }
    out[m] += e * amp;
    // hopping: w (sigma+_j sigma-_{j+1} + h.c.) swaps anti-aligned neighbors
    for (int j = 0; j < n - 1; ++j) {
      const std::size_t mj = std::size_t{1} << j;
      const std::size_t mk = std::size_t{1} << (j + 1);
      if (((m & mj) != 0) != ((m & mk) != 0)) {
        out[m ^ mj ^ mk] += p.w * amp;
      }
    }
  }
  return out;
}

/// Re <psi| H |psi>.
inline double energy_expectation(const HamiltonianSpec& spec,
                                 const StateVector& psi) {
  return overlap(psi, apply_hamiltonian(spec, psi)).real();
}

enum class EvolveMethod { DenseEigen, Krylov };

struct EvolutionConfig {
  double tau = 0.0;
  EvolveMethod method = EvolveMethod::DenseEigen;
  int krylov_dim = 30;
  double substep_tolerance = 1e-10;
  int dense_cap = 12;  // dense path refused above this N
};

/// Dense path by default up to 10 qubits, Lanczos beyond.
inline EvolveMethod default_method(int n_qubits) {
  return n_qubits <= 10 ? EvolveMethod::DenseEigen : EvolveMethod::Krylov;
}

struct SpectralDecomp {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXcd eigenvectors;
};

/// Full Hermitian eigendecomposition of H, cached per spec. The cache is
/// read-mostly and internally synchronized; entries are immutable once
/// published.
inline std::shared_ptr<const SpectralDecomp> spectral_decomposition(
    const HamiltonianSpec& spec) {
  static std::mutex mutex;
  static std::map<std::string, std::shared_ptr<const SpectralDecomp>> cache;
  const std::string key = spec.key();
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  const int n = spec.n_qubits;
  const Eigen::Index dim = Eigen::Index(1) << n;
  Eigen::MatrixXcd h(dim, dim);
  StateVector unit(n);
  for (Eigen::Index col = 0; col < dim; ++col) {
    for (std::size_t i = 0; i < unit.dim(); ++i) unit[i] = cplx{0.0, 0.0};
    unit[std::size_t(col)] = cplx{1.0, 0.0};
    const StateVector hcol = apply_hamiltonian(spec, unit);
    for (Eigen::Index row = 0; row < dim; ++row) {
      h(row, col) = hcol[std::size_t(row)];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  auto decomp = std::make_shared<SpectralDecomp>();
  decomp->eigenvalues = es.eigenvalues();
  decomp->eigenvectors = es.eigenvectors();
  std::lock_guard<std::mutex> lock(mutex);
  auto [it, inserted] = cache.emplace(key, std::move(decomp));
  return it->second;
}

namespace detail {

inline StateVector dense_evolve(const HamiltonianSpec& spec,
                                const StateVector& psi0, double tau) {
  const auto decomp = spectral_decomposition(spec);
  const Eigen::Index dim = Eigen::Index(1) << spec.n_qubits;
  Eigen::VectorXcd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = psi0[std::size_t(i)];
  Eigen::VectorXcd coeffs = decomp->eigenvectors.adjoint() * v;
  for (Eigen::Index i = 0; i < dim; ++i) {
    coeffs(i) *= std::polar(1.0, -decomp->eigenvalues(i) * tau);
  }
  const Eigen::VectorXcd evolved = decomp->eigenvectors * coeffs;
  StateVector out(spec.n_qubits);
  for (Eigen::Index i = 0; i < dim; ++i) out[std::size_t(i)] = evolved(i);
  return out;
}

// One adaptive Lanczos propagation. The Krylov basis depends only on the
// current state, so a rejected step size reuses the basis with a smaller dt.
inline StateVector krylov_evolve(const HamiltonianSpec& spec,
                                 const StateVector& psi0,
                                 const EvolutionConfig& cfg) {
  const int m_max = cfg.krylov_dim;
  if (m_max < 2) {
    throw std::invalid_argument("krylov_evolve: krylov_dim must be >= 2");
  }
  const std::size_t dim = psi0.dim();
  StateVector psi = psi0;
  double t = 0.0;
  double dt = cfg.tau;
  const double dt_min = cfg.tau * 1e-12;

  while (t < cfg.tau) {
    dt = std::min(dt, cfg.tau - t);

    // Lanczos basis with full reorthogonalization.
    const double beta0 = psi.norm();
    std::vector<StateVector> basis;
    basis.reserve(m_max);
    {
      StateVector q = psi;
      for (std::size_t i = 0; i < dim; ++i) q[i] /= beta0;
      basis.push_back(std::move(q));
    }
    std::vector<double> alpha_coeffs, beta_coeffs;
    bool happy = false;
    for (int j = 0; j < m_max; ++j) {
      StateVector w = apply_hamiltonian(spec, basis[j]);
      if (j > 0) {
        const double b = beta_coeffs[j - 1];
        for (std::size_t i = 0; i < dim; ++i) w[i] -= b * basis[j - 1][i];
      }
      const double a = overlap(basis[j], w).real();
      alpha_coeffs.push_back(a);
      for (std::size_t i = 0; i < dim; ++i) w[i] -= a * basis[j][i];
      for (const StateVector& q : basis) {
        const cplx proj = overlap(q, w);
        for (std::size_t i = 0; i < dim; ++i) w[i] -= proj * q[i];
      }
      const double b = w.norm();
      if (b < 1e-12) {
        happy = true;  // invariant subspace reached; T is exact
        break;
      }
      if (j + 1 < m_max) {
        beta_coeffs.push_back(b);
        for (std::size_t i = 0; i < dim; ++i) w[i] /= b;
        basis.push_back(std::move(w));
      } else {
        beta_coeffs.push_back(b);  // residual norm for the error estimate
      }
    }

    const int k = static_cast<int>(alpha_coeffs.size());
    Eigen::MatrixXd tmat = Eigen::MatrixXd::Zero(k, k);
    for (int j = 0; j < k; ++j) {
      tmat(j, j) = alpha_coeffs[j];
      if (j + 1 < k) tmat(j, j + 1) = tmat(j + 1, j) = beta_coeffs[j];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tmat);

    // Shrink dt until the residual-based error estimate passes.
    Eigen::VectorXcd y;
    while (true) {
      Eigen::VectorXcd phases(k);
      for (int j = 0; j < k; ++j) {
        phases(j) = std::polar(1.0, -es.eigenvalues()(j) * dt);
      }
      y = es.eigenvectors().cast<cplx>() * phases.asDiagonal() *
          es.eigenvectors().cast<cplx>().adjoint() *
          Eigen::VectorXcd::Unit(k, 0);
      if (happy) break;
      const double err = std::abs(beta_coeffs.back() * y(k - 1));
      if (err <= cfg.substep_tolerance) break;
      if (dt <= dt_min) {
        throw std::runtime_error(
            "krylov_evolve: substep underflow; tolerance unreachable");
      }
      dt *= 0.5;
    }

    StateVector next(psi.n_qubits());
    for (std::size_t i = 0; i < dim; ++i) next[i] = cplx{0.0, 0.0};
    for (int j = 0; j < k; ++j) {
      const cplx c = beta0 * y(j);
      for (std::size_t i = 0; i < dim; ++i) next[i] += c * basis[j][i];
    }
    psi = std::move(next);
    t += dt;
    dt *= 1.5;
  }
  return psi;
}

}  // namespace detail

/// e^{-i H tau} |psi0>.
inline StateVector exact_evolve(const HamiltonianSpec& spec,
                                const StateVector& psi0,
                                const EvolutionConfig& cfg) {
  if (psi0.n_qubits() != spec.n_qubits) {
    throw std::invalid_argument("exact_evolve: qubit count mismatch");
  }
  if (cfg.tau < 0.0) {
    throw std::invalid_argument("exact_evolve: tau must be >= 0");
  }
  if (cfg.tau == 0.0) return psi0;
  if (cfg.method == EvolveMethod::DenseEigen) {
    if (spec.n_qubits > cfg.dense_cap) {
      throw std::invalid_argument(
          "exact_evolve: dense path refused for N=" +
          std::to_string(spec.n_qubits) + " (cap " +
          std::to_string(cfg.dense_cap) + "); use the krylov method");
    }
    return detail::dense_evolve(spec, psi0, cfg.tau);
  }
  return detail::krylov_evolve(spec, psi0, cfg);
}

/// First-order Trotter angles for the LRI model: every step carries
/// theta_xx = J tau / n, theta_z = m_z tau / n, theta_x = m_x tau / n.
inline CircuitParams trotter_params(const HamiltonianSpec& spec, double tau,
                                    int n_steps) {
  if (!spec.is_lri()) {
    throw std::invalid_argument(
        "trotter_params: no natural gate decomposition for the Schwinger "
        "model; only the LRI variant is supported");
  }
  if (n_steps < 1) {
    throw std::invalid_argument("trotter_params: need n >= 1 steps");
  }
  const auto& p = spec.lri_params();
  StepAngles step = StepAngles::zeros(spec.n_qubits, p.alpha);
  step.theta_xx = p.J * tau / n_steps;
  std::fill(step.theta_z.begin(), step.theta_z.end(), p.m_z * tau / n_steps);
  std::fill(step.theta_x.begin(), step.theta_x.end(), p.m_x * tau / n_steps);
  CircuitParams params;
  params.steps.assign(n_steps, step);
  return params;
}

/// The initial state each model starts from: the fully polarized state
/// for the LRI chain, the Neel bare vacuum for the Schwinger model.
inline StateVector model_initial_state(const HamiltonianSpec& spec) {
  return spec.is_lri() ? polarized_state(spec.n_qubits)
                       : neel_state(spec.n_qubits);
}

}  // namespace dqs
