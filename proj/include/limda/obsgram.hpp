#pragma once

// Observability Gramians and the observability measure rho.
//
// For a linear system u(k+1) = A u(k), y(k) = H u(k), z(k) = W u(k), rho is the
// largest change of z(K) that an initial-state perturbation can produce while
// keeping the accumulated output change (over k = 0..K) within epsilon and the
// perturbation itself within delta along unobservable directions:
//
//   rho^2 = sum_i wbar_i^2 * min(eps^2 / sigma_i, delta^2),   wbar = W(K) T
//
// where G = T diag(sigma) T^T is the observability Gramian.

#include "limda/errors.hpp"
#include "limda/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace limda {

template <typename Scalar = double>
class LinearSystem {
public:
    using Matrix = MatrixX<Scalar>;
    using RowVector = RowVectorX<Scalar>;

    LinearSystem(Matrix A, Matrix H, RowVector W) : A_(std::move(A)), H_(std::move(H)), W_(std::move(W)) {
        const Index n = A_.rows();
        if (n < 1 || A_.cols() != n) throw InvalidInput("LinearSystem: A must be square and non-empty");
        if (H_.rows() < 1 || H_.cols() != n) throw InvalidInput("LinearSystem: H must have n columns");
        if (W_.cols() != n) throw InvalidInput("LinearSystem: W must have n columns");
        if ((H_.array() == Scalar(0)).all()) throw InvalidInput("LinearSystem: H must be nonzero");
    }

    const Matrix& A() const { return A_; }
    const Matrix& H() const { return H_; }
    const RowVector& W() const { return W_; }
    Index state_dim() const { return A_.rows(); }
    Index output_dim() const { return H_.rows(); }

private:
    Matrix A_;
    Matrix H_;
    RowVector W_;
};

struct ObservabilityConfig {
    double epsilon = 0.065;  ///< observation-uncertainty bound
    double delta = 0.5;      ///< initial-guess error bound
    int K = 12;              ///< window length, observations at k = 0..K
    double h_step = 1e-5;    ///< finite-difference perturbation
    std::vector<Index> index_set;  ///< perturbed state indices (0-based); empty means all
    int delta_K = 0;         ///< prediction lead; target evaluated at K + delta_K

    void validate() const {
        if (!(epsilon > 0) || !(delta > 0)) throw InvalidInput("ObservabilityConfig: epsilon and delta must be > 0");
        if (!(h_step > 0)) throw InvalidInput("ObservabilityConfig: h_step must be > 0");
        if (K < 1) throw InvalidInput("ObservabilityConfig: K must be >= 1");
        if (delta_K < 0) throw InvalidInput("ObservabilityConfig: delta_K must be >= 0");
    }

    /// Sorted copy of the index set (all of 0..n-1 when empty); throws on
    /// duplicates or out-of-range entries.
    std::vector<Index> resolved_index_set(Index n) const {
        std::vector<Index> out = index_set;
        if (out.empty()) {
            out.resize(static_cast<std::size_t>(n));
            for (Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i;
            return out;
        }
        std::sort(out.begin(), out.end());
        if (std::adjacent_find(out.begin(), out.end()) != out.end())
            throw InvalidInput("ObservabilityConfig: index_set has duplicate entries");
        if (out.front() < 0 || out.back() >= n) throw InvalidInput("ObservabilityConfig: index_set entry out of range");
        return out;
    }

    double sigma_floor() const { return epsilon * epsilon / (delta * delta); }
};

/// Eigendecomposition G = T diag(sigma) T^T plus the floored eigenvalues
/// sigma_tilde = max(sigma, eps^2/delta^2) once modify_gramian has run.
template <typename Scalar = double>
struct SpectralGramian {
    VectorX<Scalar> sigma;
    MatrixX<Scalar> T;
    VectorX<Scalar> sigma_tilde;

    Index size() const { return sigma.size(); }
    bool modified() const { return sigma_tilde.size() == sigma.size() && sigma.size() > 0; }

    MatrixX<Scalar> reconstruct() const { return T * sigma.asDiagonal() * T.transpose(); }

    /// G_delta = T diag(sigma_tilde) T^T
    MatrixX<Scalar> reconstruct_modified() const {
        if (!modified()) throw InvalidInput("SpectralGramian: modify_gramian has not been applied");
        return T * sigma_tilde.asDiagonal() * T.transpose();
    }
};

template <typename Scalar = double>
struct RhoResult {
    Scalar rho{};
    RowVectorX<Scalar> w_bar;  ///< W(K) T
    RowVectorX<Scalar> W_K;
};

/// Eigenvalues in [-clamp_tol, 0) are rounding noise of a PSD sum and set to 0.
inline constexpr double kEigenClampTolerance = 1e-10;

template <typename Scalar>
SpectralGramian<Scalar> spectral_decomposition(const MatrixX<Scalar>& G) {
    if (G.rows() != G.cols() || G.rows() == 0) throw InvalidInput("spectral_decomposition: G must be square and non-empty");
    const MatrixX<Scalar> sym = (G + G.transpose()) / Scalar(2);
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> solver(sym);
    if (solver.info() != Eigen::Success) throw SolverFailure("spectral_decomposition: eigensolver did not converge");
    SpectralGramian<Scalar> out;
    out.sigma = solver.eigenvalues();
    out.T = solver.eigenvectors();
    for (Index i = 0; i < out.sigma.size(); ++i) {
        if (out.sigma(i) < Scalar(0) && out.sigma(i) >= Scalar(-kEigenClampTolerance)) out.sigma(i) = Scalar(0);
    }
    return out;
}

/// G = sum_{k=0..K} (A^T)^k H^T H A^k
template <typename Scalar>
MatrixX<Scalar> linear_gramian_matrix(const LinearSystem<Scalar>& sys, int K) {
    if (K < 1) throw InvalidInput("linear_gramian: K must be >= 1");
    const Index n = sys.state_dim();
    MatrixX<Scalar> G = MatrixX<Scalar>::Zero(n, n);
    MatrixX<Scalar> HAk = sys.H();
    for (int k = 0; k <= K; ++k) {
        G.noalias() += HAk.transpose() * HAk;
        if (k < K) HAk = HAk * sys.A();
    }
    return G;
}

template <typename Scalar>
SpectralGramian<Scalar> linear_gramian(const LinearSystem<Scalar>& sys, int K) {
    return spectral_decomposition<Scalar>(linear_gramian_matrix(sys, K));
}

/// W(K) = W A^(K + delta_K)
template <typename Scalar>
RowVectorX<Scalar> linear_sensitivity(const LinearSystem<Scalar>& sys, int K, int delta_K = 0) {
    if (K < 0 || delta_K < 0) throw InvalidInput("linear_sensitivity: K and delta_K must be >= 0");
    RowVectorX<Scalar> w = sys.W();
    for (int k = 0; k < K + delta_K; ++k) w = w * sys.A();
    return w;
}

template <typename Scalar>
SpectralGramian<Scalar> modify_gramian(SpectralGramian<Scalar> g, double epsilon, double delta) {
    if (!(epsilon > 0) || !(delta > 0)) throw InvalidInput("modify_gramian: epsilon and delta must be > 0");
    const Scalar floor = Scalar(epsilon) * Scalar(epsilon) / (Scalar(delta) * Scalar(delta));
    g.sigma_tilde = g.sigma.cwiseMax(floor);
    return g;
}

template <typename Scalar>
SpectralGramian<Scalar> modify_gramian(SpectralGramian<Scalar> g, const ObservabilityConfig& cfg) {
    cfg.validate();
    return modify_gramian(std::move(g), cfg.epsilon, cfg.delta);
}

/// Relative rank tolerance used by rho_full_rank.
inline constexpr double kFullRankTolerance = 1e-12;

/// rho^2 = eps^2 sum_i wbar_i^2 / sigma_i. Only valid when G has full rank;
/// singular Gramians must go through modify_gramian + rho_primary.
template <typename Scalar>
RhoResult<Scalar> rho_full_rank(const SpectralGramian<Scalar>& g, const RowVectorX<Scalar>& W_K, double epsilon) {
    if (W_K.size() != g.size()) throw InvalidInput("rho_full_rank: W_K length does not match Gramian");
    if (!(epsilon > 0)) throw InvalidInput("rho_full_rank: epsilon must be > 0");
    const Scalar sigma_max = g.sigma.maxCoeff();
    const Scalar tol = Scalar(kFullRankTolerance) * std::max(sigma_max, Scalar(1));
    if (g.sigma.minCoeff() <= tol)
        throw SingularGramian("rho_full_rank: Gramian is singular; use modify_gramian and rho_primary");
    RhoResult<Scalar> out;
    out.W_K = W_K;
    out.w_bar = W_K * g.T;
    const Scalar sum = (out.w_bar.array().square() / g.sigma.transpose().array()).sum();
    out.rho = Scalar(epsilon) * std::sqrt(sum);
    return out;
}

/// Closed-form maximum of the QCQP  max (W_K du)^2  s.t.  du^T G_delta du = eps^2.
template <typename Scalar>
RhoResult<Scalar> rho_primary(const SpectralGramian<Scalar>& g, const RowVectorX<Scalar>& W_K,
                              const ObservabilityConfig& cfg) {
    cfg.validate();
    if (!g.modified()) throw InvalidInput("rho_primary: apply modify_gramian first");
    if (W_K.size() != g.size()) throw InvalidInput("rho_primary: W_K length does not match Gramian");
    RhoResult<Scalar> out;
    out.W_K = W_K;
    out.w_bar = W_K * g.T;
    // min(eps^2/sigma, delta^2) == eps^2 / max(sigma, eps^2/delta^2)
    const Scalar eps2 = Scalar(cfg.epsilon) * Scalar(cfg.epsilon);
    const Scalar sum = (out.w_bar.array().square() / g.sigma_tilde.transpose().array()).sum();
    out.rho = std::sqrt(eps2 * sum);
    return out;
}

/// eps * sqrt(W_K G_delta^{-1} W_K^T) by Cholesky solve; independent of the
/// eigendecomposition route used by rho_primary.
template <typename Scalar>
Scalar rho_oracle(const MatrixX<Scalar>& G_delta, const RowVectorX<Scalar>& W_K, double epsilon) {
    if (G_delta.rows() != G_delta.cols() || W_K.size() != G_delta.rows())
        throw InvalidInput("rho_oracle: dimension mismatch");
    Eigen::LLT<MatrixX<Scalar>> llt(G_delta);
    if (llt.info() != Eigen::Success) throw SolverFailure("rho_oracle: G_delta is not symmetric positive definite");
    const VectorX<Scalar> x = llt.solve(W_K.transpose());
    const Scalar q = W_K.dot(x.transpose());
    return Scalar(epsilon) * std::sqrt(std::max(q, Scalar(0)));
}

// ---------------------------------------------------------------------------
// Nonlinear systems: empirical Gramian by finite differences.

using State = Eigen::VectorXd;

/// u(k+1) = step(u(k), k), y(k) = observe(u(k)), z(k) = target(u(k)).
/// `step` receives the time index of its input state so that time-dependent
/// boundary data can be applied.
struct DiscreteSystem {
    std::function<State(const State&, int)> step;
    std::function<Eigen::VectorXd(const State&)> observe;
    std::function<double(const State&)> target;
    Index n = 0;
    Index m = 0;
};

/// Finite-difference sensitivities of outputs and target for every perturbed index.
///
/// `outputs` stacks D y(k) for k = 0..K: rows [k*m, (k+1)*m) belong to step k and
/// column c to index_set[c]. Row k of `targets` holds D w(k) for k = 0..K+delta_K.
struct EmpiricalSensitivities {
    std::vector<Index> index_set;
    Index output_dim = 0;
    int K = 0;
    Eigen::MatrixXd outputs;
    Eigen::MatrixXd targets;
};

struct EmpiricalGramian {
    SpectralGramian<double> gramian;
    Eigen::RowVectorXd W_K;
};

/// Runs the nominal trajectory and one perturbed trajectory per index (in
/// parallel when threads are available; results are placed by column so the
/// output does not depend on scheduling).
EmpiricalSensitivities empirical_sensitivities(const DiscreteSystem& sys, const State& nominal_initial,
                                               const ObservabilityConfig& cfg);

/// G = sum_k Dy(k)^T Dy(k) and W(K) = targets.row(K + delta_K).
EmpiricalGramian gramian_from_sensitivities(const EmpiricalSensitivities& sens, int delta_K = 0);

EmpiricalGramian empirical_gramian(const DiscreteSystem& sys, const State& nominal_initial,
                                   const ObservabilityConfig& cfg);

/// Keeps the columns at the given positions (positions into sens.index_set).
EmpiricalSensitivities select_indices(const EmpiricalSensitivities& sens, const std::vector<Index>& positions);
/// Keeps output channels (0..m-1) and observation steps 0..K.
EmpiricalSensitivities select_window(const EmpiricalSensitivities& sens, const std::vector<Index>& channels, int K);

/// modify_gramian + rho_primary on an empirical Gramian.
double rho_from_empirical(const EmpiricalGramian& eg, const ObservabilityConfig& cfg);

}  // namespace limda
