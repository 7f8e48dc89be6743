#include "limda/obsgram.hpp"

#include "limda/parallel.hpp"

#include <sstream>

namespace limda {

namespace {

void check_finite(const State& u, long index, int step) {
    if (!u.allFinite()) {
        std::ostringstream os;
        os << "trajectory blowup: non-finite state at step " << step;
        if (index >= 0) os << " of the run perturbed at index " << index;
        else os << " of the nominal run";
        throw TrajectoryBlowup(os.str(), index, step);
    }
}

struct RunRecord {
    Eigen::MatrixXd outputs;  // (K+1) x m
    Eigen::VectorXd targets;  // K+delta_K+1
};

RunRecord simulate(const DiscreteSystem& sys, State u, int K, int delta_K, long index) {
    RunRecord rec;
    rec.outputs.resize(K + 1, sys.m);
    rec.targets.resize(K + delta_K + 1);
    for (int k = 0; k <= K + delta_K; ++k) {
        if (k > 0) {
            u = sys.step(u, k - 1);
            check_finite(u, index, k);
        }
        if (k <= K) {
            const Eigen::VectorXd y = sys.observe(u);
            if (y.size() != sys.m) throw InvalidInput("DiscreteSystem: observe returned a vector of the wrong length");
            rec.outputs.row(k) = y.transpose();
        }
        rec.targets(k) = sys.target(u);
    }
    return rec;
}

}  // namespace

EmpiricalSensitivities empirical_sensitivities(const DiscreteSystem& sys, const State& nominal_initial,
                                               const ObservabilityConfig& cfg) {
    cfg.validate();
    if (!sys.step || !sys.observe || !sys.target) throw InvalidInput("DiscreteSystem: missing map");
    if (sys.n < 1 || sys.m < 1) throw InvalidInput("DiscreteSystem: dimensions must be positive");
    if (nominal_initial.size() != sys.n) throw InvalidInput("empirical_sensitivities: initial state has wrong length");
    check_finite(nominal_initial, -1, 0);

    EmpiricalSensitivities out;
    out.index_set = cfg.resolved_index_set(sys.n);
    out.output_dim = sys.m;
    out.K = cfg.K;
    const Index p = static_cast<Index>(out.index_set.size());
    const int K = cfg.K;
    const int horizon = cfg.K + cfg.delta_K;

    const RunRecord nominal = simulate(sys, nominal_initial, K, cfg.delta_K, -1);
    out.outputs.resize((K + 1) * sys.m, p);
    out.targets.resize(horizon + 1, p);

    const double h = cfg.h_step;
    parallel_for(static_cast<std::size_t>(p), [&](std::size_t c) {
        const Index idx = out.index_set[c];
        State u0 = nominal_initial;
        u0(idx) += h;
        const RunRecord run = simulate(sys, std::move(u0), K, cfg.delta_K, static_cast<long>(idx));
        const Index col = static_cast<Index>(c);
        for (int k = 0; k <= K; ++k) {
            out.outputs.block(k * sys.m, col, sys.m, 1) = (run.outputs.row(k) - nominal.outputs.row(k)).transpose() / h;
        }
        out.targets.col(col) = (run.targets - nominal.targets) / h;
    });
    return out;
}

EmpiricalGramian gramian_from_sensitivities(const EmpiricalSensitivities& sens, int delta_K) {
    if (delta_K < 0 || sens.K + delta_K >= sens.targets.rows())
        throw InvalidInput("gramian_from_sensitivities: target horizon K + delta_K was not simulated");
    if (sens.outputs.cols() == 0) throw InvalidInput("gramian_from_sensitivities: empty index set");
    EmpiricalGramian out;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(sens.outputs.cols(), sens.outputs.cols());
    G.selfadjointView<Eigen::Lower>().rankUpdate(sens.outputs.transpose());
    G = G.selfadjointView<Eigen::Lower>();
    out.gramian = spectral_decomposition<double>(G);
    out.W_K = sens.targets.row(sens.K + delta_K);
    return out;
}

EmpiricalGramian empirical_gramian(const DiscreteSystem& sys, const State& nominal_initial,
                                   const ObservabilityConfig& cfg) {
    return gramian_from_sensitivities(empirical_sensitivities(sys, nominal_initial, cfg), cfg.delta_K);
}

EmpiricalSensitivities select_indices(const EmpiricalSensitivities& sens, const std::vector<Index>& positions) {
    EmpiricalSensitivities out;
    out.output_dim = sens.output_dim;
    out.K = sens.K;
    out.outputs.resize(sens.outputs.rows(), static_cast<Index>(positions.size()));
    out.targets.resize(sens.targets.rows(), static_cast<Index>(positions.size()));
    for (std::size_t c = 0; c < positions.size(); ++c) {
        const Index pos = positions[c];
        if (pos < 0 || pos >= sens.outputs.cols()) throw InvalidInput("select_indices: position out of range");
        out.index_set.push_back(sens.index_set[static_cast<std::size_t>(pos)]);
        out.outputs.col(static_cast<Index>(c)) = sens.outputs.col(pos);
        out.targets.col(static_cast<Index>(c)) = sens.targets.col(pos);
    }
    return out;
}

EmpiricalSensitivities select_window(const EmpiricalSensitivities& sens, const std::vector<Index>& channels, int K) {
    if (K < 1 || K > sens.K) throw InvalidInput("select_window: K outside the simulated window");
    for (Index ch : channels)
        if (ch < 0 || ch >= sens.output_dim) throw InvalidInput("select_window: channel out of range");
    EmpiricalSensitivities out;
    out.index_set = sens.index_set;
    out.output_dim = static_cast<Index>(channels.size());
    out.K = K;
    out.outputs.resize((K + 1) * out.output_dim, sens.outputs.cols());
    for (int k = 0; k <= K; ++k) {
        for (std::size_t c = 0; c < channels.size(); ++c) {
            out.outputs.row(k * out.output_dim + static_cast<Index>(c)) = sens.outputs.row(k * sens.output_dim + channels[c]);
        }
    }
    out.targets = sens.targets;
    return out;
}

double rho_from_empirical(const EmpiricalGramian& eg, const ObservabilityConfig& cfg) {
    return rho_primary(modify_gramian(eg.gramian, cfg), eg.W_K, cfg).rho;
}

}  // namespace limda
