#include "limda/shallow_water.hpp"

#include "limda/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace limda {

int TsunamiParams::steps() const { return static_cast<int>(std::lround(duration / dt)); }

void TsunamiParams::validate() const {
    if (nx < 3) throw InvalidInput("TsunamiParams: nx must be >= 3");
    if (!(length > 0) || !(dt > 0) || !(duration > 0)) throw InvalidInput("TsunamiParams: length, dt, duration must be > 0");
    if (!(H0 > 0) || !(g > 0)) throw InvalidInput("TsunamiParams: H0 and g must be > 0");
    if (!(cfl_limit >= 0) || !(cfl_limit < 1)) throw InvalidInput("TsunamiParams: cfl_limit must be in [0, 1)");
}

double inflow_depth(const TsunamiParams& p, double t) {
    return p.base_depth + p.Mh * std::sin(std::numbers::pi * (4.0 * t / 86400.0 - 0.5));
}

double inflow_velocity(const TsunamiParams& p, double t) {
    return std::sqrt(p.g) * (std::sqrt(inflow_depth(p, t)) - std::sqrt(p.H0));
}

namespace {

void apply_boundary(ShallowWaterField& f, const TsunamiParams& p, double t) {
    if (p.boundary == SweBoundary::Periodic) return;
    const double tb = p.boundary == SweBoundary::Frozen ? 0.0 : t;
    const Index last = f.h.size() - 1;
    const double h0 = inflow_depth(p, tb);
    f.h(0) = h0;
    f.hu(0) = inflow_velocity(p, tb) * h0;
    f.h(last) = p.H0;
    f.hu(last) = 0.0;
}

}  // namespace

ShallowWaterField swe_initial(const TsunamiParams& p) {
    p.validate();
    ShallowWaterField f;
    f.h = Eigen::VectorXd::Constant(p.nx, p.H0);
    f.hu = Eigen::VectorXd::Zero(p.nx);
    f.t = 0.0;
    apply_boundary(f, p, 0.0);
    return f;
}

double cfl_number(const ShallowWaterField& f, const TsunamiParams& p) {
    const Eigen::ArrayXd u = f.hu.array() / f.h.array();
    const Eigen::ArrayXd speed = u.abs() + (p.g * f.h.array()).sqrt();
    return speed.maxCoeff() * p.dt / p.dx();
}

ShallowWaterField swe_step(const ShallowWaterField& f, const TsunamiParams& p) {
    const Index n = f.h.size();
    if (n != p.nx || f.hu.size() != n) throw InvalidInput("swe_step: field size does not match nx");
    if (f.h.minCoeff() <= 0.0) {
        std::ostringstream os;
        os << "swe_step: dry state (h <= 0) at t = " << f.t;
        throw DryState(os.str());
    }
    const double cfl = cfl_number(f, p);
    if (!(cfl < 1.0)) {
        std::ostringstream os;
        os << "swe_step: CFL number " << cfl << " >= 1 at t = " << f.t;
        throw StabilityError(os.str());
    }

    const Eigen::ArrayXd h = f.h.array();
    const Eigen::ArrayXd q = f.hu.array();
    const Eigen::ArrayXd flux_h = q;
    const Eigen::ArrayXd flux_q = q * q / h + 0.5 * p.g * h * h;
    const double lambda = p.dt / (2.0 * p.dx());
    const double source = -p.g * p.bed_slope();

    ShallowWaterField next;
    next.t = f.t + p.dt;
    next.h.resize(n);
    next.hu.resize(n);
    auto update = [&](Index i, Index left, Index right) {
        next.h(i) = 0.5 * (h(left) + h(right)) - lambda * (flux_h(right) - flux_h(left));
        next.hu(i) = 0.5 * (q(left) + q(right)) - lambda * (flux_q(right) - flux_q(left)) + p.dt * source * h(i);
    };
    for (Index i = 1; i < n - 1; ++i) update(i, i - 1, i + 1);
    if (p.boundary == SweBoundary::Periodic) {
        update(0, n - 1, 1);
        update(n - 1, n - 2, 0);
    } else {
        apply_boundary(next, p, next.t);
    }
    if (!next.h.allFinite() || !next.hu.allFinite()) {
        std::ostringstream os;
        os << "swe_step: non-finite state at t = " << next.t;
        throw TrajectoryBlowup(os.str(), -1, static_cast<int>(std::lround(next.t / p.dt)));
    }
    return next;
}

ShallowWaterField swe_advance(const ShallowWaterField& f, const TsunamiParams& p, int* substeps) {
    int n = 1;
    if (p.cfl_limit > 0) {
        const double cfl = cfl_number(f, p);
        if (std::isfinite(cfl)) n = std::max(1, static_cast<int>(std::ceil(cfl / p.cfl_limit)));
    }
    if (substeps) *substeps = n;
    if (n == 1) return swe_step(f, p);
    TsunamiParams sub = p;
    sub.dt = p.dt / n;
    ShallowWaterField out = f;
    for (int s = 0; s < n; ++s) out = swe_step(out, sub);
    out.t = f.t + p.dt;
    return out;
}

SweRecording run_shallow_water(const TsunamiParams& p, const std::vector<Index>& probes,
                               const std::vector<Index>& depth_probes, int stride) {
    if (stride < 1) throw InvalidInput("run_shallow_water: stride must be >= 1");
    for (Index i : probes)
        if (i < 0 || i >= p.nx) throw InvalidInput("run_shallow_water: probe outside the grid");
    for (Index i : depth_probes)
        if (i < 0 || i >= p.nx) throw InvalidInput("run_shallow_water: depth probe outside the grid");

    const int steps = p.steps();
    const int frames = steps / stride + 1;
    SweRecording rec;
    rec.probes = probes;
    rec.depth_probes = depth_probes;
    rec.stride = stride;
    rec.probe_series.resize(frames, 2 * static_cast<Index>(probes.size()));
    rec.depth_series.resize(frames, static_cast<Index>(depth_probes.size()));

    auto record = [&](const ShallowWaterField& f, int frame) {
        for (std::size_t s = 0; s < probes.size(); ++s) {
            rec.probe_series(frame, 2 * Index(s)) = f.h(probes[s]);
            rec.probe_series(frame, 2 * Index(s) + 1) = f.hu(probes[s]);
        }
        for (std::size_t s = 0; s < depth_probes.size(); ++s) rec.depth_series(frame, Index(s)) = f.h(depth_probes[s]);
    };

    ShallowWaterField f = swe_initial(p);
    record(f, 0);
    for (int k = 1; k <= steps; ++k) {
        rec.max_cfl = std::max(rec.max_cfl, cfl_number(f, p));
        int substeps = 1;
        f = swe_advance(f, p, &substeps);
        rec.max_substeps = std::max(rec.max_substeps, substeps);
        if (k % stride == 0 && k / stride < frames) record(f, k / stride);
    }
    return rec;
}

}  // namespace limda
