// dynamics.hpp - unitary, quantum-trajectory and Lindblad time evolution
//
// All integrators are classical fixed-step RK4. For a time-independent
// generator G one RK4 step is the matrix polynomial
//   T(h) = I + hG + (hG)^2/2 + (hG)^3/6 + (hG)^4/24,
// so the propagators precompute T(dt) and its power over one sample interval.
// The no-jump norm is non-increasing, which lets a trajectory take a whole
// sample interval at once whenever the jump threshold is not crossed.

#pragma once

#include "jch/linalg.hpp"
#include "jch/parallel.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace jch {

// ------------------------------------------------------------- time grid

struct TimeGrid {
    double t_start{0.0};
    double t_end{1.0};
    int n_samples{100};  // output intervals; n_samples + 1 sample times
    double dt{0.005};
    double max_dt{0.01};

    double sample_interval() const { return (t_end - t_start) / n_samples; }
    double time(int k) const { return t_start + k * sample_interval(); }

    std::vector<std::string> problems() const {
        std::vector<std::string> out;
        if (!(std::isfinite(t_start) && std::isfinite(t_end)) || !(t_end > t_start)) {
            out.push_back("t_end: must be finite and > t_start");
        }
        if (n_samples < 1) out.push_back("n_samples: must be >= 1");
        if (!(dt > 0.0)) out.push_back("dt: must be > 0");
        if (dt > max_dt) out.push_back("dt: exceeds max_dt = " + format_double(max_dt));
        if (out.empty()) {
            const double interval = sample_interval();
            if (dt > interval * (1.0 + 1e-12)) {
                out.push_back("dt: larger than the sample interval");
            } else {
                const double m = interval / dt;
                if (std::abs(m - std::round(m)) > 1e-9 * std::max(1.0, m)) {
                    out.push_back("dt: sample interval is not an integer number of steps");
                }
            }
        }
        return out;
    }

    void validate() const {
        const auto p = problems();
        if (p.empty()) return;
        std::string msg = "invalid time grid:";
        for (const auto& s : p) msg += " [" + s + "]";
        throw ConfigError(msg);
    }

    int steps_per_sample() const {
        validate();
        return static_cast<int>(std::llround(sample_interval() / dt));
    }

    std::vector<double> times() const {
        std::vector<double> t(static_cast<std::size_t>(n_samples) + 1);
        for (int k = 0; k <= n_samples; ++k) t[static_cast<std::size_t>(k)] = time(k);
        return t;
    }
};

// ------------------------------------------------------------------- RNG

/// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Per-trajectory stream key: mix64(mix64(master) ^ mix64(index)).
inline std::uint64_t stream_key(std::uint64_t master_seed, std::uint64_t index) noexcept {
    return mix64(mix64(master_seed) ^ mix64(index ^ 0xD1B54A32D192ED03ULL));
}

/// Counter-based generator: draw k returns mix64(key + k * 0x9E3779B97F4A7C15).
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

    std::uint64_t next_u64() noexcept { return mix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

    /// Uniform in the open interval (0, 1).
    double uniform() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_{0};
};

// --------------------------------------------------------------- results

struct JumpRecord {
    double time{0.0};
    int channel{0};
};

struct TrajectoryResult {
    std::vector<double> times;
    std::vector<StateVector> states;      // normalized at sample times
    std::vector<double> weights;          // squared norm before normalization
    std::vector<int> jumps_before;        // jumps with time <= times[k]
    std::vector<JumpRecord> jumps;
    std::uint64_t seed{0};
};

// ---------------------------------------------------------- RK4 building

/// T(h) psi using four matrix-vector products (Horner form of the RK4 polynomial).
inline StateVector rk4_apply(const ComplexMatrix& gen, const StateVector& psi, double h) {
    StateVector v = psi + (h / 4.0) * (gen * psi);
    v = psi + (h / 3.0) * (gen * v);
    v = psi + (h / 2.0) * (gen * v);
    return psi + h * (gen * v);
}

inline ComplexMatrix rk4_step_matrix(const ComplexMatrix& gen, double h) {
    const Index n = gen.rows();
    const ComplexMatrix id = ComplexMatrix::Identity(n, n);
    const ComplexMatrix hg = h * gen;
    ComplexMatrix t = id + hg / 4.0;
    t = id + (hg * t) / 3.0;
    t = id + (hg * t) / 2.0;
    return id + hg * t;
}

inline ComplexMatrix matrix_power(const ComplexMatrix& m, int k) {
    ComplexMatrix result = ComplexMatrix::Identity(m.rows(), m.cols());
    ComplexMatrix base = m;
    while (k > 0) {
        if (k & 1) result = result * base;
        k >>= 1;
        if (k > 0) base = base * base;
    }
    return result;
}

inline ComplexMatrix effective_hamiltonian(const ComplexMatrix& H, const std::vector<ComplexMatrix>& collapse) {
    ComplexMatrix heff = H;
    for (const auto& L : collapse) heff -= cplx{0.0, 0.5} * (L.adjoint() * L);
    return heff;
}

inline void check_unit_norm(const StateVector& psi, const char* who) {
    if (std::abs(psi.norm() - 1.0) > 1e-8) {
        throw ContractError(std::string(who) + ": initial state must have unit norm");
    }
}

/// Precomputed RK4 propagator for psi' = -i H_eff psi with optional jumps.
class TrajectoryPropagator {
public:
    TrajectoryPropagator(const ComplexMatrix& H, std::vector<ComplexMatrix> collapse, const TimeGrid& grid)
        : collapse_(std::move(collapse)), grid_(grid) {
        if (H.rows() != H.cols()) throw SizeError("TrajectoryPropagator: H not square");
        for (const auto& L : collapse_) {
            if (L.rows() != H.rows() || L.cols() != H.cols()) throw SizeError("TrajectoryPropagator: collapse shape");
        }
        steps_ = grid_.steps_per_sample();
        gen_ = cplx{0.0, -1.0} * effective_hamiltonian(H, collapse_);
        step_ = rk4_step_matrix(gen_, grid_.dt);
        stride_ = matrix_power(step_, steps_);
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    Index dim() const noexcept { return gen_.rows(); }
    bool has_jumps() const noexcept { return !collapse_.empty(); }

    /// Deterministic evolution without jumps (the unnormalized no-jump branch).
    TrajectoryResult run_no_jump(const StateVector& psi0) const {
        check(psi0, "run_no_jump");
        TrajectoryResult out = start(psi0, 0);
        StateVector psi = psi0;
        double survival = 1.0;
        // renormalize every interval so long lossy runs cannot underflow
        for (int k = 1; k <= grid_.n_samples; ++k) {
            psi = stride_ * psi;
            const double w = psi.squaredNorm();
            if (!(w > 0.0) || !std::isfinite(w)) throw IntegratorError("run_no_jump: state norm vanished");
            psi /= std::sqrt(w);
            survival *= w;
            out.states.push_back(psi);
            out.weights.push_back(survival);
            out.jumps_before.push_back(0);
        }
        return out;
    }

    /// Waiting-time quantum-jump trajectory.
    TrajectoryResult run(const StateVector& psi0, std::uint64_t seed) const {
        if (collapse_.empty()) {
            TrajectoryResult r = run_no_jump(psi0);
            r.seed = seed;
            return r;
        }
        check(psi0, "mcwf_trajectory");
        CounterRng rng(seed);
        TrajectoryResult out = start(psi0, seed);
        StateVector psi = psi0;
        double threshold = rng.uniform();
        for (int k = 1; k <= grid_.n_samples; ++k) {
            const double t0 = grid_.time(k - 1);
            StateVector cand = stride_ * psi;
            if (cand.squaredNorm() > threshold) {
                psi = std::move(cand);
            } else {
                for (int s = 0; s < steps_; ++s) {
                    advance(psi, grid_.dt, t0 + s * grid_.dt, &step_, threshold, rng, out);
                }
            }
            record(out, psi, k);
        }
        return out;
    }

private:
    void check(const StateVector& psi0, const char* who) const {
        if (psi0.size() != dim()) throw SizeError(std::string(who) + ": state dimension mismatch");
        check_unit_norm(psi0, who);
    }

    TrajectoryResult start(const StateVector& psi0, std::uint64_t seed) const {
        TrajectoryResult out;
        out.seed = seed;
        out.times = grid_.times();
        out.states.reserve(out.times.size());
        out.states.push_back(psi0 / psi0.norm());
        out.weights.push_back(psi0.squaredNorm());
        out.jumps_before.push_back(0);
        return out;
    }

    void record(TrajectoryResult& out, const StateVector& psi, int) const {
        const double w = psi.squaredNorm();
        out.states.push_back(psi / std::sqrt(w));
        out.weights.push_back(w);
        out.jumps_before.push_back(static_cast<int>(out.jumps.size()));
    }

    // Advance psi by h from time t; resolves any threshold crossings inside.
    void advance(StateVector& psi, double h, double t, const ComplexMatrix* full_step, double& threshold,
                 CounterRng& rng, TrajectoryResult& out) const {
        double done = 0.0;
        bool first = true;
        for (;;) {
            const double rem = h - done;
            if (rem <= 0.0) return;
            StateVector next = (first && full_step) ? StateVector((*full_step) * psi) : rk4_apply(gen_, psi, rem);
            first = false;
            if (next.squaredNorm() > threshold) {
                psi = std::move(next);
                return;
            }
            double lo = 0.0, hi = rem;
            while (hi - lo > 1e-10) {
                const double mid = 0.5 * (lo + hi);
                if (rk4_apply(gen_, psi, mid).squaredNorm() > threshold) lo = mid;
                else hi = mid;
            }
            StateVector at = rk4_apply(gen_, psi, hi);
            if (at.squaredNorm() < 1e-14) {
                throw IntegratorError("mcwf_trajectory: norm underflow before jump resolution");
            }
            std::vector<double> w(collapse_.size());
            std::vector<StateVector> images(collapse_.size());
            double total = 0.0;
            for (std::size_t c = 0; c < collapse_.size(); ++c) {
                images[c] = collapse_[c] * at;
                w[c] = images[c].squaredNorm();
                total += w[c];
            }
            if (!(total > 0.0)) throw IntegratorError("mcwf_trajectory: jump requested with zero jump rate");
            const double u = rng.uniform() * total;
            std::size_t chosen = 0;
            double acc = w[0];
            while (chosen + 1 < w.size() && u > acc) acc += w[++chosen];
            psi = images[chosen] / std::sqrt(w[chosen]);
            out.jumps.push_back({t + done + hi, static_cast<int>(chosen)});
            threshold = rng.uniform();
            done += hi;
        }
    }

    std::vector<ComplexMatrix> collapse_;
    TimeGrid grid_;
    int steps_{1};
    ComplexMatrix gen_;
    ComplexMatrix step_;
    ComplexMatrix stride_;
};

inline TrajectoryResult evolve_unitary(const ComplexMatrix& H, const StateVector& psi0, const TimeGrid& grid) {
    if (hermiticity_error(H) > kHermitianTol) throw ContractError("evolve_unitary: H not Hermitian");
    return TrajectoryPropagator(H, {}, grid).run_no_jump(psi0);
}

inline TrajectoryResult mcwf_trajectory(const ComplexMatrix& H, const std::vector<ComplexMatrix>& collapse,
                                        const StateVector& psi0, const TimeGrid& grid, std::uint64_t seed) {
    return TrajectoryPropagator(H, collapse, grid).run(psi0, seed);
}

/// State conditioned on no jump up to each sample time (normalized no-jump
/// branch); `weights` holds the no-jump probability.
inline TrajectoryResult evolve_no_loss(const ComplexMatrix& H, const std::vector<ComplexMatrix>& collapse,
                                       const StateVector& psi0, const TimeGrid& grid) {
    return TrajectoryPropagator(H, collapse, grid).run_no_jump(psi0);
}

// -------------------------------------------------------------- ensemble

enum class Frame { unconditional, no_loss };

inline std::string to_string(Frame f) { return f == Frame::unconditional ? "unconditional" : "no_loss"; }

inline Frame parse_frame(std::string_view s) {
    if (s == "unconditional") return Frame::unconditional;
    if (s == "no_loss") return Frame::no_loss;
    throw ConfigError("unknown frame '" + std::string(s) + "'");
}

/// Rank-r projector sum_k |v_k><v_k| with orthonormal v_k.
struct ProjectorObservable {
    std::string name;
    std::vector<StateVector> vectors;

    double expect(const StateVector& psi) const {
        double acc = 0.0;
        for (const auto& v : vectors) acc += std::norm(v.dot(psi));
        return acc;
    }
    double expect(const DensityMatrix& rho) const {
        double acc = 0.0;
        for (const auto& v : vectors) acc += std::real(v.dot(rho * v));
        return acc;
    }
    ComplexMatrix matrix(Index dim) const {
        ComplexMatrix p = ComplexMatrix::Zero(dim, dim);
        for (const auto& v : vectors) p += v * v.adjoint();
        return p;
    }
};

struct EnsembleOptions {
    int n_traj{2000};
    std::uint64_t master_seed{1};
    int threads{1};
    bool keep_rho{false};
    int rho_batches{0};  // >0: also keep rho averaged over this many contiguous trajectory batches
    Frame frame{Frame::unconditional};
};

struct EnsembleResult {
    std::vector<double> times;
    std::map<std::string, std::vector<double>> mean;
    std::map<std::string, std::vector<double>> stderr_;
    int n_traj{0};
    std::uint64_t master_seed{0};
    Frame frame{Frame::unconditional};
    std::vector<double> contributing;       // fraction of trajectories averaged at each sample
    std::vector<DensityMatrix> rho_avg;     // empty unless keep_rho
    std::vector<std::vector<DensityMatrix>> rho_batches;  // [batch][sample]
    std::vector<std::size_t> total_jumps;   // per trajectory
};

/// Monte-Carlo wave-function ensemble. Trajectory j uses stream_key(master_seed, j);
/// trajectories run in fixed-size blocks and are reduced in index order, so the
/// result does not depend on the thread count.
inline EnsembleResult mcwf_ensemble(const ComplexMatrix& H, const std::vector<ComplexMatrix>& collapse,
                                    const StateVector& psi0, const TimeGrid& grid,
                                    const std::vector<ProjectorObservable>& observables,
                                    const EnsembleOptions& opt) {
    if (opt.n_traj < 1) throw ContractError("mcwf_ensemble: n_traj must be >= 1");
    if (opt.rho_batches < 0 || opt.rho_batches > opt.n_traj) {
        throw ContractError("mcwf_ensemble: rho_batches must lie in [0, n_traj]");
    }
    const TrajectoryPropagator prop(H, collapse, grid);
    const std::size_t ns = static_cast<std::size_t>(grid.n_samples) + 1;
    const Index D = H.rows();
    const bool want_rho = opt.keep_rho || opt.rho_batches > 0;

    EnsembleResult res;
    res.times = grid.times();
    res.n_traj = opt.n_traj;
    res.master_seed = opt.master_seed;
    res.frame = opt.frame;
    res.total_jumps.resize(static_cast<std::size_t>(opt.n_traj));

    std::vector<std::vector<double>> sum(observables.size(), std::vector<double>(ns, 0.0));
    std::vector<std::vector<double>> sum_sq = sum;
    std::vector<double> count(ns, 0.0);
    if (opt.keep_rho) res.rho_avg.assign(ns, DensityMatrix::Zero(D, D));
    std::vector<std::vector<double>> batch_count;
    if (opt.rho_batches > 0) {
        res.rho_batches.assign(static_cast<std::size_t>(opt.rho_batches), std::vector<DensityMatrix>(ns, DensityMatrix::Zero(D, D)));
        batch_count.assign(static_cast<std::size_t>(opt.rho_batches), std::vector<double>(ns, 0.0));
    }

    // block size bounded by the memory kept per trajectory
    const double per_traj = static_cast<double>(ns) * static_cast<double>(want_rho ? D : 1) +
                            static_cast<double>(ns * observables.size());
    const int block = static_cast<int>(std::clamp(std::floor(3.0e7 / std::max(per_traj, 1.0)), 1.0, 64.0));

    struct Slot {
        std::vector<std::vector<double>> values;  // [obs][sample]
        std::vector<int> jumps_before;
        std::vector<StateVector> states;
        std::size_t n_jumps{0};
    };
    std::vector<Slot> slots(static_cast<std::size_t>(block));

    for (int base = 0; base < opt.n_traj; base += block) {
        const int count_here = std::min(block, opt.n_traj - base);
        parallel_for(count_here, opt.threads, [&](int i) {
            const int j = base + i;
            TrajectoryResult tr = prop.run(psi0, stream_key(opt.master_seed, static_cast<std::uint64_t>(j)));
            Slot& s = slots[static_cast<std::size_t>(i)];
            s.values.assign(observables.size(), std::vector<double>(ns));
            for (std::size_t o = 0; o < observables.size(); ++o)
                for (std::size_t k = 0; k < ns; ++k) s.values[o][k] = observables[o].expect(tr.states[k]);
            s.jumps_before = std::move(tr.jumps_before);
            s.n_jumps = tr.jumps.size();
            if (want_rho) s.states = std::move(tr.states);
            else s.states.clear();
        });
        for (int i = 0; i < count_here; ++i) {
            const int j = base + i;
            const Slot& s = slots[static_cast<std::size_t>(i)];
            res.total_jumps[static_cast<std::size_t>(j)] = s.n_jumps;
            const std::size_t batch =
                opt.rho_batches > 0 ? static_cast<std::size_t>(static_cast<long long>(j) * opt.rho_batches / opt.n_traj) : 0;
            for (std::size_t k = 0; k < ns; ++k) {
                if (opt.frame == Frame::no_loss && s.jumps_before[k] != 0) continue;
                count[k] += 1.0;
                for (std::size_t o = 0; o < observables.size(); ++o) {
                    const double v = s.values[o][k];
                    sum[o][k] += v;
                    sum_sq[o][k] += v * v;
                }
                if (want_rho) {
                    const DensityMatrix pure = s.states[k] * s.states[k].adjoint();
                    if (opt.keep_rho) res.rho_avg[k] += pure;
                    if (opt.rho_batches > 0) {
                        res.rho_batches[batch][k] += pure;
                        batch_count[batch][k] += 1.0;
                    }
                }
            }
        }
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    res.contributing.resize(ns);
    for (std::size_t o = 0; o < observables.size(); ++o) {
        auto& m = res.mean[observables[o].name];
        auto& e = res.stderr_[observables[o].name];
        m.assign(ns, nan);
        e.assign(ns, nan);
        for (std::size_t k = 0; k < ns; ++k) {
            const double n = count[k];
            if (n < 1.0) continue;
            const double mu = sum[o][k] / n;
            m[k] = mu;
            if (n < 2.0) {
                e[k] = 0.0;
            } else {
                const double var = std::max(0.0, (sum_sq[o][k] - n * mu * mu) / (n - 1.0));
                e[k] = std::sqrt(var / n);
            }
        }
    }
    for (std::size_t k = 0; k < ns; ++k) {
        res.contributing[k] = count[k] / opt.n_traj;
        if (opt.keep_rho) {
            if (count[k] > 0.0) res.rho_avg[k] /= count[k];
            else res.rho_avg[k].setConstant(cplx{nan, 0.0});
        }
        for (std::size_t b = 0; b < res.rho_batches.size(); ++b) {
            if (batch_count[b][k] > 0.0) res.rho_batches[b][k] /= batch_count[b][k];
            else res.rho_batches[b][k].setConstant(cplx{nan, 0.0});
        }
    }
    return res;
}

// -------------------------------------------------------------- Lindblad

inline void check_density_matrix(const DensityMatrix& rho, const char* who) {
    if (rho.rows() != rho.cols()) throw SizeError(std::string(who) + ": density matrix not square");
    if (hermiticity_error(rho) > kHermitianTol) throw ContractError(std::string(who) + ": rho not Hermitian");
    if (std::abs(rho.trace().real() - 1.0) > 1e-8) throw ContractError(std::string(who) + ": trace != 1");
    const auto ev = hermitian_eigenvalues(rho);
    if (!ev.empty() && ev.front() < -1e-10) throw ContractError(std::string(who) + ": rho not positive semidefinite");
}

/// Dimension up to which the Liouville-space step matrix is formed explicitly.
inline constexpr Index kLiouvilleDenseLimit = 20;

/// d rho/dt = -i[H, rho] + sum_k (L_k rho L_k^dag - 1/2 {L_k^dag L_k, rho}), RK4.
inline std::vector<DensityMatrix> lindblad_evolve(const ComplexMatrix& H, const std::vector<ComplexMatrix>& collapse,
                                                  const DensityMatrix& rho0, const TimeGrid& grid) {
    if (H.rows() != H.cols() || rho0.rows() != H.rows()) throw SizeError("lindblad_evolve: dimension mismatch");
    for (const auto& L : collapse)
        if (L.rows() != H.rows() || L.cols() != H.cols()) throw SizeError("lindblad_evolve: collapse shape");
    check_density_matrix(rho0, "lindblad_evolve");
    const int m = grid.steps_per_sample();
    const Index D = H.rows();
    const ComplexMatrix heff = effective_hamiltonian(H, collapse);
    std::vector<DensityMatrix> out;
    out.reserve(static_cast<std::size_t>(grid.n_samples) + 1);
    out.push_back(rho0);

    if (D <= kLiouvilleDenseLimit) {
        // column-major vec: vec(A X B) = (B^T (x) A) vec(X)
        const ComplexMatrix id = ComplexMatrix::Identity(D, D);
        ComplexMatrix liou = cplx{0.0, -1.0} * (kron(id, heff) - kron(heff.conjugate(), id));
        for (const auto& L : collapse) liou += kron(L.conjugate(), L);
        const ComplexMatrix stride = matrix_power(rk4_step_matrix(liou, grid.dt), m);
        Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(rho0.data(), D * D);
        for (int k = 1; k <= grid.n_samples; ++k) {
            v = stride * v;
            DensityMatrix r = Eigen::Map<const ComplexMatrix>(v.data(), D, D);
            out.push_back(std::move(r));
        }
        return out;
    }

    const ComplexMatrix heff_dag = heff.adjoint();
    std::vector<ComplexMatrix> ldag;
    for (const auto& L : collapse) ldag.push_back(L.adjoint());
    auto rhs = [&](const DensityMatrix& r) {
        DensityMatrix d = cplx{0.0, -1.0} * (heff * r - r * heff_dag);
        for (std::size_t c = 0; c < collapse.size(); ++c) d += collapse[c] * r * ldag[c];
        return d;
    };
    DensityMatrix rho = rho0;
    const double h = grid.dt;
    for (int k = 1; k <= grid.n_samples; ++k) {
        for (int s = 0; s < m; ++s) {
            const DensityMatrix k1 = rhs(rho);
            const DensityMatrix k2 = rhs(rho + 0.5 * h * k1);
            const DensityMatrix k3 = rhs(rho + 0.5 * h * k2);
            const DensityMatrix k4 = rhs(rho + h * k3);
            rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out.push_back(rho);
    }
    return out;
}

struct ConditionedEvolution {
    std::vector<DensityMatrix> rho;  // normalized states on the sector, at sample times
    std::vector<double> weight;      // tr(P_K rho(t)) of the unconditioned evolution
    std::vector<Index> indices;      // basis indices of the sector
};

/// Block of the Lindblad evolution on the sector of total excitation `sector`.
/// Jumps only leave the sector, so the block obeys the closed equation
/// rho' = -i (H_eff rho - rho H_eff^dag); it is renormalized after every sample
/// interval, which keeps tiny survival weights from underflowing.
inline ConditionedEvolution lindblad_sector_evolve(const ComplexMatrix& H, const std::vector<ComplexMatrix>& collapse,
                                                   const DensityMatrix& rho0, const TimeGrid& grid,
                                                   const std::vector<int>& excitation, int sector) {
    if (H.rows() != H.cols() || rho0.rows() != H.rows()) throw SizeError("lindblad_sector_evolve: dimension mismatch");
    if (static_cast<Index>(excitation.size()) != H.rows()) throw SizeError("lindblad_sector_evolve: table mismatch");
    check_density_matrix(rho0, "lindblad_sector_evolve");
    ConditionedEvolution out;
    for (Index i = 0; i < H.rows(); ++i)
        if (excitation[static_cast<std::size_t>(i)] == sector) out.indices.push_back(i);
    const Index d = static_cast<Index>(out.indices.size());
    if (d == 0) throw ContractError("lindblad_sector_evolve: empty sector");
    const ComplexMatrix heff_full = effective_hamiltonian(H, collapse);
    ComplexMatrix heff(d, d);
    DensityMatrix rho(d, d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) {
            heff(i, j) = heff_full(out.indices[static_cast<std::size_t>(i)], out.indices[static_cast<std::size_t>(j)]);
            rho(i, j) = rho0(out.indices[static_cast<std::size_t>(i)], out.indices[static_cast<std::size_t>(j)]);
        }
    double w = rho.trace().real();
    if (!(w > 1e-300)) throw ContractError("lindblad_sector_evolve: initial state has no weight in the sector");
    rho /= w;
    const int m = grid.steps_per_sample();
    out.rho.push_back(rho);
    out.weight.push_back(w);

    const ComplexMatrix gen = cplx{0.0, -1.0} * heff;
    if (d <= kLiouvilleDenseLimit) {
        const ComplexMatrix id = ComplexMatrix::Identity(d, d);
        const ComplexMatrix liou = kron(id, gen) + kron(gen.conjugate(), id);
        const ComplexMatrix stride = matrix_power(rk4_step_matrix(liou, grid.dt), m);
        for (int k = 1; k <= grid.n_samples; ++k) {
            Eigen::VectorXcd v = stride * Eigen::Map<const Eigen::VectorXcd>(rho.data(), d * d);
            rho = Eigen::Map<const ComplexMatrix>(v.data(), d, d);
            const double tr = rho.trace().real();
            if (!(tr > 0.0) || !std::isfinite(tr)) throw IntegratorError("lindblad_sector_evolve: trace vanished");
            rho /= tr;
            w *= tr;
            out.rho.push_back(rho);
            out.weight.push_back(w);
        }
        return out;
    }
    const double h = grid.dt;
    const ComplexMatrix gen_dag = gen.adjoint();
    auto rhs = [&](const DensityMatrix& r) { return DensityMatrix(gen * r + r * gen_dag); };
    for (int k = 1; k <= grid.n_samples; ++k) {
        for (int s = 0; s < m; ++s) {
            const DensityMatrix k1 = rhs(rho);
            const DensityMatrix k2 = rhs(rho + 0.5 * h * k1);
            const DensityMatrix k3 = rhs(rho + 0.5 * h * k2);
            const DensityMatrix k4 = rhs(rho + h * k3);
            rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        const double tr = rho.trace().real();
        if (!(tr > 0.0) || !std::isfinite(tr)) throw IntegratorError("lindblad_sector_evolve: trace vanished");
        rho /= tr;
        w *= tr;
        out.rho.push_back(rho);
        out.weight.push_back(w);
    }
    return out;
}

/// P_K rho P_K / tr(P_K rho) for the sector of total excitation K, with its weight.
inline std::pair<DensityMatrix, double> condition_on_sector(const DensityMatrix& rho, const std::vector<int>& excitation,
                                                            int sector) {
    if (static_cast<Index>(excitation.size()) != rho.rows()) throw SizeError("condition_on_sector: table mismatch");
    DensityMatrix out = rho;
    for (Index i = 0; i < rho.rows(); ++i)
        for (Index j = 0; j < rho.cols(); ++j)
            if (excitation[static_cast<std::size_t>(i)] != sector || excitation[static_cast<std::size_t>(j)] != sector)
                out(i, j) = 0.0;
    const double w = out.trace().real();
    if (w > 0.0) out /= w;
    return {out, w};
}

}  // namespace jch
