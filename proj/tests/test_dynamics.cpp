#include "jch/dynamics.hpp"
#include "jch/model.hpp"
#include "jch/observables.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace jch;

namespace {

const std::vector<PolaritonLabel> k20{PolaritonLabel::minus(2), PolaritonLabel::ground()};

struct Lossy {
    ComplexMatrix H;
    std::vector<ComplexMatrix> L;
    StateVector psi0;
    ComplexMatrix a;
};

// one cavity mode with up to n0 photons, H = 0, starting in |n0>
Lossy single_mode(int n0, double gamma) {
    Lossy s;
    const Index d = n0 + 1;
    s.a = ComplexMatrix::Zero(d, d);
    for (Index k = 1; k < d; ++k) s.a(k - 1, k) = std::sqrt(static_cast<double>(k));
    s.H = ComplexMatrix::Zero(d, d);
    s.L = {std::sqrt(gamma) * s.a};
    s.psi0 = StateVector::Zero(d);
    s.psi0(n0) = 1.0;
    return s;
}

ProjectorObservable basis_projector(const std::string& name, Index d, Index k) {
    StateVector v = StateVector::Zero(d);
    v(k) = 1.0;
    return {name, {v}};
}

OpenSystem fig2_system(ModelVariant v = ModelVariant::full, double gamma = 0.05) {
    return build_system(ModelParams::uniform(2, 0.0, 0.03, gamma, 2), v, 2);
}

}  // namespace

TEST(Grid, Validation) {
    TimeGrid g{0.0, 10.0, 100, 0.005, 0.01};
    EXPECT_EQ(g.steps_per_sample(), 20);
    EXPECT_DOUBLE_EQ(g.time(100), 10.0);
    g.dt = 0.02;
    EXPECT_THROW(g.validate(), ConfigError);
    g.dt = 0.003;  // 0.1 / 0.003 is not an integer
    EXPECT_THROW(g.steps_per_sample(), ConfigError);
    TimeGrid bad{1.0, 1.0, 10, 0.005, 0.01};
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Rng, CounterBasedStreams) {
    CounterRng a(stream_key(7, 0)), b(stream_key(7, 0)), c(stream_key(7, 1));
    for (int i = 0; i < 100; ++i) {
        const double x = a.uniform();
        EXPECT_EQ(x, b.uniform());
        EXPECT_GT(x, 0.0);
        EXPECT_LT(x, 1.0);
    }
    int equal = 0;
    CounterRng d(stream_key(7, 0));
    for (int i = 0; i < 100; ++i) equal += d.next_u64() == c.next_u64();
    EXPECT_EQ(equal, 0);
    EXPECT_NE(stream_key(1, 2), stream_key(2, 1));
}

TEST(Rk4, StepMatrixMatchesHornerApply) {
    std::mt19937_64 rng(11);
    const ComplexMatrix G = testutil::random_matrix(5, 5, rng) * 0.3;
    const StateVector v = testutil::random_matrix(5, 1, rng).col(0);
    EXPECT_LT((rk4_step_matrix(G, 0.01) * v - rk4_apply(G, v, 0.01)).norm(), 1e-14);
    EXPECT_LT(max_abs_diff(matrix_power(rk4_step_matrix(G, 0.01), 7),
                           rk4_step_matrix(G, 0.01) * matrix_power(rk4_step_matrix(G, 0.01), 6)), 1e-13);
}

TEST(Unitary, ZeroHamiltonianKeepsStateConstant) {
    std::mt19937_64 rng(12);
    StateVector psi = testutil::random_matrix(4, 1, rng).col(0);
    psi.normalize();
    const auto tr = evolve_unitary(ComplexMatrix::Zero(4, 4), psi, {0.0, 5.0, 10, 0.005, 0.01});
    for (const auto& s : tr.states) EXPECT_LT((s - psi).norm(), 1e-15);
}

TEST(Unitary, RabiOscillation) {
    const ModelParams p = ModelParams::uniform(1, 0.0, 0.0, 0.0, 1);
    StateVector psi0 = StateVector::Zero(bare_site_dim(1));
    psi0(bare_index(0, 1, 1)) = 1.0;
    const TimeGrid grid{0.0, 30.0, 300, 0.005, 0.01};
    const auto tr = evolve_unitary(site_hamiltonian(p), psi0, grid);
    for (int k = 0; k <= grid.n_samples; ++k) {
        const double pop = std::norm(tr.states[static_cast<std::size_t>(k)](bare_index(0, 1, 1)));
        EXPECT_NEAR(pop, std::pow(std::cos(grid.time(k)), 2), 1e-8);
    }
}

TEST(Unitary, NormAndEnergyConserved) {
    const OpenSystem sys = fig2_system(ModelVariant::full, 0.0);
    const StateVector psi0 = sys.product_state(k20);
    const TimeGrid grid{0.0, 300.0, 300, 0.005, 0.01};
    const auto tr = evolve_unitary(sys.hamiltonian, psi0, grid);
    const double e0 = std::real(psi0.dot(sys.hamiltonian * psi0));
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
        EXPECT_NEAR(tr.weights[k], 1.0, 1e-8);
        const double e = std::real(tr.states[k].dot(sys.hamiltonian * tr.states[k]));
        EXPECT_NEAR(e, e0, 1e-8 * std::abs(e0));
    }
}

TEST(Unitary, BlockadeSuppressesMottState) {
    for (auto v : {ModelVariant::full, ModelVariant::lower_branch}) {
        const OpenSystem sys = fig2_system(v, 0.0);
        const auto p11 = make_projector(ProjectorSpec::preset("P11"), sys);
        const auto tr = evolve_unitary(sys.hamiltonian, sys.product_state(k20), {0.0, 1500.0, 3000, 0.005, 0.01});
        double mx = 0.0;
        for (const auto& s : tr.states) mx = std::max(mx, population(s, p11));
        EXPECT_LE(mx, 0.01) << to_string(v);
    }
}

TEST(Unitary, RejectsBadInput) {
    ComplexMatrix nh = ComplexMatrix::Zero(2, 2);
    nh(0, 1) = 1.0;
    StateVector psi = StateVector::Zero(2);
    psi(0) = 1.0;
    EXPECT_THROW(evolve_unitary(nh, psi, {0.0, 1.0, 10, 0.005, 0.01}), ContractError);
    EXPECT_THROW(evolve_unitary(ComplexMatrix::Zero(2, 2), 2.0 * psi, {0.0, 1.0, 10, 0.005, 0.01}), ContractError);
    EXPECT_THROW(evolve_unitary(ComplexMatrix::Zero(2, 2), psi, {0.0, 1.0, 10, 0.05, 0.01}), ConfigError);
}

TEST(Trajectory, EmptyCollapseIsUnitary) {
    const OpenSystem sys = fig2_system(ModelVariant::full, 0.0);
    const StateVector psi0 = sys.product_state(k20);
    const TimeGrid grid{0.0, 100.0, 100, 0.005, 0.01};
    const auto a = evolve_unitary(sys.hamiltonian, psi0, grid);
    const auto b = mcwf_trajectory(sys.hamiltonian, {}, psi0, grid, 99);
    ASSERT_EQ(a.states.size(), b.states.size());
    for (std::size_t k = 0; k < a.states.size(); ++k) EXPECT_EQ((a.states[k] - b.states[k]).norm(), 0.0);
    EXPECT_TRUE(b.jumps.empty());
}

TEST(Trajectory, SingleModeStepFunction) {
    const auto m = single_mode(1, 0.1);
    const auto tr = mcwf_trajectory(m.H, m.L, m.psi0, {0.0, 200.0, 400, 0.005, 0.01}, stream_key(3, 0));
    ASSERT_EQ(tr.jumps.size(), 1u);
    const double tj = tr.jumps[0].time;
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        const double n = std::norm(tr.states[k](1));
        EXPECT_NEAR(n, tr.times[k] < tj ? 1.0 : 0.0, 1e-12);
        EXPECT_NEAR(tr.states[k].norm(), 1.0, 1e-8);
    }
}

TEST(Trajectory, JumpTimesIncreaseAndStatesNormalized) {
    const OpenSystem sys = fig2_system();
    const auto tr = mcwf_trajectory(sys.hamiltonian, sys.collapse, sys.product_state(k20),
                                    {0.0, 400.0, 800, 0.005, 0.01}, stream_key(5, 3));
    for (std::size_t j = 1; j < tr.jumps.size(); ++j) EXPECT_LT(tr.jumps[j - 1].time, tr.jumps[j].time);
    for (const auto& s : tr.states) EXPECT_NEAR(s.norm(), 1.0, 1e-8);
    EXPECT_LE(tr.jumps.size(), 2u);  // two excitations at most
}

TEST(Trajectory, JumpTimesAreExponential) {
    // Kolmogorov-Smirnov against 1 - exp(-gamma t) at the 1% level
    const double gamma = 0.5;
    const auto m = single_mode(1, gamma);
    const TrajectoryPropagator prop(m.H, m.L, {0.0, 60.0, 60, 0.005, 0.01});
    const int n = 5000;
    std::vector<double> t;
    for (int j = 0; j < n; ++j) {
        const auto tr = prop.run(m.psi0, stream_key(2024, static_cast<std::uint64_t>(j)));
        ASSERT_EQ(tr.jumps.size(), 1u);
        t.push_back(tr.jumps[0].time);
    }
    std::sort(t.begin(), t.end());
    double D = 0.0;
    for (int i = 0; i < n; ++i) {
        const double F = 1.0 - std::exp(-gamma * t[static_cast<std::size_t>(i)]);
        D = std::max({D, std::abs(F - static_cast<double>(i) / n), std::abs(F - static_cast<double>(i + 1) / n)});
    }
    EXPECT_LT(D, 1.628 / std::sqrt(static_cast<double>(n)));
}

TEST(Ensemble, SingleModeDecayMean) {
    const double gamma = 0.2;
    const auto m = single_mode(1, gamma);
    const TimeGrid grid{0.0, 15.0, 30, 0.005, 0.01};
    EnsembleOptions o;
    o.n_traj = 4000;
    o.master_seed = 8;
    o.keep_rho = true;
    const auto ens = mcwf_ensemble(m.H, m.L, m.psi0, grid, {basis_projector("n1", 2, 1)}, o);
    for (std::size_t k = 0; k < ens.times.size(); ++k) {
        const double expect = std::exp(-gamma * ens.times[k]);
        EXPECT_LE(std::abs(ens.mean.at("n1")[k] - expect), std::max(4.0 * ens.stderr_.at("n1")[k], 1e-12));
        EXPECT_NEAR(std::real(ens.rho_avg[k](1, 1)), ens.mean.at("n1")[k], 1e-12);
    }
}

TEST(Ensemble, OneTrajectoryHasZeroError) {
    const OpenSystem sys = fig2_system();
    const auto p11 = make_projector(ProjectorSpec::preset("P11"), sys);
    const TimeGrid grid{0.0, 200.0, 100, 0.005, 0.01};
    EnsembleOptions o;
    o.n_traj = 1;
    o.master_seed = 4;
    const auto ens = mcwf_ensemble(sys.hamiltonian, sys.collapse, sys.product_state(k20), grid, {p11}, o);
    const auto tr = mcwf_trajectory(sys.hamiltonian, sys.collapse, sys.product_state(k20), grid, stream_key(4, 0));
    for (std::size_t k = 0; k < grid.times().size(); ++k) {
        EXPECT_EQ(ens.mean.at("P11")[k], p11.expect(tr.states[k]));
        EXPECT_EQ(ens.stderr_.at("P11")[k], 0.0);
    }
}

TEST(Ensemble, DeterministicAndThreadIndependent) {
    const OpenSystem sys = fig2_system();
    const auto p11 = make_projector(ProjectorSpec::preset("P11"), sys);
    const TimeGrid grid{0.0, 300.0, 150, 0.005, 0.01};
    EnsembleOptions o;
    o.n_traj = 150;
    o.master_seed = 12345;
    o.keep_rho = true;
    o.threads = 1;
    const auto a = mcwf_ensemble(sys.hamiltonian, sys.collapse, sys.product_state(k20), grid, {p11}, o);
    o.threads = 4;
    const auto b = mcwf_ensemble(sys.hamiltonian, sys.collapse, sys.product_state(k20), grid, {p11}, o);
    EXPECT_EQ(a.mean.at("P11"), b.mean.at("P11"));
    EXPECT_EQ(a.stderr_.at("P11"), b.stderr_.at("P11"));
    EXPECT_EQ(a.total_jumps, b.total_jumps);
    for (std::size_t k = 0; k < a.rho_avg.size(); ++k) EXPECT_EQ((a.rho_avg[k] - b.rho_avg[k]).norm(), 0.0);
    o.master_seed = 12346;
    const auto c = mcwf_ensemble(sys.hamiltonian, sys.collapse, sys.product_state(k20), grid, {p11}, o);
    EXPECT_NE(a.mean.at("P11"), c.mean.at("P11"));
}

TEST(Ensemble, AveragedDensityMatrixIsPhysical) {
    const OpenSystem sys = fig2_system();
    EnsembleOptions o;
    o.n_traj = 100;
    o.keep_rho = true;
    o.rho_batches = 5;
    const auto ens = mcwf_ensemble(sys.hamiltonian, sys.collapse, sys.product_state(k20),
                                   {0.0, 400.0, 40, 0.005, 0.01}, {}, o);
    for (const auto& r : ens.rho_avg) {
        EXPECT_LT(hermiticity_error(r), 1e-12);
        EXPECT_NEAR(r.trace().real(), 1.0, 1e-8);
        EXPECT_GE(hermitian_eigenvalues(r).front(), -1e-8);
    }
    ASSERT_EQ(ens.rho_batches.size(), 5u);
    EXPECT_THROW(mcwf_ensemble(sys.hamiltonian, sys.collapse, sys.product_state(k20), {0.0, 1.0, 1, 0.005, 0.01}, {},
                               EnsembleOptions{0}),
                 ContractError);
}

TEST(Lindblad, MatchesUnitaryWithoutCollapse) {
    const OpenSystem sys = fig2_system(ModelVariant::full, 0.0);
    const StateVector psi0 = sys.product_state(k20);
    const TimeGrid grid{0.0, 200.0, 100, 0.005, 0.01};
    const auto tr = evolve_unitary(sys.hamiltonian, psi0, grid);
    const auto rho = lindblad_evolve(sys.hamiltonian, {}, psi0 * psi0.adjoint(), grid);
    for (std::size_t k = 0; k < rho.size(); ++k)
        EXPECT_LT(max_abs_diff(rho[k], tr.states[k] * tr.states[k].adjoint()), 1e-8);
}

TEST(Lindblad, SingleModeAnalyticDecay) {
    const double gamma = 0.3;
    for (int n0 : {1, 3}) {
        const auto m = single_mode(n0, gamma);
        const TimeGrid grid{0.0, 12.0, 60, 0.005, 0.01};
        const auto rho = lindblad_evolve(m.H, m.L, m.psi0 * m.psi0.adjoint(), grid);
        for (int k = 0; k <= grid.n_samples; ++k) {
            const double n = std::real((m.a.adjoint() * m.a * rho[static_cast<std::size_t>(k)]).trace());
            EXPECT_NEAR(n, n0 * std::exp(-gamma * grid.time(k)), 1e-6);
        }
    }
}

TEST(Lindblad, InvariantsAndExcitationMonotone) {
    // 36-dim uncapped space takes the stepwise branch, 13-dim capped space the Liouville one
    const ModelParams p = ModelParams::uniform(2, 0.0, 0.03, 0.05, 2);
    const OpenSystem big = build_system(p, ModelVariant::full);
    const OpenSystem small = build_system(p, ModelVariant::full, 2);
    ASSERT_GT(big.basis.dim(), kLiouvilleDenseLimit);
    ASSERT_LE(small.basis.dim(), kLiouvilleDenseLimit);
    const TimeGrid grid{0.0, 50.0, 25, 0.005, 0.01};
    const StateVector b0 = big.product_state(k20), s0 = small.product_state(k20);
    const auto rb = lindblad_evolve(big.hamiltonian, big.collapse, b0 * b0.adjoint(), grid);
    const auto rs = lindblad_evolve(small.hamiltonian, small.collapse, s0 * s0.adjoint(), grid);
    const ComplexMatrix N = small.excitation_operator();
    double prev = 1e9;
    for (std::size_t k = 0; k < rs.size(); ++k) {
        EXPECT_NEAR(rs[k].trace().real(), 1.0, 1e-8);
        EXPECT_LT(hermiticity_error(rs[k]), 1e-10);
        EXPECT_GE(hermitian_eigenvalues(0.5 * (rs[k] + rs[k].adjoint())).front(), -1e-7);
        EXPECT_LT(max_abs_diff(rs[k], small.basis.restrict(rb[k])), 1e-9);
        const double n = std::real((N * rs[k]).trace());
        EXPECT_LE(n, prev + 1e-12);
        prev = n;
    }
}

TEST(Lindblad, RejectsInvalidDensityMatrix) {
    const auto m = single_mode(1, 0.1);
    DensityMatrix bad = DensityMatrix::Zero(2, 2);
    bad(0, 0) = 2.0;
    EXPECT_THROW(lindblad_evolve(m.H, m.L, bad, {0.0, 1.0, 10, 0.005, 0.01}), ContractError);
    bad(0, 0) = 1.5;
    bad(1, 1) = -0.5;
    EXPECT_THROW(lindblad_evolve(m.H, m.L, bad, {0.0, 1.0, 10, 0.005, 0.01}), ContractError);
    EXPECT_THROW(lindblad_evolve(m.H, m.L, DensityMatrix::Identity(3, 3) / 3.0, {0.0, 1.0, 10, 0.005, 0.01}), SizeError);
}

TEST(NoLoss, ThreeRoutesAgree) {
    // conditioned Lindblad block == sector evolution == normalized no-jump state
    const OpenSystem sys = fig2_system();
    const StateVector psi0 = sys.product_state(k20);
    const TimeGrid grid{0.0, 400.0, 80, 0.005, 0.01};
    const auto rho = lindblad_evolve(sys.hamiltonian, sys.collapse, psi0 * psi0.adjoint(), grid);
    const auto sector = lindblad_sector_evolve(sys.hamiltonian, sys.collapse, psi0 * psi0.adjoint(), grid,
                                               sys.basis.excitations(), 2);
    const auto nj = evolve_no_loss(sys.hamiltonian, sys.collapse, psi0, grid);
    for (std::size_t k = 0; k < rho.size(); ++k) {
        auto [cond, w] = condition_on_sector(rho[k], sys.basis.excitations(), 2);
        const DensityMatrix pure = nj.states[k] * nj.states[k].adjoint();
        // the routes differ only by RK4 truncation error
        EXPECT_LT(max_abs_diff(cond, pure), 1e-6);
        EXPECT_NEAR(w, nj.weights[k], 1e-8);
        EXPECT_NEAR(sector.weight[k], nj.weights[k], 1e-8);
        DensityMatrix blk(sector.indices.size(), sector.indices.size());
        for (std::size_t i = 0; i < sector.indices.size(); ++i)
            for (std::size_t j = 0; j < sector.indices.size(); ++j)
                blk(static_cast<Index>(i), static_cast<Index>(j)) = pure(sector.indices[i], sector.indices[j]);
        EXPECT_LT(max_abs_diff(sector.rho[k], blk), 1e-6);
    }
}

TEST(NoLoss, MottPlateauAndUnconditionalDecay) {
    const OpenSystem sys = fig2_system(ModelVariant::lower_branch);
    const auto p11 = make_projector(ProjectorSpec::preset("P11"), sys);
    const StateVector psi0 = sys.product_state(k20);
    const TimeGrid grid{0.0, 1500.0, 1500, 0.005, 0.01};
    const auto nj = evolve_no_loss(sys.hamiltonian, sys.collapse, psi0, grid);
    std::vector<double> cond;
    for (const auto& s : nj.states) cond.push_back(population(s, p11));
    const double mx = *std::max_element(cond.begin(), cond.end());
    EXPECT_GT(mx, cond.back());
    EXPECT_GT(cond.back(), cond.front());
    EXPECT_GT(cond.back(), 0.9 * mx);
    // averaged over all records the two-excitation sector simply empties
    const auto rho = lindblad_evolve(sys.hamiltonian, sys.collapse, psi0 * psi0.adjoint(), grid);
    EXPECT_LT(population(rho.back(), p11), 1e-6);
}

TEST(Convergence, HalvingStepChangesObservablesLittle) {
    const OpenSystem sys = fig2_system();
    const StateVector psi0 = sys.product_state(k20);
    const auto p11 = make_projector(ProjectorSpec::preset("P11"), sys);
    const auto p20 = make_projector(ProjectorSpec::preset("P20"), sys);
    const auto a = lindblad_evolve(sys.hamiltonian, sys.collapse, psi0 * psi0.adjoint(), {0.0, 1500.0, 300, 0.005, 0.01});
    const auto b = lindblad_evolve(sys.hamiltonian, sys.collapse, psi0 * psi0.adjoint(), {0.0, 1500.0, 300, 0.0025, 0.01});
    double drift = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        drift = std::max(drift, std::abs(p11.expect(a[k]) - p11.expect(b[k])));
        drift = std::max(drift, std::abs(p20.expect(a[k]) - p20.expect(b[k])));
        drift = std::max(drift, std::abs(negativity(a[k], sys.basis, 1) - negativity(b[k], sys.basis, 1)));
    }
    EXPECT_LT(drift, 1e-6);
}
