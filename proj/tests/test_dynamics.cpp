#include "ramsey/dynamics.hpp"
#include "ramsey/effective.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "test_support.hpp"

using namespace ramsey;
using ramsey::testing::random_density_matrix;
using ramsey::testing::random_hermitian;

namespace {

SystemParams params(double g, double eps, double kappa, double gamma, Picture pic, int n_max = 15) {
    SystemParams p;
    p.g = g;
    p.eps = eps;
    p.kappa = kappa;
    p.gamma = gamma;
    p.picture = pic;
    p.cutoff = FockCutoff(n_max);
    return p;
}

double fidelity(const ComplexMatrix& rho, const ComplexVector& psi) {
    return (psi.adjoint() * rho * psi)(0, 0).real();
}

}  // namespace

TEST(SystemParamsValidation, RejectsBadRates) {
    EXPECT_THROW(params(-1, 0, 1, 0, Picture::RotatingLab).validate(), std::invalid_argument);
    EXPECT_THROW(params(1, 1, 0, 0, Picture::Displaced).validate(), std::invalid_argument);
    EXPECT_THROW(params(1, 0, 0, 0, Picture::EffectiveAtom).validate(), std::invalid_argument);
    EXPECT_NO_THROW(params(1, 0, 0, 0, Picture::Displaced).validate());  // no drive, alpha = 0
    EXPECT_NO_THROW(params(1, 1, 0, 0, Picture::RotatingLab).validate());
}

TEST(BuildGenerator, HamiltoniansAreHermitianAndShaped) {
    for (Picture pic : {Picture::RotatingLab, Picture::Displaced, Picture::EffectiveAtom}) {
        const auto gen = build_generator(params(0.3, 0.7, 1.0, 0.1, pic, 6));
        EXPECT_LT((gen.hamiltonian() - gen.hamiltonian().adjoint()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_EQ(gen.dim(), pic == Picture::EffectiveAtom ? 2 : 14);
    }
}

TEST(BuildGenerator, EffectiveAtomTerms) {
    const auto p = params(0.2, 0.5, 1.0, 0.05, Picture::EffectiveAtom);
    const auto gen = build_generator(p);
    // H = -i (eps g / kappa)(sigma+ - sigma-)
    EXPECT_NEAR(std::abs(gen.hamiltonian()(0, 1) - Complex(0, -0.1)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(gen.hamiltonian()(1, 0) - Complex(0, 0.1)), 0.0, 1e-15);
    ASSERT_EQ(gen.collapse_terms().size(), 1u);
    EXPECT_NEAR(gen.collapse_terms()[0].rate, 0.04 + 0.05, 1e-15);
}

TEST(BuildGenerator, DrivenCavityRelaxesToMinusIEpsOverKappa) {
    const auto p = params(0.0, 1.0, 1.0, 0.0, Picture::RotatingLab);
    const auto gen = build_generator(p);
    const auto traj = evolve(gen, DensityMatrix::excited_vacuum(p.cutoff), 25.0, 1e-10);
    const ComplexMatrix a = tensor(identity(2), fock_lowering(p.cutoff));
    const Complex mean_a = expectation(traj.knots().back().rho, a);
    EXPECT_LT(std::abs(mean_a - Complex(0.0, -1.0)), 1e-6);
}

TEST(BuildGenerator, VacuumRabiOscillation) {
    const auto p = params(1.0, 0.0, 0.0, 0.0, Picture::RotatingLab, 4);
    const auto gen = build_generator(p);
    const auto traj = evolve(gen, DensityMatrix::excited_vacuum(p.cutoff), 3.0, 1e-10);
    const ComplexMatrix proj_e = tensor(qubit_operators().sigma_plus * qubit_operators().sigma_minus,
                                        identity(p.cutoff.dim()));
    for (double t : {0.3, 1.1, 2.0, 2.9}) {
        const double pe = expectation(traj.interpolate(t), proj_e).real();
        EXPECT_NEAR(pe, std::pow(std::cos(t), 2), 1e-7) << "t=" << t;
    }
}

TEST(BuildGenerator, DisplacedMatchesRotatingFrame) {
    const auto lab = params(0.1, 0.5, 1.0, 0.0, Picture::RotatingLab);
    const auto disp = lab.with_picture(Picture::Displaced);
    const Complex alpha = disp.alpha();
    const ComplexMatrix d = tensor(identity(2), displacement(alpha, lab.cutoff));
    const DensityMatrix rho_disp = DensityMatrix::excited_vacuum(lab.cutoff);
    const DensityMatrix rho_lab =
        DensityMatrix::composite(d * rho_disp.matrix() * d.adjoint(), lab.cutoff);

    const double t = 5.0;
    const auto tl = evolve(build_generator(lab), rho_lab, t, 1e-11);
    const auto td = evolve(build_generator(disp), rho_disp, t, 1e-11);
    const ComplexMatrix back = d * td.knots().back().rho * d.adjoint();
    EXPECT_LT((back - tl.knots().back().rho).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ApplyGenerator, PhotonDecayWithFactorTwoConvention) {
    const FockCutoff c(3);
    const auto q = qubit_operators();
    const ComplexMatrix a = tensor(identity(2), fock_lowering(c));
    LindbladGenerator gen(ComplexMatrix::Zero(8, 8), {CollapseTerm{1.0, a}}, c);
    const ComplexVector g1 = basis_state(1, 1, c);
    const ComplexVector g0 = basis_state(1, 0, c);
    const ComplexMatrix rho = g1 * g1.adjoint();
    const ComplexMatrix expected = 2.0 * g0 * g0.adjoint() - 2.0 * rho;
    EXPECT_LT((apply_generator(gen, rho) - expected).cwiseAbs().maxCoeff(), 1e-15);
    (void)q;
}

TEST(ApplyGenerator, TracelessAndHermitianOnRandomInputs) {
    std::mt19937_64 rng(42);
    for (Picture pic : {Picture::RotatingLab, Picture::Displaced, Picture::EffectiveAtom}) {
        const auto gen = build_generator(params(0.7, 1.3, 1.0, 0.4, pic, 5));
        for (int trial = 0; trial < 10; ++trial) {
            const ComplexMatrix rho = random_density_matrix(gen.dim(), rng);
            const ComplexMatrix d = apply_generator(gen, rho);
            EXPECT_LT(std::abs(d.trace()), 1e-12);
            const ComplexMatrix h = random_hermitian(gen.dim(), rng);
            const ComplexMatrix dh = apply_generator(gen, h);
            EXPECT_LT((dh - dh.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
}

TEST(ApplyGenerator, HermitianFastPathMatchesGeneralPath) {
    std::mt19937_64 rng(9);
    const auto gen = build_generator(params(0.5, 0.8, 1.0, 0.2, Picture::Displaced, 6));
    const ComplexMatrix rho = random_density_matrix(gen.dim(), rng);
    ComplexMatrix fast(gen.dim(), gen.dim()), scratch(gen.dim(), gen.dim());
    gen.apply(rho, fast, scratch, true);
    EXPECT_LT((fast - apply_generator(gen, rho)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(ApplyGenerator, DimensionMismatch) {
    const auto gen = build_generator(params(0.5, 0.8, 1.0, 0.2, Picture::Displaced, 3));
    EXPECT_THROW(apply_generator(gen, ComplexMatrix(identity(4))), std::invalid_argument);
}

TEST(Expectation, Examples) {
    const auto q = qubit_operators();
    ComplexMatrix e = ComplexMatrix::Zero(2, 2);
    e(0, 0) = 1.0;
    EXPECT_EQ(expectation(DensityMatrix::atom(e), q.sigma_z), Complex(1.0));
    EXPECT_EQ(expectation(DensityMatrix::atom(0.5 * identity(2)), q.sigma_plus), Complex(0.0));
    EXPECT_THROW(expectation(e, identity(3)), std::invalid_argument);
}

TEST(Evolve, JaynesCummingsQuarterPeriod) {
    const auto p = params(1.0, 0.0, 0.0, 0.0, Picture::RotatingLab, 5);
    const double t = std::numbers::pi / 2.0;
    const auto traj = evolve(build_generator(p), DensityMatrix::excited_vacuum(p.cutoff), t, 1e-11);
    const ComplexVector target = -kI * basis_state(1, 1, p.cutoff);
    EXPECT_GT(fidelity(traj.knots().back().rho, target), 1.0 - 1e-8);

    // Half-inversion point: equal populations, <sigma_z (x) I> = 0.
    const ComplexMatrix szi = tensor(qubit_operators().sigma_z, identity(p.cutoff.dim()));
    EXPECT_NEAR(expectation(traj.interpolate(std::numbers::pi / 4.0), szi).real(), 0.0, 1e-8);
}

TEST(Evolve, QubitDecay) {
    const auto p = params(0.0, 0.0, 1.0, 1.0, Picture::RotatingLab, 2);
    const double tol = 1e-9;
    const auto traj = evolve(build_generator(p), DensityMatrix::excited_vacuum(p.cutoff), 4.0, tol);
    const ComplexMatrix pe_op = tensor(qubit_operators().sigma_plus * qubit_operators().sigma_minus,
                                       identity(p.cutoff.dim()));
    for (const auto& k : traj.knots())
        EXPECT_NEAR(expectation(k.rho, pe_op).real(), std::exp(-2.0 * k.t), 10 * tol);
}

TEST(Evolve, EffectiveModelRabiRotation) {
    const auto p = params(1e-3, 1.0, 1.0, 0.0, Picture::EffectiveAtom);
    ComplexMatrix e = ComplexMatrix::Zero(2, 2);
    e(0, 0) = 1.0;
    const double t_end = std::numbers::pi / p.g;
    const auto traj = evolve(build_generator(p), DensityMatrix::atom(e), t_end, 1e-9);
    for (int i = 0; i <= 50; ++i) {
        const double t = t_end * i / 50;
        const double z = sigma_z_of(traj.interpolate(t));
        EXPECT_NEAR(z, damped_rabi_oracle(p, t).sigma_z, 1e-7);
        // The g^2/kappa damping pulls z off the bare cosine by up to 4.7e-3 at gt = pi.
        EXPECT_NEAR(z, std::cos(2 * p.eps * p.g * t / p.kappa), 5e-3);
    }
}

TEST(Evolve, ValidatesArguments) {
    const auto p = params(0.5, 0.5, 1.0, 0.0, Picture::Displaced, 3);
    const auto gen = build_generator(p);
    const auto rho0 = DensityMatrix::excited_vacuum(p.cutoff);
    EXPECT_THROW(evolve(gen, rho0, 0.0, 1e-9), std::invalid_argument);
    EXPECT_THROW(evolve(gen, rho0, 1.0, 1e-3), std::invalid_argument);
    EXPECT_THROW(evolve(gen, rho0, 1.0, 1e-13), std::invalid_argument);
    EXPECT_THROW(evolve(gen, DensityMatrix::excited_vacuum(FockCutoff(4)), 1.0, 1e-9),
                 std::invalid_argument);
}

TEST(Evolve, StatesStayPhysicalAndTimesIncrease) {
    const auto p = params(0.8, 1.2, 1.0, 0.3, Picture::Displaced, 10);
    const auto traj = evolve(build_generator(p), DensityMatrix::excited_vacuum(p.cutoff), 10.0, 1e-9);
    ASSERT_GT(traj.size(), 10u);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        EXPECT_NO_THROW((void)traj.state(i));
        if (i > 0) {
            EXPECT_GT(traj.knot(i).t, traj.knot(i - 1).t);
        }
    }
}

TEST(Evolve, AtomRecordEqualsReducedFullRecord) {
    const auto p = params(0.4, 0.9, 1.0, 0.0, Picture::Displaced, 8);
    const auto gen = build_generator(p);
    const auto rho0 = DensityMatrix::excited_vacuum(p.cutoff);
    const auto full = evolve(gen, rho0, 6.0, 1e-9);
    EvolveOptions opts;
    opts.record = Record::Atom;
    const auto atom = evolve(gen, rho0, 6.0, 1e-9, opts);
    const auto reduced = full.reduced();
    ASSERT_EQ(atom.size(), reduced.size());
    for (double t : {0.37, 2.5, 5.99})
        EXPECT_LT((atom.interpolate(t) - reduced.interpolate(t)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Evolve, StopPredicateEndsEarly) {
    const auto p = params(1.0, 0.0, 0.0, 0.0, Picture::RotatingLab, 3);
    EvolveOptions opts;
    opts.stop = [](const StepSegment& s) { return s.t1 > 1.0; };
    const auto traj = evolve(build_generator(p), DensityMatrix::excited_vacuum(p.cutoff), 100.0, 1e-9, opts);
    EXPECT_LT(traj.t_end(), 2.0);
}

TEST(Evolve, ErrorShrinksWithToleranceAtTheMethodOrder) {
    // Vacuum Rabi oscillation against cos^2(gt); DP5 global error scales
    // close to linearly in the per-step tolerance.
    const auto p = params(1.0, 0.0, 0.0, 0.0, Picture::RotatingLab, 3);
    const ComplexMatrix pe_op = tensor(qubit_operators().sigma_plus * qubit_operators().sigma_minus,
                                       identity(p.cutoff.dim()));
    auto max_err = [&](double tol) {
        const auto traj = evolve(build_generator(p), DensityMatrix::excited_vacuum(p.cutoff), 20.0, tol);
        double e = 0.0;
        for (const auto& k : traj.knots())
            e = std::max(e, std::abs(expectation(k.rho, pe_op).real() - std::pow(std::cos(k.t), 2)));
        return e;
    };
    const double e5 = max_err(1e-5), e7 = max_err(1e-7), e9 = max_err(1e-9);
    EXPECT_GT(e5 / e7, 10.0);
    EXPECT_GT(e7 / e9, 10.0);
    EXPECT_LT(e9, 1e-7);
}

TEST(Trajectory, RejectsNonIncreasingTimes) {
    Trajectory t(std::nullopt);
    t.push(0.0, identity(2), identity(2));
    EXPECT_THROW(t.push(0.0, identity(2), identity(2)), std::invalid_argument);
}

TEST(ExpmBackend, AgreesWithRungeKutta) {
    for (auto p : {params(0.1, 0.5, 1.0, 0.0, Picture::Displaced, 6),
                   params(1.0, 0.3, 1.0, 0.2, Picture::Displaced, 6),
                   params(0.5, 1.0, 1.0, 0.0, Picture::RotatingLab, 8)}) {
        const auto gen = build_generator(p);
        const auto rho0 = DensityMatrix::excited_vacuum(p.cutoff);
        const ComplexMatrix rk = evolve(gen, rho0, 5.0, 1e-11).knots().back().rho;
        const ComplexMatrix ex = propagate_expm(gen, rho0.matrix(), 5.0, 10);
        EXPECT_LT((rk - ex).cwiseAbs().maxCoeff(), 1e-7);
    }
}

TEST(ExpmBackend, DenseOutputWithinTolerance) {
    const auto p = params(0.6, 0.6, 1.0, 0.0, Picture::Displaced, 6);
    const auto gen = build_generator(p);
    const auto rho0 = DensityMatrix::excited_vacuum(p.cutoff);
    const auto traj = evolve(gen, rho0, 4.0, 1e-10);
    for (double t : {0.123, 1.777, 3.333}) {
        const ComplexMatrix ex = propagate_expm(gen, rho0.matrix(), t, 4);
        EXPECT_LT((traj.interpolate(t) - ex).cwiseAbs().maxCoeff(), 1e-8) << "t=" << t;
    }
}
