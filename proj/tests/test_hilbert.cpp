#include "ramsey/hilbert.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "test_support.hpp"

using namespace ramsey;
using ramsey::testing::random_density_matrix;

TEST(FockOperators, LoweringEntries) {
    const ComplexMatrix a1 = fock_lowering(FockCutoff(1));
    EXPECT_EQ(a1.rows(), 2);
    EXPECT_EQ(a1(0, 1), Complex(1.0));

    const ComplexMatrix a4 = fock_lowering(FockCutoff(4));
    EXPECT_EQ(a4(3, 4), Complex(2.0));
    EXPECT_TRUE(a4.col(0).isZero());  // a|0> = 0
    EXPECT_TRUE(fock_raising(FockCutoff(4)).isApprox(a4.adjoint()));
}

TEST(FockOperators, NumberOperatorIsExactDiagonal) {
    const FockCutoff c(15);
    const ComplexMatrix a = fock_lowering(c);
    const ComplexMatrix n = number_operator(c);
    const ComplexMatrix ada = a.adjoint() * a;
    for (int i = 0; i < c.dim(); ++i)
        for (int j = 0; j < c.dim(); ++j) {
            EXPECT_EQ(n(i, j), Complex(i == j ? i : 0.0));
            // sqrt(n)^2 rounds to within an ulp of n
            EXPECT_NEAR(std::abs(ada(i, j) - n(i, j)), 0.0, 4e-15 * std::max(1, i));
        }
}

TEST(FockOperators, CutoffRejectsZero) {
    EXPECT_THROW(FockCutoff(0), std::invalid_argument);
}

TEST(QubitOperators, PauliAlgebra) {
    const auto q = qubit_operators();
    ComplexVector e(2);
    e << 1.0, 0.0;
    EXPECT_TRUE((q.sigma_z * e).isApprox(e));

    ComplexMatrix proj_e = ComplexMatrix::Zero(2, 2);
    proj_e(0, 0) = 1.0;
    EXPECT_TRUE((q.sigma_plus * q.sigma_minus).isApprox(proj_e));
    EXPECT_TRUE((q.sigma_plus * q.sigma_minus - q.sigma_minus * q.sigma_plus).isApprox(q.sigma_z));
}

TEST(Tensor, IdentityAndEigenvalue) {
    EXPECT_TRUE(tensor(identity(2), identity(3)).isApprox(identity(6)));
    const FockCutoff c(3);
    const ComplexMatrix sz = tensor(qubit_operators().sigma_z, identity(c.dim()));
    const ComplexVector e0 = basis_state(0, 0, c);
    EXPECT_TRUE((sz * e0).isApprox(e0));
}

TEST(Tensor, TraceFactorizesAgainstDirectProduct) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 5; ++trial) {
        ComplexMatrix a(2, 2), b(3, 3);
        for (auto* m : {&a, &b})
            for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = Complex(nd(rng), nd(rng));
        // Oracle: build the Kronecker product by explicit index arithmetic.
        ComplexMatrix k(6, 6);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int r = 0; r < 3; ++r)
                    for (int s = 0; s < 3; ++s) k(3 * i + r, 3 * j + s) = a(i, j) * b(r, s);
        const ComplexMatrix t = tensor(a, b);
        EXPECT_LT((t - k).cwiseAbs().maxCoeff(), 1e-14);
        EXPECT_LT(std::abs(t.trace() - a.trace() * b.trace()), 1e-12);
    }
}

TEST(Tensor, RejectsNonSquare) {
    EXPECT_THROW(tensor(ComplexMatrix::Zero(2, 3), identity(2)), std::invalid_argument);
}

TEST(PartialTrace, ProductState) {
    const FockCutoff c(4);
    const DensityMatrix rho = DensityMatrix::excited_vacuum(c);
    const DensityMatrix at = partial_trace_field(rho);
    EXPECT_EQ(at.space(), Space::AtomOnly);
    EXPECT_NEAR(std::abs(at.matrix()(0, 0) - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(at.matrix().cwiseAbs().sum(), 1.0, 1e-15);
}

TEST(PartialTrace, MaximallyEntangledGivesMaximallyMixed) {
    const FockCutoff c(3);
    const ComplexVector psi = (basis_state(0, 0, c) - kI * basis_state(1, 1, c)) / std::sqrt(2.0);
    const DensityMatrix at = partial_trace_field(DensityMatrix::pure(psi, c));
    EXPECT_LT((at.matrix() - 0.5 * identity(2)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_NEAR(von_neumann_entropy(at), std::numbers::ln2, 1e-14);
}

TEST(PartialTrace, ExpectationConsistency) {
    std::mt19937_64 rng(11);
    const FockCutoff c(5);
    const ComplexMatrix szi = tensor(qubit_operators().sigma_z, identity(c.dim()));
    for (int trial = 0; trial < 10; ++trial) {
        const DensityMatrix rho = DensityMatrix::composite(random_density_matrix(2 * c.dim(), rng), c);
        const DensityMatrix at = partial_trace_field(rho);
        EXPECT_NEAR(std::abs(at.matrix().trace() - 1.0), 0.0, 1e-12);
        const Complex direct = (szi * rho.matrix()).trace();
        const Complex reduced = (qubit_operators().sigma_z * at.matrix()).trace();
        EXPECT_LT(std::abs(direct - reduced), 1e-12);
    }
}

TEST(PartialTrace, Linearity) {
    std::mt19937_64 rng(3);
    const int fd = 4;
    for (int trial = 0; trial < 10; ++trial) {
        const ComplexMatrix r1 = random_density_matrix(2 * fd, rng);
        const ComplexMatrix r2 = random_density_matrix(2 * fd, rng);
        const Complex a(0.3, -1.2), b(-0.7, 0.4);
        const ComplexMatrix lhs = partial_trace_field(a * r1 + b * r2, fd);
        const ComplexMatrix rhs = a * partial_trace_field(r1, fd) + b * partial_trace_field(r2, fd);
        EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(PartialTrace, RejectsAtomOnly) {
    EXPECT_THROW(partial_trace_field(DensityMatrix::atom(0.5 * identity(2))), std::invalid_argument);
}

TEST(Displacement, ZeroIsIdentity) {
    const FockCutoff c(10);
    EXPECT_LT((displacement(0.0, c) - identity(c.dim())).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Displacement, CoherentStatePhotonNumber) {
    const FockCutoff c(20);
    const Complex alpha(0.0, 0.5);
    const ComplexMatrix d = displacement(alpha, c);
    const ComplexVector coh = d.col(0);
    const double n = (coh.adjoint() * number_operator(c) * coh)(0, 0).real();
    EXPECT_NEAR(n, std::norm(alpha), 1e-6);
}

TEST(Displacement, UnitaryUnderTruncation) {
    const FockCutoff c(20);
    for (double r : {0.1, 0.5, 1.0})
        for (double phase : {0.0, 1.0, 2.5}) {
            const ComplexMatrix d = displacement(std::polar(r, phase), c);
            EXPECT_LT((d.adjoint() * d - identity(c.dim())).cwiseAbs().maxCoeff(), 1e-8);
        }
}

TEST(Displacement, WarnsWhenAmplitudeStressesCutoff) {
    int warnings = 0;
    auto saved = warning_sink();
    warning_sink() = [&](std::string_view) { ++warnings; };
    (void)displacement(Complex(3.0, 0.0), FockCutoff(5));
    warning_sink() = saved;
    EXPECT_EQ(warnings, 1);
}

TEST(Entropy, KnownValues) {
    ComplexMatrix e = ComplexMatrix::Zero(2, 2);
    e(0, 0) = 1.0;
    EXPECT_NEAR(von_neumann_entropy(DensityMatrix::atom(e)), 0.0, 1e-15);
    EXPECT_NEAR(von_neumann_entropy(DensityMatrix::atom(0.5 * identity(2))), std::numbers::ln2, 1e-14);
    ComplexMatrix d = ComplexMatrix::Zero(2, 2);
    d(0, 0) = 0.9;
    d(1, 1) = 0.1;
    // -0.9 ln 0.9 - 0.1 ln 0.1
    EXPECT_NEAR(von_neumann_entropy(DensityMatrix::atom(d)), 0.3250829733914482, 1e-14);
}

TEST(Entropy, BoundsOnRandomQubits) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const double s = von_neumann_entropy(random_density_matrix(2, rng));
        EXPECT_GE(s, -1e-9);
        EXPECT_LE(s, std::numbers::ln2 + 1e-9);
    }
}

TEST(DensityMatrixInvariants, RejectsInvalidStates) {
    ComplexMatrix m = 0.5 * identity(2);
    m(0, 1) = 0.1;  // not Hermitian
    EXPECT_THROW(DensityMatrix::atom(m), InvariantViolation);
    EXPECT_THROW(DensityMatrix::atom(identity(2)), InvariantViolation);  // trace 2
    ComplexMatrix neg = ComplexMatrix::Zero(2, 2);
    neg(0, 0) = 1.5;
    neg(1, 1) = -0.5;
    EXPECT_THROW(DensityMatrix::atom(neg), InvariantViolation);
    ComplexMatrix nan = 0.5 * identity(2);
    nan(0, 0) = std::nan("");
    EXPECT_THROW(DensityMatrix::atom(nan), InvariantViolation);
    EXPECT_THROW(DensityMatrix::composite(0.5 * identity(2), FockCutoff(2)), std::invalid_argument);
}
