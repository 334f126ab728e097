// hilbert.hpp: truncated Fock-space and qubit operators, composite atom(x)field
// states, partial trace, displacement and von Neumann entropy.
//
// Basis conventions: the atom is ordered (|e>, |g>), the field (|0>, ..., |n_max>),
// and the atom factor is always leftmost in tensor products, so the composite
// index of |s>|n> is s * (n_max + 1) + n.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ramsey {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

inline constexpr Complex kI{0.0, 1.0};

// Warnings are routed through a replaceable sink so tests and the CLI can
// capture them.
inline std::function<void(std::string_view)>& warning_sink() {
    static std::function<void(std::string_view)> sink = [](std::string_view msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return sink;
}

inline void warn(std::string_view msg) {
    if (warning_sink()) warning_sink()(msg);
}

class InvariantViolation : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Highest retained Fock level; the field dimension is n_max + 1.
class FockCutoff {
  public:
    explicit FockCutoff(int n_max) : n_max_(n_max) {
        if (n_max < 1) throw std::invalid_argument("FockCutoff: n_max must be >= 1");
    }
    int n_max() const noexcept { return n_max_; }
    int dim() const noexcept { return n_max_ + 1; }
    FockCutoff raised(int by) const { return FockCutoff(n_max_ + by); }
    friend bool operator==(FockCutoff, FockCutoff) = default;

  private:
    int n_max_;
};

inline bool all_finite(const ComplexMatrix& m) {
    return m.allFinite();
}

// ---------------------------------------------------------------- operators

inline ComplexMatrix identity(Eigen::Index n) {
    return ComplexMatrix::Identity(n, n);
}

inline ComplexMatrix fock_lowering(FockCutoff cutoff) {
    const int d = cutoff.dim();
    ComplexMatrix a = ComplexMatrix::Zero(d, d);
    for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

inline ComplexMatrix fock_raising(FockCutoff cutoff) {
    return fock_lowering(cutoff).adjoint();
}

inline ComplexMatrix number_operator(FockCutoff cutoff) {
    const int d = cutoff.dim();
    ComplexMatrix n = ComplexMatrix::Zero(d, d);
    for (int k = 0; k < d; ++k) n(k, k) = static_cast<double>(k);
    return n;
}

struct QubitOperators {
    ComplexMatrix sigma_plus;   // |e><g|
    ComplexMatrix sigma_minus;  // |g><e|
    ComplexMatrix sigma_z;      // |e><e| - |g><g|
};

inline QubitOperators qubit_operators() {
    QubitOperators q{ComplexMatrix::Zero(2, 2), ComplexMatrix::Zero(2, 2),
                     ComplexMatrix::Zero(2, 2)};
    q.sigma_plus(0, 1) = 1.0;
    q.sigma_minus(1, 0) = 1.0;
    q.sigma_z(0, 0) = 1.0;
    q.sigma_z(1, 1) = -1.0;
    return q;
}

inline ComplexMatrix tensor(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows() != a.cols() || b.rows() != b.cols())
        throw std::invalid_argument("tensor: operands must be square");
    return Eigen::kroneckerProduct(a, b).eval();
}

// Composite basis vector |s>|n>, s = 0 for |e>, 1 for |g>.
inline ComplexVector basis_state(int atom_level, int fock_level, FockCutoff cutoff) {
    if (atom_level < 0 || atom_level > 1 || fock_level < 0 || fock_level > cutoff.n_max())
        throw std::out_of_range("basis_state: level outside the truncated space");
    ComplexVector v = ComplexVector::Zero(2 * cutoff.dim());
    v(atom_level * cutoff.dim() + fock_level) = 1.0;
    return v;
}

// tr_f of an arbitrary (not necessarily trace-one) composite operator.
inline ComplexMatrix partial_trace_field(const ComplexMatrix& m, int field_dim) {
    if (m.rows() != 2 * field_dim || m.cols() != 2 * field_dim)
        throw std::invalid_argument("partial_trace_field: matrix is not 2(n_max+1) square");
    ComplexMatrix out(2, 2);
    for (int s = 0; s < 2; ++s)
        for (int r = 0; r < 2; ++r)
            out(s, r) = m.block(s * field_dim, r * field_dim, field_dim, field_dim).trace();
    return out;
}

// D(alpha) = exp(alpha a^dag - alpha^* a), exponentiated on the truncated space.
inline ComplexMatrix displacement(Complex alpha, FockCutoff cutoff) {
    const double mag = std::abs(alpha);
    if (mag * mag + 5.0 * mag > cutoff.n_max())
        warn("displacement: |alpha|^2 is not small against n_max; truncation error likely");
    const ComplexMatrix a = fock_lowering(cutoff);
    const ComplexMatrix gen = alpha * a.adjoint() - std::conj(alpha) * a;
    return gen.exp();
}

// ------------------------------------------------------------ density matrix

enum class Space { AtomOnly, Composite };

struct StateTolerances {
    double hermiticity = 1e-10;
    double trace = 1e-8;
    double positivity = 1e-8;
};

struct StateDefects {
    double hermiticity = 0.0;     // max |rho - rho^dag|
    double trace = 0.0;           // |tr rho - 1|
    double min_eigenvalue = 1.0;
    bool finite = true;
};

inline StateDefects measure_defects(const ComplexMatrix& m, bool with_spectrum = true) {
    StateDefects d;
    d.finite = m.allFinite();
    if (!d.finite) return d;
    d.hermiticity = (m - m.adjoint()).cwiseAbs().maxCoeff();
    d.trace = std::abs(m.trace() - Complex(1.0));
    if (with_spectrum) {
        const ComplexMatrix h = 0.5 * (m + m.adjoint());
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h, Eigen::EigenvaluesOnly);
        d.min_eigenvalue = es.eigenvalues().minCoeff();
    }
    return d;
}

class DensityMatrix {
  public:
    static DensityMatrix atom(ComplexMatrix m, StateTolerances tol = {}) {
        if (m.rows() != 2 || m.cols() != 2)
            throw std::invalid_argument("DensityMatrix::atom: expected a 2x2 matrix");
        return DensityMatrix(std::move(m), Space::AtomOnly, std::nullopt, tol);
    }

    static DensityMatrix composite(ComplexMatrix m, FockCutoff cutoff, StateTolerances tol = {}) {
        if (m.rows() != 2 * cutoff.dim() || m.cols() != 2 * cutoff.dim())
            throw std::invalid_argument("DensityMatrix::composite: dimension does not match cutoff");
        return DensityMatrix(std::move(m), Space::Composite, cutoff, tol);
    }

    static DensityMatrix pure(const ComplexVector& psi, std::optional<FockCutoff> cutoff) {
        ComplexMatrix m = psi * psi.adjoint();
        return cutoff ? composite(std::move(m), *cutoff) : atom(std::move(m));
    }

    // |e><e| (x) |0><0|, the initial state of every figure run.
    static DensityMatrix excited_vacuum(FockCutoff cutoff) {
        return pure(basis_state(0, 0, cutoff), cutoff);
    }

    const ComplexMatrix& matrix() const noexcept { return m_; }
    Space space() const noexcept { return space_; }
    Eigen::Index dim() const noexcept { return m_.rows(); }
    // Field cutoff; only present for composite states.
    const std::optional<FockCutoff>& cutoff() const noexcept { return cutoff_; }

  private:
    DensityMatrix(ComplexMatrix m, Space space, std::optional<FockCutoff> cutoff,
                  StateTolerances tol)
        : m_(std::move(m)), space_(space), cutoff_(cutoff) {
        const StateDefects d = measure_defects(m_);
        if (!d.finite) throw InvariantViolation("density matrix has non-finite entries");
        if (d.hermiticity > tol.hermiticity)
            throw InvariantViolation("density matrix not Hermitian (defect " +
                                     std::to_string(d.hermiticity) + ")");
        if (d.trace > tol.trace)
            throw InvariantViolation("density matrix trace deviates from 1 by " +
                                     std::to_string(d.trace));
        if (d.min_eigenvalue < -tol.positivity)
            throw InvariantViolation("density matrix has negative eigenvalue " +
                                     std::to_string(d.min_eigenvalue));
    }

    ComplexMatrix m_;
    Space space_;
    std::optional<FockCutoff> cutoff_;
};

inline DensityMatrix partial_trace_field(const DensityMatrix& rho) {
    if (rho.space() != Space::Composite)
        throw std::invalid_argument("partial_trace_field: state is already atom-only");
    return DensityMatrix::atom(partial_trace_field(rho.matrix(), rho.cutoff()->dim()));
}

// S = -sum lambda ln lambda in nats, eigenvalues clamped to [0, 1], 0 ln 0 = 0.
inline double von_neumann_entropy(const ComplexMatrix& rho) {
    const ComplexMatrix h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h, Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (double lambda : es.eigenvalues()) {
        lambda = std::clamp(lambda, 0.0, 1.0);
        if (lambda > 0.0) s -= lambda * std::log(lambda);
    }
    return s;
}

inline double von_neumann_entropy(const DensityMatrix& rho) {
    return von_neumann_entropy(rho.matrix());
}

}  // namespace ramsey
