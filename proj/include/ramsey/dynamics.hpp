// dynamics.hpp: Lindblad generators for the rotating-frame, displaced and
// effective pictures, and their time integration.
//
// Two propagation backends are provided. The primary one is an adaptive
// Dormand-Prince 5(4) integrator acting directly on the density matrix, with
// cubic Hermite dense output between accepted steps. The second exponentiates
// the vectorized generator and steps with a fixed propagator; it exists to
// cross-check the first.

#pragma once

#include "ramsey/hilbert.hpp"

#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ramsey {

enum class Picture { RotatingLab, Displaced, EffectiveAtom };

inline const char* to_string(Picture p) {
    switch (p) {
        case Picture::RotatingLab: return "rotating";
        case Picture::Displaced: return "displaced";
        case Picture::EffectiveAtom: return "effective";
    }
    return "?";
}

inline Picture picture_from_string(std::string_view s) {
    if (s == "rotating") return Picture::RotatingLab;
    if (s == "displaced") return Picture::Displaced;
    if (s == "effective") return Picture::EffectiveAtom;
    throw std::invalid_argument("unknown picture '" + std::string(s) + "'");
}

// All rates are in units of kappa (kappa = 1 fixes the unit system). Times are
// therefore in units of 1/kappa.
struct SystemParams {
    double g = 0.0;
    double eps = 0.0;
    double kappa = 1.0;
    double gamma = 0.0;
    FockCutoff cutoff{15};
    Picture picture = Picture::Displaced;

    void validate() const {
        for (double r : {g, eps, kappa, gamma})
            if (!std::isfinite(r) || r < 0.0)
                throw std::invalid_argument("SystemParams: rates must be finite and >= 0");
        // alpha = -i eps/kappa is undefined at kappa = 0 unless there is no drive.
        if (picture == Picture::Displaced && kappa == 0.0 && eps != 0.0)
            throw std::invalid_argument("SystemParams: displaced picture needs kappa > 0 when eps > 0");
        if (picture == Picture::EffectiveAtom && kappa == 0.0)
            throw std::invalid_argument("SystemParams: effective picture needs kappa > 0");
    }

    // Steady displacement of the driven empty cavity.
    Complex alpha() const { return eps == 0.0 ? Complex{} : Complex(0.0, -eps / kappa); }

    double gamma_eff() const { return g * g / kappa + gamma; }

    SystemParams with_cutoff(FockCutoff c) const {
        SystemParams p = *this;
        p.cutoff = c;
        return p;
    }

    SystemParams with_picture(Picture pic) const {
        SystemParams p = *this;
        p.picture = pic;
        return p;
    }
};

struct CollapseTerm {
    double rate;
    ComplexMatrix op;
};

class IntegrationFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

using SparseOperator = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;

// rho -> -i[H, rho] + sum_j rate_j (2 c rho c^dag - c^dag c rho - rho c^dag c)
class LindbladGenerator {
  public:
    // cutoff is empty for atom-only generators.
    LindbladGenerator(ComplexMatrix hamiltonian, std::vector<CollapseTerm> collapse,
                      std::optional<FockCutoff> cutoff)
        : h_(std::move(hamiltonian)), collapse_(std::move(collapse)), cutoff_(cutoff) {
        const Eigen::Index n = h_.rows();
        if (h_.cols() != n) throw std::invalid_argument("LindbladGenerator: H not square");
        if (cutoff_ && n != 2 * cutoff_->dim())
            throw std::invalid_argument("LindbladGenerator: H does not match the cutoff");
        if (!cutoff_ && n != 2)
            throw std::invalid_argument("LindbladGenerator: atom-only H must be 2x2");
        if ((h_ - h_.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
            throw std::invalid_argument("LindbladGenerator: H not Hermitian");

        ComplexMatrix k = h_;
        for (const auto& c : collapse_) {
            if (c.op.rows() != n || c.op.cols() != n)
                throw std::invalid_argument("LindbladGenerator: collapse operator dimension");
            if (c.rate < 0.0) throw std::invalid_argument("LindbladGenerator: negative rate");
            if (c.rate == 0.0) continue;
            k -= kI * c.rate * (c.op.adjoint() * c.op);
            jumps_.push_back(Jump{2.0 * c.rate, c.op.sparseView(), c.op.adjoint().sparseView(), c.op.sparseView()});
        }
        k_ = k.sparseView();
        k_col_ = k.sparseView();
    }

    const ComplexMatrix& hamiltonian() const noexcept { return h_; }
    const std::vector<CollapseTerm>& collapse_terms() const noexcept { return collapse_; }
    Eigen::Index dim() const noexcept { return h_.rows(); }
    const std::optional<FockCutoff>& cutoff() const noexcept { return cutoff_; }
    bool atom_only() const noexcept { return !cutoff_.has_value(); }

    // out = L(rho). With hermitian_input the input is assumed Hermitian, which
    // allows rho K^dag = (K rho)^dag and c rho c^dag = c (c rho)^dag, so every
    // product is sparse times dense.
    void apply(const ComplexMatrix& rho, ComplexMatrix& out, ComplexMatrix& scratch,
               bool hermitian_input = false) const {
        if (hermitian_input) {
            apply_hermitian(rho, out, scratch);
            return;
        }
        scratch.noalias() = k_ * rho;
        out.noalias() = -kI * scratch;
        scratch.noalias() = k_ * rho.adjoint();
        out.noalias() += kI * scratch.adjoint();
        for (const auto& j : jumps_) {
            scratch.noalias() = j.op * rho;
            out.noalias() += j.weight * (scratch * j.op_dag);
        }
    }

    ComplexMatrix apply(const ComplexMatrix& rho) const {
        if (rho.rows() != dim() || rho.cols() != dim())
            throw std::invalid_argument("apply_generator: dimension mismatch");
        ComplexMatrix out(dim(), dim()), scratch(dim(), dim());
        apply(rho, out, scratch, false);
        return out;
    }

  private:
    using ColSparse = Eigen::SparseMatrix<Complex, Eigen::ColMajor>;

    // Written out so the compiler does not route through the NaN-checking
    // complex multiply.
    static Complex mul(Complex a, Complex b) {
        return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
    }

    // out = A B
    static void sparse_dense(const ColSparse& a, const ComplexMatrix& b, ComplexMatrix& out) {
        out.setZero();
        const Eigen::Index n = out.cols();
        for (Eigen::Index k = 0; k < n; ++k) {
            Complex* o = out.col(k).data();
            for (Eigen::Index j = 0; j < a.outerSize(); ++j) {
                const Complex v = b(j, k);
                if (v == Complex{}) continue;
                for (ColSparse::InnerIterator it(a, j); it; ++it) o[it.row()] += mul(it.value(), v);
            }
        }
    }

    void apply_hermitian(const ComplexMatrix& rho, ComplexMatrix& out, ComplexMatrix& scratch) const {
        const Eigen::Index n = rho.rows();
        sparse_dense(k_col_, rho, scratch);
        // -i (K rho - (K rho)^dag)
        for (Eigen::Index c = 0; c < n; ++c)
            for (Eigen::Index r = 0; r < n; ++r) {
                const Complex d = scratch(r, c) - std::conj(scratch(c, r));
                out(r, c) = Complex(d.imag(), -d.real());
            }
        for (const auto& j : jumps_) {
            sparse_dense(j.op_col, rho, scratch);
            add_sparse_adjoint(j.op_col, scratch, j.weight, out);
        }
        // (c rho) c^dag is Hermitian only up to rounding; left alone, that
        // anti-Hermitian residue accumulates and feeds the trace.
        hermitize(out);
    }

    // out += w A S^dag
    static void add_sparse_adjoint(const ColSparse& a, const ComplexMatrix& s, double w, ComplexMatrix& out) {
        const Eigen::Index n = out.cols();
        for (Eigen::Index k = 0; k < n; ++k) {
            Complex* o = out.col(k).data();
            for (Eigen::Index j = 0; j < a.outerSize(); ++j) {
                const Complex v = std::conj(s(k, j));
                if (v == Complex{}) continue;
                const Complex sv = w * v;
                for (ColSparse::InnerIterator it(a, j); it; ++it) o[it.row()] += mul(it.value(), sv);
            }
        }
    }

    static void hermitize(ComplexMatrix& m) {
        const Eigen::Index n = m.rows();
        for (Eigen::Index c = 0; c < n; ++c) {
            m(c, c) = Complex(m(c, c).real(), 0.0);
            for (Eigen::Index r = c + 1; r < n; ++r) {
                const Complex v = 0.5 * (m(r, c) + std::conj(m(c, r)));
                m(r, c) = v;
                m(c, r) = std::conj(v);
            }
        }
    }

    struct Jump {
        double weight;
        SparseOperator op;
        SparseOperator op_dag;
        ColSparse op_col;
    };

    ComplexMatrix h_;
    std::vector<CollapseTerm> collapse_;
    std::optional<FockCutoff> cutoff_;
    SparseOperator k_;  // H - i sum rate c^dag c
    ColSparse k_col_;
    std::vector<Jump> jumps_;
};

// Jaynes-Cummings coupling and the semiclassical drive that the displacement
// transfers onto the atom. Both act on the composite space.
struct DisplacedHamiltonian {
    ComplexMatrix jc;  // g(sigma+ a + sigma- a^dag)
    ComplexMatrix sc;  // (alpha g sigma+ + alpha^* g sigma-) (x) I
};

inline DisplacedHamiltonian displaced_hamiltonian(const SystemParams& p) {
    const auto q = qubit_operators();
    const ComplexMatrix a = fock_lowering(p.cutoff);
    const ComplexMatrix id_f = identity(p.cutoff.dim());
    const Complex alpha = p.alpha();
    DisplacedHamiltonian h;
    h.jc = p.g * (tensor(q.sigma_plus, a) + tensor(q.sigma_minus, a.adjoint()));
    h.sc = tensor(p.g * (alpha * q.sigma_plus + std::conj(alpha) * q.sigma_minus), id_f);
    return h;
}

inline std::vector<CollapseTerm> composite_collapse_terms(const SystemParams& p) {
    const auto q = qubit_operators();
    return {
        CollapseTerm{p.kappa, tensor(identity(2), fock_lowering(p.cutoff))},
        CollapseTerm{p.gamma, tensor(q.sigma_minus, identity(p.cutoff.dim()))},
    };
}

inline LindbladGenerator build_generator(const SystemParams& p) {
    p.validate();
    const auto q = qubit_operators();
    switch (p.picture) {
        case Picture::RotatingLab: {
            const ComplexMatrix a = fock_lowering(p.cutoff);
            const ComplexMatrix id_f = identity(p.cutoff.dim());
            ComplexMatrix h = p.g * (tensor(q.sigma_plus, a) + tensor(q.sigma_minus, a.adjoint())) +
                              p.eps * tensor(identity(2), a + a.adjoint());
            return LindbladGenerator(std::move(h), composite_collapse_terms(p), p.cutoff);
        }
        case Picture::Displaced: {
            auto parts = displaced_hamiltonian(p);
            return LindbladGenerator(parts.jc + parts.sc, composite_collapse_terms(p), p.cutoff);
        }
        case Picture::EffectiveAtom: {
            ComplexMatrix h = -kI * (p.eps * p.g / p.kappa) * (q.sigma_plus - q.sigma_minus);
            return LindbladGenerator(std::move(h), {CollapseTerm{p.gamma_eff(), q.sigma_minus}},
                                     std::nullopt);
        }
    }
    throw std::logic_error("build_generator: unknown picture");
}

inline ComplexMatrix apply_generator(const LindbladGenerator& gen, const ComplexMatrix& rho) {
    return gen.apply(rho);
}

inline ComplexMatrix apply_generator(const LindbladGenerator& gen, const DensityMatrix& rho) {
    return gen.apply(rho.matrix());
}

// tr(op rho) without forming the product.
inline Complex expectation(const ComplexMatrix& rho, const ComplexMatrix& op) {
    if (rho.rows() != op.cols() || rho.cols() != op.rows())
        throw std::invalid_argument("expectation: dimension mismatch");
    return op.transpose().cwiseProduct(rho).sum();
}

inline Complex expectation(const DensityMatrix& rho, const ComplexMatrix& op) {
    return expectation(rho.matrix(), op);
}

// Atomic reduction of a state or derivative living on the generator's space.
inline ComplexMatrix reduce_to_atom(const ComplexMatrix& m, const std::optional<FockCutoff>& cutoff) {
    return cutoff ? partial_trace_field(m, cutoff->dim()) : m;
}

// Population inversion of an atom-only 2x2 matrix (basis |e>, |g>).
inline double sigma_z_of(const ComplexMatrix& atom) {
    return (atom(0, 0) - atom(1, 1)).real();
}

// tr(sigma+ rho) = rho_ge
inline Complex sigma_plus_of(const ComplexMatrix& atom) {
    return atom(1, 0);
}

// ------------------------------------------------------------ dense output

inline double hermite_value(double t0, double t1, double y0, double f0, double y1, double f1,
                            double t) {
    const double h = t1 - t0;
    const double s = (t - t0) / h;
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * f0 + (-2 * s3 + 3 * s2) * y1 +
           (s3 - s2) * h * f1;
}

// One accepted step [t0, t1] with endpoint values and derivatives. The
// pointers refer to integrator storage and are valid until the next step.
struct StepSegment {
    double t0 = 0.0, t1 = 0.0;
    const ComplexMatrix* y0 = nullptr;
    const ComplexMatrix* f0 = nullptr;
    const ComplexMatrix* y1 = nullptr;
    const ComplexMatrix* f1 = nullptr;

    ComplexMatrix eval(double t) const {
        const double h = t1 - t0;
        const double s = (t - t0) / h;
        const double s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * (*y0) + ((s3 - 2 * s2 + s) * h) * (*f0) +
               (-2 * s3 + 3 * s2) * (*y1) + ((s3 - s2) * h) * (*f1);
    }

    ComplexMatrix eval_derivative(double t) const {
        const double h = t1 - t0;
        const double s = (t - t0) / h;
        const double s2 = s * s;
        return ((6 * s2 - 6 * s) / h) * (*y0) + (3 * s2 - 4 * s + 1) * (*f0) +
               ((-6 * s2 + 6 * s) / h) * (*y1) + (3 * s2 - 2 * s) * (*f1);
    }
};

// Adaptive Dormand-Prince 5(4) with PI step-size control. The error estimate is
// the max-norm of the embedded difference and each accepted step satisfies
// err <= tol.
class Integrator {
  public:
    Integrator(const LindbladGenerator& gen, ComplexMatrix rho0, double tol, double t0 = 0.0)
        : gen_(&gen), tol_(tol), t_(t0) {
        if (!(tol >= 1e-12 && tol <= 1e-4))
            throw std::invalid_argument("Integrator: tol must lie in [1e-12, 1e-4]");
        const Eigen::Index n = gen.dim();
        if (rho0.rows() != n || rho0.cols() != n)
            throw std::invalid_argument("Integrator: initial state dimension mismatch");
        y_ = std::move(rho0);
        for (auto* m : {&f_, &y_prev_, &f_prev_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_,
                        &scratch_})
            m->resize(n, n);
        gen_->apply(y_, f_, scratch_, true);
        const double fnorm = f_.cwiseAbs().maxCoeff();
        h_ = fnorm > 0.0 ? 0.1 * std::pow(tol_, 0.2) / fnorm : 1.0;
    }

    double time() const noexcept { return t_; }
    const ComplexMatrix& state() const noexcept { return y_; }
    const ComplexMatrix& derivative() const noexcept { return f_; }
    std::size_t accepted_steps() const noexcept { return accepted_; }
    std::size_t rejected_steps() const noexcept { return rejected_; }
    double tolerance() const noexcept { return tol_; }

    // Advance by one accepted step, never past t_limit.
    StepSegment step(double t_limit) {
        if (!(t_limit > t_)) throw std::invalid_argument("Integrator::step: t_limit <= t");
        bool last_rejected = false;
        for (;;) {
            double h = std::min(h_, t_limit - t_);
            const bool clipped = h < h_;
            if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t_))) {
                std::ostringstream os;
                os << "step size underflow at t=" << t_ << " (h=" << h << ", tol=" << tol_
                   << ", dim=" << gen_->dim() << "); problem too stiff for the explicit integrator";
                throw IntegrationFailure(os.str());
            }
            const double err = attempt(h);
            if (!std::isfinite(err)) {
                h_ = 0.2 * h;
                ++rejected_;
                last_rejected = true;
                continue;
            }
            if (err <= 1.0) {
                const double t_new = clipped ? t_limit : t_ + h;
                y_prev_.swap(y_);
                y_.swap(tmp_);
                f_prev_.swap(f_);
                f_.swap(k7_);
                t_prev_ = t_;
                t_ = t_new;
                ++accepted_;
                // PI controller (Hairer & Wanner, beta = 0.04).
                const double e = std::max(err, 1e-10);
                double fac = 0.9 * std::pow(e, -0.17) * std::pow(err_prev_, 0.04);
                fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 10.0);
                // A clipped step says nothing about the natural step size.
                if (!(clipped && fac < 1.0)) h_ = h * fac;
                if (clipped) h_ = std::max(h_, h);
                err_prev_ = std::max(err, 1e-4);
                return StepSegment{t_prev_, t_, &y_prev_, &f_prev_, &y_, &f_};
            }
            ++rejected_;
            last_rejected = true;
            h_ = h * std::max(0.2, 0.9 * std::pow(err, -0.2));
        }
    }

  private:
    // Computes the 5th-order candidate into tmp_ and its derivative into k7_;
    // returns the scaled error.
    double attempt(double h) {
        // Butcher tableau of Dormand & Prince (1980).
        constexpr double a21 = 1.0 / 5;
        constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                         a54 = -212.0 / 729;
        constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                         a64 = 49.0 / 176, a65 = -5103.0 / 18656;
        constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                         b5 = -2187.0 / 6784, b6 = 11.0 / 84;
        constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                         e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

        const ComplexMatrix& k1 = f_;
        tmp_ = y_ + (h * a21) * k1;
        eval(tmp_, k2_);
        tmp_ = y_ + h * (a31 * k1 + a32 * k2_);
        eval(tmp_, k3_);
        tmp_ = y_ + h * (a41 * k1 + a42 * k2_ + a43 * k3_);
        eval(tmp_, k4_);
        tmp_ = y_ + h * (a51 * k1 + a52 * k2_ + a53 * k3_ + a54 * k4_);
        eval(tmp_, k5_);
        tmp_ = y_ + h * (a61 * k1 + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
        eval(tmp_, k6_);
        tmp_ = y_ + h * (b1 * k1 + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
        eval(tmp_, k7_);
        const double err =
            (h * (e1 * k1 + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_))
                .cwiseAbs()
                .maxCoeff();
        return err / tol_;
    }

    void eval(const ComplexMatrix& y, ComplexMatrix& out) { gen_->apply(y, out, scratch_, true); }

    const LindbladGenerator* gen_;
    double tol_;
    double t_;
    double t_prev_ = 0.0;
    double h_ = 0.0;
    double err_prev_ = 1e-4;
    std::size_t accepted_ = 0, rejected_ = 0;
    ComplexMatrix y_, f_, y_prev_, f_prev_;
    ComplexMatrix k2_, k3_, k4_, k5_, k6_, k7_, tmp_, scratch_;
};

// ---------------------------------------------------------------- trajectory

struct Knot {
    double t;
    ComplexMatrix rho;
    ComplexMatrix drho;
};

// Time-ordered states with their derivatives. Between knots the state is the
// cubic Hermite interpolant, which is exactly the integrator's dense output.
// An atom-level trajectory stores the reduced state of every knot; since the
// partial trace is linear it interpolates identically to the reduced
// composite interpolant.
class Trajectory {
  public:
    Trajectory() = default;
    explicit Trajectory(std::optional<FockCutoff> cutoff) : cutoff_(cutoff) {}

    void push(double t, ComplexMatrix rho, ComplexMatrix drho) {
        if (!knots_.empty() && !(t > knots_.back().t))
            throw std::invalid_argument("Trajectory: times must be strictly increasing");
        knots_.push_back(Knot{t, std::move(rho), std::move(drho)});
    }

    std::size_t size() const noexcept { return knots_.size(); }
    bool empty() const noexcept { return knots_.empty(); }
    const Knot& knot(std::size_t i) const { return knots_.at(i); }
    const std::vector<Knot>& knots() const noexcept { return knots_; }
    double t_begin() const { return knots_.front().t; }
    double t_end() const { return knots_.back().t; }
    bool atom_only() const noexcept { return !cutoff_.has_value(); }
    const std::optional<FockCutoff>& cutoff() const noexcept { return cutoff_; }

    std::vector<double> times() const {
        std::vector<double> ts;
        ts.reserve(knots_.size());
        for (const auto& k : knots_) ts.push_back(k.t);
        return ts;
    }

    DensityMatrix state(std::size_t i) const {
        const auto& m = knots_.at(i).rho;
        return cutoff_ ? DensityMatrix::composite(m, *cutoff_) : DensityMatrix::atom(m);
    }

    // Index k of the interval [t_k, t_{k+1}] containing t.
    std::size_t interval(double t) const {
        if (knots_.size() < 2) throw std::logic_error("Trajectory: need two knots to interpolate");
        // Times a few ulps past either end (t_end * i / n rounding) count as inside.
        const double slack = 8 * std::numeric_limits<double>::epsilon() *
                             std::max(std::abs(t_begin()), std::abs(t_end()));
        if (t < t_begin() - slack || t > t_end() + slack)
            throw std::out_of_range("Trajectory: time outside the integrated range");
        auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                                   [](double v, const Knot& k) { return v < k.t; });
        std::size_t k = static_cast<std::size_t>(it - knots_.begin());
        return std::min(k == 0 ? 0 : k - 1, knots_.size() - 2);
    }

    StepSegment segment(std::size_t k) const {
        const auto& a = knots_.at(k);
        const auto& b = knots_.at(k + 1);
        return StepSegment{a.t, b.t, &a.rho, &a.drho, &b.rho, &b.drho};
    }

    ComplexMatrix interpolate(double t) const { return segment(interval(t)).eval(t); }
    ComplexMatrix interpolate_derivative(double t) const {
        return segment(interval(t)).eval_derivative(t);
    }

    // Atomic reduction of the dense output at t.
    ComplexMatrix atom_at(double t) const { return reduce_to_atom(interpolate(t), cutoff_); }

    Trajectory reduced() const {
        Trajectory out(std::nullopt);
        for (const auto& k : knots_)
            out.push(k.t, reduce_to_atom(k.rho, cutoff_), reduce_to_atom(k.drho, cutoff_));
        return out;
    }

  private:
    std::optional<FockCutoff> cutoff_;
    std::vector<Knot> knots_;
};

enum class Record { Full, Atom };

struct EvolveOptions {
    Record record = Record::Full;
    // Called after every accepted step; returning true ends the evolution.
    std::function<bool(const StepSegment&)> stop;
};

// Per-step acceptance gate on the propagated state: trace and Hermiticity are
// checked against 10 * tol (never tighter than the DensityMatrix defaults).
inline StateTolerances integration_tolerances(double tol) {
    return StateTolerances{std::max(1e-10, 10 * tol), std::max(1e-8, 10 * tol),
                           std::max(1e-8, 10 * tol)};
}

inline void check_step_state(const ComplexMatrix& rho, double t, double tol) {
    const StateDefects d = measure_defects(rho, false);
    const StateTolerances lim = integration_tolerances(tol);
    if (!d.finite || d.trace > lim.trace || d.hermiticity > lim.hermiticity) {
        std::ostringstream os;
        os << "state invariants violated at t=" << t << " (trace defect " << d.trace
           << ", hermiticity defect " << d.hermiticity << ")";
        throw IntegrationFailure(os.str());
    }
}

inline Trajectory evolve(const LindbladGenerator& gen, const DensityMatrix& rho0, double t_end,
                         double tol, const EvolveOptions& opts = {}) {
    if (!(t_end > 0.0)) throw std::invalid_argument("evolve: t_end must be > 0");
    if (rho0.dim() != gen.dim()) throw std::invalid_argument("evolve: dimension mismatch");
    Integrator integ(gen, rho0.matrix(), tol);
    const bool full = opts.record == Record::Full;
    Trajectory traj(full ? gen.cutoff() : std::nullopt);
    const StateTolerances lim = integration_tolerances(tol);

    auto record = [&](double t, const ComplexMatrix& y, const ComplexMatrix& f) {
        if (full) {
            traj.push(t, y, f);
            if (gen.cutoff())
                (void)DensityMatrix::composite(y, *gen.cutoff(), lim);
            else
                (void)DensityMatrix::atom(y, lim);
        } else {
            ComplexMatrix a = reduce_to_atom(y, gen.cutoff());
            (void)DensityMatrix::atom(a, lim);
            traj.push(t, std::move(a), reduce_to_atom(f, gen.cutoff()));
        }
    };

    record(0.0, integ.state(), integ.derivative());
    while (integ.time() < t_end) {
        const StepSegment seg = integ.step(t_end);
        check_step_state(*seg.y1, seg.t1, tol);
        try {
            record(seg.t1, *seg.y1, *seg.f1);
        } catch (const InvariantViolation& e) {
            throw IntegrationFailure(std::string("evolve: ") + e.what() + " at t=" +
                                     std::to_string(seg.t1));
        }
        if (opts.stop && opts.stop(seg)) break;
    }
    return traj;
}

// ------------------------------------------------------- expm cross-check

// Column-stacking vectorization: vec(A X B) = (B^T (x) A) vec(X).
inline ComplexMatrix liouvillian_superoperator(const LindbladGenerator& gen) {
    const Eigen::Index n = gen.dim();
    const ComplexMatrix id = identity(n);
    const ComplexMatrix& h = gen.hamiltonian();
    ComplexMatrix l = -kI * (Eigen::kroneckerProduct(id, h).eval() -
                             Eigen::kroneckerProduct(h.transpose(), id).eval());
    for (const auto& c : gen.collapse_terms()) {
        if (c.rate == 0.0) continue;
        const ComplexMatrix cdc = c.op.adjoint() * c.op;
        l += c.rate * (2.0 * Eigen::kroneckerProduct(c.op.conjugate(), c.op).eval() -
                       Eigen::kroneckerProduct(id, cdc).eval() -
                       Eigen::kroneckerProduct(cdc.transpose(), id).eval());
    }
    return l;
}

// Fixed-step propagator exp(L dt) applied to the vectorized state.
class ExpmPropagator {
  public:
    ExpmPropagator(const LindbladGenerator& gen, double dt)
        : n_(gen.dim()), dt_(dt), step_((liouvillian_superoperator(gen) * dt).exp()) {
        if (!(dt > 0.0)) throw std::invalid_argument("ExpmPropagator: dt must be > 0");
    }

    double dt() const noexcept { return dt_; }

    ComplexMatrix advance(const ComplexMatrix& rho, int steps = 1) const {
        ComplexVector v = Eigen::Map<const ComplexVector>(rho.data(), rho.size());
        for (int i = 0; i < steps; ++i) v = step_ * v;
        return Eigen::Map<const ComplexMatrix>(v.data(), n_, n_);
    }

  private:
    Eigen::Index n_;
    double dt_;
    ComplexMatrix step_;
};

inline ComplexMatrix propagate_expm(const LindbladGenerator& gen, const ComplexMatrix& rho0,
                                    double t, int steps) {
    if (steps < 1) throw std::invalid_argument("propagate_expm: steps must be >= 1");
    return ExpmPropagator(gen, t / steps).advance(rho0, steps);
}

}  // namespace ramsey
