#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <string>

#include "kpo/errors.hpp"

namespace kpo {

using Complex = std::complex<double>;
using Matrix  = Eigen::MatrixXcd;
using Vector  = Eigen::VectorXcd;

inline constexpr double kTwoPi = 6.28318530717958647692528676655900577;

enum class Mode { L = 0, R = 1 };

// ----------------------------- truncation ----------------------------------

// Per-mode Fock truncation. The joint two-mode space has dimension dim*dim
// with the left mode major: basis index j = l*dim + r.
struct FockCutoff {
    int dim;

    explicit FockCutoff(int dim_per_mode) : dim(dim_per_mode) {
        if (dim < 2)
            throw std::invalid_argument("FockCutoff: dim_per_mode must be >= 2, got " +
                                        std::to_string(dim));
    }

    int joint_dim() const { return dim * dim; }

    // Smallest per-mode dimension that holds a coherent state of the given
    // magnitude with a norm deficit below ~1e-3.
    static int required_dim(double alpha_abs) {
        double a = std::abs(alpha_abs);
        return static_cast<int>(std::ceil(a * a + 5.0 * a));
    }

    bool admits(double alpha_abs) const { return dim >= required_dim(alpha_abs); }
};

// ----------------------------- operators -----------------------------------

inline Matrix annihilation(FockCutoff c) {
    Matrix a = Matrix::Zero(c.dim, c.dim);
    for (int n = 1; n < c.dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

inline Matrix creation(FockCutoff c) { return annihilation(c).adjoint(); }

inline Matrix number_operator(FockCutoff c) {
    Matrix n = Matrix::Zero(c.dim, c.dim);
    for (int k = 0; k < c.dim; ++k) n(k, k) = static_cast<double>(k);
    return n;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Lift a single-mode operator into the joint space (identity on the other mode).
inline Matrix embed_mode(const Matrix& op, Mode m, FockCutoff c) {
    if (op.rows() != c.dim || op.cols() != c.dim)
        throw DimensionMismatch("embed_mode: operator is " + std::to_string(op.rows()) + "x" +
                                std::to_string(op.cols()) + " but cutoff dim is " +
                                std::to_string(c.dim));
    Matrix id = Matrix::Identity(c.dim, c.dim);
    return m == Mode::L ? kron(op, id) : kron(id, op);
}

// ----------------------------- states --------------------------------------

struct StateVector {
    Vector amps;
    // Probability mass lost to the cutoff before renormalization.
    double truncation_deficit = 0.0;
};

// Truncated coherent-state coefficients, not normalized. Safe for any
// amplitude; large |alpha| simply leaves most of the mass above the cutoff.
inline Vector coherent_amplitudes(Complex alpha, int dim) {
    Vector v(dim);
    Complex c = std::exp(Complex(-0.5 * std::norm(alpha), 0.0));
    for (int n = 0; n < dim; ++n) {
        v(n) = c;
        c *= alpha / std::sqrt(static_cast<double>(n + 1));
    }
    return v;
}

// Renormalized truncated coherent state. Demands a cutoff that satisfies the
// truncation rule so the recorded deficit stays small.
inline StateVector coherent_state(Complex alpha, FockCutoff c) {
    double mag = std::abs(alpha);
    if (!c.admits(mag))
        throw TruncationTooSmall("coherent_state: |alpha| = " + std::to_string(mag) +
                                 " needs dim >= " + std::to_string(FockCutoff::required_dim(mag)) +
                                 ", got " + std::to_string(c.dim));
    Vector v = coherent_amplitudes(alpha, c.dim);
    double norm2 = v.squaredNorm();
    if (norm2 < 0.999)
        throw TruncationTooSmall("coherent_state: pre-renormalization norm " +
                                 std::to_string(norm2) + " below 0.999 at dim " +
                                 std::to_string(c.dim));
    StateVector s;
    s.amps = v / std::sqrt(norm2);
    s.truncation_deficit = 1.0 - norm2;
    return s;
}

inline Vector vacuum_state(FockCutoff c) {
    Vector v = Vector::Zero(c.joint_dim());
    v(0) = 1.0;
    return v;
}

// Joint product state, left factor major.
inline Vector product_state(const Vector& left, const Vector& right) {
    Vector out(left.size() * right.size());
    for (Eigen::Index l = 0; l < left.size(); ++l)
        out.segment(l * right.size(), right.size()) = left(l) * right;
    return out;
}

inline Complex expectation(const Matrix& op, const Vector& psi) {
    return psi.dot(op * psi);  // Eigen's dot conjugates the left argument
}

}  // namespace kpo
