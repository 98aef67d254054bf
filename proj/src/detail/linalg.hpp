#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace anderson::detail {

// Orthogonal reduction A = Q T Q^T of a dense symmetric matrix, with Q kept as
// the product of Householder reflectors H_0 ... H_{n-3}; H_k acts on rows k+1..
struct Tridiagonalization {
    std::size_t n = 0;
    std::vector<double> diag;
    std::vector<double> off;                     // size n-1
    std::vector<std::vector<double>> reflector;  // v_k, length n-k-1
    std::vector<double> tau;

    // x <- Q x
    void apply_q(std::span<double> x) const;
    // Column-major n x n matrix Q.
    std::vector<double> form_q() const;
};

// Consumes a row-major copy of the matrix (lower triangle is used).
Tridiagonalization tridiagonalize(std::vector<double> a, std::size_t n);

// Implicit QL with Wilkinson-type shifts on a symmetric tridiagonal matrix.
// `z` (column-major, n x n) is rotated alongside when non-empty. Eigenvalues
// are left unsorted in `diag`. Throws ConvergenceError past 30 sweeps per value.
void implicit_ql(std::vector<double>& diag, std::vector<double> off, std::vector<double>& z);

enum class PivotPolicy {
    report,  // stop and report a pivot below the floor
    clamp,   // replace it by -floor and continue
};

struct ChainCount {
    std::size_t below = 0;
    bool floor_hit = false;
};

// Sylvester inertia of (T - e) for a symmetric tridiagonal T (off2 holds the
// squared off-diagonal), or of a periodic chain when `corner` is nonzero.
ChainCount chain_inertia(std::span<const double> diag, std::span<const double> off,
                         std::span<const double> off2, double corner, bool periodic,
                         double e, double floor, PivotPolicy policy);

// Clamped-pivot inertia at up to kBatch probes at once; the independent
// recurrences interleave, which hides the division latency.
inline constexpr std::size_t kBatch = 8;
void chain_inertia_batch(std::span<const double> diag, std::span<const double> off,
                         std::span<const double> off2, double corner, bool periodic,
                         std::span<const double> probes, double floor, std::span<std::size_t> below);

// Inertia of the dense symmetric matrix (A - e) by Bunch-Kaufman LDL^T.
ChainCount bunch_kaufman_inertia(std::span<const double> a, std::size_t n, double e,
                                 double floor);

// LU with partial pivoting of a banded matrix with kl sub- and ku
// super-diagonals. Exactly singular pivots are replaced by `tiny`.
class BandLU {
public:
    BandLU(std::size_t n, std::size_t kl, std::size_t ku);

    void set(std::size_t i, std::size_t j, double v);
    void factor(double tiny);
    void solve(std::span<double> b) const;

private:
    double& at(std::size_t i, std::size_t j) { return rows_[i * width_ + (j + kl_ - i)]; }
    double at(std::size_t i, std::size_t j) const { return rows_[i * width_ + (j + kl_ - i)]; }

    std::size_t n_, kl_, ku_, width_;
    std::vector<double> rows_;
    std::vector<double> lower_;  // multipliers, kl per column
    std::vector<std::size_t> pivot_;
};

// new position -> old position; makes a periodic chain pentadiagonal.
std::vector<std::size_t> fold_permutation(std::size_t n);

}  // namespace anderson::detail
