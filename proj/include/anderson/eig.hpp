#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "anderson/model.hpp"

namespace anderson {

// Thrown when the QL iteration does not converge for an eigenvalue.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::size_t index)
        : std::runtime_error(what), index_(index) {}
    std::size_t index() const { return index_; }

private:
    std::size_t index_;
};

// Eigenvalues in ascending order, optionally with orthonormal eigenvectors
// stored contiguously (vector k occupies [k*n, (k+1)*n)).
struct SpectralData {
    std::size_t dimension = 0;
    std::vector<double> values;
    std::vector<double> vectors;       // empty when not requested
    std::vector<std::size_t> indices;  // global position of values[k] in the full spectrum
    double residual_bound = 0.0;
    bool used_fallback = false;

    std::size_t count() const { return values.size(); }
    bool has_vectors() const { return !vectors.empty(); }
    std::span<const double> vector(std::size_t k) const {
        return {vectors.data() + k * dimension, dimension};
    }
};

SpectralData eigen_full(const HamiltonianMatrix& h, bool want_vectors);

// Which way a probe moves when a pivot falls under the floor.
enum class ShiftDirection { up, down };

struct InertiaCount {
    std::size_t below = 0;
    bool shift_perturbed = false;
    double probe = 0.0;  // energy actually factorized
};

// Pivots smaller than kPivotFloor * ||H||_inf trigger a retry at a probe moved
// by kEndpointShift * ||H||_inf.
inline constexpr double kPivotFloor = 1e-13;
inline constexpr double kEndpointShift = 1e-10;

InertiaCount inertia_count(const HamiltonianMatrix& h, double energy,
                           ShiftDirection direction = ShiftDirection::up);
std::size_t count_below(const HamiltonianMatrix& h, double energy);
// Number of eigenvalues in the closed interval.
std::size_t count_in_interval(const HamiltonianMatrix& h, Interval window);

SpectralData eigenpairs_in_window(const HamiltonianMatrix& h, Interval window);

namespace detail {
class SliceKernel;
}

// Reusable spectrum slicer. For general matrices the constructor reduces H to
// tridiagonal form once, so many probes cost O(N) each afterwards; chains are
// counted directly.
class SpectrumSlicer {
public:
    explicit SpectrumSlicer(const HamiltonianMatrix& h);
    ~SpectrumSlicer();
    SpectrumSlicer(SpectrumSlicer&&) noexcept;
    SpectrumSlicer& operator=(SpectrumSlicer&&) noexcept;

    std::size_t size() const;
    InertiaCount count_below(double energy, ShiftDirection direction = ShiftDirection::up) const;
    std::size_t count_in(Interval window) const;

    // Counts at each energy of a nondecreasing grid.
    std::vector<std::size_t> counts_on_grid(std::span<const double> energies) const;

    // Eigenvalues with global indices [first, last), by bisection.
    std::vector<double> eigenvalues_by_index(std::size_t first, std::size_t last) const;
    // Eigenpairs with global indices [first, last): bisection then inverse
    // iteration. Falls back to a full solve when a vector misses the residual
    // contract.
    SpectralData eigenpairs_by_index(std::size_t first, std::size_t last) const;

    // Eigenvalues in the closed window plus up to `extra_above` further
    // eigenvalues above it (used for spacings that straddle the edge).
    struct WindowLevels {
        std::size_t first_index = 0;
        std::size_t in_window = 0;
        std::vector<double> values;
    };
    WindowLevels levels_in_window(Interval window, std::size_t extra_above = 0) const;

private:
    const HamiltonianMatrix* h_;
    std::unique_ptr<detail::SliceKernel> kernel_;
};

}  // namespace anderson
