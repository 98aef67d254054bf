#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace anderson {

// Closed real interval [lo, hi].
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const { return hi - lo; }
    double center() const { return 0.5 * (lo + hi); }
    bool contains(double x) const { return lo <= x && x <= hi; }
    bool operator==(const Interval&) const = default;
};

enum class Boundary { periodic, simple };

std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string& s);

// The box [-L, L]^d of Z^d with side M = 2L + 1 and volume N = M^d. Sites are
// indexed row-major over coordinates shifted to [0, M)^d; the first coordinate
// is the slowest.
class LatticeBox {
public:
    LatticeBox(int dim, int half_side);

    int dim() const { return dim_; }
    int half_side() const { return half_side_; }
    int side() const { return side_; }
    std::size_t volume() const { return volume_; }

    std::size_t index_of(std::span<const int> coords) const;
    std::vector<int> coords_of(std::size_t index) const;

    // Neighbor across axis `axis` in direction +1 or -1, wrapping modulo M.
    std::size_t torus_neighbor(std::size_t index, int axis, int direction) const;
    // All 2d torus neighbors, ordered (axis 0: -,+), (axis 1: -,+), ...
    std::vector<std::size_t> torus_neighbors(std::size_t index) const;
    // Neighbors without wrap-around (Dirichlet / "simple" boundary).
    std::vector<std::size_t> open_neighbors(std::size_t index) const;

    // Max-norm distance on the torus.
    int torus_distance(std::size_t a, std::size_t b) const;

    bool operator==(const LatticeBox& o) const {
        return dim_ == o.dim_ && half_side_ == o.half_side_;
    }

private:
    int dim_;
    int half_side_;
    int side_;
    std::size_t volume_;
    std::vector<std::size_t> stride_;
};

LatticeBox build_box(int dim, int half_side);

enum class DisorderKind { uniform, piecewise, constant };

// Single-site distribution of the potential. Sampled values are
// `coupling * X` with X drawn from the density. The `constant` kind puts every
// site at `value` and exists only for oracle tests; it is not a physical model.
struct DisorderSpec {
    DisorderKind kind = DisorderKind::uniform;
    double a = -0.5;
    double b = 0.5;
    std::vector<double> breakpoints;  // piecewise: strictly increasing, size k+1
    std::vector<double> densities;    // piecewise: density value on each of k pieces
    double value = 0.0;               // constant
    double coupling = 1.0;

    static DisorderSpec uniform(double a, double b, double coupling);
    static DisorderSpec piecewise(std::vector<double> breakpoints,
                                  std::vector<double> densities, double coupling);
    static DisorderSpec constant(double value);

    // Throws std::invalid_argument when the density is malformed.
    void validate() const;
    // Support of the scaled values, coupling * supp g.
    Interval scaled_support() const;
    bool is_test_mode() const { return kind == DisorderKind::constant; }

    bool operator==(const DisorderSpec&) const = default;
};

void to_json(nlohmann::json& j, const DisorderSpec& s);
void from_json(const nlohmann::json& j, DisorderSpec& s);

struct DisorderRealization {
    std::vector<double> values;
    std::uint64_t seed = 0;
    DisorderSpec spec;
};

// N i.i.d. draws; each uses one output of std::mt19937_64(seed) mapped to
// [0, 1) as (x >> 11) * 2^-53, then the inverse CDF of the density.
DisorderRealization sample_disorder(const DisorderSpec& spec, const LatticeBox& box,
                                    std::uint64_t seed);

// Storage shape detected from the sparsity pattern; the eigen routines pick a
// kernel from it.
enum class MatrixStructure {
    tridiagonal,     // only (i, i+1) couplings
    periodic_chain,  // tridiagonal plus the (0, N-1) corner, N >= 3
    general,
};

struct Coupling {
    std::size_t row;
    std::size_t col;  // row < col
    double value;
};

// Real symmetric matrix stored as diagonal plus the upper-triangle couplings.
class HamiltonianMatrix {
public:
    HamiltonianMatrix(std::vector<double> diagonal, std::vector<Coupling> couplings);

    // Row-major n x n; only the upper triangle is read, symmetry is assumed.
    static HamiltonianMatrix from_dense(std::size_t n, std::span<const double> row_major);

    std::size_t size() const { return diag_.size(); }
    std::span<const double> diagonal() const { return diag_; }
    std::span<const Coupling> couplings() const { return couplings_; }
    MatrixStructure structure() const { return structure_; }

    // For tridiagonal / periodic_chain: off[i] couples i and i+1 (size n-1).
    const std::vector<double>& chain_offdiagonal() const { return chain_off_; }
    double chain_corner() const { return chain_corner_; }

    double norm_inf() const { return norm_inf_; }
    double entry(std::size_t i, std::size_t j) const;
    std::vector<double> to_dense() const;  // row-major
    void multiply(std::span<const double> x, std::span<double> y) const;
    // Number of nonzero off-diagonal entries in row i.
    std::size_t row_degree(std::size_t i) const;
    double trace() const;

private:
    void analyze();

    std::vector<double> diag_;
    std::vector<Coupling> couplings_;
    MatrixStructure structure_ = MatrixStructure::general;
    std::vector<double> chain_off_;
    double chain_corner_ = 0.0;
    double norm_inf_ = 0.0;
};

// H = A + V with A the lattice adjacency and V = diag(omega). `hopping`
// multiplies A; 0 gives the diagonal test matrix.
HamiltonianMatrix assemble_hamiltonian(const LatticeBox& box,
                                       const DisorderRealization& omega,
                                       Boundary boundary = Boundary::periodic,
                                       double hopping = 1.0);
HamiltonianMatrix assemble_hamiltonian(const LatticeBox& box,
                                       std::span<const double> omega,
                                       Boundary boundary = Boundary::periodic,
                                       double hopping = 1.0);

// [-2d, 2d] + coupling * supp g.
Interval spectrum_bounds(const DisorderSpec& spec, int dim);

// Union of the Gershgorin discs, merged into disjoint sorted intervals.
std::vector<Interval> gershgorin_union(const HamiltonianMatrix& h);

}  // namespace anderson
