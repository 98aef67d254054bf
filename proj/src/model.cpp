#include "anderson/model.hpp"
#include "anderson/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace anderson {

std::string to_string(Boundary b) {
    return b == Boundary::periodic ? "periodic" : "simple";
}

Boundary boundary_from_string(const std::string& s) {
    if (s == "periodic") return Boundary::periodic;
    if (s == "simple" || s == "dirichlet") return Boundary::simple;
    throw std::invalid_argument("unknown boundary: " + s);
}

// ---------------------------------------------------------------------------
// LatticeBox

LatticeBox::LatticeBox(int dim, int half_side)
    : dim_(dim), half_side_(half_side), side_(0), volume_(0) {
    if (dim <= 0 || half_side <= 0) throw std::invalid_argument("invalid lattice");
    if (half_side > (std::numeric_limits<int>::max() - 1) / 2)
        throw std::invalid_argument("box too large");
    side_ = 2 * half_side + 1;
    // Keep N * 2d representable so neighbor bookkeeping cannot overflow.
    const std::size_t limit = std::numeric_limits<std::size_t>::max() / (2 * std::size_t(dim) + 1);
    std::size_t n = 1;
    stride_.assign(dim, 1);
    for (int k = 0; k < dim; ++k) {
        if (n > limit / std::size_t(side_)) throw std::invalid_argument("box too large");
        n *= std::size_t(side_);
    }
    volume_ = n;
    for (int k = dim - 2; k >= 0; --k) stride_[k] = stride_[k + 1] * std::size_t(side_);
}

std::size_t LatticeBox::index_of(std::span<const int> coords) const {
    if (int(coords.size()) != dim_) throw std::invalid_argument("coordinate rank mismatch");
    std::size_t idx = 0;
    for (int k = 0; k < dim_; ++k) {
        const int c = coords[k];
        if (c < -half_side_ || c > half_side_)
            throw std::out_of_range("coordinate outside box");
        idx += std::size_t(c + half_side_) * stride_[k];
    }
    return idx;
}

std::vector<int> LatticeBox::coords_of(std::size_t index) const {
    if (index >= volume_) throw std::out_of_range("site index outside box");
    std::vector<int> c(dim_);
    for (int k = 0; k < dim_; ++k) {
        c[k] = int(index / stride_[k]) - half_side_;
        index %= stride_[k];
    }
    return c;
}

std::size_t LatticeBox::torus_neighbor(std::size_t index, int axis, int direction) const {
    const std::size_t s = stride_[axis];
    const std::size_t pos = (index / s) % std::size_t(side_);
    const std::size_t base = index - pos * s;
    std::size_t next;
    if (direction > 0)
        next = pos + 1 == std::size_t(side_) ? 0 : pos + 1;
    else
        next = pos == 0 ? std::size_t(side_) - 1 : pos - 1;
    return base + next * s;
}

std::vector<std::size_t> LatticeBox::torus_neighbors(std::size_t index) const {
    std::vector<std::size_t> out;
    out.reserve(2 * dim_);
    for (int k = 0; k < dim_; ++k) {
        out.push_back(torus_neighbor(index, k, -1));
        out.push_back(torus_neighbor(index, k, +1));
    }
    return out;
}

std::vector<std::size_t> LatticeBox::open_neighbors(std::size_t index) const {
    std::vector<std::size_t> out;
    out.reserve(2 * dim_);
    for (int k = 0; k < dim_; ++k) {
        const std::size_t pos = (index / stride_[k]) % std::size_t(side_);
        if (pos > 0) out.push_back(index - stride_[k]);
        if (pos + 1 < std::size_t(side_)) out.push_back(index + stride_[k]);
    }
    return out;
}

int LatticeBox::torus_distance(std::size_t a, std::size_t b) const {
    int dist = 0;
    for (int k = 0; k < dim_; ++k) {
        const long pa = long((a / stride_[k]) % std::size_t(side_));
        const long pb = long((b / stride_[k]) % std::size_t(side_));
        long delta = pa > pb ? pa - pb : pb - pa;
        delta = std::min<long>(delta, side_ - delta);
        dist = std::max(dist, int(delta));
    }
    return dist;
}

LatticeBox build_box(int dim, int half_side) { return LatticeBox(dim, half_side); }

// ---------------------------------------------------------------------------
// DisorderSpec

DisorderSpec DisorderSpec::uniform(double a, double b, double coupling) {
    DisorderSpec s;
    s.kind = DisorderKind::uniform;
    s.a = a;
    s.b = b;
    s.coupling = coupling;
    s.validate();
    return s;
}

DisorderSpec DisorderSpec::piecewise(std::vector<double> breakpoints,
                                     std::vector<double> densities, double coupling) {
    DisorderSpec s;
    s.kind = DisorderKind::piecewise;
    s.breakpoints = std::move(breakpoints);
    s.densities = std::move(densities);
    s.coupling = coupling;
    if (!s.breakpoints.empty()) {
        s.a = s.breakpoints.front();
        s.b = s.breakpoints.back();
    }
    s.validate();
    return s;
}

DisorderSpec DisorderSpec::constant(double value) {
    DisorderSpec s;
    s.kind = DisorderKind::constant;
    s.value = value;
    s.a = s.b = value;
    s.coupling = 1.0;
    return s;
}

void DisorderSpec::validate() const {
    if (kind == DisorderKind::constant) {
        if (!std::isfinite(value)) throw std::invalid_argument("constant potential not finite");
        return;
    }
    if (!(coupling > 0.0) || !std::isfinite(coupling))
        throw std::invalid_argument("coupling must be positive");
    if (kind == DisorderKind::uniform) {
        if (!std::isfinite(a) || !std::isfinite(b) || !(a < b))
            throw std::invalid_argument("uniform support requires finite a < b");
        return;
    }
    if (breakpoints.size() < 2 || densities.size() + 1 != breakpoints.size())
        throw std::invalid_argument("piecewise density needs k+1 breakpoints and k densities");
    double mass = 0.0;
    for (std::size_t i = 0; i < densities.size(); ++i) {
        const double w = breakpoints[i + 1] - breakpoints[i];
        if (!(w > 0.0) || !std::isfinite(w))
            throw std::invalid_argument("breakpoints must be finite and strictly increasing");
        if (!(densities[i] >= 0.0) || !std::isfinite(densities[i]))
            throw std::invalid_argument("densities must be finite and nonnegative");
        mass += densities[i] * w;
    }
    if (std::abs(mass - 1.0) > 1e-12) throw std::invalid_argument("density does not integrate to 1");
    if (a != breakpoints.front() || b != breakpoints.back())
        throw std::invalid_argument("piecewise support does not match breakpoints");
}

Interval DisorderSpec::scaled_support() const {
    if (kind == DisorderKind::constant) return {value, value};
    return {coupling * a, coupling * b};
}

void to_json(nlohmann::json& j, const DisorderSpec& s) {
    switch (s.kind) {
    case DisorderKind::uniform:
        j = {{"kind", "uniform"}, {"a", s.a}, {"b", s.b}, {"coupling", s.coupling}};
        break;
    case DisorderKind::piecewise:
        j = {{"kind", "piecewise"},
             {"breakpoints", s.breakpoints},
             {"densities", s.densities},
             {"coupling", s.coupling}};
        break;
    case DisorderKind::constant:
        j = {{"kind", "constant"}, {"value", s.value}};
        break;
    }
}

void from_json(const nlohmann::json& j, DisorderSpec& s) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "uniform") {
        s = DisorderSpec::uniform(j.at("a").get<double>(), j.at("b").get<double>(),
                                  j.value("coupling", 1.0));
    } else if (kind == "piecewise") {
        s = DisorderSpec::piecewise(j.at("breakpoints").get<std::vector<double>>(),
                                    j.at("densities").get<std::vector<double>>(),
                                    j.value("coupling", 1.0));
    } else if (kind == "constant") {
        s = DisorderSpec::constant(j.value("value", 0.0));
    } else {
        throw std::invalid_argument("unknown disorder kind: " + kind);
    }
}

// ---------------------------------------------------------------------------
// Sampling

DisorderRealization sample_disorder(const DisorderSpec& spec, const LatticeBox& box,
                                    std::uint64_t seed) {
    spec.validate();
    DisorderRealization r;
    r.seed = seed;
    r.spec = spec;
    r.values.resize(box.volume());
    std::mt19937_64 engine(seed);

    switch (spec.kind) {
    case DisorderKind::constant:
        std::fill(r.values.begin(), r.values.end(), spec.value);
        break;
    case DisorderKind::uniform: {
        const double lo = spec.coupling * spec.a;
        const double hi = spec.coupling * spec.b;
        for (double& v : r.values) {
            v = lo + (hi - lo) * unit_uniform(engine);
            v = std::clamp(v, lo, hi);
        }
        break;
    }
    case DisorderKind::piecewise: {
        std::vector<double> cdf(spec.densities.size() + 1, 0.0);
        for (std::size_t i = 0; i < spec.densities.size(); ++i)
            cdf[i + 1] = cdf[i] + spec.densities[i] * (spec.breakpoints[i + 1] - spec.breakpoints[i]);
        const double total = cdf.back();
        for (double& v : r.values) {
            const double u = unit_uniform(engine) * total;
            auto it = std::upper_bound(cdf.begin() + 1, cdf.end() - 1, u);
            std::size_t piece = std::size_t(it - cdf.begin()) - 1;
            while (spec.densities[piece] == 0.0 && piece + 1 < spec.densities.size()) ++piece;
            const double x0 = spec.breakpoints[piece];
            const double x1 = spec.breakpoints[piece + 1];
            double x = x0 + (u - cdf[piece]) / spec.densities[piece];
            x = std::clamp(x, x0, x1);
            v = spec.coupling * x;
        }
        break;
    }
    }
    return r;
}

// ---------------------------------------------------------------------------
// HamiltonianMatrix

HamiltonianMatrix::HamiltonianMatrix(std::vector<double> diagonal, std::vector<Coupling> couplings)
    : diag_(std::move(diagonal)), couplings_(std::move(couplings)) {
    if (diag_.empty()) throw std::invalid_argument("empty matrix");
    for (auto& c : couplings_) {
        if (c.row > c.col) std::swap(c.row, c.col);
        if (c.row == c.col || c.col >= diag_.size())
            throw std::invalid_argument("coupling outside the strict upper triangle");
    }
    std::sort(couplings_.begin(), couplings_.end(), [](const Coupling& x, const Coupling& y) {
        return x.row != y.row ? x.row < y.row : x.col < y.col;
    });
    for (std::size_t i = 1; i < couplings_.size(); ++i) {
        if (couplings_[i].row == couplings_[i - 1].row && couplings_[i].col == couplings_[i - 1].col)
            throw std::invalid_argument("duplicate coupling");
    }
    analyze();
}

HamiltonianMatrix HamiltonianMatrix::from_dense(std::size_t n, std::span<const double> a) {
    if (a.size() != n * n) throw std::invalid_argument("dense matrix size mismatch");
    std::vector<double> diag(n);
    std::vector<Coupling> cs;
    for (std::size_t i = 0; i < n; ++i) {
        diag[i] = a[i * n + i];
        for (std::size_t j = i + 1; j < n; ++j)
            if (a[i * n + j] != 0.0) cs.push_back({i, j, a[i * n + j]});
    }
    return HamiltonianMatrix(std::move(diag), std::move(cs));
}

void HamiltonianMatrix::analyze() {
    const std::size_t n = diag_.size();
    std::vector<double> rowsum(n);
    for (std::size_t i = 0; i < n; ++i) rowsum[i] = std::abs(diag_[i]);
    bool chain = true;
    bool corner = false;
    for (const auto& c : couplings_) {
        rowsum[c.row] += std::abs(c.value);
        rowsum[c.col] += std::abs(c.value);
        if (c.col == c.row + 1) continue;
        if (n >= 3 && c.row == 0 && c.col == n - 1) {
            corner = true;
            continue;
        }
        chain = false;
    }
    norm_inf_ = *std::max_element(rowsum.begin(), rowsum.end());

    if (!chain) {
        structure_ = MatrixStructure::general;
        return;
    }
    structure_ = corner ? MatrixStructure::periodic_chain : MatrixStructure::tridiagonal;
    chain_off_.assign(n > 0 ? n - 1 : 0, 0.0);
    for (const auto& c : couplings_) {
        if (c.col == c.row + 1)
            chain_off_[c.row] = c.value;
        else
            chain_corner_ = c.value;
    }
}

double HamiltonianMatrix::entry(std::size_t i, std::size_t j) const {
    if (i == j) return diag_.at(i);
    if (i > j) std::swap(i, j);
    auto it = std::lower_bound(couplings_.begin(), couplings_.end(), std::pair{i, j},
                               [](const Coupling& c, const std::pair<std::size_t, std::size_t>& key) {
                                   return c.row != key.first ? c.row < key.first : c.col < key.second;
                               });
    if (it != couplings_.end() && it->row == i && it->col == j) return it->value;
    return 0.0;
}

std::vector<double> HamiltonianMatrix::to_dense() const {
    const std::size_t n = size();
    std::vector<double> a(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] = diag_[i];
    for (const auto& c : couplings_) {
        a[c.row * n + c.col] = c.value;
        a[c.col * n + c.row] = c.value;
    }
    return a;
}

void HamiltonianMatrix::multiply(std::span<const double> x, std::span<double> y) const {
    const std::size_t n = size();
    if (x.size() != n || y.size() != n) throw std::invalid_argument("vector length mismatch");
    for (std::size_t i = 0; i < n; ++i) y[i] = diag_[i] * x[i];
    for (const auto& c : couplings_) {
        y[c.row] += c.value * x[c.col];
        y[c.col] += c.value * x[c.row];
    }
}

std::size_t HamiltonianMatrix::row_degree(std::size_t i) const {
    std::size_t k = 0;
    for (const auto& c : couplings_)
        if ((c.row == i || c.col == i) && c.value != 0.0) ++k;
    return k;
}

double HamiltonianMatrix::trace() const {
    double t = 0.0;
    for (double d : diag_) t += d;
    return t;
}

HamiltonianMatrix assemble_hamiltonian(const LatticeBox& box, std::span<const double> omega,
                                       Boundary boundary, double hopping) {
    const std::size_t n = box.volume();
    if (omega.size() != n) throw std::invalid_argument("potential length does not match box volume");
    std::vector<Coupling> cs;
    if (hopping != 0.0) {
        cs.reserve(n * std::size_t(box.dim()));
        for (std::size_t i = 0; i < n; ++i) {
            const auto nb = boundary == Boundary::periodic ? box.torus_neighbors(i) : box.open_neighbors(i);
            for (std::size_t j : nb)
                if (j > i) cs.push_back({i, j, hopping});
        }
    }
    return HamiltonianMatrix(std::vector<double>(omega.begin(), omega.end()), std::move(cs));
}

HamiltonianMatrix assemble_hamiltonian(const LatticeBox& box, const DisorderRealization& omega,
                                       Boundary boundary, double hopping) {
    return assemble_hamiltonian(box, std::span<const double>(omega.values), boundary, hopping);
}

Interval spectrum_bounds(const DisorderSpec& spec, int dim) {
    if (dim <= 0) throw std::invalid_argument("invalid lattice");
    spec.validate();
    const Interval s = spec.scaled_support();
    return {s.lo - 2.0 * dim, s.hi + 2.0 * dim};
}

std::vector<Interval> gershgorin_union(const HamiltonianMatrix& h) {
    const std::size_t n = h.size();
    std::vector<double> radius(n, 0.0);
    for (const auto& c : h.couplings()) {
        radius[c.row] += std::abs(c.value);
        radius[c.col] += std::abs(c.value);
    }
    std::vector<Interval> discs(n);
    for (std::size_t i = 0; i < n; ++i) discs[i] = {h.diagonal()[i] - radius[i], h.diagonal()[i] + radius[i]};
    std::sort(discs.begin(), discs.end(), [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
    std::vector<Interval> merged;
    for (const auto& d : discs) {
        if (!merged.empty() && d.lo <= merged.back().hi)
            merged.back().hi = std::max(merged.back().hi, d.hi);
        else
            merged.push_back(d);
    }
    return merged;
}

}  // namespace anderson
