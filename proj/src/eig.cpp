#include "anderson/eig.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include "detail/linalg.hpp"

namespace anderson {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kResidualTol = 1e-10;
constexpr double kFullSolveFraction = 0.2;

// Flip each vector so that its largest-magnitude entry (first on ties) is
// positive; makes vectors reproducible across solution paths.
void normalize_signs(SpectralData& s) {
    const std::size_t n = s.dimension;
    for (std::size_t k = 0; k < s.count(); ++k) {
        double* v = s.vectors.data() + k * n;
        std::size_t arg = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
        if (v[arg] < 0.0)
            for (std::size_t i = 0; i < n; ++i) v[i] = -v[i];
    }
}

double max_residual(const HamiltonianMatrix& h, const SpectralData& s) {
    const std::size_t n = s.dimension;
    std::vector<double> hv(n);
    double worst = 0.0;
    for (std::size_t k = 0; k < s.count(); ++k) {
        auto v = s.vector(k);
        h.multiply(v, hv);
        for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(hv[i] - s.values[k] * v[i]));
    }
    return worst;
}

double max_orthogonality_defect(const SpectralData& s) {
    double worst = 0.0;
    for (std::size_t i = 0; i < s.count(); ++i) {
        auto vi = s.vector(i);
        for (std::size_t j = i; j < s.count(); ++j) {
            auto vj = s.vector(j);
            const double dot = std::inner_product(vi.begin(), vi.end(), vj.begin(), 0.0);
            worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
        }
    }
    return worst;
}

void sort_spectrum(SpectralData& s) {
    const std::size_t m = s.values.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s.values[a] < s.values[b]; });
    std::vector<double> vals(m);
    for (std::size_t k = 0; k < m; ++k) vals[k] = s.values[order[k]];
    s.values = std::move(vals);
    if (s.has_vectors()) {
        const std::size_t n = s.dimension;
        std::vector<double> vecs(s.vectors.size());
        for (std::size_t k = 0; k < m; ++k)
            std::copy_n(s.vectors.begin() + order[k] * n, n, vecs.begin() + k * n);
        s.vectors = std::move(vecs);
    }
}

}  // namespace

namespace detail {

// Counting and inverse iteration on a chain: the matrix itself for tridiagonal
// and periodic-chain structures, or its Householder tridiagonal form.
class SliceKernel {
public:
    explicit SliceKernel(const HamiltonianMatrix& h) : norm_(h.norm_inf()), n_(h.size()) {
        if (h.structure() == MatrixStructure::general) {
            reduction_ = tridiagonalize(h.to_dense(), n_);
            diag_ = reduction_->diag;
            off_ = reduction_->off;
            corner_ = 0.0;
            periodic_ = false;
        } else {
            diag_.assign(h.diagonal().begin(), h.diagonal().end());
            off_ = h.chain_offdiagonal();
            corner_ = h.chain_corner();
            periodic_ = h.structure() == MatrixStructure::periodic_chain;
        }
        off2_.resize(off_.size());
        for (std::size_t i = 0; i < off_.size(); ++i) off2_[i] = off_[i] * off_[i];
        floor_ = kPivotFloor * std::max(norm_, std::numeric_limits<double>::min());
        lo_ = std::numeric_limits<double>::infinity();
        hi_ = -lo_;
        for (std::size_t i = 0; i < n_; ++i) {
            double r = 0.0;
            if (i > 0) r += std::abs(off_[i - 1]);
            if (i + 1 < n_) r += std::abs(off_[i]);
            if (periodic_ && (i == 0 || i + 1 == n_)) r += std::abs(corner_);
            lo_ = std::min(lo_, diag_[i] - r);
            hi_ = std::max(hi_, diag_[i] + r);
        }
        const double pad = 4.0 * kEps * std::max(1.0, norm_) + 2.0 * floor_;
        lo_ -= pad;
        hi_ += pad;
    }

    std::size_t size() const { return n_; }
    double norm() const { return norm_; }

    InertiaCount count(double e, ShiftDirection dir) const {
        InertiaCount out;
        out.probe = e;
        for (int attempt = 0; attempt < 4; ++attempt) {
            auto c = chain_inertia(diag_, off_, off2_, corner_, periodic_, out.probe, floor_,
                                   PivotPolicy::report);
            if (!c.floor_hit) {
                out.below = c.below;
                return out;
            }
            out.shift_perturbed = true;
            const double step = kEndpointShift * std::max(norm_, 1.0) * double(1 << attempt);
            out.probe = e + (dir == ShiftDirection::up ? step : -step);
        }
        out.below = chain_inertia(diag_, off_, off2_, corner_, periodic_, out.probe, floor_,
                                  PivotPolicy::clamp)
                        .below;
        return out;
    }

    void counts_clamped(std::span<const double> probes, std::span<std::size_t> out) const {
        for (std::size_t k = 0; k < probes.size(); k += kBatch) {
            const std::size_t m = std::min(kBatch, probes.size() - k);
            chain_inertia_batch(diag_, off_, off2_, corner_, periodic_, probes.subspan(k, m), floor_,
                                out.subspan(k, m));
        }
    }

    std::vector<double> eigenvalues(std::size_t first, std::size_t last) const {
        std::vector<double> out(last - first, 0.0);
        if (first >= last) return out;
        bisect(lo_, hi_, 0, n_, first, last, out);
        return out;
    }

    // Eigenvectors of the chain for sorted eigenvalues; returned in chain
    // coordinates (before back-transformation).
    std::vector<double> chain_vectors(std::span<const double> values, std::size_t first_index) const {
        const std::size_t m = values.size();
        std::vector<double> vecs(m * n_, 0.0);
        const double ortol = 1e-3 * norm_;
        const double pertol = 10.0 * kEps * std::max(norm_, 1.0);
        std::vector<std::size_t> perm;
        if (periodic_) perm = fold_permutation(n_);
        const std::size_t band = periodic_ ? 2 : 1;

        std::size_t cluster_start = 0;
        double prev_sigma = 0.0;
        std::vector<double> x(n_), y(n_), tmp(n_);
        for (std::size_t k = 0; k < m; ++k) {
            double sigma = values[k];
            if (k > 0) {
                if (values[k] - values[k - 1] > ortol) cluster_start = k;
                if (sigma - prev_sigma < pertol) sigma = prev_sigma + pertol;
            }
            prev_sigma = sigma;

            BandLU lu(n_, band, band);
            fill_shifted(lu, sigma, perm);
            lu.factor(kEps * std::max(norm_, 1.0));

            std::mt19937_64 rng(0x9e3779b97f4a7c15ULL ^ (first_index + k));
            for (auto& xi : x) xi = double(rng() >> 11) * 0x1.0p-53 - 0.5;
            normalize(x);

            for (int iter = 0; iter < 8; ++iter) {
                // Solve in folded coordinates when periodic.
                if (periodic_) {
                    for (std::size_t p = 0; p < n_; ++p) tmp[p] = x[perm[p]];
                    lu.solve(tmp);
                    for (std::size_t p = 0; p < n_; ++p) y[perm[p]] = tmp[p];
                } else {
                    y = x;
                    lu.solve(y);
                }
                for (std::size_t j = cluster_start; j < k; ++j) {
                    const double* vj = vecs.data() + j * n_;
                    const double dot = std::inner_product(y.begin(), y.end(), vj, 0.0);
                    for (std::size_t i = 0; i < n_; ++i) y[i] -= dot * vj[i];
                }
                x = y;
                normalize(x);
                if (iter >= 1 && chain_residual(x, values[k]) <= 0.01 * kResidualTol * norm_) break;
            }
            std::copy(x.begin(), x.end(), vecs.begin() + k * n_);
        }
        return vecs;
    }

    bool reduced() const { return reduction_.has_value(); }
    void back_transform(std::span<double> v) const {
        if (reduction_) reduction_->apply_q(v);
    }

private:
    struct Bracket {
        double lo, hi;
        std::size_t clo, chi;  // eigenvalues with indices [clo, chi) lie in [lo, hi)
    };

    // Breadth-first bisection; midpoints of up to kBatch brackets are counted
    // together.
    void bisect(double lo, double hi, std::size_t clo, std::size_t chi, std::size_t first,
                std::size_t last, std::vector<double>& out) const {
        std::vector<Bracket> work{{lo, hi, clo, chi}};
        std::vector<Bracket> pending;
        double mids[kBatch];
        std::size_t counts[kBatch];
        while (!work.empty()) {
            pending.clear();
            while (!work.empty() && pending.size() < kBatch) {
                Bracket b = work.back();
                work.pop_back();
                if (b.chi <= first || b.clo >= last || b.clo >= b.chi) continue;
                const double tol = 2.0 * kEps * (std::abs(b.lo) + std::abs(b.hi)) + 4.0 * kEps * norm_;
                const double mid = 0.5 * (b.lo + b.hi);
                if (b.hi - b.lo <= tol || mid <= b.lo || mid >= b.hi) {
                    for (std::size_t i = std::max(b.clo, first); i < std::min(b.chi, last); ++i)
                        out[i - first] = mid;
                    continue;
                }
                mids[pending.size()] = mid;
                pending.push_back(b);
            }
            if (pending.empty()) continue;
            chain_inertia_batch(diag_, off_, off2_, corner_, periodic_,
                                std::span<const double>(mids, pending.size()), floor_,
                                std::span<std::size_t>(counts, pending.size()));
            for (std::size_t k = 0; k < pending.size(); ++k) {
                const Bracket& b = pending[k];
                const std::size_t cm = std::clamp(counts[k], b.clo, b.chi);
                work.push_back({b.lo, mids[k], b.clo, cm});
                work.push_back({mids[k], b.hi, cm, b.chi});
            }
        }
    }

    void fill_shifted(BandLU& lu, double sigma, const std::vector<std::size_t>& perm) const {
        if (!periodic_) {
            for (std::size_t i = 0; i < n_; ++i) {
                lu.set(i, i, diag_[i] - sigma);
                if (i + 1 < n_) {
                    lu.set(i, i + 1, off_[i]);
                    lu.set(i + 1, i, off_[i]);
                }
            }
            return;
        }
        std::vector<std::size_t> inv(n_);
        for (std::size_t p = 0; p < n_; ++p) inv[perm[p]] = p;
        for (std::size_t i = 0; i < n_; ++i) lu.set(inv[i], inv[i], diag_[i] - sigma);
        for (std::size_t i = 0; i + 1 < n_; ++i) {
            lu.set(inv[i], inv[i + 1], off_[i]);
            lu.set(inv[i + 1], inv[i], off_[i]);
        }
        lu.set(inv[0], inv[n_ - 1], corner_);
        lu.set(inv[n_ - 1], inv[0], corner_);
    }

    double chain_residual(const std::vector<double>& x, double lambda) const {
        double worst = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            double r = (diag_[i] - lambda) * x[i];
            if (i > 0) r += off_[i - 1] * x[i - 1];
            if (i + 1 < n_) r += off_[i] * x[i + 1];
            if (periodic_) {
                if (i == 0) r += corner_ * x[n_ - 1];
                if (i + 1 == n_) r += corner_ * x[0];
            }
            worst = std::max(worst, std::abs(r));
        }
        return worst;
    }

    static void normalize(std::vector<double>& x) {
        double s = 0.0;
        for (double v : x) s += v * v;
        s = std::sqrt(s);
        if (s == 0.0 || !std::isfinite(s)) {
            std::fill(x.begin(), x.end(), 1.0 / std::sqrt(double(x.size())));
            return;
        }
        for (double& v : x) v /= s;
    }

    double norm_;
    std::size_t n_;
    std::optional<Tridiagonalization> reduction_;
    std::vector<double> diag_, off_, off2_;
    double corner_ = 0.0;
    bool periodic_ = false;
    double floor_ = 0.0;
    double lo_ = 0.0, hi_ = 0.0;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Full solve

SpectralData eigen_full(const HamiltonianMatrix& h, bool want_vectors) {
    const std::size_t n = h.size();
    SpectralData s;
    s.dimension = n;

    if (!want_vectors && h.structure() == MatrixStructure::periodic_chain) {
        SpectrumSlicer slicer(h);
        s.values = slicer.eigenvalues_by_index(0, n);
    } else if (h.structure() == MatrixStructure::general) {
        auto t = detail::tridiagonalize(h.to_dense(), n);
        std::vector<double> z;
        if (want_vectors) z = t.form_q();
        s.values = t.diag;
        detail::implicit_ql(s.values, t.off, z);
        s.vectors = std::move(z);
    } else if (h.structure() == MatrixStructure::tridiagonal) {
        std::vector<double> z;
        if (want_vectors) {
            z.assign(n * n, 0.0);
            for (std::size_t i = 0; i < n; ++i) z[i * n + i] = 1.0;
        }
        s.values.assign(h.diagonal().begin(), h.diagonal().end());
        detail::implicit_ql(s.values, h.chain_offdiagonal(), z);
        s.vectors = std::move(z);
    } else {
        // periodic chain with vectors: dense reduction
        auto t = detail::tridiagonalize(h.to_dense(), n);
        std::vector<double> z = t.form_q();
        s.values = t.diag;
        detail::implicit_ql(s.values, t.off, z);
        s.vectors = std::move(z);
    }

    sort_spectrum(s);
    s.indices.resize(n);
    std::iota(s.indices.begin(), s.indices.end(), 0);
    if (s.has_vectors()) {
        normalize_signs(s);
        s.residual_bound = max_residual(h, s);
    } else {
        s.residual_bound = double(n) * kEps * h.norm_inf();
    }
    return s;
}

// ---------------------------------------------------------------------------
// Counting

InertiaCount inertia_count(const HamiltonianMatrix& h, double energy, ShiftDirection direction) {
    if (h.structure() != MatrixStructure::general) {
        detail::SliceKernel kernel(h);
        return kernel.count(energy, direction);
    }
    const std::size_t n = h.size();
    const auto dense = h.to_dense();
    const double norm = std::max(h.norm_inf(), std::numeric_limits<double>::min());
    const double floor = kPivotFloor * norm;
    InertiaCount out;
    out.probe = energy;
    for (int attempt = 0; attempt < 4; ++attempt) {
        auto c = detail::bunch_kaufman_inertia(dense, n, out.probe, floor);
        if (!c.floor_hit) {
            out.below = c.below;
            return out;
        }
        out.shift_perturbed = true;
        const double step = kEndpointShift * std::max(norm, 1.0) * double(1 << attempt);
        out.probe = energy + (direction == ShiftDirection::up ? step : -step);
    }
    throw std::runtime_error("inertia count: pivot below floor after repeated shifts");
}

std::size_t count_below(const HamiltonianMatrix& h, double energy) {
    return inertia_count(h, energy, ShiftDirection::up).below;
}

std::size_t count_in_interval(const HamiltonianMatrix& h, Interval window) {
    if (window.lo > window.hi) throw std::invalid_argument("interval with lo > hi");
    // An eigenvalue sitting on an endpoint zeroes a pivot, so the perturbation
    // rule moves hi up and lo down: both endpoints are included.
    const auto upper = inertia_count(h, window.hi, ShiftDirection::up);
    const auto lower = inertia_count(h, window.lo, ShiftDirection::down);
    return upper.below >= lower.below ? upper.below - lower.below : 0;
}

// ---------------------------------------------------------------------------
// Slicer

SpectrumSlicer::SpectrumSlicer(const HamiltonianMatrix& h)
    : h_(&h), kernel_(std::make_unique<detail::SliceKernel>(h)) {}
SpectrumSlicer::~SpectrumSlicer() = default;
SpectrumSlicer::SpectrumSlicer(SpectrumSlicer&&) noexcept = default;
SpectrumSlicer& SpectrumSlicer::operator=(SpectrumSlicer&&) noexcept = default;

std::size_t SpectrumSlicer::size() const { return kernel_->size(); }

InertiaCount SpectrumSlicer::count_below(double energy, ShiftDirection direction) const {
    return kernel_->count(energy, direction);
}

std::size_t SpectrumSlicer::count_in(Interval window) const {
    if (window.lo > window.hi) throw std::invalid_argument("interval with lo > hi");
    const auto upper = kernel_->count(window.hi, ShiftDirection::up);
    const auto lower = kernel_->count(window.lo, ShiftDirection::down);
    return upper.below >= lower.below ? upper.below - lower.below : 0;
}

std::vector<std::size_t> SpectrumSlicer::counts_on_grid(std::span<const double> energies) const {
    std::vector<std::size_t> out(energies.size());
    kernel_->counts_clamped(energies, out);
    return out;
}

std::vector<double> SpectrumSlicer::eigenvalues_by_index(std::size_t first, std::size_t last) const {
    last = std::min(last, size());
    if (first >= last) return {};
    return kernel_->eigenvalues(first, last);
}

SpectralData SpectrumSlicer::eigenpairs_by_index(std::size_t first, std::size_t last) const {
    const std::size_t n = size();
    last = std::min(last, n);
    SpectralData s;
    s.dimension = n;
    if (first >= last) return s;

    s.values = kernel_->eigenvalues(first, last);
    s.vectors = kernel_->chain_vectors(s.values, first);
    for (std::size_t k = 0; k < s.values.size(); ++k)
        kernel_->back_transform(std::span<double>(s.vectors.data() + k * n, n));
    s.indices.resize(s.values.size());
    std::iota(s.indices.begin(), s.indices.end(), first);
    normalize_signs(s);
    s.residual_bound = max_residual(*h_, s);

    const double norm = h_->norm_inf();
    if (s.residual_bound > kResidualTol * norm || max_orthogonality_defect(s) > kResidualTol) {
        auto full = eigen_full(*h_, true);
        SpectralData f;
        f.dimension = n;
        f.values.assign(full.values.begin() + first, full.values.begin() + last);
        f.vectors.assign(full.vectors.begin() + first * n, full.vectors.begin() + last * n);
        f.indices = s.indices;
        f.residual_bound = max_residual(*h_, f);
        f.used_fallback = true;
        return f;
    }
    return s;
}

SpectrumSlicer::WindowLevels SpectrumSlicer::levels_in_window(Interval window,
                                                              std::size_t extra_above) const {
    WindowLevels w;
    w.first_index = kernel_->count(window.lo, ShiftDirection::down).below;
    w.in_window = count_in(window);
    w.values = eigenvalues_by_index(w.first_index, w.first_index + w.in_window + extra_above);
    return w;
}

SpectralData eigenpairs_in_window(const HamiltonianMatrix& h, Interval window) {
    if (!std::isfinite(window.lo) || !std::isfinite(window.hi))
        throw std::invalid_argument("window must be bounded");
    const std::size_t n = h.size();
    SpectralData empty;
    empty.dimension = n;
    if (window.lo > window.hi) return empty;

    SpectrumSlicer slicer(h);
    const std::size_t first = slicer.count_below(window.lo, ShiftDirection::down).below;
    const std::size_t k = slicer.count_in(window);
    if (k == 0) return empty;

    if (double(k) > kFullSolveFraction * double(n)) {
        auto full = eigen_full(h, true);
        SpectralData f;
        f.dimension = n;
        f.values.assign(full.values.begin() + first, full.values.begin() + first + k);
        f.vectors.assign(full.vectors.begin() + first * n, full.vectors.begin() + (first + k) * n);
        f.indices.resize(k);
        std::iota(f.indices.begin(), f.indices.end(), first);
        f.residual_bound = max_residual(h, f);
        f.used_fallback = true;
        return f;
    }
    return slicer.eigenpairs_by_index(first, first + k);
}

}  // namespace anderson
