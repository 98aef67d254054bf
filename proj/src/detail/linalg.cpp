#include "detail/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "anderson/eig.hpp"

namespace anderson::detail {

namespace {
constexpr double kEps = std::numeric_limits<double>::epsilon();
}

// ---------------------------------------------------------------------------
// Householder tridiagonalization

Tridiagonalization tridiagonalize(std::vector<double> a, std::size_t n) {
    if (a.size() != n * n) throw std::invalid_argument("tridiagonalize: size mismatch");
    Tridiagonalization t;
    t.n = n;
    t.diag.assign(n, 0.0);
    t.off.assign(n > 0 ? n - 1 : 0, 0.0);
    if (n == 0) return t;
    if (n == 1) {
        t.diag[0] = a[0];
        return t;
    }

    std::vector<double> p(n), w(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        const std::size_t m = n - k - 1;
        const std::size_t base = k + 1;
        std::vector<double> v(m);
        double tail = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            v[i] = a[(base + i) * n + k];
            if (i > 0) tail += v[i] * v[i];
        }
        t.diag[k] = a[k * n + k];
        if (tail == 0.0) {
            t.off[k] = v[0];
            t.tau.push_back(0.0);
            t.reflector.push_back({});
            continue;
        }
        const double x0 = v[0];
        const double alpha = -std::copysign(std::sqrt(x0 * x0 + tail), x0);
        v[0] = x0 - alpha;
        const double vtv = v[0] * v[0] + tail;
        const double tau = 2.0 / vtv;

        // p = tau * B v over the lower triangle of the trailing block B.
        std::fill(p.begin(), p.begin() + m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double* row = &a[(base + i) * n + base];
            const double vi = v[i];
            double sum = 0.0;
            for (std::size_t j = 0; j < i; ++j) sum += row[j] * v[j];
            for (std::size_t j = 0; j < i; ++j) p[j] += row[j] * vi;
            p[i] += sum + row[i] * vi;
        }
        double pv = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            p[i] *= tau;
            pv += p[i] * v[i];
        }
        const double kk = 0.5 * tau * pv;
        for (std::size_t i = 0; i < m; ++i) w[i] = p[i] - kk * v[i];
        for (std::size_t i = 0; i < m; ++i) {
            double* row = &a[(base + i) * n + base];
            const double vi = v[i];
            const double wi = w[i];
            for (std::size_t j = 0; j <= i; ++j) row[j] -= vi * w[j] + wi * v[j];
        }
        t.off[k] = alpha;
        t.tau.push_back(tau);
        t.reflector.push_back(std::move(v));
    }
    t.diag[n - 2] = a[(n - 2) * n + (n - 2)];
    t.diag[n - 1] = a[(n - 1) * n + (n - 1)];
    t.off[n - 2] = a[(n - 1) * n + (n - 2)];
    return t;
}

void Tridiagonalization::apply_q(std::span<double> x) const {
    for (std::size_t k = tau.size(); k-- > 0;) {
        if (tau[k] == 0.0) continue;
        const auto& v = reflector[k];
        double* xs = x.data() + k + 1;
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * xs[i];
        s *= tau[k];
        for (std::size_t i = 0; i < v.size(); ++i) xs[i] -= s * v[i];
    }
}

std::vector<double> Tridiagonalization::form_q() const {
    std::vector<double> q(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) q[i * n + i] = 1.0;
    for (std::size_t k = tau.size(); k-- > 0;) {
        if (tau[k] == 0.0) continue;
        const auto& v = reflector[k];
        for (std::size_t j = k + 1; j < n; ++j) {
            double* col = q.data() + j * n + k + 1;
            double s = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * col[i];
            s *= tau[k];
            if (s == 0.0) continue;
            for (std::size_t i = 0; i < v.size(); ++i) col[i] -= s * v[i];
        }
    }
    return q;
}

// ---------------------------------------------------------------------------
// Implicit QL

void implicit_ql(std::vector<double>& d, std::vector<double> off, std::vector<double>& z) {
    const std::size_t n = d.size();
    if (n <= 1) return;
    std::vector<double> e(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) e[i] = off[i];
    const bool vectors = !z.empty();

    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        for (;;) {
            std::size_t m = l;
            for (; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= kEps * dd) break;
            }
            if (m == l) break;
            if (iter++ == 30) throw ConvergenceError("implicit QL did not converge", l);

            double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            double r = std::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
            double s = 1.0, c = 1.0, p = 0.0;
            bool deflated = false;
            for (long i = long(m) - 1; i >= long(l); --i) {
                const double f = s * e[i];
                const double b = c * e[i];
                r = std::hypot(f, g);
                e[i + 1] = r;
                if (r == 0.0) {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if (vectors) {
                    double* zi = z.data() + std::size_t(i) * n;
                    double* zi1 = zi + n;
                    for (std::size_t k = 0; k < n; ++k) {
                        const double t = zi1[k];
                        zi1[k] = s * zi[k] + c * t;
                        zi[k] = c * zi[k] - s * t;
                    }
                }
            }
            if (deflated) continue;
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

// ---------------------------------------------------------------------------
// Inertia kernels

ChainCount chain_inertia(std::span<const double> diag, std::span<const double> off,
                         std::span<const double> off2, double corner, bool periodic,
                         double e, double floor, PivotPolicy policy) {
    const std::size_t n = diag.size();
    ChainCount out;
    auto admit = [&](double& pivot) {
        if (std::abs(pivot) < floor) {
            if (policy == PivotPolicy::report) {
                out.floor_hit = true;
                return false;
            }
            pivot = -floor;
        }
        if (pivot < 0.0) ++out.below;
        return true;
    };

    if (!periodic || n < 3) {
        double d = diag[0] - e;
        if (!admit(d)) return out;
        for (std::size_t i = 1; i < n; ++i) {
            d = (diag[i] - e) - off2[i - 1] / d;
            if (!admit(d)) return out;
        }
        return out;
    }

    // Bordered elimination: rows 0..n-2 form a tridiagonal block, the last row
    // and column carry the corner fill u.
    double d = diag[0] - e;
    double u = corner;
    double s = diag[n - 1] - e;
    for (std::size_t i = 0; i + 2 < n; ++i) {
        if (!admit(d)) return out;
        const double r = 1.0 / d;
        const double next_d = (diag[i + 1] - e) - off2[i] * r;
        const double next_u = (i + 2 == n - 1 ? off[n - 2] : 0.0) - off[i] * u * r;
        s -= u * u * r;
        d = next_d;
        u = next_u;
    }
    if (!admit(d)) return out;
    s -= u * u / d;
    admit(s);
    return out;
}

void chain_inertia_batch(std::span<const double> diag, std::span<const double> off,
                         std::span<const double> off2, double corner, bool periodic,
                         std::span<const double> probes, double floor, std::span<std::size_t> below) {
    const std::size_t n = diag.size();
    const std::size_t m = probes.size();
    if (m > kBatch) throw std::invalid_argument("chain_inertia_batch: too many probes");
    double e[kBatch], d[kBatch], u[kBatch], s[kBatch];
    std::size_t neg[kBatch];
    for (std::size_t b = 0; b < kBatch; ++b) {
        e[b] = b < m ? probes[b] : probes[0];
        neg[b] = 0;
    }
    auto admit = [&](std::size_t b) {
        if (std::abs(d[b]) < floor) d[b] = -floor;
        neg[b] += d[b] < 0.0;
    };

    if (!periodic || n < 3) {
        for (std::size_t b = 0; b < kBatch; ++b) {
            d[b] = diag[0] - e[b];
            admit(b);
        }
        for (std::size_t i = 1; i < n; ++i) {
            const double a = diag[i], q = off2[i - 1];
            for (std::size_t b = 0; b < kBatch; ++b) {
                d[b] = (a - e[b]) - q / d[b];
                admit(b);
            }
        }
    } else {
        for (std::size_t b = 0; b < kBatch; ++b) {
            d[b] = diag[0] - e[b];
            u[b] = corner;
            s[b] = diag[n - 1] - e[b];
        }
        for (std::size_t i = 0; i + 2 < n; ++i) {
            const double a = diag[i + 1], q = off2[i], o = off[i];
            const double fill = i + 2 == n - 1 ? off[n - 2] : 0.0;
            for (std::size_t b = 0; b < kBatch; ++b) {
                admit(b);
                const double r = 1.0 / d[b];
                const double nd = (a - e[b]) - q * r;
                const double nu = fill - o * u[b] * r;
                s[b] -= u[b] * u[b] * r;
                d[b] = nd;
                u[b] = nu;
            }
        }
        for (std::size_t b = 0; b < kBatch; ++b) {
            admit(b);
            s[b] -= u[b] * u[b] / d[b];
            d[b] = s[b];
            admit(b);
        }
    }
    for (std::size_t b = 0; b < m; ++b) below[b] = neg[b];
}

ChainCount bunch_kaufman_inertia(std::span<const double> a_in, std::size_t n, double e,
                                 double floor) {
    std::vector<double> a(a_in.begin(), a_in.end());
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] -= e;
    auto A = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
    auto swap_sym = [&](std::size_t p, std::size_t q) {
        if (p == q) return;
        for (std::size_t j = 0; j < n; ++j) std::swap(A(p, j), A(q, j));
        for (std::size_t i = 0; i < n; ++i) std::swap(A(i, p), A(i, q));
    };
    const double alpha = (1.0 + std::sqrt(17.0)) / 8.0;

    ChainCount out;
    std::size_t k = 0;
    while (k < n) {
        double lambda = 0.0;
        std::size_t r = k;
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::abs(A(i, k)) > lambda) {
                lambda = std::abs(A(i, k));
                r = i;
            }
        }
        const double akk = std::abs(A(k, k));
        int block = 1;
        if (akk < alpha * lambda) {
            double sigma = 0.0;
            for (std::size_t j = k; j < n; ++j)
                if (j != r) sigma = std::max(sigma, std::abs(A(j, r)));
            if (akk * sigma >= alpha * lambda * lambda) {
                block = 1;
            } else if (std::abs(A(r, r)) >= alpha * sigma) {
                swap_sym(k, r);
                block = 1;
            } else {
                swap_sym(k + 1, r);
                block = 2;
            }
        }

        if (block == 1) {
            const double p = A(k, k);
            if (std::abs(p) < floor) {
                out.floor_hit = true;
                return out;
            }
            if (p < 0.0) ++out.below;
            for (std::size_t i = k + 1; i < n; ++i) {
                const double l = A(i, k) / p;
                if (l == 0.0) continue;
                double* row = &A(i, 0);
                const double* src = &A(k, 0);
                for (std::size_t j = k + 1; j < n; ++j) row[j] -= l * src[j];
            }
            k += 1;
        } else {
            const double x = A(k, k), y = A(k + 1, k), z = A(k + 1, k + 1);
            const double det = x * z - y * y;
            if (std::abs(det) < floor * std::abs(y)) {
                out.floor_hit = true;
                return out;
            }
            if (det < 0.0)
                out.below += 1;
            else if (x + z < 0.0)
                out.below += 2;
            for (std::size_t i = k + 2; i < n; ++i) {
                const double ci = A(i, k), di = A(i, k + 1);
                const double l1 = (ci * z - di * y) / det;
                const double l2 = (di * x - ci * y) / det;
                double* row = &A(i, 0);
                const double* r0 = &A(k, 0);
                const double* r1 = &A(k + 1, 0);
                for (std::size_t j = k + 2; j < n; ++j) row[j] -= l1 * r0[j] + l2 * r1[j];
            }
            k += 2;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Banded LU

BandLU::BandLU(std::size_t n, std::size_t kl, std::size_t ku)
    : n_(n), kl_(kl), ku_(ku), width_(2 * kl + ku + 1),
      rows_(n * (2 * kl + ku + 1), 0.0), lower_(n * kl, 0.0), pivot_(n, 0) {}

void BandLU::set(std::size_t i, std::size_t j, double v) {
    if (j + kl_ < i || j > i + ku_) throw std::out_of_range("BandLU::set outside band");
    at(i, j) = v;
}

void BandLU::factor(double tiny) {
    for (std::size_t j = 0; j < n_; ++j) {
        const std::size_t last_row = std::min(n_ - 1, j + kl_);
        const std::size_t last_col = std::min(n_ - 1, j + kl_ + ku_);
        std::size_t p = j;
        double best = std::abs(at(j, j));
        for (std::size_t i = j + 1; i <= last_row; ++i) {
            if (std::abs(at(i, j)) > best) {
                best = std::abs(at(i, j));
                p = i;
            }
        }
        pivot_[j] = p;
        if (p != j)
            for (std::size_t c = j; c <= last_col; ++c) std::swap(at(j, c), at(p, c));
        if (std::abs(at(j, j)) < tiny) at(j, j) = at(j, j) < 0.0 ? -tiny : tiny;
        const double piv = at(j, j);
        for (std::size_t i = j + 1; i <= last_row; ++i) {
            const double f = at(i, j) / piv;
            lower_[j * kl_ + (i - j - 1)] = f;
            at(i, j) = 0.0;
            if (f == 0.0) continue;
            for (std::size_t c = j + 1; c <= last_col; ++c) at(i, c) -= f * at(j, c);
        }
    }
}

void BandLU::solve(std::span<double> b) const {
    for (std::size_t j = 0; j < n_; ++j) {
        if (pivot_[j] != j) std::swap(b[j], b[pivot_[j]]);
        const std::size_t last_row = std::min(n_ - 1, j + kl_);
        for (std::size_t i = j + 1; i <= last_row; ++i) b[i] -= lower_[j * kl_ + (i - j - 1)] * b[j];
    }
    for (std::size_t i = n_; i-- > 0;) {
        const std::size_t last_col = std::min(n_ - 1, i + kl_ + ku_);
        double s = b[i];
        for (std::size_t c = i + 1; c <= last_col; ++c) s -= at(i, c) * b[c];
        b[i] = s / at(i, i);
    }
}

std::vector<std::size_t> fold_permutation(std::size_t n) {
    std::vector<std::size_t> perm(n);
    for (std::size_t k = 0; k < n; ++k) perm[k] = (k % 2 == 0) ? k / 2 : n - 1 - k / 2;
    return perm;
}

}  // namespace anderson::detail
