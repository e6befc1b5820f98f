#pragma once

// Globally adaptive 15-point Gauss-Kronrod quadrature (QUADPACK qag style):
// the interval with the largest error estimate is bisected until the summed
// estimate meets the tolerance.

#include <fracdecay/types.hpp>

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

namespace fracdecay::quad {

template <class Value>
struct Result
{
    Value value{};
    double error = 0.0;
    int intervals = 0;
    bool converged = false;
};

namespace detail {

template <class Real>
struct Kronrod15
{
    static constexpr long double xgk[8] = {
        0.991455371120812639206854697526329L, 0.949107912342758524526189684047851L,
        0.864864423359769072789712788640926L, 0.741531185599394439863864773280788L,
        0.586087235467691130294144845693013L, 0.405845151377397166906606412076961L,
        0.207784955007898467600689403773245L, 0.0L};
    static constexpr long double wgk[8] = {
        0.022935322010529224963732008058970L, 0.063092092629978553290700663189204L,
        0.104790010322250183839876322541518L, 0.140653259715525918745189590510238L,
        0.169004726639267902826583426598550L, 0.190350578064785409913256402421014L,
        0.204432940075298892414161999234649L, 0.209482141084727828012999174891714L};
    static constexpr long double wg[4] = {
        0.129484966168869693270611432679082L, 0.279705391489276667901467771423780L,
        0.381830050505118944950369775488975L, 0.417959183673469387755102040816327L};
};

template <class Real, class Value>
struct Panel
{
    Real a, b;
    Value value;
    double error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

template <class Real, class F>
auto kronrod_panel(F& f, Real a, Real b)
{
    using K = Kronrod15<Real>;
    using Value = decltype(f(a));
    const Real c = (a + b) / 2, h = (b - a) / 2;
    const Value fc = f(c);
    Value kron = fc * Real(K::wgk[7]);
    Value gauss = fc * Real(K::wg[3]);
    for (int j = 0; j < 7; ++j) {
        const Real dx = h * Real(K::xgk[j]);
        const Value s = f(c - dx) + f(c + dx);
        kron += s * Real(K::wgk[j]);
        if (j % 2 == 1) gauss += s * Real(K::wg[j / 2]);
    }
    kron *= h;
    gauss *= h;
    return Panel<Real, Value>{a, b, kron, static_cast<double>(std::abs(kron - gauss))};
}

} // namespace detail

/// Integral of f over [a, b] to max(abs_tol, rel_tol |I|). The initial panels
/// are given by `breaks` (sorted, including both ends).
template <class Real, class F>
auto integrate(F&& f, const std::vector<Real>& breaks, double rel_tol, double abs_tol, int max_panels = 4000)
{
    using Value = decltype(f(breaks.front()));
    using P = detail::Panel<Real, Value>;
    std::priority_queue<P> queue;
    Value total{};
    double err = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (!(breaks[i + 1] > breaks[i])) continue;
        auto p = detail::kronrod_panel(f, breaks[i], breaks[i + 1]);
        total += p.value;
        err += p.error;
        queue.push(p);
    }
    Result<Value> r;
    while (!queue.empty() && static_cast<int>(queue.size()) < max_panels) {
        const double target = std::max(abs_tol, rel_tol * static_cast<double>(std::abs(total)));
        if (err <= target) {
            r.converged = true;
            break;
        }
        const P worst = queue.top();
        const Real mid = (worst.a + worst.b) / 2;
        if (!(mid > worst.a && mid < worst.b)) break;
        queue.pop();
        auto left = detail::kronrod_panel(f, worst.a, mid);
        auto right = detail::kronrod_panel(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        queue.push(left);
        queue.push(right);
    }
    if (!r.converged) r.converged = err <= std::max(abs_tol, rel_tol * static_cast<double>(std::abs(total)));

    // Re-sum in interval order so the result does not depend on the
    // accumulation history.
    std::vector<P> panels;
    panels.reserve(queue.size());
    while (!queue.empty()) {
        panels.push_back(queue.top());
        queue.pop();
    }
    std::sort(panels.begin(), panels.end(), [](const P& x, const P& y) { return x.a < y.a; });
    Value sum{};
    double esum = 0.0;
    for (const auto& p : panels) {
        sum += p.value;
        esum += p.error;
    }
    r.value = sum;
    r.error = esum;
    r.intervals = static_cast<int>(panels.size());
    return r;
}

template <class Real, class F>
auto integrate(F&& f, Real a, Real b, double rel_tol, double abs_tol, int max_panels = 4000)
{
    return integrate(std::forward<F>(f), std::vector<Real>{a, b}, rel_tol, abs_tol, max_panels);
}

} // namespace fracdecay::quad
