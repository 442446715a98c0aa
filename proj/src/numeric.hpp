#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include <Eigen/Dense>

namespace gridfreq::detail {

/// One implicit trapezoidal step of a small autonomous system x' = f(x),
/// solved by Newton with a forward-difference Jacobian.
template <std::size_t N, class F>
std::array<double, N> trapezoid_step(F&& f, const std::array<double, N>& x0, double dt) {
    using Vec = Eigen::Matrix<double, static_cast<int>(N), 1>;
    using Mat = Eigen::Matrix<double, static_cast<int>(N), static_cast<int>(N)>;
    const auto f0 = f(x0);
    std::array<double, N> x = x0;
    auto residual = [&](const std::array<double, N>& xs) {
        const auto fx = f(xs);
        Vec r;
        for (std::size_t i = 0; i < N; ++i) {
            r(static_cast<int>(i)) = xs[i] - x0[i] - 0.5 * dt * (fx[i] + f0[i]);
        }
        return r;
    };
    for (int it = 0; it < 20; ++it) {
        const Vec r = residual(x);
        if (r.cwiseAbs().maxCoeff() < 1e-13) {
            break;
        }
        Mat jac;
        for (std::size_t j = 0; j < N; ++j) {
            auto xp = x;
            const double h = 1e-7 * std::max(1.0, std::abs(x[j]));
            xp[j] += h;
            jac.col(static_cast<int>(j)) = (residual(xp) - r) / h;
        }
        const Vec dx = jac.partialPivLu().solve(-r);
        for (std::size_t i = 0; i < N; ++i) {
            x[i] += dx(static_cast<int>(i));
        }
        if (dx.cwiseAbs().maxCoeff() < 1e-14) {
            break;
        }
    }
    return x;
}

}  // namespace gridfreq::detail
