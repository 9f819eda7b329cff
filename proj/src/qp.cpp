#include "partod/qp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace partod {

void project_simplex(Eigen::Ref<Eigen::VectorXd> v) {
    const auto n = static_cast<std::size_t>(v.size());
    require(n > 0, ErrorCode::InvalidInput, "empty simplex projection");
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0;
    double tau = 0.0;
    std::size_t rho = 0;
    for (std::size_t j = 0; j < n; ++j) {
        cumulative += u[j];
        const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (u[j] - candidate > 0.0) {
            rho = j + 1;
            tau = candidate;
        }
    }
    (void)rho;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v[i] = std::max(v[i] - tau, 0.0);
}

ProjectedGradientResult minimize_projected(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
    const std::function<void(Eigen::VectorXd&)>& project,
    Eigen::VectorXd x0, const ProjectedGradientOptions& options) {
    project(x0);
    ProjectedGradientResult result;
    result.x = std::move(x0);
    double f = objective(result.x);
    Eigen::VectorXd g = gradient(result.x);

    double step = 1.0;
    {
        // Probe a unit move to size the first step near 1/L.
        const double gnorm = g.norm();
        if (gnorm > 0.0) {
            Eigen::VectorXd probe = result.x - (1.0 / gnorm) * g;
            project(probe);
            Eigen::VectorXd gp = gradient(probe);
            const double dg = (gp - g).norm();
            if (dg > 0.0) step = (probe - result.x).norm() / dg;
        }
        if (!(step > 0.0) || !std::isfinite(step)) step = 1.0;
    }

    Eigen::VectorXd x_prev = result.x, g_prev = g;
    int stalled = 0;
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        result.iterations = iter + 1;

        double alpha = step;
        bool accepted = false;
        Eigen::VectorXd x_new;
        double f_new = f;
        for (int bt = 0; bt <= options.max_backtracks; ++bt) {
            x_new = result.x - alpha * g;
            project(x_new);
            const Eigen::VectorXd diff = x_new - result.x;
            const double decrease = g.dot(diff);
            f_new = objective(x_new);
            if (f_new <= f + options.armijo * decrease) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;  // stationary up to line-search resolution

        if (f - f_new <= options.progress_tolerance * (std::fabs(f) + 1.0)) {
            if (++stalled >= options.max_stalled_iterations) {
                result.x = std::move(x_new);
                f = f_new;
                break;
            }
        } else {
            stalled = 0;
        }

        const double move = (x_new - result.x).lpNorm<Eigen::Infinity>();
        x_prev = result.x;
        g_prev = g;
        result.x = std::move(x_new);
        f = f_new;
        g = gradient(result.x);

        if (move <= options.tolerance * (1.0 + result.x.lpNorm<Eigen::Infinity>())) break;

        // Barzilai-Borwein step for the next iteration.
        const Eigen::VectorXd s = result.x - x_prev;
        const Eigen::VectorXd y = g - g_prev;
        const double sy = s.dot(y);
        step = sy > 0.0 ? s.squaredNorm() / sy : alpha * 2.0;
        if (!(step > 0.0) || !std::isfinite(step)) step = alpha;
    }

    result.objective = f;
    return result;
}

} // namespace partod
