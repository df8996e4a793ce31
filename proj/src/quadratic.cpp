#include "curvkit/quadratic.hpp"

#include <Eigen/Dense>
#include <stdexcept>

namespace curvkit {

QuadraticProblem QuadraticProblem::from_matrix(const Tensor& H, std::vector<double> theta0,
                                               double alpha, double rho) {
    const std::size_t n = H.rows();
    if (H.cols() != n || theta0.size() != n)
        throw std::invalid_argument("QuadraticProblem: H/theta0 size mismatch");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (std::abs(H.at(i, j) - H.at(j, i)) > 1e-12)
                throw std::invalid_argument("QuadraticProblem: H must be symmetric");
    Eigen::MatrixXd M(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) M(i, j) = H.at(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    QuadraticProblem p;
    p.alpha = alpha;
    p.rho = rho;
    p.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
    Eigen::Map<const Eigen::VectorXd> t0(theta0.data(), n);
    Eigen::VectorXd proj = es.eigenvectors().transpose() * t0;
    p.theta0.assign(proj.data(), proj.data() + n);
    return p;
}

std::vector<std::vector<double>> evolve(const QuadraticProblem& p, int steps) {
    if (steps < 0) throw std::invalid_argument("evolve: steps must be >= 0");
    if (p.eigenvalues.size() != p.theta0.size())
        throw std::invalid_argument("evolve: eigenvalue/theta0 size mismatch");
    for (double l : p.eigenvalues)
        if (l < 0.0) throw std::invalid_argument("evolve: eigenvalues must be nonnegative");
    std::vector<std::vector<double>> traj;
    traj.reserve(steps + 1);
    traj.push_back(p.theta0);
    std::vector<double> cur = p.theta0;
    for (int t = 0; t < steps; ++t) {
        for (std::size_t i = 0; i < cur.size(); ++i) {
            const double l = p.eigenvalues[i];
            cur[i] *= 1.0 - p.alpha * (l + p.rho * l * l);
        }
        traj.push_back(cur);
    }
    return traj;
}

double step_doubling_residual(double lambda, double alpha) {
    if (lambda <= 0.0 || alpha <= 0.0)
        throw std::invalid_argument("step_doubling_residual: lambda and alpha must be positive");
    // with a = alpha*(lambda + (alpha/2)*lambda^2) the residual is
    // (1-a)^2 - (1-2*alpha*lambda) = a^2 - (alpha*lambda)^2; the factored
    // difference of squares avoids the catastrophic cancellation of the
    // naive form (the residual is O((alpha*lambda)^3) but the naive terms
    // are O(1))
    const double al = alpha * lambda;
    const double a = al + 0.5 * al * al;
    return (a - al) * (a + al);
}

}  // namespace curvkit
