#pragma once

#include <vector>

#include "curvkit/tensor.hpp"

namespace curvkit {

/// Gradient descent with a squared-gradient penalty on L = 0.5 theta^T H theta
/// evolves each eigenmode geometrically with factor 1 - alpha*(lambda +
/// rho*lambda^2) (the effective Hessian is H + rho H^2). Eigenbasis form by
/// default; use from_matrix for an explicit symmetric H.
struct QuadraticProblem {
    std::vector<double> eigenvalues;  // lambda_i >= 0
    std::vector<double> theta0;       // in the eigenbasis
    double alpha = 0.0;               // learning rate
    double rho = 0.0;                 // penalty strength

    static QuadraticProblem from_matrix(const Tensor& H, std::vector<double> theta0,
                                        double alpha, double rho);
};

/// mode values at every step 0..steps; trajectory[t][i] is mode i at step t
std::vector<std::vector<double>> evolve(const QuadraticProblem& p, int steps);

/// (1 - alpha*(lambda + (alpha/2)*lambda^2))^2 - (1 - 2*alpha*lambda):
/// the gap between two penalized steps at rho = alpha/2 and one plain step at
/// learning rate 2*alpha; equals alpha^3 lambda^3 + alpha^4 lambda^4 / 4
double step_doubling_residual(double lambda, double alpha);

}  // namespace curvkit
