// SPDX-License-Identifier: Apache-2.0
#pragma once

// Nonlinear least squares for the loading, storage and readout-peak models.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "etrap/error.hpp"

namespace etrap {

struct DataPoint {
    double t = 0.0;
    double value = 0.0;
    double sigma = 0.0;  // 0 on every point means unweighted
};

struct FitParameter {
    std::string name;
    double value = 0.0;
    double sigma = 0.0;
};

enum class DecayModel { saturating, exp_plus_constant, two_exponential };

inline const char* decay_model_name(DecayModel m)
{
    switch (m) {
    case DecayModel::saturating:
        return "saturating";
    case DecayModel::exp_plus_constant:
        return "exp_plus_constant";
    case DecayModel::two_exponential:
        return "two_exponential";
    }
    return "unknown";
}

struct DecayFit {
    DecayModel kind = DecayModel::saturating;
    std::vector<FitParameter> parameters;
    double residual_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    bool identifiable = true;
    double decaying_fraction = std::numeric_limits<double>::quiet_NaN();  // storage models only

    const FitParameter& parameter(const std::string& name) const
    {
        for (const auto& p : parameters) {
            if (p.name == name) {
                return p;
            }
        }
        throw InvalidArgument("no fit parameter named " + name);
    }
    double value(const std::string& name) const { return parameter(name).value; }
    double sigma(const std::string& name) const { return parameter(name).sigma; }

    /// Model prediction at time t.
    double operator()(double t) const
    {
        switch (kind) {
        case DecayModel::saturating:
            return value("P_max") * -std::expm1(-t / value("tau"));
        case DecayModel::exp_plus_constant:
            return value("A") * std::exp(-t / value("tau")) + value("C");
        case DecayModel::two_exponential:
            return value("A") * std::exp(-t / value("tau")) + value("C") * std::exp(-t / value("tau2"));
        }
        return 0.0;
    }
};

class FitFailure : public DomainError {
  public:
    FitFailure(const std::string& what, DecayFit best) : DomainError(what), best_(std::move(best)) {}
    const DecayFit& best() const { return best_; }

  private:
    DecayFit best_;
};

/// Lower bound on the slow time constant of the two-exponential storage model.
inline constexpr double two_exponential_tau2_floor = 10.0;  // s

namespace detail {

struct LmProblem {
    int n_params = 0;
    // Residuals (model - data) / weight for internal parameters theta.
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residuals;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
    // Projection onto the feasible set (e.g. non-negative amplitudes).
    std::function<void(Eigen::VectorXd&)> project = [](Eigen::VectorXd&) {};
};

struct LmResult {
    Eigen::VectorXd theta;
    Eigen::VectorXd residuals;
    Eigen::MatrixXd jacobian;
    double cost = 0.0;  // sum of squared residuals
    int iterations = 0;
    bool converged = false;
};

inline LmResult levenberg_marquardt(const LmProblem& prob, Eigen::VectorXd theta, int max_iterations = 500)
{
    prob.project(theta);
    LmResult res;
    res.residuals = prob.residuals(theta);
    res.cost = res.residuals.squaredNorm();
    double lambda = 1e-3;
    for (int it = 0; it < max_iterations; ++it) {
        res.iterations = it + 1;
        const Eigen::MatrixXd j = prob.jacobian(theta);
        const Eigen::MatrixXd jtj = j.transpose() * j;
        const Eigen::VectorXd g = j.transpose() * res.residuals;
        if (g.lpNorm<Eigen::Infinity>() <= 1e-15 * std::max(1.0, res.cost)) {
            res.converged = true;
            break;
        }
        bool accepted = false;
        while (lambda < 1e16) {
            Eigen::MatrixXd a = jtj;
            for (int k = 0; k < prob.n_params; ++k) {
                a(k, k) += lambda * std::max(jtj(k, k), 1e-30);
            }
            const Eigen::VectorXd step = a.ldlt().solve(-g);
            Eigen::VectorXd trial = theta + step;
            prob.project(trial);
            const Eigen::VectorXd r = prob.residuals(trial);
            const double cost = r.squaredNorm();
            if (std::isfinite(cost) && cost <= res.cost) {
                const double rel_step = (trial - theta).norm() / (theta.norm() + 1e-12);
                const double rel_cost = (res.cost - cost) / std::max(res.cost, 1e-300);
                theta = trial;
                res.residuals = r;
                res.cost = cost;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (rel_step < 1e-12 || rel_cost < 1e-15) {
                    res.converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if (!accepted) {
            // No downhill step at any damping: a (possibly constrained) minimum.
            res.converged = true;
            break;
        }
        if (res.converged) {
            break;
        }
    }
    res.theta = theta;
    res.jacobian = prob.jacobian(theta);
    return res;
}

/// Parameter covariance s^2 (J^T J)^-1 with s^2 = cost / (n - k).
inline Eigen::MatrixXd lm_covariance(const LmResult& r)
{
    const auto n = r.residuals.size();
    const auto k = r.theta.size();
    const double dof = static_cast<double>(std::max<Eigen::Index>(1, n - k));
    const Eigen::MatrixXd jtj = r.jacobian.transpose() * r.jacobian;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(jtj);
    if (cod.rank() < k) {
        return Eigen::MatrixXd::Constant(k, k, std::numeric_limits<double>::infinity());
    }
    return cod.pseudoInverse() * (r.cost / dof);
}

inline std::vector<double> weights_of(const std::vector<DataPoint>& pts)
{
    const bool weighted = std::all_of(pts.begin(), pts.end(), [](const DataPoint& p) { return p.sigma > 0.0; });
    std::vector<double> w(pts.size(), 1.0);
    if (weighted) {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            w[i] = 1.0 / pts[i].sigma;
        }
    }
    return w;
}

inline void check_points(const std::vector<DataPoint>& pts, std::size_t min_points)
{
    require(pts.size() >= min_points, "fit needs at least " + std::to_string(min_points) + " points");
    for (const auto& p : pts) {
        require(std::isfinite(p.t) && std::isfinite(p.value) && std::isfinite(p.sigma), "fit data must be finite");
        require(p.t >= 0.0, "fit times must be >= 0");
        require(p.sigma >= 0.0, "fit sigmas must be >= 0");
    }
}

/// Log-spaced tau grid spanning the sampled times.
inline std::vector<double> tau_grid(const std::vector<DataPoint>& pts)
{
    double t_min = std::numeric_limits<double>::infinity();
    double t_max = 0.0;
    for (const auto& p : pts) {
        if (p.t > 0.0) {
            t_min = std::min(t_min, p.t);
        }
        t_max = std::max(t_max, p.t);
    }
    if (!std::isfinite(t_min) || t_max <= 0.0) {
        return {1.0};
    }
    const double lo = std::log(t_min / 10.0);
    const double hi = std::log(t_max * 10.0);
    std::vector<double> g(81);
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / (g.size() - 1));
    }
    return g;
}

/// Non-negative linear least squares over the basis columns (small k, active-set by enumeration).
inline Eigen::VectorXd nonneg_lsq(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y, double* cost)
{
    const int k = static_cast<int>(basis.cols());
    Eigen::VectorXd best = Eigen::VectorXd::Zero(k);
    double best_cost = y.squaredNorm();
    for (int mask = 1; mask < (1 << k); ++mask) {
        std::vector<int> cols;
        for (int c = 0; c < k; ++c) {
            if (mask & (1 << c)) {
                cols.push_back(c);
            }
        }
        Eigen::MatrixXd sub(basis.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) {
            sub.col(static_cast<Eigen::Index>(c)) = basis.col(cols[c]);
        }
        const Eigen::VectorXd coef = sub.colPivHouseholderQr().solve(y);
        if ((coef.array() < 0.0).any() || !coef.allFinite()) {
            continue;
        }
        const double c2 = (sub * coef - y).squaredNorm();
        if (c2 < best_cost) {
            best_cost = c2;
            best.setZero();
            for (std::size_t c = 0; c < cols.size(); ++c) {
                best(cols[c]) = coef(static_cast<Eigen::Index>(c));
            }
        }
    }
    *cost = best_cost;
    return best;
}

}  // namespace detail

/// Fit P(t) = P_max (1 - exp(-t / tau)).
inline DecayFit fit_loading(const std::vector<DataPoint>& pts)
{
    detail::check_points(pts, 4);
    if (std::none_of(pts.begin(), pts.end(), [](const DataPoint& p) { return p.value > 0.0; })) {
        DecayFit best;
        best.kind = DecayModel::saturating;
        best.parameters = {{"P_max", 0.0, std::numeric_limits<double>::infinity()},
                           {"tau", std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity()}};
        best.identifiable = false;
        throw FitFailure("loading fit failed: no positive detection probability in the data", best);
    }
    const auto w = detail::weights_of(pts);
    const auto n = static_cast<Eigen::Index>(pts.size());
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i) = pts[static_cast<std::size_t>(i)].value * w[static_cast<std::size_t>(i)];
    }

    // Start from the best tau on a grid with P_max solved linearly.
    double start_tau = 1.0;
    double start_pmax = 0.0;
    double start_cost = std::numeric_limits<double>::infinity();
    for (double tau : detail::tau_grid(pts)) {
        Eigen::MatrixXd basis(n, 1);
        for (Eigen::Index i = 0; i < n; ++i) {
            basis(i, 0) = -std::expm1(-pts[static_cast<std::size_t>(i)].t / tau) * w[static_cast<std::size_t>(i)];
        }
        double cost = 0.0;
        const Eigen::VectorXd coef = detail::nonneg_lsq(basis, y, &cost);
        if (cost < start_cost) {
            start_cost = cost;
            start_tau = tau;
            start_pmax = coef(0);
        }
    }

    detail::LmProblem prob;
    prob.n_params = 2;
    prob.residuals = [&](const Eigen::VectorXd& th) {
        const double tau = std::exp(th(1));
        Eigen::VectorXd r(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& p = pts[static_cast<std::size_t>(i)];
            r(i) = (th(0) * -std::expm1(-p.t / tau) - p.value) * w[static_cast<std::size_t>(i)];
        }
        return r;
    };
    prob.jacobian = [&](const Eigen::VectorXd& th) {
        const double tau = std::exp(th(1));
        Eigen::MatrixXd j(n, 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& p = pts[static_cast<std::size_t>(i)];
            const double e = std::exp(-p.t / tau);
            const double wi = w[static_cast<std::size_t>(i)];
            j(i, 0) = (1.0 - e) * wi;
            j(i, 1) = -th(0) * e * (p.t / tau) * wi;  // d/d(ln tau)
        }
        return j;
    };
    prob.project = [](Eigen::VectorXd& th) { th(0) = std::max(th(0), 0.0); };

    Eigen::VectorXd theta(2);
    theta << start_pmax, std::log(start_tau);
    const auto r = detail::levenberg_marquardt(prob, theta);
    const Eigen::MatrixXd cov = detail::lm_covariance(r);

    DecayFit fit;
    fit.kind = DecayModel::saturating;
    const double tau = std::exp(r.theta(1));
    fit.parameters = {{"P_max", r.theta(0), std::sqrt(std::max(0.0, cov(0, 0)))},
                      {"tau", tau, tau * std::sqrt(std::max(0.0, cov(1, 1)))}};
    fit.residual_norm = std::sqrt(r.cost);
    fit.iterations = r.iterations;
    fit.converged = r.converged;
    fit.identifiable = r.theta(0) > 0.0 && std::isfinite(fit.sigma("tau"));
    if (!fit.converged) {
        throw FitFailure("loading fit did not converge", fit);
    }
    if (!fit.identifiable) {
        throw FitFailure("loading fit failed: amplitude collapsed to zero", fit);
    }
    return fit;
}

/// Fit P(t) = A exp(-t / tau) + C, or with `two_exponential` the slow
/// population decays as C exp(-t / tau2) with tau2 >= 10 s.
inline DecayFit fit_storage(const std::vector<DataPoint>& pts, bool two_exponential = false)
{
    detail::check_points(pts, two_exponential ? 6 : 5);
    const auto w = detail::weights_of(pts);
    const auto n = static_cast<Eigen::Index>(pts.size());
    const int k = two_exponential ? 4 : 3;
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i) = pts[static_cast<std::size_t>(i)].value * w[static_cast<std::size_t>(i)];
    }

    double start_tau = 1.0;
    double start_a = 0.0;
    double start_c = 0.0;
    double start_cost = std::numeric_limits<double>::infinity();
    for (double tau : detail::tau_grid(pts)) {
        Eigen::MatrixXd basis(n, 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double wi = w[static_cast<std::size_t>(i)];
            basis(i, 0) = std::exp(-pts[static_cast<std::size_t>(i)].t / tau) * wi;
            basis(i, 1) = wi;
        }
        double cost = 0.0;
        const Eigen::VectorXd coef = detail::nonneg_lsq(basis, y, &cost);
        if (cost < start_cost) {
            start_cost = cost;
            start_tau = tau;
            start_a = coef(0);
            start_c = coef(1);
        }
    }

    // theta = (A, ln tau, C[, ln(tau2 - floor)])
    auto tau2_of = [](const Eigen::VectorXd& th) { return two_exponential_tau2_floor + std::exp(th(3)); };
    detail::LmProblem prob;
    prob.n_params = k;
    prob.residuals = [&](const Eigen::VectorXd& th) {
        const double tau = std::exp(th(1));
        Eigen::VectorXd r(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& p = pts[static_cast<std::size_t>(i)];
            const double slow = two_exponential ? std::exp(-p.t / tau2_of(th)) : 1.0;
            r(i) = (th(0) * std::exp(-p.t / tau) + th(2) * slow - p.value) * w[static_cast<std::size_t>(i)];
        }
        return r;
    };
    prob.jacobian = [&](const Eigen::VectorXd& th) {
        const double tau = std::exp(th(1));
        Eigen::MatrixXd j(n, k);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& p = pts[static_cast<std::size_t>(i)];
            const double wi = w[static_cast<std::size_t>(i)];
            const double e = std::exp(-p.t / tau);
            j(i, 0) = e * wi;
            j(i, 1) = th(0) * e * (p.t / tau) * wi;
            if (two_exponential) {
                const double tau2 = tau2_of(th);
                const double s = std::exp(-p.t / tau2);
                j(i, 2) = s * wi;
                j(i, 3) = th(2) * s * (p.t / (tau2 * tau2)) * std::exp(th(3)) * wi;
            } else {
                j(i, 2) = wi;
            }
        }
        return j;
    };
    prob.project = [](Eigen::VectorXd& th) {
        th(0) = std::max(th(0), 0.0);
        th(2) = std::max(th(2), 0.0);
    };

    Eigen::VectorXd theta(k);
    theta(0) = start_a;
    theta(1) = std::log(start_tau);
    theta(2) = start_c;
    if (two_exponential) {
        theta(3) = std::log(two_exponential_tau2_floor * 10.0);
    }
    const auto r = detail::levenberg_marquardt(prob, theta);
    const Eigen::MatrixXd cov = detail::lm_covariance(r);
    auto sd = [&](int i) { return std::sqrt(std::max(0.0, cov(i, i))); };

    DecayFit fit;
    fit.kind = two_exponential ? DecayModel::two_exponential : DecayModel::exp_plus_constant;
    const double tau = std::exp(r.theta(1));
    fit.parameters = {{"A", r.theta(0), sd(0)}, {"tau", tau, tau * sd(1)}, {"C", r.theta(2), sd(2)}};
    if (two_exponential) {
        const double e3 = std::exp(r.theta(3));
        fit.parameters.push_back({"tau2", two_exponential_tau2_floor + e3, e3 * sd(3)});
    }
    fit.residual_norm = std::sqrt(r.cost);
    fit.iterations = r.iterations;
    fit.converged = r.converged;
    const double total = fit.value("A") + fit.value("C");
    fit.decaying_fraction = total > 0.0 ? fit.value("A") / total : std::numeric_limits<double>::quiet_NaN();
    // A constant signal leaves tau undetermined.
    fit.identifiable = fit.value("A") > 1e-9 * std::max(total, 1e-300) && std::isfinite(fit.sigma("tau"))
                       && fit.sigma("tau") < fit.value("tau");
    if (!fit.converged) {
        throw FitFailure("storage fit did not converge", fit);
    }
    return fit;
}

struct GaussianPeak {
    double area = 0.0;    // integral of the peak above the offset
    double center = 0.0;
    double sigma = 0.0;
    double offset = 0.0;  // per unit abscissa
    double fwhm() const { return 2.0 * std::sqrt(2.0 * std::log(2.0)) * sigma; }
};

/// Fit a bin-integrated Gaussian plus flat offset to binned values
/// (`edges` has one more entry than `values`).
inline GaussianPeak fit_gaussian_peak(const std::vector<double>& edges, const std::vector<double>& values)
{
    detail::require(edges.size() == values.size() + 1 && values.size() >= 4, "peak fit needs >= 4 bins");
    const auto n = static_cast<Eigen::Index>(values.size());
    Eigen::VectorXd y(n);
    double total = 0.0;
    double mean = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i) = values[static_cast<std::size_t>(i)];
        const double mid = 0.5 * (edges[static_cast<std::size_t>(i)] + edges[static_cast<std::size_t>(i) + 1]);
        total += y(i);
        mean += y(i) * mid;
    }
    detail::require(total > 0.0, "peak fit needs positive content");
    mean /= total;
    double var = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mid = 0.5 * (edges[static_cast<std::size_t>(i)] + edges[static_cast<std::size_t>(i) + 1]);
        var += y(i) * (mid - mean) * (mid - mean);
    }
    var /= total;

    auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    // theta = (area, center, ln sigma, offset)
    detail::LmProblem prob;
    prob.n_params = 4;
    prob.residuals = [&](const Eigen::VectorXd& th) {
        const double s = std::exp(th(2));
        Eigen::VectorXd r(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double a = edges[static_cast<std::size_t>(i)];
            const double b = edges[static_cast<std::size_t>(i) + 1];
            r(i) = th(0) * (cdf((b - th(1)) / s) - cdf((a - th(1)) / s)) + th(3) * (b - a) - y(i);
        }
        return r;
    };
    prob.jacobian = [&](const Eigen::VectorXd& th) {
        const double s = std::exp(th(2));
        const double norm = 1.0 / std::sqrt(2.0 * std::acos(-1.0));
        Eigen::MatrixXd j(n, 4);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double a = edges[static_cast<std::size_t>(i)];
            const double b = edges[static_cast<std::size_t>(i) + 1];
            const double za = (a - th(1)) / s;
            const double zb = (b - th(1)) / s;
            const double pa = norm * std::exp(-0.5 * za * za);
            const double pb = norm * std::exp(-0.5 * zb * zb);
            j(i, 0) = cdf(zb) - cdf(za);
            j(i, 1) = th(0) * (pa - pb) / s;
            j(i, 2) = -th(0) * (pb * zb - pa * za);
            j(i, 3) = b - a;
        }
        return j;
    };
    prob.project = [](Eigen::VectorXd& th) {
        th(0) = std::max(th(0), 0.0);
        th(3) = std::max(th(3), 0.0);
    };
    Eigen::VectorXd theta(4);
    theta << total, mean, 0.5 * std::log(std::max(var, 1e-12)), 0.0;
    const auto r = detail::levenberg_marquardt(prob, theta);
    if (!r.converged) {
        throw DomainError("peak fit did not converge");
    }
    GaussianPeak g;
    g.area = r.theta(0);
    g.center = r.theta(1);
    g.sigma = std::exp(r.theta(2));
    g.offset = r.theta(3);
    return g;
}

}  // namespace etrap
