#include "flowbank/flow.hpp"

#include <cmath>
#include <string>

#include "flowbank/errors.hpp"

namespace flowbank::flow {

namespace {

/// log |det m| via partial-pivot LU, tracking the sign through the
/// permutation parity and the U diagonal. Throws if the determinant is not
/// strictly positive: a flow step must stay orientation-preserving.
double log_det_positive(const Eigen::MatrixXd& m, const std::string& context) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    double sign = static_cast<double>(lu.permutationP().determinant());
    double log_abs = 0.0;
    const auto diag = lu.matrixLU().diagonal();
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
        const double d = diag[i];
        if (d == 0.0 || !std::isfinite(d))
            throw NumericalError(context + ": singular flow step");
        if (d < 0.0) sign = -sign;
        log_abs += std::log(std::abs(d));
    }
    if (sign <= 0.0)
        throw NumericalError(context + ": flow step has non-positive determinant");
    if (!std::isfinite(log_abs))
        throw NumericalError(context + ": non-finite flow log-determinant");
    return log_abs;
}

/// 2 sum log L_ii from an LLT factor.
double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    return 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
}

/// log det(I + eps A). Shared by both flow variants so the matrix is
/// assembled through one code path and their step Jacobians agree bitwise
/// whenever the A's do.
double log_det_step(double eps, const Eigen::MatrixXd& a, const std::string& context) {
    Eigen::MatrixXd m = eps * a;
    m.diagonal().array() += 1.0;
    return log_det_positive(m, context);
}

void check_flow_inputs(const ssm::StateSpaceModel& model,
                       const Eigen::Ref<const Eigen::MatrixXd>& eta0,
                       const mix::Gaussian& pred, const Eigen::VectorXd& z,
                       const FlowSchedule& schedule) {
    if (eta0.rows() < 1) throw std::invalid_argument("flow: empty particle set");
    if (eta0.cols() != model.dim_x)
        throw std::invalid_argument("flow: particle dimension does not match model");
    if (pred.dim() != model.dim_x)
        throw std::invalid_argument("flow: predictive Gaussian dimension mismatch");
    if (z.size() != model.dim_z)
        throw std::invalid_argument("flow: observation dimension mismatch");
    if (schedule.size() < 1) throw std::invalid_argument("flow: empty schedule");
}

}  // namespace

FlowSchedule make_schedule(int n_steps, double ratio) {
    if (n_steps < 1) throw std::invalid_argument("make_schedule: n_steps must be >= 1");
    if (!(ratio > 0.0) || !std::isfinite(ratio))
        throw std::invalid_argument("make_schedule: ratio must be positive and finite");
    Eigen::VectorXd eps(n_steps);
    double step = 1.0;
    double total = 0.0;
    for (int l = 0; l < n_steps; ++l) {
        eps[l] = step;
        total += step;
        step *= ratio;
    }
    eps /= total;

    FlowSchedule s;
    s.lambdas.resize(n_steps);
    double acc = 0.0;
    for (int l = 0; l < n_steps; ++l) {
        acc += eps[l];
        s.lambdas[l] = acc;
    }
    s.lambdas[n_steps - 1] = 1.0;
    // Re-derive step sizes from the lambdas so both invariants hold exactly.
    s.epsilons.resize(n_steps);
    s.epsilons[0] = s.lambdas[0];
    for (int l = 1; l < n_steps; ++l) s.epsilons[l] = s.lambdas[l] - s.lambdas[l - 1];
    if ((s.epsilons.array() <= 0.0).any())
        throw NumericalError("make_schedule: schedule collapsed to non-positive steps");
    return s;
}

FlowSchedule make_schedule(const ScheduleConfig& cfg) {
    return make_schedule(cfg.n_steps, cfg.ratio);
}

FlowStepParams flow_params(const Eigen::MatrixXd& H, const Eigen::VectorXd& e,
                           const Eigen::MatrixXd& P, const Eigen::MatrixXd& R,
                           const Eigen::VectorXd& z, const Eigen::VectorXd& eta0_bar,
                           double lambda) {
    const Eigen::Index d = P.rows();
    const Eigen::Index m = H.rows();
    if (H.cols() != d || P.cols() != d || R.rows() != m || R.cols() != m ||
        e.size() != m || z.size() != m || eta0_bar.size() != d)
        throw std::invalid_argument("flow_params: inconsistent dimensions");
    if (!(lambda > 0.0) || lambda > 1.0)
        throw std::invalid_argument("flow_params: lambda must lie in (0, 1]");

    Eigen::MatrixXd PHt = P * H.transpose();
    Eigen::MatrixXd S = lambda * (H * PHt) + R;
    Eigen::LLT<Eigen::MatrixXd> s_llt;
    mix::factor_spd(S, s_llt, "flow_params: innovation");

    FlowStepParams out;
    out.A.noalias() = -0.5 * PHt * s_llt.solve(H);

    Eigen::MatrixXd Rf = R;
    Eigen::LLT<Eigen::MatrixXd> r_llt;
    mix::factor_spd(Rf, r_llt, "flow_params: observation covariance");

    Eigen::VectorXd u = PHt * r_llt.solve(z - e);
    u += lambda * (out.A * u);
    u += out.A * eta0_bar;
    out.b = u + 2.0 * lambda * (out.A * u);

    if (!out.A.allFinite() || !out.b.allFinite())
        throw NumericalError("flow_params: non-finite drift parameters");
    return out;
}

FlowResult edh_flow(const ssm::StateSpaceModel& model,
                    const Eigen::Ref<const Eigen::MatrixXd>& eta0,
                    const mix::Gaussian& pred, const Eigen::VectorXd& z,
                    const FlowSchedule& schedule, bool retain_steps) {
    check_flow_inputs(model, eta0, pred, z, schedule);
    const Eigen::Index n = eta0.rows();

    FlowResult res;
    res.eta1 = eta0;
    res.log_jac_det = Eigen::VectorXd::Zero(n);
    if (retain_steps) res.steps.resize(n);

    Eigen::VectorXd mean_traj = pred.mean();
    const Eigen::VectorXd eta0_bar = pred.mean();
    const Eigen::MatrixXd& P = pred.cov();
    double ljd = 0.0;

    for (int l = 0; l < schedule.size(); ++l) {
        const double lam = schedule.lambdas[l];
        const double eps = schedule.epsilons[l];
        ssm::Linearization lin = ssm::linearize(model, mean_traj);
        FlowStepParams fp = flow_params(lin.H, lin.e, P, model.observation_cov(mean_traj),
                                        z, eta0_bar, lam);

        ljd += log_det_step(eps, fp.A, "edh_flow: step " + std::to_string(l));

        // Per-particle update spelled exactly as in the localized flow, so the
        // two variants coincide bitwise when their linearizations coincide.
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd eta = res.eta1.row(i).transpose();
            eta += eps * (fp.A * eta + fp.b);
            res.eta1.row(i) = eta.transpose();
        }
        mean_traj += eps * (fp.A * mean_traj + fp.b);

        if (retain_steps)
            for (Eigen::Index i = 0; i < n; ++i) res.steps[static_cast<std::size_t>(i)].push_back(fp);
    }
    res.log_jac_det.setConstant(ljd);
    if (!res.eta1.allFinite()) throw NumericalError("edh_flow: non-finite migrated particles");
    return res;
}

namespace {

FlowResult ledh_flow_dense(const ssm::StateSpaceModel& model,
                           const Eigen::Ref<const Eigen::MatrixXd>& eta0,
                           const mix::Gaussian& pred, const Eigen::VectorXd& z,
                           const FlowSchedule& schedule, bool retain_steps) {
    const Eigen::Index n = eta0.rows();
    const Eigen::Index d = model.dim_x;

    FlowResult res;
    res.eta1.resize(n, d);
    res.log_jac_det.resize(n);
    if (retain_steps) res.steps.resize(n);

    const Eigen::VectorXd eta0_bar = pred.mean();
    const Eigen::MatrixXd& P = pred.cov();

    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd eta = eta0.row(i).transpose();
        double ljd = 0.0;
        for (int l = 0; l < schedule.size(); ++l) {
            const double lam = schedule.lambdas[l];
            const double eps = schedule.epsilons[l];
            ssm::Linearization lin = ssm::linearize(model, eta);
            FlowStepParams fp = flow_params(lin.H, lin.e, P, model.observation_cov(eta),
                                            z, eta0_bar, lam);
            ljd += log_det_step(eps, fp.A,
                                "ledh_flow: particle " + std::to_string(i) +
                                    ", step " + std::to_string(l));
            eta += eps * (fp.A * eta + fp.b);
            if (retain_steps) res.steps[static_cast<std::size_t>(i)].push_back(std::move(fp));
        }
        if (!eta.allFinite())
            throw NumericalError("ledh_flow: non-finite particle " + std::to_string(i));
        res.eta1.row(i) = eta.transpose();
        res.log_jac_det[i] = ljd;
    }
    return res;
}

/// Diagonal-observation path: dim_z == dim_x, H = diag(hd), R = diag(rd).
/// With M = P .* (hd hd^T):
///   A v             = -1/2 P (hd .* solve(lam M + diag(rd), hd .* v))
///   log det(I+eps A) = logdet((lam - eps/2) M + diag(rd)) - logdet(lam M + diag(rd))
/// Both factors are SPD, so two Cholesky factorizations replace the dense LU.
FlowResult ledh_flow_diag(const ssm::StateSpaceModel& model,
                          const Eigen::Ref<const Eigen::MatrixXd>& eta0,
                          const mix::Gaussian& pred, const Eigen::VectorXd& z,
                          const FlowSchedule& schedule, bool retain_steps) {
    const Eigen::Index n = eta0.rows();
    const Eigen::Index d = model.dim_x;

    FlowResult res;
    res.eta1.resize(n, d);
    res.log_jac_det.resize(n);
    if (retain_steps) res.steps.resize(n);

    const Eigen::VectorXd eta0_bar = pred.mean();
    const Eigen::MatrixXd& P = pred.cov();

    Eigen::MatrixXd M(d, d), S(d, d), S2(d, d);
    Eigen::LLT<Eigen::MatrixXd> llt, llt2;
    Eigen::VectorXd hd(d), rd(d), ev(d), tmp(d), u(d), a_eta(d);

    auto apply_A = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        tmp = hd.array() * v.array();
        tmp = llt.solve(tmp);
        tmp.array() *= hd.array();
        return -0.5 * (P * tmp);
    };

    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd eta = eta0.row(i).transpose();
        double ljd = 0.0;
        for (int l = 0; l < schedule.size(); ++l) {
            const double lam = schedule.lambdas[l];
            const double eps = schedule.epsilons[l];
            hd = model.observation_jacobian_diag(eta);
            rd = model.observation_cov_diag(eta);
            if (hd.size() != d || rd.size() != d || (rd.array() <= 0.0).any())
                throw NumericalError("ledh_flow: invalid diagonal observation hints");
            ev = model.observation_mean(eta) - hd.array().cwiseProduct(eta.array()).matrix();

            M = P.cwiseProduct(hd * hd.transpose());
            S = lam * M;
            S.diagonal() += rd;
            llt.compute(S);
            if (llt.info() != Eigen::Success)
                mix::factor_spd(S, llt, "ledh_flow: innovation");
            S2 = (lam - 0.5 * eps) * M;
            S2.diagonal() += rd;
            llt2.compute(S2);
            if (llt2.info() != Eigen::Success)
                mix::factor_spd(S2, llt2, "ledh_flow: half-step innovation");
            ljd += log_det_from_llt(llt2) - log_det_from_llt(llt);

            a_eta = apply_A(eta);
            u = P * (hd.array() * (z - ev).array() / rd.array()).matrix();
            u += lam * apply_A(u);
            u += apply_A(eta0_bar);
            u += 2.0 * lam * apply_A(u);  // u now holds b

            if (retain_steps) {
                FlowStepParams fp;
                fp.A.resize(d, d);
                for (Eigen::Index c = 0; c < d; ++c)
                    fp.A.col(c) = apply_A(Eigen::VectorXd::Unit(d, c));
                fp.b = u;
                res.steps[static_cast<std::size_t>(i)].push_back(std::move(fp));
            }

            eta += eps * (a_eta + u);
        }
        if (!eta.allFinite() || !std::isfinite(ljd))
            throw NumericalError("ledh_flow: non-finite particle " + std::to_string(i));
        res.eta1.row(i) = eta.transpose();
        res.log_jac_det[i] = ljd;
    }
    return res;
}

}  // namespace

FlowResult ledh_flow(const ssm::StateSpaceModel& model,
                     const Eigen::Ref<const Eigen::MatrixXd>& eta0,
                     const mix::Gaussian& pred, const Eigen::VectorXd& z,
                     const FlowSchedule& schedule, bool retain_steps) {
    check_flow_inputs(model, eta0, pred, z, schedule);
    if (model.has_diagonal_observation())
        return ledh_flow_diag(model, eta0, pred, z, schedule, retain_steps);
    return ledh_flow_dense(model, eta0, pred, z, schedule, retain_steps);
}

Eigen::VectorXd invert_flow(const std::vector<FlowStepParams>& steps,
                            const FlowSchedule& schedule,
                            const Eigen::VectorXd& eta1) {
    if (static_cast<int>(steps.size()) != schedule.size())
        throw std::invalid_argument("invert_flow: step count does not match schedule");
    Eigen::VectorXd eta = eta1;
    const Eigen::Index d = eta.size();
    for (int l = schedule.size() - 1; l >= 0; --l) {
        const double eps = schedule.epsilons[l];
        const FlowStepParams& fp = steps[static_cast<std::size_t>(l)];
        Eigen::MatrixXd step = Eigen::MatrixXd::Identity(d, d) + eps * fp.A;
        eta = Eigen::PartialPivLU<Eigen::MatrixXd>(step).solve(eta - eps * fp.b);
    }
    return eta;
}

}  // namespace flowbank::flow
