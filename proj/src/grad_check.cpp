#include "umc/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace umc {

namespace {

// Relative error with an absolute floor so entries whose true gradient is ~0 are judged
// on absolute error instead of amplifying finite-difference round-off.
constexpr double kRelFloor = 1e-6;

double rel_error(double analytic, double numeric) {
    double denom = std::max({std::abs(analytic), std::abs(numeric), kRelFloor});
    return std::abs(analytic - numeric) / denom;
}

std::string entry_name(const std::string& base, const Mat& m, Eigen::Index flat) {
    return base + "[" + std::to_string(flat / m.cols()) + "," + std::to_string(flat % m.cols()) + "]";
}

}  // namespace

GradCheckResult grad_check(DiffOp<double>& op, const Mat& input, double tol, double step,
                           std::uint64_t probe_seed) {
    Mat probe;
    auto objective = [&](const Mat& x) {
        Mat y = op.forward(x);
        return y.cwiseProduct(probe).sum();
    };

    Mat y0 = op.forward(input);
    Rng rng(probe_seed, "grad_check.probe");
    probe.resize(y0.rows(), y0.cols());
    for (Eigen::Index i = 0; i < probe.size(); ++i) probe.data()[i] = rng.normal();

    op.zero_grad();
    op.forward(input);
    Mat g_input = op.backward(probe);
    if (!g_input.allFinite()) throw Error(ErrorCode::GradNonFinite, "input gradient is not finite");
    auto params = op.params();
    std::vector<Mat> g_params;
    g_params.reserve(params.size());
    for (auto* p : params) {
        if (!p->grad.allFinite()) throw Error(ErrorCode::GradNonFinite, p->name + " gradient is not finite");
        g_params.push_back(p->grad);
    }

    GradCheckResult result;
    auto consider = [&](double analytic, double numeric, const std::string& name) {
        double err = rel_error(analytic, numeric);
        ++result.entries_checked;
        if (result.worst_entry.empty() || err > result.max_rel_error) {
            result.max_rel_error = err;
            result.worst_entry = name;
        }
    };

    for (std::size_t k = 0; k < params.size(); ++k) {
        Mat& value = params[k]->value;
        for (Eigen::Index i = 0; i < value.size(); ++i) {
            double saved = value.data()[i];
            value.data()[i] = saved + step;
            double up = objective(input);
            value.data()[i] = saved - step;
            double down = objective(input);
            value.data()[i] = saved;
            consider(g_params[k].data()[i], (up - down) / (2.0 * step),
                     entry_name(params[k]->name, value, i));
        }
    }

    Mat x = input;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double saved = x.data()[i];
        x.data()[i] = saved + step;
        double up = objective(x);
        x.data()[i] = saved - step;
        double down = objective(x);
        x.data()[i] = saved;
        consider(g_input.data()[i], (up - down) / (2.0 * step), entry_name("input", x, i));
    }

    // Leave the op's caches consistent with the unperturbed input.
    op.forward(input);
    result.pass = result.max_rel_error < tol;
    return result;
}

}  // namespace umc
