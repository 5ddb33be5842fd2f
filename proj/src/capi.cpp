#include "ddiqc.h"

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "ddiqc/cli.hpp"
#include "ddiqc/errors.hpp"
#include "ddiqc/horizon.hpp"
#include "ddiqc/io.hpp"
#include "ddiqc/iqc.hpp"
#include "ddiqc/lti.hpp"
#include "ddiqc/optim.hpp"

struct ddiqc_trajectory {
    ddiqc::lti::Trajectory impl;
};
struct ddiqc_model {
    ddiqc::lti::StateSpaceModel impl;
};
struct ddiqc_report {
    std::string text;
    std::string error;
};

namespace {

using namespace ddiqc;

thread_local std::string g_last_error;

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>;

ddiqc_status status_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Io: return DDIQC_ERR_IO;
        case ErrorKind::Argument: return DDIQC_ERR_ARGUMENT;
        case ErrorKind::Numeric: return DDIQC_ERR_NUMERIC;
        default: return DDIQC_ERR_PREMISE;  // Premise, Degenerate, Unbounded
    }
}

template <class Fn>
ddiqc_status guarded(Fn&& fn) noexcept {
    try {
        fn();
        g_last_error.clear();
        return DDIQC_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_for(e.kind());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return DDIQC_ERR_NUMERIC;
    } catch (...) {
        g_last_error = "unknown failure";
        return DDIQC_ERR_NUMERIC;
    }
}

void require(const void* ptr, const char* name) {
    if (ptr == nullptr)
        throw_argument(std::string(name) + " must not be null");
}

void copy_row_major(const Eigen::MatrixXd& M, double* dst) {
    if (dst == nullptr) return;
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j) dst[i * M.cols() + j] = M(i, j);
}

iqc::NoiseModel make_noise(int kind, double level, int samples,
                           std::uint64_t seed) {
    iqc::NoiseModel noise;
    if (kind == 0)
        noise.kind = iqc::NoiseModel::Kind::MultiplicativeUniform;
    else if (kind == 1)
        noise.kind = iqc::NoiseModel::Kind::AdditiveGaussian;
    else
        throw_argument("noise_kind must be 0 (multiplicative uniform) or 1 "
                       "(additive Gaussian), got " + std::to_string(kind));
    noise.level = level;
    noise.samples = samples;
    noise.seed = seed;
    noise.validate();
    return noise;
}

// Shared noisy-verification plumbing: build the window, optionally compute
// the averaged margin for `mult`, run the (relaxed) test.
iqc::VerificationReport run_verify(const ddiqc_trajectory* traj, int L, int nu,
                                   const iqc::MultiplierFactorization& mult,
                                   double psd_tol, int noise_kind,
                                   double noise_level, int noise_samples,
                                   std::uint64_t noise_seed, double* delta_used) {
    const auto data = iqc::build_data_matrices(traj->impl, L, nu);
    double delta = 0.0;
    if (noise_level > 0.0) {
        const auto noise = make_noise(noise_kind, noise_level, noise_samples,
                                      noise_seed);
        delta = iqc::noise_margin_delta(traj->impl, noise, mult, L, nu);
    }
    if (delta_used != nullptr) *delta_used = delta;
    return noise_level > 0.0
               ? iqc::verify_l_iqc_noisy(data, mult, delta, psd_tol)
               : iqc::verify_l_iqc(data, mult, psd_tol);
}

lti::BasisSet make_basis(const double* lambdas, int n_lambdas, int chain_order) {
    require(lambdas, "lambdas");
    if (n_lambdas < 1)
        throw_argument("n_lambdas must be at least 1");
    if (chain_order < 0)
        throw_argument("chain_order must be nonnegative");
    if (chain_order >= 1) {
        if (n_lambdas != 1)
            throw_argument("the chain basis requires exactly one lambda");
        return lti::chain_basis(lambdas[0], chain_order);
    }
    return lti::pole_basis(std::vector<double>(lambdas, lambdas + n_lambdas));
}

}  // namespace

extern "C" {

const char* ddiqc_version(void) { return DDIQC_VERSION_STRING; }

const char* ddiqc_last_error(void) { return g_last_error.c_str(); }

/* --- trajectories --- */

ddiqc_status ddiqc_trajectory_create(int n_samples, int m, int p,
                                     const double* u_row_major,
                                     const double* y_row_major,
                                     ddiqc_trajectory** out) {
    return guarded([&] {
        require(u_row_major, "u_row_major");
        require(y_row_major, "y_row_major");
        require(out, "out");
        if (n_samples < 1 || m < 1 || p < 1)
            throw_argument("n_samples, m, and p must all be at least 1");
        auto traj = std::make_unique<ddiqc_trajectory>();
        traj->impl.u = RowMajorMap(u_row_major, n_samples, m);
        traj->impl.y = RowMajorMap(y_row_major, n_samples, p);
        traj->impl.validate();
        *out = traj.release();
    });
}

ddiqc_status ddiqc_trajectory_load_csv(const char* path, ddiqc_trajectory** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        auto traj = std::make_unique<ddiqc_trajectory>();
        traj->impl = io::load_trajectory_csv(path);
        *out = traj.release();
    });
}

ddiqc_status ddiqc_trajectory_save_csv(const ddiqc_trajectory* traj,
                                       const char* path) {
    return guarded([&] {
        require(traj, "traj");
        require(path, "path");
        io::save_trajectory_csv(path, traj->impl);
    });
}

int ddiqc_trajectory_length(const ddiqc_trajectory* traj) {
    return traj ? static_cast<int>(traj->impl.length()) : -1;
}
int ddiqc_trajectory_inputs(const ddiqc_trajectory* traj) {
    return traj ? static_cast<int>(traj->impl.inputs()) : -1;
}
int ddiqc_trajectory_outputs(const ddiqc_trajectory* traj) {
    return traj ? static_cast<int>(traj->impl.outputs()) : -1;
}

ddiqc_status ddiqc_trajectory_data(const ddiqc_trajectory* traj,
                                   double* u_row_major, double* y_row_major) {
    return guarded([&] {
        require(traj, "traj");
        copy_row_major(traj->impl.u, u_row_major);
        copy_row_major(traj->impl.y, y_row_major);
    });
}

void ddiqc_trajectory_free(ddiqc_trajectory* traj) { delete traj; }

/* --- models --- */

ddiqc_status ddiqc_model_create(int n, int m, int p, const double* A_row_major,
                                const double* B_row_major,
                                const double* C_row_major,
                                const double* D_row_major, ddiqc_model** out) {
    return guarded([&] {
        require(out, "out");
        require(D_row_major, "D_row_major");
        if (n < 0 || m < 1 || p < 1)
            throw_argument("need n >= 0, m >= 1, p >= 1");
        if (n > 0) {
            require(A_row_major, "A_row_major");
            require(B_row_major, "B_row_major");
            require(C_row_major, "C_row_major");
        }
        auto model = std::make_unique<ddiqc_model>();
        model->impl.A = n > 0 ? Eigen::MatrixXd(RowMajorMap(A_row_major, n, n))
                              : Eigen::MatrixXd(0, 0);
        model->impl.B = n > 0 ? Eigen::MatrixXd(RowMajorMap(B_row_major, n, m))
                              : Eigen::MatrixXd(0, m);
        model->impl.C = n > 0 ? Eigen::MatrixXd(RowMajorMap(C_row_major, p, n))
                              : Eigen::MatrixXd(p, 0);
        model->impl.D = RowMajorMap(D_row_major, p, m);
        model->impl.validate();
        *out = model.release();
    });
}

ddiqc_status ddiqc_model_load_json(const char* path, ddiqc_model** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        auto model = std::make_unique<ddiqc_model>();
        model->impl = io::load_model_json(path);
        *out = model.release();
    });
}

ddiqc_status ddiqc_model_save_json(const ddiqc_model* model, const char* path) {
    return guarded([&] {
        require(model, "model");
        require(path, "path");
        io::save_model_json(path, model->impl);
    });
}

ddiqc_status ddiqc_model_random(int n, int m, int p, uint64_t seed,
                                double spectral_radius, ddiqc_model** out) {
    return guarded([&] {
        require(out, "out");
        auto model = std::make_unique<ddiqc_model>();
        model->impl = lti::random_stable_system(n, m, p, seed, spectral_radius);
        *out = model.release();
    });
}

int ddiqc_model_order(const ddiqc_model* model) {
    return model ? static_cast<int>(model->impl.order()) : -1;
}
int ddiqc_model_inputs(const ddiqc_model* model) {
    return model ? static_cast<int>(model->impl.inputs()) : -1;
}
int ddiqc_model_outputs(const ddiqc_model* model) {
    return model ? static_cast<int>(model->impl.outputs()) : -1;
}

ddiqc_status ddiqc_model_data(const ddiqc_model* model, double* A_row_major,
                              double* B_row_major, double* C_row_major,
                              double* D_row_major) {
    return guarded([&] {
        require(model, "model");
        copy_row_major(model->impl.A, A_row_major);
        copy_row_major(model->impl.B, B_row_major);
        copy_row_major(model->impl.C, C_row_major);
        copy_row_major(model->impl.D, D_row_major);
    });
}

ddiqc_status ddiqc_model_hinf_norm(const ddiqc_model* model, double* out) {
    return guarded([&] {
        require(model, "model");
        require(out, "out");
        *out = lti::hinf_norm_grid(model->impl);
    });
}

ddiqc_status ddiqc_model_simulate(const ddiqc_model* model, int n_samples,
                                  int m, const double* u_row_major,
                                  ddiqc_trajectory** out) {
    return guarded([&] {
        require(model, "model");
        require(u_row_major, "u_row_major");
        require(out, "out");
        if (n_samples < 1 || m < 1)
            throw_argument("n_samples and m must be at least 1");
        auto traj = std::make_unique<ddiqc_trajectory>();
        traj->impl.u = RowMajorMap(u_row_major, n_samples, m);
        traj->impl.y = lti::simulate(model->impl, traj->impl.u);
        *out = traj.release();
    });
}

void ddiqc_model_free(ddiqc_model* model) { delete model; }

/* --- analyses --- */

ddiqc_status ddiqc_gain_estimate(const ddiqc_trajectory* traj, int L, int nu,
                                 double tol, int noise_kind, double noise_level,
                                 int noise_samples, uint64_t noise_seed,
                                 double* gamma_out, double* delta_out) {
    return guarded([&] {
        require(traj, "traj");
        require(gamma_out, "gamma_out");
        const auto data = iqc::build_data_matrices(traj->impl, L, nu);
        double delta = 0.0;
        if (noise_level > 0.0) {
            const auto noise =
                make_noise(noise_kind, noise_level, noise_samples, noise_seed);
            const auto mult = iqc::gain_multiplier(data.m, data.p, 1.0);
            delta = iqc::noise_margin_delta(traj->impl, noise, mult, L, nu);
        }
        const double gamma = optim::l2_gain_estimate(data, tol, delta);
        *gamma_out = gamma;
        if (delta_out != nullptr) *delta_out = delta;
    });
}

ddiqc_status ddiqc_passivity_estimate(const ddiqc_trajectory* traj, int L,
                                      int nu, int output_side, double tol,
                                      int noise_kind, double noise_level,
                                      int noise_samples, uint64_t noise_seed,
                                      double* rho_out, double* delta_out) {
    return guarded([&] {
        require(traj, "traj");
        require(rho_out, "rho_out");
        const auto kind = output_side != 0 ? iqc::PassivityKind::Output
                                           : iqc::PassivityKind::Input;
        const auto data = iqc::build_data_matrices(traj->impl, L, nu);
        double delta = 0.0;
        if (noise_level > 0.0) {
            if (kind == iqc::PassivityKind::Output)
                throw_premise(
                    "the noise-relaxed estimate supports the input passivity "
                    "index only: the output-side margin depends on the tested "
                    "level rho, so no single averaged threshold exists");
            const auto noise =
                make_noise(noise_kind, noise_level, noise_samples, noise_seed);
            const auto mult =
                iqc::passivity_multiplier(data.m, iqc::PassivityKind::Input, 0.0);
            delta = iqc::noise_margin_delta(traj->impl, noise, mult, L, nu);
        }
        *rho_out = optim::passivity_index_estimate(data, kind, tol, delta);
        if (delta_out != nullptr) *delta_out = delta;
    });
}

ddiqc_status ddiqc_verify_gain(const ddiqc_trajectory* traj, int L, int nu,
                               double gamma, double psd_tol, int noise_kind,
                               double noise_level, int noise_samples,
                               uint64_t noise_seed, int* decision_out,
                               double* min_eigenvalue_out, double* delta_out) {
    return guarded([&] {
        require(traj, "traj");
        require(decision_out, "decision_out");
        const auto mult = iqc::gain_multiplier(traj->impl.inputs(),
                                               traj->impl.outputs(), gamma);
        const auto rep = run_verify(traj, L, nu, mult, psd_tol, noise_kind,
                                    noise_level, noise_samples, noise_seed,
                                    delta_out);
        *decision_out = rep.decision ? 1 : 0;
        if (min_eigenvalue_out != nullptr) *min_eigenvalue_out = rep.min_eigenvalue;
    });
}

ddiqc_status ddiqc_verify_passivity(const ddiqc_trajectory* traj, int L, int nu,
                                    int output_side, double rho, double psd_tol,
                                    int noise_kind, double noise_level,
                                    int noise_samples, uint64_t noise_seed,
                                    int* decision_out, double* min_eigenvalue_out,
                                    double* delta_out) {
    return guarded([&] {
        require(traj, "traj");
        require(decision_out, "decision_out");
        const auto kind = output_side != 0 ? iqc::PassivityKind::Output
                                           : iqc::PassivityKind::Input;
        const auto mult = iqc::passivity_multiplier(traj->impl.inputs(), kind, rho);
        const auto rep = run_verify(traj, L, nu, mult, psd_tol, noise_kind,
                                    noise_level, noise_samples, noise_seed,
                                    delta_out);
        *decision_out = rep.decision ? 1 : 0;
        if (min_eigenvalue_out != nullptr) *min_eigenvalue_out = rep.min_eigenvalue;
    });
}

ddiqc_status ddiqc_verify_cone(const ddiqc_trajectory* traj, int L, int nu,
                               const double* C_row_major, double gamma,
                               double psd_tol, int noise_kind,
                               double noise_level, int noise_samples,
                               uint64_t noise_seed, int* decision_out,
                               double* min_eigenvalue_out, double* delta_out) {
    return guarded([&] {
        require(traj, "traj");
        require(C_row_major, "C_row_major");
        require(decision_out, "decision_out");
        const Eigen::MatrixXd C =
            RowMajorMap(C_row_major, traj->impl.outputs(), traj->impl.inputs());
        const auto mult = iqc::cone_multiplier(C, gamma);
        const auto rep = run_verify(traj, L, nu, mult, psd_tol, noise_kind,
                                    noise_level, noise_samples, noise_seed,
                                    delta_out);
        *decision_out = rep.decision ? 1 : 0;
        if (min_eigenvalue_out != nullptr) *min_eigenvalue_out = rep.min_eigenvalue;
    });
}

ddiqc_status ddiqc_noise_margin(const ddiqc_trajectory* traj, int L, int nu,
                                int noise_kind, double noise_level,
                                int noise_samples, uint64_t noise_seed,
                                double* delta_out) {
    return guarded([&] {
        require(traj, "traj");
        require(delta_out, "delta_out");
        const auto noise =
            make_noise(noise_kind, noise_level, noise_samples, noise_seed);
        const auto mult =
            iqc::gain_multiplier(traj->impl.inputs(), traj->impl.outputs(), 1.0);
        *delta_out = iqc::noise_margin_delta(traj->impl, noise, mult, L, nu);
    });
}

ddiqc_status ddiqc_tightest_cone(const ddiqc_trajectory* traj, int L, int nu,
                                 double opt_tol, double* C_out,
                                 double* gamma_out) {
    return guarded([&] {
        require(traj, "traj");
        require(C_out, "C_out");
        require(gamma_out, "gamma_out");
        if (!(opt_tol > 0.0)) throw_argument("opt_tol must be positive");
        const auto data = iqc::build_data_matrices(traj->impl, L, nu);
        optim::OptimOptions opts;
        opts.opt_tol = opt_tol;
        const auto res = optim::tightest_cone(data, opts);
        copy_row_major(res.C, C_out);
        *gamma_out = res.gamma;
    });
}

int ddiqc_basis_size(int n_lambdas, int chain_order) {
    if (n_lambdas < 1 || chain_order < 0) return -1;
    if (chain_order >= 1) return n_lambdas == 1 ? chain_order + 1 : -1;
    return n_lambdas + 1;
}

ddiqc_status ddiqc_loworder_approximation(const ddiqc_trajectory* traj, int L,
                                          int nu, const double* lambdas,
                                          int n_lambdas, int chain_order,
                                          double opt_tol, double* coeffs_out,
                                          double* gamma_out,
                                          ddiqc_model** model_out) {
    return guarded([&] {
        require(traj, "traj");
        require(coeffs_out, "coeffs_out");
        require(gamma_out, "gamma_out");
        if (!(opt_tol > 0.0)) throw_argument("opt_tol must be positive");
        const auto basis = make_basis(lambdas, n_lambdas, chain_order);
        const auto data = iqc::build_data_matrices(traj->impl, L, nu);
        optim::OptimOptions opts;
        opts.opt_tol = opt_tol;
        const auto res = optim::loworder_approximation(data, basis, opts);
        double* dst = coeffs_out;
        for (const auto& M : res.coefficients) {
            copy_row_major(M, dst);
            dst += M.size();
        }
        *gamma_out = res.gamma;
        if (model_out != nullptr) {
            auto model = std::make_unique<ddiqc_model>();
            model->impl = res.model;
            *model_out = model.release();
        }
    });
}

ddiqc_status ddiqc_fir_gain_bound(double gamma_L, int L, int fir_length,
                                  const ddiqc_model* model_or_null,
                                  double* gamma_inf_out, int* valid_out,
                                  double* det_min_modulus_out) {
    return guarded([&] {
        require(gamma_inf_out, "gamma_inf_out");
        const auto cert = horizon::fir_infinite_gain_bound(
            gamma_L, L, fir_length,
            model_or_null != nullptr ? &model_or_null->impl : nullptr);
        *gamma_inf_out = cert.gamma_inf;
        if (valid_out != nullptr) *valid_out = cert.valid ? 1 : 0;
        if (det_min_modulus_out != nullptr)
            *det_min_modulus_out =
                cert.det_premise_checked ? cert.det_min_modulus : -1.0;
    });
}

ddiqc_status ddiqc_toeplitz_norm_curve(const ddiqc_model* model,
                                       const int* horizons, int n_horizons,
                                       double* sigmas_out, double* hinf_out,
                                       double* slope_out,
                                       int* slope_defined_out) {
    return guarded([&] {
        require(model, "model");
        require(horizons, "horizons");
        require(sigmas_out, "sigmas_out");
        if (n_horizons < 1) throw_argument("n_horizons must be at least 1");
        const auto curve = horizon::toeplitz_norm_curve(
            model->impl, std::vector<int>(horizons, horizons + n_horizons));
        for (int i = 0; i < n_horizons; ++i)
            sigmas_out[i] = curve.points[static_cast<std::size_t>(i)].sigma;
        if (hinf_out != nullptr) *hinf_out = curve.hinf;
        if (slope_out != nullptr)
            *slope_out = curve.slope_defined ? curve.slope : 0.0;
        if (slope_defined_out != nullptr)
            *slope_defined_out = curve.slope_defined ? 1 : 0;
    });
}

/* --- command driver --- */

ddiqc_status ddiqc_run_command(int argc, const char* const* argv,
                               int* exit_code_out, ddiqc_report** report_out) {
    return guarded([&] {
        require(exit_code_out, "exit_code_out");
        if (argc < 0) throw_argument("argc must be nonnegative");
        if (argc > 0) require(argv, "argv");
        std::vector<std::string> args;
        args.reserve(static_cast<std::size_t>(argc));
        for (int i = 0; i < argc; ++i) {
            require(argv[i], "argv[i]");
            args.emplace_back(argv[i]);
        }
        const cli::CommandResult res = cli::run_command(args);
        *exit_code_out = res.exit_code;
        if (report_out != nullptr) {
            auto report = std::make_unique<ddiqc_report>();
            report->text = res.stdout_text;
            report->error = res.stderr_text;
            *report_out = report.release();
        }
    });
}

const char* ddiqc_report_text(const ddiqc_report* report) {
    return report ? report->text.c_str() : "";
}

const char* ddiqc_report_error(const ddiqc_report* report) {
    return report ? report->error.c_str() : "";
}

void ddiqc_report_free(ddiqc_report* report) { delete report; }

} /* extern "C" */
