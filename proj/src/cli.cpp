#include "ddiqc/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ddiqc.h"
#include "ddiqc/errors.hpp"
#include "ddiqc/horizon.hpp"
#include "ddiqc/io.hpp"
#include "ddiqc/iqc.hpp"
#include "ddiqc/lti.hpp"
#include "ddiqc/optim.hpp"

namespace ddiqc::cli {

namespace {

using io::Json;

// Every flag the tool understands, bound to the CLI11 options of each
// subcommand. Only one subcommand parses per invocation.
struct AnalysisConfig {
    std::string in_path, model_path, out_path;
    int L = 0;
    int nu = 0;
    double tol = 1e-6;       // bisection / estimator tolerance
    double psd_tol = 1e-8;   // verification slack scale
    double opt_tol = 1e-4;   // optimizer stationarity tolerance
    double gamma = 0.0;      // tested gain / cone radius / fir gamma_L
    double rho = 0.0;        // tested passivity level
    std::string rho_kind = "input";
    std::string multiplier;
    std::vector<double> cone_c;        // row-major p x m entries
    std::vector<double> basis_lambda;  // pole locations
    int basis_order = 0;               // > 0 selects the chain basis
    std::string noise_kind = "multiplicative";
    double noise_level = 0.0;
    std::vector<double> noise_levels;  // noise-study sweep
    int noise_samples = 10;
    std::uint64_t seed = 0;
    std::vector<int> horizons;
    int fir_length = 1;
    int gen_n = 4, gen_m = 1, gen_p = 1, gen_N = -1;

    void validate_tolerances() const {
        if (!(tol > 0.0) || !(psd_tol > 0.0) || !(opt_tol > 0.0))
            throw_argument("tolerances must be positive");
        if (noise_samples < 1)
            throw_argument("--noise-samples must be at least 1");
    }
};

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Argument: return 3;
        case ErrorKind::Io:
        case ErrorKind::Numeric: return 1;
        default: return 2;  // Premise, Degenerate, Unbounded
    }
}

const char* kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Argument: return "argument";
        case ErrorKind::Io: return "io";
        case ErrorKind::Premise: return "premise";
        case ErrorKind::Degenerate: return "degenerate";
        case ErrorKind::Unbounded: return "unbounded";
        case ErrorKind::Numeric: return "numeric";
    }
    return "unknown";
}

iqc::NoiseModel make_noise(const AnalysisConfig& cfg, double level) {
    iqc::NoiseModel noise;
    if (cfg.noise_kind == "multiplicative")
        noise.kind = iqc::NoiseModel::Kind::MultiplicativeUniform;
    else if (cfg.noise_kind == "additive")
        noise.kind = iqc::NoiseModel::Kind::AdditiveGaussian;
    else
        throw_argument("--noise-kind must be 'multiplicative' or 'additive', got '" +
                       cfg.noise_kind + "'");
    noise.level = level;
    noise.samples = cfg.noise_samples;
    noise.seed = cfg.seed;
    noise.validate();
    return noise;
}

Json noise_echo(const AnalysisConfig& cfg) {
    return Json{{"kind", cfg.noise_kind},
                {"level", cfg.noise_level},
                {"samples", cfg.noise_samples},
                {"seed", cfg.seed}};
}

Json pe_json(const iqc::DataMatrixSet& data) {
    return Json{{"order_checked", static_cast<std::int64_t>(data.L)},
                {"satisfied", data.pe_ok},
                {"smallest_singular_value", data.pe_margin},
                {"restricted_dim", static_cast<std::int64_t>(data.reduced_size())}};
}

Json model_json_obj(const lti::StateSpaceModel& model) {
    Json obj;
    obj["schema"] = "ssmodel/1";
    obj["A"] = io::matrix_to_json(model.A);
    obj["B"] = io::matrix_to_json(model.B);
    obj["C"] = io::matrix_to_json(model.C);
    obj["D"] = io::matrix_to_json(model.D);
    return obj;
}

Json matrices_json(const std::vector<Eigen::MatrixXd>& mats) {
    Json arr = Json::array();
    for (const auto& M : mats) arr.push_back(io::matrix_to_json(M));
    return arr;
}

lti::BasisSet make_basis(const AnalysisConfig& cfg) {
    if (cfg.basis_lambda.empty())
        throw_argument("--basis-lambda requires at least one pole location");
    if (cfg.basis_order > 0) {
        if (cfg.basis_lambda.size() != 1)
            throw_argument(
                "--basis-order selects the chain basis and requires exactly one "
                "--basis-lambda pole");
        return lti::chain_basis(cfg.basis_lambda[0], cfg.basis_order);
    }
    return lti::pole_basis(cfg.basis_lambda);
}

Json basis_echo(const lti::BasisSet& basis) {
    Json arr = Json::array();
    for (const auto& fn : basis)
        arr.push_back(Json{{"lambda", fn.lambda}, {"power", fn.power}});
    return arr;
}

std::string svg_path_for(const std::string& csv_path) {
    const std::size_t slash = csv_path.find_last_of('/');
    const std::size_t dot = csv_path.find_last_of('.');
    if (dot == std::string::npos ||
        (slash != std::string::npos && dot < slash))
        return csv_path + ".svg";
    return csv_path.substr(0, dot) + ".svg";
}

struct LoadedData {
    lti::Trajectory traj;
    iqc::DataMatrixSet data;
};

LoadedData load_data(const AnalysisConfig& cfg) {
    if (cfg.in_path.empty())
        throw_argument("this command requires --in (a trajectory CSV)");
    LoadedData d;
    d.traj = io::load_trajectory_csv(cfg.in_path);
    d.data = iqc::build_data_matrices(d.traj, cfg.L, cfg.nu);
    return d;
}

// --- one handler per subcommand; each fills config/pe/result ---

void cmd_gen_data(const AnalysisConfig& cfg, Json& config, Json& pe, Json& result) {
    lti::StateSpaceModel model;
    if (!cfg.model_path.empty()) {
        model = io::load_model_json(cfg.model_path);
    } else {
        model = lti::random_stable_system(cfg.gen_n, cfg.gen_m, cfg.gen_p,
                                          cfg.seed, 0.8);
    }
    const int n = static_cast<int>(model.order());
    const int m = static_cast<int>(model.inputs());
    const int p = static_cast<int>(model.outputs());
    if (cfg.L < 1) throw_argument("--L must be at least 1");
    const int order = cfg.L + n;
    const int N = cfg.gen_N > 0 ? cfg.gen_N : (m + 1) * order - 1 + 10;
    if (N < 1) throw_argument("--N must be positive");

    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed),
                      static_cast<std::uint32_t>(cfg.seed >> 32),
                      std::uint32_t{0x67656e64}};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Eigen::MatrixXd u(N, m);
    for (int k = 0; k < N; ++k)
        for (int j = 0; j < m; ++j) u(k, j) = dist(rng);

    lti::Trajectory traj;
    traj.u = u;
    traj.y = lti::simulate(model, u);
    io::save_trajectory_csv(cfg.out_path, traj);

    config = Json{{"model", cfg.model_path.empty() ? Json() : Json(cfg.model_path)},
                  {"out", cfg.out_path},
                  {"L", cfg.L},
                  {"n", n},
                  {"m", m},
                  {"p", p},
                  {"N", N},
                  {"seed", cfg.seed}};
    pe = Json{{"order_checked", order},
              {"satisfied", lti::persistency_order(u, order)},
              {"smallest_singular_value", lti::pe_margin(u, order)},
              {"restricted_dim", Json()}};
    result = Json{{"path", cfg.out_path},
                  {"N", N},
                  {"m", m},
                  {"p", p},
                  {"model_order", n},
                  {"model_source", cfg.model_path.empty()
                                       ? std::string("random")
                                       : cfg.model_path}};
}

void cmd_verify(const AnalysisConfig& cfg, const CLI::App* sub, Json& config,
                Json& pe, Json& result) {
    LoadedData d = load_data(cfg);
    const Eigen::Index m = d.data.m, p = d.data.p;

    iqc::MultiplierFactorization mult;
    Json cone_json;
    if (cfg.multiplier == "gain") {
        if (sub->count("--gamma") == 0)
            throw_argument("verify with --multiplier gain requires --gamma");
        mult = iqc::gain_multiplier(m, p, cfg.gamma);
    } else if (cfg.multiplier == "passivity") {
        if (sub->count("--rho") == 0)
            throw_argument("verify with --multiplier passivity requires --rho");
        const auto kind = cfg.rho_kind == "output" ? iqc::PassivityKind::Output
                                                   : iqc::PassivityKind::Input;
        if (cfg.rho_kind != "input" && cfg.rho_kind != "output")
            throw_argument("--rho-kind must be 'input' or 'output', got '" +
                           cfg.rho_kind + "'");
        mult = iqc::passivity_multiplier(m, kind, cfg.rho);
    } else if (cfg.multiplier == "cone") {
        if (sub->count("--gamma") == 0 || cfg.cone_c.empty())
            throw_argument(
                "verify with --multiplier cone requires --gamma and --cone-c");
        if (static_cast<Eigen::Index>(cfg.cone_c.size()) != p * m)
            throw_argument("--cone-c needs p*m = " + std::to_string(p * m) +
                           " row-major entries, got " +
                           std::to_string(cfg.cone_c.size()));
        Eigen::MatrixXd C(p, m);
        for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                C(i, j) = cfg.cone_c[static_cast<std::size_t>(i * m + j)];
        mult = iqc::cone_multiplier(C, cfg.gamma);
        cone_json = io::matrix_to_json(C);
    } else {
        throw_argument("--multiplier must be 'gain', 'passivity', or 'cone', got '" +
                       cfg.multiplier + "'");
    }

    double delta = 0.0;
    bool noisy = cfg.noise_level > 0.0;
    if (noisy) {
        const iqc::NoiseModel noise = make_noise(cfg, cfg.noise_level);
        delta = iqc::noise_margin_delta(d.traj, noise, mult, cfg.L, cfg.nu);
    }
    const iqc::VerificationReport rep =
        noisy ? iqc::verify_l_iqc_noisy(d.data, mult, delta, cfg.psd_tol)
              : iqc::verify_l_iqc(d.data, mult, cfg.psd_tol);

    config = Json{{"in", cfg.in_path},
                  {"L", cfg.L},
                  {"nu", cfg.nu},
                  {"multiplier", cfg.multiplier},
                  {"gamma", sub->count("--gamma") ? Json(cfg.gamma) : Json()},
                  {"rho", sub->count("--rho") ? Json(cfg.rho) : Json()},
                  {"rho_kind", cfg.rho_kind},
                  {"cone_c", cone_json},
                  {"psd_tol", cfg.psd_tol},
                  {"noise", noise_echo(cfg)}};
    pe = pe_json(d.data);
    result = Json{{"decision", rep.decision},
                  {"min_eigenvalue", rep.min_eigenvalue},
                  {"threshold", rep.threshold},
                  {"abs_tol", rep.abs_tol},
                  {"dim", static_cast<std::int64_t>(rep.dim)},
                  {"delta", noisy ? Json(delta) : Json()}};
}

void cmd_gain(const AnalysisConfig& cfg, Json& config, Json& pe, Json& result) {
    LoadedData d = load_data(cfg);
    double delta = 0.0;
    const bool noisy = cfg.noise_level > 0.0;
    if (noisy) {
        const iqc::NoiseModel noise = make_noise(cfg, cfg.noise_level);
        const auto mult = iqc::gain_multiplier(d.data.m, d.data.p, 1.0);
        delta = iqc::noise_margin_delta(d.traj, noise, mult, cfg.L, cfg.nu);
    }
    const double gamma = optim::l2_gain_estimate(d.data, cfg.tol, delta);

    config = Json{{"in", cfg.in_path},
                  {"L", cfg.L},
                  {"nu", cfg.nu},
                  {"tol", cfg.tol},
                  {"noise", noise_echo(cfg)}};
    pe = pe_json(d.data);
    result = Json{{"gamma", gamma}, {"delta", noisy ? Json(delta) : Json()}};
}

void cmd_passivity(const AnalysisConfig& cfg, Json& config, Json& pe,
                   Json& result) {
    if (cfg.rho_kind != "input" && cfg.rho_kind != "output")
        throw_argument("--rho-kind must be 'input' or 'output', got '" +
                       cfg.rho_kind + "'");
    const auto kind = cfg.rho_kind == "output" ? iqc::PassivityKind::Output
                                               : iqc::PassivityKind::Input;
    LoadedData d = load_data(cfg);
    double delta = 0.0;
    const bool noisy = cfg.noise_level > 0.0;
    if (noisy) {
        if (kind == iqc::PassivityKind::Output)
            throw_premise(
                "the noise-relaxed estimate supports the input passivity index "
                "only: the output-side margin depends on the tested level rho, so "
                "no single averaged threshold exists");
        const auto mult =
            iqc::passivity_multiplier(d.data.m, iqc::PassivityKind::Input, 0.0);
        const iqc::NoiseModel noise = make_noise(cfg, cfg.noise_level);
        delta = iqc::noise_margin_delta(d.traj, noise, mult, cfg.L, cfg.nu);
    }
    const double rho = optim::passivity_index_estimate(d.data, kind, cfg.tol, delta);

    config = Json{{"in", cfg.in_path},
                  {"L", cfg.L},
                  {"nu", cfg.nu},
                  {"rho_kind", cfg.rho_kind},
                  {"tol", cfg.tol},
                  {"noise", noise_echo(cfg)}};
    pe = pe_json(d.data);
    result = Json{{"rho", rho},
                  {"kind", cfg.rho_kind},
                  {"delta", noisy ? Json(delta) : Json()}};
}

void cmd_cone(const AnalysisConfig& cfg, Json& config, Json& pe, Json& result) {
    LoadedData d = load_data(cfg);
    optim::OptimOptions opts;
    opts.opt_tol = cfg.opt_tol;
    const optim::ConeResult res = optim::tightest_cone(d.data, opts);

    config = Json{{"in", cfg.in_path},
                  {"L", cfg.L},
                  {"nu", cfg.nu},
                  {"opt_tol", cfg.opt_tol}};
    pe = pe_json(d.data);
    result = Json{{"C", io::matrix_to_json(res.C)},
                  {"gamma", res.gamma},
                  {"gamma_sq", res.detail.gamma_sq},
                  {"iterations", res.detail.iterations},
                  {"converged", res.detail.converged},
                  {"feasibility_residual", res.detail.feasibility_residual}};
}

void cmd_optimal_iqc(const AnalysisConfig& cfg, Json& config, Json& pe,
                     Json& result) {
    LoadedData d = load_data(cfg);
    const lti::BasisSet basis = make_basis(cfg);
    const auto cls = optim::approximation_class(basis, d.data.m, d.data.p);
    optim::OptimOptions opts;
    opts.opt_tol = cfg.opt_tol;
    const optim::OptimalIqcResult res = optim::optimal_pn_iqc(d.data, cls, opts);

    config = Json{{"in", cfg.in_path},
                  {"L", cfg.L},
                  {"nu", cfg.nu},
                  {"basis_lambda", cfg.basis_lambda},
                  {"basis_order", cfg.basis_order},
                  {"opt_tol", cfg.opt_tol}};
    pe = pe_json(d.data);
    result = Json{{"gamma_sq", res.gamma_sq},
                  {"gamma", std::sqrt(std::max(0.0, res.gamma_sq))},
                  {"c21", matrices_json(res.c21)},
                  {"basis", basis_echo(basis)},
                  {"iterations", res.iterations},
                  {"converged", res.converged},
                  {"feasibility_residual", res.feasibility_residual},
                  {"b_ill_conditioned", res.b_ill_conditioned}};
}

void cmd_approx(const AnalysisConfig& cfg, Json& config, Json& pe, Json& result) {
    LoadedData d = load_data(cfg);
    const lti::BasisSet basis = make_basis(cfg);
    optim::OptimOptions opts;
    opts.opt_tol = cfg.opt_tol;
    const optim::ApproximationResult res =
        optim::loworder_approximation(d.data, basis, opts);
    if (!cfg.out_path.empty()) io::save_model_json(cfg.out_path, res.model);

    config = Json{{"in", cfg.in_path},
                  {"L", cfg.L},
                  {"nu", cfg.nu},
                  {"basis_lambda", cfg.basis_lambda},
                  {"basis_order", cfg.basis_order},
                  {"opt_tol", cfg.opt_tol},
                  {"out", cfg.out_path.empty() ? Json() : Json(cfg.out_path)}};
    pe = pe_json(d.data);
    result = Json{{"gamma", res.gamma},
                  {"coefficients", matrices_json(res.coefficients)},
                  {"basis", basis_echo(basis)},
                  {"model", model_json_obj(res.model)},
                  {"model_path", cfg.out_path.empty() ? Json() : Json(cfg.out_path)},
                  {"iterations", res.detail.iterations},
                  {"converged", res.detail.converged},
                  {"feasibility_residual", res.detail.feasibility_residual}};
}

void cmd_noise_study(const AnalysisConfig& cfg, Json& config, Json& pe,
                     Json& result) {
    if (cfg.noise_levels.empty())
        throw_argument("noise-study requires --noise-level with at least one value");
    LoadedData d = load_data(cfg);
    const auto mult = iqc::gain_multiplier(d.data.m, d.data.p, 1.0);

    std::vector<double> deltas, gammas;
    for (const double level : cfg.noise_levels) {
        double delta = 0.0;
        if (level > 0.0) {
            const iqc::NoiseModel noise = make_noise(cfg, level);
            delta = iqc::noise_margin_delta(d.traj, noise, mult, cfg.L, cfg.nu);
        } else if (level < 0.0) {
            throw_argument("noise levels must be nonnegative");
        }
        deltas.push_back(delta);
        gammas.push_back(optim::l2_gain_estimate(d.data, cfg.tol, delta));
    }

    Json plot_csv, plot_svg;
    if (!cfg.out_path.empty()) {
        const std::string svg = svg_path_for(cfg.out_path);
        io::write_plot_csv(cfg.out_path, "noise_level", "gamma",
                           cfg.noise_levels, gammas);
        io::write_plot_svg(svg, "data-driven gain vs output noise level",
                           "noise level", "gamma", cfg.noise_levels, gammas);
        plot_csv = cfg.out_path;
        plot_svg = svg;
    }

    config = Json{{"in", cfg.in_path},
                  {"L", cfg.L},
                  {"nu", cfg.nu},
                  {"tol", cfg.tol},
                  {"noise_kind", cfg.noise_kind},
                  {"levels", cfg.noise_levels},
                  {"samples", cfg.noise_samples},
                  {"seed", cfg.seed},
                  {"out", cfg.out_path.empty() ? Json() : Json(cfg.out_path)}};
    pe = pe_json(d.data);
    result = Json{{"levels", cfg.noise_levels},
                  {"deltas", deltas},
                  {"gammas", gammas},
                  {"plot_csv", plot_csv},
                  {"plot_svg", plot_svg}};
}

void cmd_horizon_curve(const AnalysisConfig& cfg, Json& config, Json& pe,
                       Json& result) {
    if (cfg.model_path.empty())
        throw_argument("horizon-curve requires --model (a state-space JSON file)");
    const lti::StateSpaceModel model = io::load_model_json(cfg.model_path);
    const horizon::NormCurve curve =
        horizon::toeplitz_norm_curve(model, cfg.horizons);

    std::vector<double> ls, sigmas;
    for (const auto& pt : curve.points) {
        ls.push_back(static_cast<double>(pt.L));
        sigmas.push_back(pt.sigma);
    }
    Json plot_csv, plot_svg;
    if (!cfg.out_path.empty()) {
        const std::string svg = svg_path_for(cfg.out_path);
        io::write_plot_csv(cfg.out_path, "L", "sigma_max", ls, sigmas);
        io::write_plot_svg(svg, "finite-section Toeplitz norm vs horizon", "L",
                           "sigma_max", ls, sigmas);
        plot_csv = cfg.out_path;
        plot_svg = svg;
    }

    config = Json{{"model", cfg.model_path},
                  {"horizons", cfg.horizons},
                  {"out", cfg.out_path.empty() ? Json() : Json(cfg.out_path)}};
    pe = Json();
    result = Json{{"horizons", cfg.horizons},
                  {"sigmas", sigmas},
                  {"hinf", curve.hinf},
                  {"slope", curve.slope_defined ? Json(curve.slope) : Json()},
                  {"slope_defined", curve.slope_defined},
                  {"plot_csv", plot_csv},
                  {"plot_svg", plot_svg}};
}

void cmd_fir_bound(const AnalysisConfig& cfg, Json& config, Json& pe,
                   Json& result) {
    lti::StateSpaceModel model;
    const bool have_model = !cfg.model_path.empty();
    if (have_model) model = io::load_model_json(cfg.model_path);
    const horizon::GainBoundCertificate cert = horizon::fir_infinite_gain_bound(
        cfg.gamma, cfg.L, cfg.fir_length, have_model ? &model : nullptr);

    config = Json{{"gamma_L", cfg.gamma},
                  {"L", cfg.L},
                  {"fir_length", cfg.fir_length},
                  {"model", have_model ? Json(cfg.model_path) : Json()}};
    pe = Json();
    const bool finite = std::isfinite(cert.gamma_inf);
    result = Json{{"gamma_L", cert.gamma_L},
                  {"L", cert.L},
                  {"fir_length", cert.fir_length},
                  {"gamma_inf", finite ? Json(cert.gamma_inf) : Json()},
                  {"finite", finite},
                  {"valid", cert.valid},
                  {"det_premise_checked", cert.det_premise_checked},
                  {"det_min_modulus",
                   cert.det_premise_checked ? Json(cert.det_min_modulus) : Json()}};
}

}  // namespace

const char* tool_version() { return DDIQC_VERSION_STRING; }

CommandResult run_command(const std::vector<std::string>& args) {
    CommandResult out;
    AnalysisConfig cfg;

    CLI::App app{"ddiqc: data-driven input-output analysis of discrete-time "
                 "LTI systems from one measured trajectory",
                 "ddiqc"};
    app.require_subcommand(1);

    const auto add_window = [&](CLI::App* sub) {
        sub->add_option("--in", cfg.in_path, "Trajectory CSV (header k,u1,...,um,y1,...,yp)")
            ->required();
        sub->add_option("--L", cfg.L, "Analysis horizon")->required();
        sub->add_option("--nu", cfg.nu, "Zero-prefix length (0 <= nu < L)")
            ->capture_default_str();
    };
    const auto add_noise = [&](CLI::App* sub) {
        sub->add_option("--noise-kind", cfg.noise_kind,
                        "Output noise model: multiplicative | additive")
            ->capture_default_str();
        sub->add_option("--noise-level", cfg.noise_level,
                        "Noise level (epsilon bar or sigma); 0 disables the relaxation")
            ->capture_default_str();
        sub->add_option("--noise-samples", cfg.noise_samples,
                        "Averaged noise instances K")
            ->capture_default_str();
        sub->add_option("--seed", cfg.seed, "Noise RNG seed")->capture_default_str();
    };
    const auto add_basis = [&](CLI::App* sub) {
        sub->add_option("--basis-lambda", cfg.basis_lambda,
                        "Comma-separated pole locations of the scalar basis")
            ->delimiter(',')
            ->required();
        sub->add_option("--basis-order", cfg.basis_order,
                        "Chain-basis order (requires a single pole); 0 selects the "
                        "pole basis (1, (z+lambda_i)^{-1})")
            ->capture_default_str();
    };

    CLI::App* gen = app.add_subcommand(
        "gen-data", "Simulate a model under a seeded uniform input, write a CSV");
    gen->add_option("--model", cfg.model_path,
                    "State-space JSON (schema ssmodel/1); omitted: seeded random system");
    gen->add_option("--out", cfg.out_path, "Output trajectory CSV")->required();
    gen->add_option("--L", cfg.L, "Analysis horizon the data must support")->required();
    gen->add_option("--seed", cfg.seed, "RNG seed (input and random model)")
        ->capture_default_str();
    gen->add_option("--n", cfg.gen_n, "Random model state dimension")
        ->capture_default_str();
    gen->add_option("--m", cfg.gen_m, "Random model input count")->capture_default_str();
    gen->add_option("--p", cfg.gen_p, "Random model output count")->capture_default_str();
    gen->add_option("--N", cfg.gen_N,
                    "Trajectory length (default: (m+1)(L+n) - 1 + 10)");

    CLI::App* verify = app.add_subcommand(
        "verify", "Test one dissipativity level on the measured data");
    add_window(verify);
    verify->add_option("--multiplier", cfg.multiplier,
                       "Multiplier family: gain | passivity | cone")
        ->required();
    verify->add_option("--gamma", cfg.gamma, "Gain level / cone radius to test");
    verify->add_option("--rho", cfg.rho, "Passivity level to test");
    verify->add_option("--rho-kind", cfg.rho_kind, "input | output")
        ->capture_default_str();
    verify->add_option("--cone-c", cfg.cone_c, "Cone center, p*m row-major entries")
        ->delimiter(',');
    verify->add_option("--tol", cfg.psd_tol, "Relative PSD slack of the test")
        ->capture_default_str();
    add_noise(verify);

    CLI::App* gain = app.add_subcommand(
        "gain", "Tightest data-certified L2-gain bound");
    add_window(gain);
    gain->add_option("--tol", cfg.tol, "Relative estimate tolerance")
        ->capture_default_str();
    add_noise(gain);

    CLI::App* passivity = app.add_subcommand(
        "passivity", "Tightest data-certified passivity index");
    add_window(passivity);
    passivity->add_option("--rho-kind", cfg.rho_kind, "input | output")
        ->capture_default_str();
    passivity->add_option("--tol", cfg.tol, "Bisection tolerance")
        ->capture_default_str();
    add_noise(passivity);

    CLI::App* cone = app.add_subcommand(
        "cone", "Tightest data-certified conic relation ||y - Cu|| <= gamma||u||");
    add_window(cone);
    cone->add_option("--tol", cfg.opt_tol, "Optimizer stationarity tolerance")
        ->capture_default_str();

    CLI::App* optimal = app.add_subcommand(
        "optimal-iqc", "Optimal dynamic multiplier over a basis-parameterized class");
    add_window(optimal);
    add_basis(optimal);
    optimal->add_option("--tol", cfg.opt_tol, "Optimizer stationarity tolerance")
        ->capture_default_str();

    CLI::App* approx = app.add_subcommand(
        "approx", "Certified low-order approximation in a basis span");
    add_window(approx);
    add_basis(approx);
    approx->add_option("--tol", cfg.opt_tol, "Optimizer stationarity tolerance")
        ->capture_default_str();
    approx->add_option("--out", cfg.out_path, "Write the approximant as model JSON");

    CLI::App* study = app.add_subcommand(
        "noise-study", "Gain estimates across a sweep of noise levels");
    add_window(study);
    study->add_option("--tol", cfg.tol, "Relative estimate tolerance")
        ->capture_default_str();
    study->add_option("--noise-kind", cfg.noise_kind,
                      "multiplicative | additive")
        ->capture_default_str();
    study->add_option("--noise-level", cfg.noise_levels,
                      "Comma-separated noise levels to sweep")
        ->delimiter(',')
        ->required();
    study->add_option("--noise-samples", cfg.noise_samples,
                      "Averaged noise instances K")
        ->capture_default_str();
    study->add_option("--seed", cfg.seed, "Noise RNG seed")->capture_default_str();
    study->add_option("--out", cfg.out_path, "Plot CSV path (SVG written alongside)");

    CLI::App* curve = app.add_subcommand(
        "horizon-curve", "Finite-section Toeplitz norms of a model across horizons");
    curve->add_option("--model", cfg.model_path, "State-space JSON")->required();
    curve->add_option("--horizons", cfg.horizons, "Comma-separated horizons")
        ->delimiter(',')
        ->required();
    curve->add_option("--out", cfg.out_path, "Plot CSV path (SVG written alongside)");

    CLI::App* fir = app.add_subcommand(
        "fir-bound", "Finite-to-infinite-horizon gain certificate for FIR systems");
    fir->add_option("--gamma", cfg.gamma, "Certified finite-horizon gain gamma_L")
        ->required();
    fir->add_option("--L", cfg.L, "Horizon of the finite certificate")->required();
    fir->add_option("--fir-length", cfg.fir_length, "FIR length l (L >= 20 l)")
        ->required();
    fir->add_option("--model", cfg.model_path,
                    "Optional model JSON for the determinant premise sweep");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        const auto subs = app.get_subcommands();
        out.stdout_text = (subs.empty() ? app : *subs.front()).help();
        out.exit_code = 0;
        return out;
    } catch (const CLI::ParseError& e) {
        out.stderr_text = std::string("usage error: ") + e.what() +
                          "\nRun 'ddiqc --help' for usage.\n";
        out.exit_code = 3;
        return out;
    }

    const CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();

    io::ReportDocument doc;
    doc.root["schema"] = "report/1";
    doc.root["tool_version"] = tool_version();
    doc.root["command"] = name;
    doc.root["argv"] = args;

    const auto t0 = std::chrono::steady_clock::now();
    try {
        cfg.validate_tolerances();
        Json config, pe, result;
        if (name == "gen-data") cmd_gen_data(cfg, config, pe, result);
        else if (name == "verify") cmd_verify(cfg, sub, config, pe, result);
        else if (name == "gain") cmd_gain(cfg, config, pe, result);
        else if (name == "passivity") cmd_passivity(cfg, config, pe, result);
        else if (name == "cone") cmd_cone(cfg, config, pe, result);
        else if (name == "optimal-iqc") cmd_optimal_iqc(cfg, config, pe, result);
        else if (name == "approx") cmd_approx(cfg, config, pe, result);
        else if (name == "noise-study") cmd_noise_study(cfg, config, pe, result);
        else if (name == "horizon-curve") cmd_horizon_curve(cfg, config, pe, result);
        else if (name == "fir-bound") cmd_fir_bound(cfg, config, pe, result);
        else throw_argument("unknown subcommand '" + name + "'");
        doc.root["config"] = std::move(config);
        doc.root["pe"] = std::move(pe);
        doc.root["result"] = std::move(result);
    } catch (const Error& e) {
        out.exit_code = exit_code_for(e.kind());
        out.stderr_text =
            std::string("error (") + kind_name(e.kind()) + "): " + e.what() + "\n";
        return out;
    } catch (const std::exception& e) {
        out.exit_code = 1;
        out.stderr_text = std::string("error (internal): ") + e.what() + "\n";
        return out;
    }
    const std::chrono::duration<double> elapsed =
        std::chrono::steady_clock::now() - t0;
    doc.root["timing_seconds"] = elapsed.count();

    out.stdout_text = io::report_json(doc);
    out.exit_code = 0;
    return out;
}

int run_command(const std::vector<std::string>& args, std::ostream& outs,
                std::ostream& errs) {
    const CommandResult res = run_command(args);
    if (!res.stdout_text.empty()) outs << res.stdout_text;
    if (!res.stderr_text.empty()) errs << res.stderr_text;
    return res.exit_code;
}

}  // namespace ddiqc::cli
