#include "ccdf/analysis.hpp"
#include "ccdf/consistency.hpp"
#include "ccdf/error.hpp"
#include "ccdf/harness.hpp"
#include "ccdf/io.hpp"
#include "ccdf/samplers.hpp"
#include "ccdf/schedule.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

using namespace ccdf;

namespace {

struct ScheduleFlags {
    std::string kind = "ddpm";
    ScheduleSpec spec;
    std::string variance = "beta";

    void add(CLI::App* app)
    {
        app->add_option("--kind", kind, "ddpm | smld | ddim (vp/ve also accepted)");
        app->add_option("--beta-min", spec.beta_min, "VP beta_1");
        app->add_option("--beta-max", spec.beta_max, "VP beta_N");
        app->add_option("--sigma-min", spec.sigma_min, "VE sigma_1");
        app->add_option("--sigma-max", spec.sigma_max, "VE sigma_N");
        app->add_option("--n-steps", spec.n_steps, "N");
        app->add_option("--variance", variance, "DDPM reverse variance: beta | beta_tilde");
    }

    SamplerKind sampler() const { return parse_sampler_kind(kind); }

    Schedule build(bool ve_ddim = false) const
    {
        auto s = spec;
        if (variance == "beta_tilde")
            s.variance = ReverseVariance::BetaTilde;
        else if (variance != "beta")
            throw ValidationError("--variance must be beta or beta_tilde");
        const auto k = sampler();
        if (k == SamplerKind::DDIM && ve_ddim)
            return Schedule::variance_exploding(s.sigma_min, s.sigma_max, s.n_steps).with_kind(k);
        return s.build(k);
    }
};

std::ostream& pick_output(const std::string& path, std::ofstream& file)
{
    if (path.empty() || path == "-")
        return std::cout;
    file.open(path);
    if (!file)
        throw ValidationError("cannot write " + path);
    return file;
}

OperatorSpec operator_spec(const std::string& type, const std::string& config_path)
{
    OperatorSpec op;
    op.type = type;
    if (config_path.empty())
        return op;
    const auto kv = KeyValueConfig::load(config_path);
    kv.require_known({"factor", "keep_fraction", "box", "accel", "acs_fraction", "mask_seed", "mask"});
    op.factor = static_cast<std::size_t>(kv.get_int("factor", static_cast<long long>(op.factor)));
    op.keep_fraction = kv.get_double("keep_fraction", op.keep_fraction);
    op.box = static_cast<std::size_t>(kv.get_int("box", 0));
    op.accel = kv.get_double("accel", op.accel);
    op.acs_fraction = kv.get_double("acs_fraction", op.acs_fraction);
    op.mask_seed = static_cast<std::uint64_t>(kv.get_int("mask_seed", 1));
    op.mask_file = kv.get("mask", "");
    return op;
}

// "phantom:<kind>" or an image file.
Image load_truth(const std::string& spec, std::optional<ImageShape> shape, std::uint64_t seed, std::string* kind)
{
    if (spec.rfind("phantom:", 0) == 0) {
        if (!shape)
            throw ValidationError("--shape is required with a phantom truth");
        auto p = make_phantom(spec.substr(8), *shape, seed);
        if (kind)
            *kind = p.kind;
        return {p.shape, std::move(p.data)};
    }
    return load_image(spec);
}

int cmd_schedule(ScheduleFlags& f, const std::string& out_path)
{
    std::ofstream file;
    auto& out = pick_output(out_path, file);
    f.build().write_csv(out);
    return 0;
}

struct ContractFlags {
    double t0 = 1.0;
    int n_prime = 0;
    std::size_t n = 64;
    double eps0 = 0.0;
    double tau = 1.0;
    std::string op;
    std::string op_config;
    std::string shape = "";
    bool csv_only = false;
    bool ve = false;
    std::string out;
};

double resolve_tau(const std::string& op_type, const std::string& op_config, const std::string& shape_text,
                   const Schedule& sched, double fallback, std::size_t& n)
{
    if (op_type.empty())
        return fallback;
    if (shape_text.empty())
        throw ValidationError("--shape is required with --op");
    const auto shape = parse_shape(shape_text);
    n = shape.size();
    const auto spec = operator_spec(op_type, op_config);
    const auto truth = make_phantom("blocks", shape, 0).data;
    const auto op = make_operator(spec, shape, truth, sched);
    const auto t = tau_of(*op);
    if (!t.exact)
        std::cerr << "tau estimated by Hutchinson: " << t.value << " +- " << t.std_error << "\n";
    return t.value;
}

int cmd_contract(ScheduleFlags& f, ContractFlags& c)
{
    const auto sched = f.build(c.ve);
    const int np = c.n_prime > 0 ? c.n_prime : sched.index_for_time(c.t0);
    std::size_t n = c.n;
    const double tau = resolve_tau(c.op, c.op_config, c.shape, sched, c.tau, n);
    const auto report = contraction_report(sched, f.sampler(), np, n, c.eps0, tau);
    std::ofstream file;
    auto& out = pick_output(c.out, file);
    if (c.csv_only)
        write_report_csv(out, report);
    else
        write_report(out, report);
    return 0;
}

struct ShortcutFlags {
    double eps0 = 0.0;
    double mu = 1.0;
    double tau = 1.0;
    std::size_t n = 64;
    bool ve = false;
    std::string op, op_config, shape;
};

int cmd_shortcut(ScheduleFlags& f, ShortcutFlags& s)
{
    const auto sched = f.build(s.ve);
    std::size_t n = s.n;
    const double tau = resolve_tau(s.op, s.op_config, s.shape, sched, s.tau, n);
    const auto r = minimal_shortcut(s.eps0, s.mu, sched, f.sampler(), tau, n);
    write_shortcut(std::cout, r);
    if (r.feasible)
        std::cout << "t0 " << static_cast<double>(r.n_prime) / sched.size() << "\n";
    return r.feasible ? 0 : 2;
}

struct SimulateFlags {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string kind;
    std::vector<double> t0;
    std::optional<int> trials;
    std::string shape, truth, op, op_config, oracle, init, init_file;
    bool shared_noise = false;
    bool corrector = false;
    std::string corrector_rule;
    bool compare_inits = false;
    bool sweep = false;
    std::optional<int> threads;
    std::string out, sweep_out, gnuplot;
};

ExperimentConfig experiment_from(const SimulateFlags& s, const ScheduleFlags& f, const CLI::App& app)
{
    ExperimentConfig c = s.config.empty() ? ExperimentConfig{} : ExperimentConfig::from_config(KeyValueConfig::load(s.config));
    if (app.count("--kind"))
        c.kind = f.sampler();
    if (app.count("--beta-min"))
        c.schedule.beta_min = f.spec.beta_min;
    if (app.count("--beta-max"))
        c.schedule.beta_max = f.spec.beta_max;
    if (app.count("--sigma-min"))
        c.schedule.sigma_min = f.spec.sigma_min;
    if (app.count("--sigma-max"))
        c.schedule.sigma_max = f.spec.sigma_max;
    if (app.count("--n-steps"))
        c.schedule.n_steps = f.spec.n_steps;
    if (app.count("--variance"))
        c.schedule.variance = f.variance == "beta_tilde" ? ReverseVariance::BetaTilde : ReverseVariance::Beta;
    if (!s.t0.empty())
        c.t0_grid = s.t0;
    if (s.trials)
        c.trials = *s.trials;
    if (!s.shape.empty())
        c.shape = parse_shape(s.shape);
    if (!s.truth.empty())
        c.truth = s.truth;
    if (!s.op.empty() || !s.op_config.empty()) {
        const auto spec = operator_spec(s.op.empty() ? c.op.type : s.op, s.op_config);
        c.op = spec;
    }
    if (!s.oracle.empty())
        c.oracle.kind = parse_oracle_kind(s.oracle);
    if (!s.init.empty())
        c.init = parse_init_mode(s.init);
    if (!s.init_file.empty()) {
        c.init = InitMode::File;
        c.init_path = s.init_file;
    }
    if (s.shared_noise)
        c.shared_reverse_noise = true;
    if (s.corrector)
        c.use_corrector = true;
    if (!s.corrector_rule.empty())
        c.corrector_rule = s.corrector_rule == "squared" ? CorrectorRule::Squared : CorrectorRule::Linear;
    if (s.threads)
        c.threads = *s.threads;
    c.seed = *s.seed;
    return c;
}

int cmd_simulate(SimulateFlags& s, ScheduleFlags& f, const CLI::App& app)
{
    if (!s.seed)
        throw ValidationError("simulate requires --seed");
    auto cfg = experiment_from(s, f, app);
    cfg.validate();

    std::vector<TrajectoryStats> curves;
    std::vector<std::string> labels;
    std::ofstream sweep_file;
    if (s.compare_inits && s.sweep) {
        auto& out = pick_output(s.sweep_out, sweep_file);
        bool header = true;
        for (auto mode : {InitMode::Random, InitMode::Vanilla, InitMode::Refined}) {
            auto c = cfg;
            c.init = mode;
            const auto sweep = run_t0_sweep(c);
            std::ostringstream rows;
            write_sweep_csv(rows, sweep);
            std::istringstream in(rows.str());
            std::string line;
            std::getline(in, line);
            if (header)
                out << "init," << line << '\n';
            header = false;
            while (std::getline(in, line))
                out << to_string(mode) << ',' << line << '\n';
            std::cerr << to_string(mode) << " eps0 " << sweep.eps0 << " argmin_t0 " << sweep.argmin_t0
                      << " beats_full_path " << (sweep.beats_full_path ? 1 : 0) << "\n";
            for (const auto& cv : sweep.curves) {
                labels.push_back(std::string(to_string(mode)) + "_t0_" + std::to_string(cv.t0));
                curves.push_back(cv);
            }
        }
        if (s.out.empty())
            return 0;
    } else if (s.compare_inits) {
        for (auto mode : {InitMode::Random, InitMode::Vanilla, InitMode::Refined}) {
            auto c = cfg;
            c.init = mode;
            const auto setup = make_setup(c);
            for (double t0 : cfg.t0_grid) {
                curves.push_back(run_error_curve(c, setup, t0));
                labels.push_back(std::string(to_string(mode)) + "_t0_" + std::to_string(t0));
                std::cerr << labels.back() << " eps0 " << curves.back().eps0 << " final "
                          << curves.back().final_mean() << " +- " << curves.back().final_se() << "\n";
            }
        }
    } else if (s.sweep) {
        const auto sweep = run_t0_sweep(cfg);
        auto& out = pick_output(s.sweep_out, sweep_file);
        write_sweep_csv(out, sweep);
        std::cerr << "argmin_t0 " << sweep.argmin_t0 << " beats_full_path " << (sweep.beats_full_path ? 1 : 0)
                  << "\n";
        for (const auto& c : sweep.curves) {
            labels.push_back("t0_" + std::to_string(c.t0));
            curves.push_back(c);
        }
        if (s.out.empty())
            return 0;
    } else {
        const auto setup = make_setup(cfg);
        for (double t0 : cfg.t0_grid) {
            curves.push_back(run_error_curve(cfg, setup, t0));
            labels.push_back("t0_" + std::to_string(t0));
        }
    }
    std::ofstream file;
    auto& out = pick_output(s.out, file);
    write_curves_csv(out, curves, labels);
    if (!s.gnuplot.empty()) {
        std::ofstream g(s.gnuplot);
        if (!g)
            throw ValidationError("cannot write " + s.gnuplot);
        write_gnuplot_script(g, s.out.empty() ? "curves.csv" : s.out, labels);
    }
    return 0;
}

struct CcdfFlags {
    double t0 = 1.0;
    std::optional<std::uint64_t> seed;
    std::string op = "identity";
    std::string op_config;
    std::string init = "vanilla";
    std::string out;
    std::string truth, measurement, reference, shape;
    std::string oracle = "conditional";
    std::string prior;
    double variance_floor = 1e-2;
    bool no_corrector = false;
    std::string corrector_rule = "linear";
    double corrector_r = 0.16;
    bool final_consistency_only = false;
};

int cmd_ccdf(CcdfFlags& c, ScheduleFlags& f)
{
    const auto kind = f.sampler();
    const auto sched = f.build();
    const std::uint64_t seed = c.seed.value_or(0);
    std::optional<ImageShape> shape;
    if (!c.shape.empty())
        shape = parse_shape(c.shape);

    std::string phantom_kind;
    std::optional<Image> truth;
    if (!c.truth.empty())
        truth = load_truth(c.truth, shape, seed, &phantom_kind);
    if (truth && shape && truth->shape != *shape)
        throw ValidationError("--shape does not match the truth image");
    const auto spec = operator_spec(c.op, c.op_config);

    // Operator: simulated from the truth, or built from a measurement file.
    std::unique_ptr<ConsistencyOp> op;
    ImageShape geom;
    if (truth) {
        geom = truth->shape;
        op = make_operator(spec, geom, truth->data, sched);
    } else {
        if (c.measurement.empty())
            throw ValidationError("ccdf needs --truth or --measurement");
        if (spec.type == "mri") {
            auto y = read_raw_complex(c.measurement, geom);
            auto mask = !spec.mask_file.empty() ? load_mask(spec.mask_file)
                                                : gaussian1d_mask(geom, spec.accel, spec.acs_fraction, spec.mask_seed);
            op = std::make_unique<MriProjection>(std::move(mask), std::move(y));
        } else {
            auto m = load_image(c.measurement);
            geom = spec.type == "sr" && shape ? *shape : m.shape;
            if (spec.type == "sr")
                op = std::make_unique<SuperResolutionProjection>(geom, spec.factor, m.data, sched);
            else
                op = make_operator(spec, geom, m.data, sched);
        }
    }

    std::vector<double> x0;
    if (c.init == "vanilla") {
        x0 = vanilla_estimate(spec, *op, truth ? std::span<const double>(truth->data) : std::span<const double>{},
                              seed);
    } else if (c.init.rfind("file:", 0) == 0) {
        auto img = load_image(c.init.substr(5));
        if (img.shape.size() != geom.size())
            throw ValidationError("init image does not match the operator size");
        x0 = std::move(img.data);
    } else {
        throw ValidationError("--init must be vanilla or file:<path>");
    }

    std::unique_ptr<ScoreOracle> oracle;
    if (c.oracle == "conditional") {
        if (!c.reference.empty()) {
            auto r = load_image(c.reference);
            if (r.shape.size() != geom.size())
                throw ValidationError("reference image does not match the operator size");
            oracle = std::make_unique<ConditionalScoreOracle>(std::move(r.data));
        } else if (truth) {
            oracle = std::make_unique<ConditionalScoreOracle>(truth->data);
        } else {
            throw ValidationError("conditional oracle needs --reference or --truth");
        }
    } else if (c.oracle == "gaussian") {
        const std::string prior = !c.prior.empty() ? c.prior : phantom_kind;
        if (!prior.empty()) {
            oracle = std::make_unique<GaussianScoreOracle>(fit_phantom_prior(prior, geom, 32, c.variance_floor, seed));
        } else {
            double mean = 0.0, var = 0.0;
            for (double v : x0)
                mean += v;
            mean /= static_cast<double>(x0.size());
            for (double v : x0)
                var += (v - mean) * (v - mean);
            var = std::max(c.variance_floor, var / static_cast<double>(x0.size()));
            oracle = std::make_unique<GaussianScoreOracle>(std::vector<double>(x0.size(), mean), var);
        }
    } else {
        throw ValidationError("--oracle must be conditional or gaussian");
    }

    CcdfConfig cfg;
    cfg.t0 = c.t0;
    cfg.use_corrector = !c.no_corrector;
    cfg.corrector_r = c.corrector_r;
    if (c.corrector_rule == "squared")
        cfg.corrector_rule = CorrectorRule::Squared;
    else if (c.corrector_rule != "linear")
        throw ValidationError("--corrector-rule must be linear or squared");
    cfg.consistency_every_step = !c.final_consistency_only;

    RngStream rng(seed, 0);
    const auto r = ccdf_sample(x0, *op, cfg, sched, *oracle, rng);

    std::cout << "kind " << to_string(kind) << "\n"
              << "n_prime " << r.n_prime << "\n"
              << "reverse_iterations " << r.reverse_steps << "\n"
              << "corrector_steps " << r.corrector_steps << "\n"
              << "corrector_skips " << r.corrector_skips << "\n"
              << "consistency_applications " << r.consistency_applications << "\n";
    std::cout.precision(10);
    if (auto* mri = dynamic_cast<const MriProjection*>(op.get()))
        std::cout << "consistency_residual " << mri->consistency_residual(r.x) << "\n";
    if (truth) {
        std::cout << "psnr " << psnr(truth->data, r.x) << "\n"
                  << "init_psnr " << psnr(truth->data, x0) << "\n";
    }
    if (!c.out.empty())
        save_image(c.out, geom, r.x);
    return 0;
}

int cmd_phantom(const std::string& kind, const std::string& shape, std::uint64_t seed, std::size_t block,
                const std::string& out)
{
    const auto p = make_phantom(kind, parse_shape(shape), seed, block);
    if (out.empty())
        throw ValidationError("phantom needs --out");
    save_image(out, p.shape, p.data);
    double sum = 0.0;
    for (double v : p.data)
        sum += v;
    std::cout.precision(17);
    std::cout << "shape " << to_string(p.shape) << "\nsum " << sum << "\n";
    return 0;
}

int cmd_check_op(const std::string& type, const std::string& op_config, const std::string& shape_text,
                 int probes, std::uint64_t seed)
{
    const auto shape = parse_shape(shape_text);
    const auto spec = operator_spec(type, op_config);
    const auto truth = make_phantom("ellipses", shape, seed).data;
    const auto sched = Schedule::variance_preserving(1e-4, 0.02, 1000);
    const auto op = make_operator(spec, shape, truth, sched);
    RngStream rng(seed, 0x636b);
    const auto cert = inspect_nonexpansive(*op, probes, rng);
    const auto proj = check_projection(*op, probes, rng);
    const auto hut = estimate_tau_hutchinson(*op, std::max(probes, 64), rng);
    std::cout.precision(17);
    std::cout << "operator " << op->describe() << "\n"
              << "sigma_max_estimate " << cert.sigma_max_estimate << "\n"
              << "power_iterations " << cert.iterations << "\n"
              << "max_pair_ratio " << cert.max_pair_ratio << "\n"
              << "idempotence_error " << proj.idempotence_error << "\n"
              << "symmetry_error " << proj.symmetry_error << "\n";
    if (auto t = op->exact_tau())
        std::cout << "tau_exact " << *t << "\n";
    std::cout << "tau_hutchinson " << hut.value << " +- " << hut.std_error << "\n"
              << "certified " << (cert.certified ? "yes" : "no") << "\n";
    if (auto* mri = dynamic_cast<const MriProjection*>(op.get()))
        std::cout << "anchor_imaginary_residual " << mri->anchor_imaginary_residual() << "\n";
    return cert.certified ? 0 : 2;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Accelerated conditional diffusion: samplers, consistency maps and contraction analysis"};
    app.require_subcommand(1);

    ScheduleFlags sched_flags;

    auto* sc = app.add_subcommand("schedule", "write a schedule as CSV");
    std::string schedule_out;
    sched_flags.add(sc);
    sc->add_option("--out", schedule_out, "CSV path (default stdout)");

    ScheduleFlags contract_sched;
    ContractFlags contract;
    auto* ct = app.add_subcommand("contract", "contraction report: lambda, C, tau, bounds");
    contract_sched.add(ct);
    ct->add_option("--t0", contract.t0, "shortcut fraction");
    ct->add_option("--n-prime", contract.n_prime, "shortcut step (overrides --t0)");
    ct->add_option("--n", contract.n, "dimension");
    ct->add_option("--eps0", contract.eps0, "initial squared error");
    ct->add_option("--tau", contract.tau, "Tr(A^T A)/n");
    ct->add_option("--op", contract.op, "take tau from an operator: identity | sr | inpaint | mri");
    ct->add_option("--op-config", contract.op_config, "key=value operator settings");
    ct->add_option("--shape", contract.shape, "HxW for --op");
    ct->add_flag("--ve", contract.ve, "DDIM analysis on a VE schedule");
    ct->add_flag("--csv", contract.csv_only, "per-step CSV only");
    ct->add_option("--out", contract.out, "output path (default stdout)");

    ScheduleFlags shortcut_sched;
    ShortcutFlags shortcut;
    auto* sh = app.add_subcommand("shortcut", "minimal N' for eps_{0,r} <= mu eps0");
    shortcut_sched.add(sh);
    sh->add_option("--eps0", shortcut.eps0, "initial squared error")->required();
    sh->add_option("--mu", shortcut.mu, "target fraction in (0, 1]");
    sh->add_option("--tau", shortcut.tau, "Tr(A^T A)/n");
    sh->add_option("--n", shortcut.n, "dimension");
    sh->add_option("--op", shortcut.op, "take tau from an operator");
    sh->add_option("--op-config", shortcut.op_config, "key=value operator settings");
    sh->add_option("--shape", shortcut.shape, "HxW for --op");
    sh->add_flag("--ve", shortcut.ve, "DDIM analysis on a VE schedule");

    ScheduleFlags sim_sched;
    SimulateFlags sim;
    auto* sm = app.add_subcommand("simulate", "coupled-pair error curves and t0 sweeps");
    sim_sched.add(sm);
    sm->add_option("--seed", sim.seed, "experiment seed (required)");
    sm->add_option("--config", sim.config, "key=value experiment file");
    sm->add_option("--t0", sim.t0, "one or more t0 values")->delimiter(',');
    sm->add_option("--trials", sim.trials, "Monte Carlo pairs");
    sm->add_option("--shape", sim.shape, "n or HxW");
    sm->add_option("--truth", sim.truth, "random | ellipses | blocks | file:<path>");
    sm->add_option("--op", sim.op, "identity | sr | inpaint | mri");
    sm->add_option("--op-config", sim.op_config, "key=value operator settings");
    sm->add_option("--oracle", sim.oracle, "conditional | gaussian");
    sm->add_option("--init", sim.init, "random | vanilla | refined");
    sm->add_option("--init-file", sim.init_file, "initial estimate image");
    sm->add_flag("--shared-noise", sim.shared_noise, "share reverse noise within each pair");
    sm->add_flag("--corrector", sim.corrector, "Langevin corrector on VE");
    sm->add_option("--corrector-rule", sim.corrector_rule, "linear | squared");
    sm->add_flag("--compare-inits", sim.compare_inits, "run random, vanilla and refined inits");
    sm->add_flag("--sweep", sim.sweep, "t0 sweep (adds t0 = 1)");
    sm->add_option("--threads", sim.threads, "worker threads (0 = all cores)");
    sm->add_option("--out", sim.out, "curves CSV (default stdout)");
    sm->add_option("--sweep-out", sim.sweep_out, "sweep CSV (default stdout)");
    sm->add_option("--gnuplot", sim.gnuplot, "write a gnuplot script for the curves CSV");

    ScheduleFlags ccdf_sched;
    CcdfFlags cc;
    auto* cd = app.add_subcommand("ccdf", "run one accelerated reconstruction");
    ccdf_sched.add(cd);
    cd->add_option("--t0", cc.t0, "start fraction, N' = round(t0 N)");
    cd->add_option("--seed", cc.seed, "random seed");
    cd->add_option("--op", cc.op, "sr | inpaint | mri | identity");
    cd->add_option("--op-config", cc.op_config, "key=value operator settings");
    cd->add_option("--init", cc.init, "vanilla | file:<path>");
    cd->add_option("--out", cc.out, "reconstruction (.pgm or raw)");
    cd->add_option("--truth", cc.truth, "ground truth image or phantom:<kind>; simulates the measurement");
    cd->add_option("--measurement", cc.measurement, "measured image (sr, inpaint) or raw complex k-space (mri)");
    cd->add_option("--reference", cc.reference, "anchor for the conditional oracle");
    cd->add_option("--shape", cc.shape, "HxW for phantoms");
    cd->add_option("--oracle", cc.oracle, "conditional | gaussian");
    cd->add_option("--prior", cc.prior, "phantom kind for the Gaussian prior");
    cd->add_option("--variance-floor", cc.variance_floor, "Gaussian prior variance floor");
    cd->add_flag("--no-corrector", cc.no_corrector, "predictor only on VE");
    cd->add_option("--corrector-rule", cc.corrector_rule, "linear | squared");
    cd->add_option("--corrector-r", cc.corrector_r, "corrector ratio r");
    cd->add_flag("--final-consistency-only", cc.final_consistency_only, "consistency only after the last step");

    std::string phantom_kind = "ellipses", phantom_shape = "64x64", phantom_out;
    std::uint64_t phantom_seed = 0;
    std::size_t phantom_block = 8;
    auto* ph = app.add_subcommand("phantom", "write a synthetic test image");
    ph->add_option("--kind", phantom_kind, "ellipses | blocks");
    ph->add_option("--shape", phantom_shape, "HxW");
    ph->add_option("--seed", phantom_seed, "jitter seed");
    ph->add_option("--block", phantom_block, "tile size for blocks");
    ph->add_option("--out", phantom_out, "output (.pgm or raw)");

    std::string check_type = "mri", check_config, check_shape = "64x64";
    int check_probes = 20;
    std::uint64_t check_seed = 0;
    auto* co = app.add_subcommand("check-op", "certify a consistency operator");
    co->add_option("--op", check_type, "identity | sr | inpaint | mri");
    co->add_option("--op-config", check_config, "key=value operator settings");
    co->add_option("--shape", check_shape, "HxW");
    co->add_option("--probes", check_probes, "random probes");
    co->add_option("--seed", check_seed, "seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (sc->parsed())
            return cmd_schedule(sched_flags, schedule_out);
        if (ct->parsed())
            return cmd_contract(contract_sched, contract);
        if (sh->parsed())
            return cmd_shortcut(shortcut_sched, shortcut);
        if (sm->parsed())
            return cmd_simulate(sim, sim_sched, *sm);
        if (cd->parsed())
            return cmd_ccdf(cc, ccdf_sched);
        if (ph->parsed())
            return cmd_phantom(phantom_kind, phantom_shape, phantom_seed, phantom_block, phantom_out);
        if (co->parsed())
            return cmd_check_op(check_type, check_config, check_shape, check_probes, check_seed);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
