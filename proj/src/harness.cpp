#include "ccdf/harness.hpp"

#include "ccdf/error.hpp"
#include "ccdf/io.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

namespace ccdf {

namespace {

constexpr std::uint64_t kTruthStream = 0x7472757468;
constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kVanillaStream = 0x76616e;
constexpr std::uint64_t kTrialStream = 0x747269616c;
constexpr std::uint64_t kPhantomStream = 0x5048;
constexpr int kBlock = 64;

struct Ellipse {
    double amp, a, b, x0, y0, phi_deg;
};

// Modified Shepp-Logan table.
constexpr Ellipse kHead[] = {
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},        {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
    {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},    {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
    {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},       {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
    {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},     {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
    {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},   {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
};

// Welford accumulator per step.
struct StepStats {
    std::vector<double> count, mean, m2;

    explicit StepStats(std::size_t steps) : count(steps, 0.0), mean(steps, 0.0), m2(steps, 0.0) {}

    void add(std::size_t k, double v)
    {
        count[k] += 1.0;
        const double d = v - mean[k];
        mean[k] += d / count[k];
        m2[k] += d * (v - mean[k]);
    }

    void merge(const StepStats& o)
    {
        for (std::size_t k = 0; k < count.size(); ++k) {
            const double n = count[k] + o.count[k];
            if (n == 0.0)
                continue;
            const double d = o.mean[k] - mean[k];
            mean[k] += d * o.count[k] / n;
            m2[k] += o.m2[k] + d * d * count[k] * o.count[k] / n;
            count[k] = n;
        }
    }
};

double sq_dist(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

std::vector<double> uniform_vector(std::size_t n, std::uint64_t seed, std::uint64_t stream)
{
    RngStream rng(seed, stream);
    std::vector<double> v(n);
    for (auto& x : v)
        x = rng.uniform();
    return v;
}

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

int worker_count(int requested)
{
    if (requested > 0)
        return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(block) for blocks [0, blocks) over `threads` workers.
template <class F>
void parallel_blocks(int blocks, int threads, F&& fn)
{
    threads = std::min(threads, blocks);
    if (threads <= 1) {
        for (int b = 0; b < blocks; ++b)
            fn(b);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int b; (b = next.fetch_add(1)) < blocks;) {
                try {
                    fn(b);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                    next.store(blocks);
                }
            }
        });
    for (auto& th : pool)
        th.join();
    if (error)
        std::rethrow_exception(error);
}

} // namespace

Phantom make_phantom(const std::string& kind, ImageShape shape, std::uint64_t seed, std::size_t block)
{
    if (shape.height == 0 || shape.width == 0)
        throw ValidationError("phantom shape must be positive, got " + to_string(shape));
    Phantom p{kind, shape, seed, std::vector<double>(shape.size(), 0.0)};
    RngStream rng(seed, kPhantomStream);
    if (kind == "ellipses") {
        std::vector<Ellipse> es(std::begin(kHead), std::end(kHead));
        for (std::size_t e = 2; e < es.size(); ++e) {
            es[e].x0 += 0.04 * (rng.uniform() - 0.5);
            es[e].y0 += 0.04 * (rng.uniform() - 0.5);
            es[e].a *= 1.0 + 0.1 * (rng.uniform() - 0.5);
            es[e].b *= 1.0 + 0.1 * (rng.uniform() - 0.5);
            es[e].phi_deg += 10.0 * (rng.uniform() - 0.5);
        }
        for (std::size_t r = 0; r < shape.height; ++r) {
            const double y = 1.0 - (2.0 * r + 1.0) / shape.height;
            for (std::size_t c = 0; c < shape.width; ++c) {
                const double x = (2.0 * c + 1.0) / shape.width - 1.0;
                double v = 0.0;
                for (const auto& e : es) {
                    const double phi = e.phi_deg * std::numbers::pi / 180.0;
                    const double dx = x - e.x0, dy = y - e.y0;
                    const double u = dx * std::cos(phi) + dy * std::sin(phi);
                    const double w = -dx * std::sin(phi) + dy * std::cos(phi);
                    if ((u * u) / (e.a * e.a) + (w * w) / (e.b * e.b) <= 1.0)
                        v += e.amp;
                }
                p.data[r * shape.width + c] = std::clamp(v, 0.0, 1.0);
            }
        }
    } else if (kind == "blocks") {
        if (block == 0)
            throw ValidationError("block size must be positive");
        const std::size_t bh = (shape.height + block - 1) / block;
        const std::size_t bw = (shape.width + block - 1) / block;
        std::vector<double> level(bh * bw);
        for (auto& l : level)
            l = rng.uniform();
        for (std::size_t r = 0; r < shape.height; ++r)
            for (std::size_t c = 0; c < shape.width; ++c)
                p.data[r * shape.width + c] = level[(r / block) * bw + c / block];
    } else {
        throw ValidationError("unknown phantom kind '" + kind + "' (expected ellipses or blocks)");
    }
    return p;
}

std::string_view to_string(InitMode mode)
{
    switch (mode) {
    case InitMode::Random: return "random";
    case InitMode::Vanilla: return "vanilla";
    case InitMode::Refined: return "refined";
    case InitMode::File: return "file";
    }
    return "?";
}

InitMode parse_init_mode(std::string_view text)
{
    const auto s = lower(text);
    if (s == "random")
        return InitMode::Random;
    if (s == "vanilla")
        return InitMode::Vanilla;
    if (s == "refined")
        return InitMode::Refined;
    if (s == "file")
        return InitMode::File;
    throw ValidationError("unknown init mode '" + std::string(text) + "'");
}

std::string_view to_string(OracleKind kind)
{
    return kind == OracleKind::Conditional ? "conditional" : "gaussian";
}

OracleKind parse_oracle_kind(std::string_view text)
{
    const auto s = lower(text);
    if (s == "conditional")
        return OracleKind::Conditional;
    if (s == "gaussian")
        return OracleKind::Gaussian;
    throw ValidationError("unknown oracle '" + std::string(text) + "'");
}

Schedule ScheduleSpec::build(SamplerKind kind) const
{
    if (kind == SamplerKind::SMLD)
        return Schedule::variance_exploding(sigma_min, sigma_max, n_steps);
    return Schedule::variance_preserving(beta_min, beta_max, n_steps, variance).with_kind(kind);
}

std::unique_ptr<ConsistencyOp> make_operator(const OperatorSpec& spec, ImageShape shape,
                                             std::span<const double> truth, const Schedule& schedule)
{
    detail::require(truth.size() == shape.size(), "ground truth does not match the shape");
    if (spec.type == "identity")
        return std::make_unique<IdentityConsistency>(shape.size());
    if (spec.type == "sr")
        return std::make_unique<SuperResolutionProjection>(shape, spec.factor, truth, schedule);
    if (spec.type == "inpaint") {
        SamplingMask mask = !spec.mask_file.empty() ? load_mask(spec.mask_file)
                            : spec.box > 0          ? box_hole_mask(shape, spec.box, spec.box)
                                                    : random_pixel_mask(shape, spec.keep_fraction, spec.mask_seed);
        if (mask.shape != shape)
            throw ValidationError("mask shape " + to_string(mask.shape) + " does not match " + to_string(shape));
        return std::make_unique<InpaintProjection>(std::move(mask), truth, schedule);
    }
    if (spec.type == "mri") {
        SamplingMask mask = !spec.mask_file.empty()
                                ? load_mask(spec.mask_file)
                                : gaussian1d_mask(shape, spec.accel, spec.acs_fraction, spec.mask_seed);
        if (mask.shape != shape)
            throw ValidationError("mask shape " + to_string(mask.shape) + " does not match " + to_string(shape));
        return std::make_unique<MriProjection>(MriProjection::from_image(std::move(mask), truth));
    }
    throw ValidationError("unknown operator '" + spec.type + "' (expected identity, sr, inpaint or mri)");
}

std::vector<double> vanilla_estimate(const OperatorSpec& spec, const ConsistencyOp& op,
                                     std::span<const double> truth, std::uint64_t seed)
{
    if (auto* sr = dynamic_cast<const SuperResolutionProjection*>(&op))
        return sr->projected_measurement();
    if (auto* inp = dynamic_cast<const InpaintProjection*>(&op))
        return inp->masked_measurement();
    if (auto* mri = dynamic_cast<const MriProjection*>(&op))
        return mri->zero_filled();
    if (spec.type != "identity")
        throw ValidationError("no vanilla estimate for operator " + op.describe());
    RngStream rng(seed, kVanillaStream);
    std::vector<double> v(truth.begin(), truth.end());
    for (auto& x : v)
        x += 0.1 * rng.normal();
    return v;
}

GaussianScoreOracle fit_phantom_prior(const std::string& kind, ImageShape shape, int samples,
                                      double variance_floor, std::uint64_t exclude_seed)
{
    detail::require(samples >= 2, "prior needs at least two phantom samples");
    detail::require(variance_floor > 0.0, "variance floor must be positive");
    const std::size_t n = shape.size();
    std::vector<double> mean(n, 0.0), m2(n, 0.0);
    std::uint64_t s = exclude_seed;
    for (int k = 0; k < samples; ++k) {
        do
            s = splitmix64(s);
        while (s == exclude_seed);
        const auto p = make_phantom(kind, shape, s);
        for (std::size_t j = 0; j < n; ++j) {
            const double d = p.data[j] - mean[j];
            mean[j] += d / (k + 1);
            m2[j] += d * (p.data[j] - mean[j]);
        }
    }
    std::vector<double> var(n);
    for (std::size_t j = 0; j < n; ++j)
        var[j] = std::max(variance_floor, m2[j] / (samples - 1));
    return GaussianScoreOracle(std::move(mean), std::move(var));
}

void ExperimentConfig::validate() const
{
    detail::require(!t0_grid.empty(), "t0 grid is empty");
    for (double t : t0_grid)
        detail::require(t > 0.0 && t <= 1.0, "t0 values must lie in (0, 1]");
    detail::require(trials >= 2, "at least two trials are needed for a standard error");
    detail::require(shape.size() > 0, "dimension must be positive");
    detail::require(schedule.n_steps >= 2, "schedule needs at least two steps");
    detail::require(refine_fraction >= 0.0 && refine_fraction <= 1.0, "refine fraction must lie in [0, 1]");
    detail::require(corrector_r >= 0.0, "corrector ratio must be non-negative");
    if (init == InitMode::File) {
        detail::require(!init_path.empty(), "file init needs a path");
        detail::require(std::filesystem::exists(init_path), "init file does not exist: " + init_path);
    }
    if (truth.rfind("file:", 0) == 0)
        detail::require(std::filesystem::exists(truth.substr(5)), "truth file does not exist: " + truth.substr(5));
    else
        detail::require(truth == "random" || truth == "ellipses" || truth == "blocks",
                        "truth must be random, ellipses, blocks or file:<path>");
    if (!op.mask_file.empty())
        detail::require(std::filesystem::exists(op.mask_file), "mask file does not exist: " + op.mask_file);
}

ExperimentConfig ExperimentConfig::from_config(const KeyValueConfig& kv)
{
    kv.require_known({"kind", "beta_min", "beta_max", "sigma_min", "sigma_max", "n_steps", "variance", "t0",
                      "trials", "shape", "truth", "op", "factor", "keep_fraction", "box", "accel", "acs_fraction",
                      "mask_seed", "mask", "oracle", "prior_samples", "variance_floor", "init", "init_path",
                      "refine_fraction", "seed", "shared_reverse_noise", "corrector", "corrector_rule",
                      "corrector_r", "consistency_every_step", "threads"});
    ExperimentConfig c;
    c.kind = parse_sampler_kind(kv.get("kind", "ddpm"));
    c.schedule.beta_min = kv.get_double("beta_min", c.schedule.beta_min);
    c.schedule.beta_max = kv.get_double("beta_max", c.schedule.beta_max);
    c.schedule.sigma_min = kv.get_double("sigma_min", c.schedule.sigma_min);
    c.schedule.sigma_max = kv.get_double("sigma_max", c.schedule.sigma_max);
    c.schedule.n_steps = static_cast<int>(kv.get_int("n_steps", c.schedule.n_steps));
    const auto var = kv.get("variance", "beta");
    if (var == "beta")
        c.schedule.variance = ReverseVariance::Beta;
    else if (var == "beta_tilde")
        c.schedule.variance = ReverseVariance::BetaTilde;
    else
        throw ValidationError("variance must be beta or beta_tilde");
    if (kv.has("t0")) {
        c.t0_grid.clear();
        std::stringstream ss(kv.get("t0"));
        for (std::string item; std::getline(ss, item, ',');) {
            KeyValueConfig one;
            one.set("t0", item);
            c.t0_grid.push_back(one.get_double("t0", 0.0));
        }
    }
    c.trials = static_cast<int>(kv.get_int("trials", c.trials));
    if (kv.has("shape"))
        c.shape = parse_shape(kv.get("shape"));
    c.truth = kv.get("truth", c.truth);
    c.op.type = kv.get("op", c.op.type);
    c.op.factor = static_cast<std::size_t>(kv.get_int("factor", static_cast<long long>(c.op.factor)));
    c.op.keep_fraction = kv.get_double("keep_fraction", c.op.keep_fraction);
    c.op.box = static_cast<std::size_t>(kv.get_int("box", 0));
    c.op.accel = kv.get_double("accel", c.op.accel);
    c.op.acs_fraction = kv.get_double("acs_fraction", c.op.acs_fraction);
    c.op.mask_seed = static_cast<std::uint64_t>(kv.get_int("mask_seed", 1));
    c.op.mask_file = kv.get("mask", "");
    c.oracle.kind = parse_oracle_kind(kv.get("oracle", "conditional"));
    c.oracle.prior_samples = static_cast<int>(kv.get_int("prior_samples", c.oracle.prior_samples));
    c.oracle.variance_floor = kv.get_double("variance_floor", c.oracle.variance_floor);
    c.init = parse_init_mode(kv.get("init", "vanilla"));
    c.init_path = kv.get("init_path", "");
    c.refine_fraction = kv.get_double("refine_fraction", c.refine_fraction);
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
    c.shared_reverse_noise = kv.get_bool("shared_reverse_noise", false);
    c.use_corrector = kv.get_bool("corrector", false);
    const auto rule = kv.get("corrector_rule", "linear");
    if (rule == "linear")
        c.corrector_rule = CorrectorRule::Linear;
    else if (rule == "squared")
        c.corrector_rule = CorrectorRule::Squared;
    else
        throw ValidationError("corrector_rule must be linear or squared");
    c.corrector_r = kv.get_double("corrector_r", c.corrector_r);
    c.consistency_every_step = kv.get_bool("consistency_every_step", true);
    c.threads = static_cast<int>(kv.get_int("threads", 0));
    return c;
}

ExperimentSetup make_setup(const ExperimentConfig& cfg)
{
    cfg.validate();
    ExperimentSetup s{cfg.schedule.build(cfg.kind), cfg.shape, {}, {}, nullptr, nullptr, 1.0, 0.0};
    const std::size_t n = cfg.shape.size();

    std::string phantom_kind;
    if (cfg.truth == "random") {
        s.truth = uniform_vector(n, cfg.seed, kTruthStream);
    } else if (cfg.truth.rfind("file:", 0) == 0) {
        auto img = load_image(cfg.truth.substr(5));
        if (img.shape.size() != n)
            throw ValidationError("truth file has " + std::to_string(img.shape.size()) + " values, expected " +
                                  std::to_string(n));
        s.truth = std::move(img.data);
    } else {
        phantom_kind = cfg.truth;
        s.truth = make_phantom(cfg.truth, cfg.shape, cfg.seed).data;
    }

    s.op = make_operator(cfg.op, cfg.shape, s.truth, s.schedule);

    switch (cfg.init) {
    case InitMode::Random: {
        RngStream rng(cfg.seed, kInitStream);
        s.init = rng.normal_vector(n);
        break;
    }
    case InitMode::Vanilla:
        s.init = vanilla_estimate(cfg.op, *s.op, s.truth, cfg.seed);
        break;
    case InitMode::Refined: {
        s.init = vanilla_estimate(cfg.op, *s.op, s.truth, cfg.seed);
        for (std::size_t k = 0; k < n; ++k)
            s.init[k] = s.truth[k] + cfg.refine_fraction * (s.init[k] - s.truth[k]);
        break;
    }
    case InitMode::File: {
        auto img = load_image(cfg.init_path);
        if (img.shape.size() != n)
            throw ValidationError("init file has " + std::to_string(img.shape.size()) + " values, expected " +
                                  std::to_string(n));
        s.init = std::move(img.data);
        break;
    }
    }

    if (cfg.oracle.kind == OracleKind::Conditional) {
        s.oracle = std::make_unique<ConditionalScoreOracle>(s.truth);
    } else if (!phantom_kind.empty()) {
        s.oracle = std::make_unique<GaussianScoreOracle>(fit_phantom_prior(
            phantom_kind, cfg.shape, cfg.oracle.prior_samples, cfg.oracle.variance_floor, cfg.seed));
    } else if (cfg.truth == "random") {
        s.oracle = std::make_unique<GaussianScoreOracle>(std::vector<double>(n, 0.5), 1.0 / 12.0);
    } else {
        const double mean = std::accumulate(s.truth.begin(), s.truth.end(), 0.0) / n;
        double var = 0.0;
        for (double v : s.truth)
            var += (v - mean) * (v - mean);
        var = std::max(cfg.oracle.variance_floor, var / n);
        s.oracle = std::make_unique<GaussianScoreOracle>(std::vector<double>(n, mean), var);
    }

    s.tau = tau_of(*s.op).value;
    s.eps0 = sq_dist(s.truth, s.init);
    return s;
}

TrajectoryStats run_error_curve(const ExperimentConfig& cfg, double t0)
{
    const auto setup = make_setup(cfg);
    return run_error_curve(cfg, setup, t0);
}

TrajectoryStats run_error_curve(const ExperimentConfig& cfg, const ExperimentSetup& setup, double t0)
{
    cfg.validate();
    detail::require(t0 > 0.0 && t0 <= 1.0, "t0 must lie in (0, 1]");
    CcdfConfig cc;
    cc.t0 = t0;
    cc.corrector_r = cfg.corrector_r;
    cc.use_corrector = cfg.use_corrector;
    cc.corrector_rule = cfg.corrector_rule;
    cc.consistency_every_step = cfg.consistency_every_step;

    const Schedule& sched = setup.schedule;
    const int np = cc.n_prime(sched);
    const auto steps = static_cast<std::size_t>(np + 1);
    const bool xbar = cfg.kind == SamplerKind::DDIM && sched.is_variance_preserving();

    const int blocks = (cfg.trials + kBlock - 1) / kBlock;
    std::vector<StepStats> partial(static_cast<std::size_t>(blocks), StepStats(steps));
    const RngStream trial_root(cfg.seed, kTrialStream);

    parallel_blocks(blocks, worker_count(cfg.threads), [&](int b) {
        CcdfTrajectory ref(sched, *setup.oracle, *setup.op, cc);
        CcdfTrajectory other(sched, *setup.oracle, *setup.op, cc);
        auto& st = partial[static_cast<std::size_t>(b)];
        const int lo = b * kBlock, hi = std::min(cfg.trials, lo + kBlock);
        for (int t = lo; t < hi; ++t) {
            const RngStream base = trial_root.derive(static_cast<std::uint64_t>(t));
            RngStream f1 = base.derive(1), f2 = base.derive(2);
            RngStream r1 = base.derive(3), r2 = base.derive(cfg.shared_reverse_noise ? 3 : 4);
            RngStream a1 = base.derive(5), a2 = base.derive(5);
            ref.start(setup.truth, f1);
            other.start(setup.init, f2);
            for (std::size_t k = 0;; ++k) {
                const int i = ref.index();
                double e = sq_dist(ref.state(), other.state());
                if (xbar)
                    e /= sched.alpha_bar(i);
                st.add(k, e);
                if (i == 0)
                    break;
                ref.step(r1, a1);
                other.step(r2, a2);
            }
        }
    });

    StepStats total(steps);
    for (const auto& p : partial)
        total.merge(p);

    TrajectoryStats out;
    out.kind = cfg.kind;
    out.t0 = t0;
    out.n_prime = np;
    out.trials = cfg.trials;
    out.eps0 = setup.eps0;
    out.tau = setup.tau;
    out.initial_error = setup.eps0;
    const auto report = contraction_report(sched, cfg.kind, np, setup.truth.size(), setup.eps0, setup.tau);
    out.bound_simple = report.bound_simple;
    for (std::size_t k = 0; k < steps; ++k) {
        out.index.push_back(np - static_cast<int>(k));
        out.mean.push_back(total.mean[k]);
        const double c = total.count[k];
        out.std_error.push_back(std::sqrt(total.m2[k] / (c - 1.0) / c));
        out.bound.push_back(report.bound_trace[k]);
    }
    return out;
}

SweepResult run_t0_sweep(const ExperimentConfig& cfg)
{
    const auto setup = make_setup(cfg);
    auto grid = cfg.t0_grid;
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (grid.back() != 1.0)
        grid.push_back(1.0);

    SweepResult res;
    res.eps0 = setup.eps0;
    double best = std::numeric_limits<double>::infinity();
    for (double t0 : grid) {
        auto curve = run_error_curve(cfg, setup, t0);
        res.rows.push_back({t0, curve.n_prime, curve.final_mean(), curve.final_se(), curve.bound.back(),
                            curve.bound_simple});
        if (curve.final_mean() < best) {
            best = curve.final_mean();
            res.argmin_t0 = t0;
        }
        res.curves.push_back(std::move(curve));
    }
    const double full = res.rows.back().final_mean;
    res.beats_full_path = std::any_of(res.rows.begin(), res.rows.end() - 1,
                                      [&](const SweepRow& r) { return r.final_mean < full; });
    return res;
}

void write_curve_csv(std::ostream& out, const TrajectoryStats& s)
{
    write_curves_csv(out, {s}, {std::string(to_string(s.kind))});
}

void write_curves_csv(std::ostream& out, const std::vector<TrajectoryStats>& curves,
                      const std::vector<std::string>& labels)
{
    detail::require(curves.size() == labels.size(), "one label per curve");
    const auto old = out.precision(17);
    out << "label,kind,t0,n_prime,eps0,i,step,mean_sq_error,std_error,bound_recursive\n";
    for (std::size_t c = 0; c < curves.size(); ++c) {
        const auto& s = curves[c];
        for (std::size_t k = 0; k < s.index.size(); ++k)
            out << labels[c] << ',' << to_string(s.kind) << ',' << s.t0 << ',' << s.n_prime << ',' << s.eps0 << ','
                << s.index[k] << ',' << k << ',' << s.mean[k] << ',' << s.std_error[k] << ',' << s.bound[k]
                << '\n';
    }
    out.precision(old);
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep)
{
    const auto old = out.precision(17);
    out << "t0,n_prime,eps0,final_mean,final_se,bound_recursive,bound_simple,argmin\n";
    for (const auto& r : sweep.rows)
        out << r.t0 << ',' << r.n_prime << ',' << sweep.eps0 << ',' << r.final_mean << ',' << r.final_se << ','
            << r.bound_recursive << ',' << r.bound_simple << ',' << (r.t0 == sweep.argmin_t0 ? 1 : 0) << '\n';
    out.precision(old);
}

void write_gnuplot_script(std::ostream& out, const std::string& csv_path, const std::vector<std::string>& labels)
{
    out << "set datafile separator ','\n"
           "set key autotitle columnhead\n"
           "set logscale y\n"
           "set xlabel 'reverse step (from N prime)'\n"
           "set ylabel 'mean squared error'\n"
           "plot \\\n";
    for (std::size_t c = 0; c < labels.size(); ++c) {
        out << "  '" << csv_path << "' using (strcol(1) eq '" << labels[c] << "' ? $7 : 1/0):8 with lines title '"
            << labels[c] << "', \\\n"
            << "  '" << csv_path << "' using (strcol(1) eq '" << labels[c]
            << "' ? $7 : 1/0):10 with lines dashtype 2 title '" << labels[c] << " bound'"
            << (c + 1 < labels.size() ? ", \\\n" : "\n");
    }
}

double psnr(std::span<const double> reference, std::span<const double> estimate)
{
    detail::require(reference.size() == estimate.size() && !reference.empty(), "PSNR needs equal-size images");
    const double mse = sq_dist(reference, estimate) / static_cast<double>(reference.size());
    if (mse == 0.0)
        return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(mse);
}

MriDemoResult run_mri_demo(const Phantom& phantom, const MriDemoConfig& cfg)
{
    detail::require(cfg.trials >= 1, "MRI demo needs at least one trial");
    const auto t_begin = std::chrono::steady_clock::now();
    const Schedule sched = cfg.schedule.build(SamplerKind::SMLD);
    MriDemoResult res;
    res.mask = gaussian1d_mask(phantom.shape, cfg.accel, cfg.acs_fraction, cfg.mask_seed);
    if (!res.mask.conjugate_symmetric())
        throw ValidationError("MRI demo mask is not conjugate-symmetric");
    const auto op = MriProjection::from_image(res.mask, phantom.data);
    res.zero_filled = op.zero_filled();
    res.zero_filled_psnr = psnr(phantom.data, res.zero_filled);

    std::unique_ptr<ScoreOracle> oracle;
    if (cfg.oracle == OracleKind::Conditional)
        oracle = std::make_unique<ConditionalScoreOracle>(phantom.data);
    else
        oracle = std::make_unique<GaussianScoreOracle>(
            fit_phantom_prior(phantom.kind, phantom.shape, cfg.prior_samples, cfg.variance_floor, phantom.seed));

    CcdfConfig cc;
    cc.t0 = cfg.t0;
    cc.use_corrector = cfg.use_corrector;
    cc.corrector_rule = cfg.corrector_rule;
    cc.corrector_r = cfg.corrector_r;

    double psnr_sum = 0.0;
    for (int t = 0; t < cfg.trials; ++t) {
        RngStream rng(cfg.seed, static_cast<std::uint64_t>(t));
        auto r = ccdf_sample(res.zero_filled, op, cc, sched, *oracle, rng);
        psnr_sum += psnr(phantom.data, r.x);
        res.max_residual = std::max(res.max_residual, op.consistency_residual(r.x));
        if (t == 0) {
            res.reconstruction = std::move(r.x);
            res.n_prime = r.n_prime;
            res.reverse_steps = r.reverse_steps;
            res.corrector_steps = r.corrector_steps;
            res.corrector_skips = r.corrector_skips;
        }
    }
    res.psnr = psnr_sum / cfg.trials;
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
    return res;
}

} // namespace ccdf
