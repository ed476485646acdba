#include "ccdf/analysis.hpp"
#include "ccdf/error.hpp"
#include "ccdf/harness.hpp"
#include "ccdf/samplers.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace ccdf;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vec(const Array& a)
{
    return std::vector<double>(a.data(), a.data() + a.size());
}

Array to_array(const std::vector<double>& v)
{
    Array out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

Array to_image(const std::vector<double>& v, ImageShape shape)
{
    Array out({static_cast<py::ssize_t>(shape.height), static_cast<py::ssize_t>(shape.width)});
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

ImageShape shape_of(const Array& a)
{
    if (a.ndim() == 2)
        return {static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))};
    if (a.ndim() == 1)
        return {1, static_cast<std::size_t>(a.shape(0))};
    throw ValidationError("expected a 1-D or 2-D array");
}

SamplingMask mask_of(const py::array_t<bool, py::array::c_style | py::array::forcecast>& m)
{
    if (m.ndim() != 2)
        throw ValidationError("mask must be 2-D");
    SamplingMask mask{{static_cast<std::size_t>(m.shape(0)), static_cast<std::size_t>(m.shape(1))}, {}};
    mask.keep.assign(m.data(), m.data() + m.size());
    return mask;
}

py::array_t<bool> mask_array(const SamplingMask& mask)
{
    py::array_t<bool> out({static_cast<py::ssize_t>(mask.shape.height), static_cast<py::ssize_t>(mask.shape.width)});
    std::copy(mask.keep.begin(), mask.keep.end(), out.mutable_data());
    return out;
}

SamplerKind kind_of(const std::string& s)
{
    return parse_sampler_kind(s);
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Accelerated conditional diffusion: samplers, consistency operators and contraction analysis";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::class_<Schedule>(m, "Schedule")
        .def_property_readonly("kind", [](const Schedule& s) { return std::string(to_string(s.kind())); })
        .def_property_readonly("size", &Schedule::size)
        .def_property_readonly("variance_preserving", &Schedule::is_variance_preserving)
        .def("with_kind", [](const Schedule& s, const std::string& k) { return s.with_kind(kind_of(k)); })
        .def("beta", &Schedule::beta)
        .def("alpha", &Schedule::alpha)
        .def("alpha_bar", &Schedule::alpha_bar)
        .def("sigma", &Schedule::sigma)
        .def("ddim_sigma", &Schedule::ddim_sigma)
        .def("forward_coeffs",
             [](const Schedule& s, int i) {
                 const auto c = s.forward_coeffs(i);
                 return py::make_tuple(c.a, c.b);
             })
        .def("index_for_time", &Schedule::index_for_time);

    m.def("make_vp_schedule", &make_vp_schedule, py::arg("beta_min") = 1e-4, py::arg("beta_max") = 0.02,
          py::arg("n_steps") = 1000);
    m.def("make_ve_schedule", &make_ve_schedule, py::arg("sigma_min") = 0.01, py::arg("sigma_max") = 378.0,
          py::arg("n_steps") = 1000);

    py::class_<ScoreOracle>(m, "ScoreOracle")
        .def("__call__", [](const ScoreOracle& o, const Array& x, int i,
                            const Schedule& s) { return to_array(eval_score(o, to_vec(x), i, s)); })
        .def("jacobian_diagonal", [](const ScoreOracle& o, const Array& x, int i, const Schedule& s) {
            return to_array(score_jacobian_diag(o, to_vec(x), i, s));
        });
    py::class_<ConditionalScoreOracle, ScoreOracle>(m, "ConditionalScoreOracle")
        .def(py::init([](const Array& ref) { return ConditionalScoreOracle(to_vec(ref)); }));
    py::class_<GaussianScoreOracle, ScoreOracle>(m, "GaussianScoreOracle")
        .def(py::init([](const Array& mu, double var) { return GaussianScoreOracle(to_vec(mu), var); }));

    py::class_<ConsistencyOp>(m, "ConsistencyOp")
        .def_property_readonly("dim", &ConsistencyOp::dim)
        .def("describe", &ConsistencyOp::describe)
        .def_property_readonly("tau", [](const ConsistencyOp& op) { return tau_of(op).value; })
        .def("apply_linear", [](const ConsistencyOp& op, const Array& x) {
            std::vector<double> out(op.dim());
            const auto v = to_vec(x);
            if (v.size() != op.dim())
                throw ValidationError("input has the wrong size");
            op.apply_linear(v, out);
            return to_array(out);
        });
    py::class_<IdentityConsistency, ConsistencyOp>(m, "IdentityConsistency").def(py::init<std::size_t>());
    py::class_<SuperResolutionProjection, ConsistencyOp>(m, "SuperResolutionProjection")
        .def(py::init([](const Array& truth, std::size_t factor, const Schedule& s) {
            return std::make_unique<SuperResolutionProjection>(shape_of(truth), factor, to_vec(truth), s);
        }));
    py::class_<InpaintProjection, ConsistencyOp>(m, "InpaintProjection")
        .def(py::init([](const py::array_t<bool, py::array::c_style | py::array::forcecast>& mask,
                         const Array& truth, const Schedule& s) {
            return std::make_unique<InpaintProjection>(mask_of(mask), to_vec(truth), s);
        }));
    py::class_<MriProjection, ConsistencyOp>(m, "MriProjection")
        .def(py::init([](const py::array_t<bool, py::array::c_style | py::array::forcecast>& mask,
                         const Array& image) { return MriProjection::from_image(mask_of(mask), to_vec(image)); }))
        .def("consistency_residual",
             [](const MriProjection& op, const Array& x) { return op.consistency_residual(to_vec(x)); })
        .def_property_readonly("zero_filled",
                               [](const MriProjection& op) { return to_image(op.zero_filled(), op.mask().shape); });

    m.def("gaussian1d_mask", [](std::size_t h, std::size_t w, double accel, double acs, std::uint64_t seed) {
        return mask_array(gaussian1d_mask({h, w}, accel, acs, seed));
    }, py::arg("height"), py::arg("width"), py::arg("accel") = 4.0, py::arg("acs_fraction") = 0.08,
       py::arg("seed") = 1);

    m.def("step_contraction",
          [](const Schedule& s, const std::string& k, int i) { return step_contraction(s, kind_of(k), i); });
    m.def("forward_error", [](double eps0, const Schedule& s, const std::string& k, int np, std::size_t n) {
        return forward_error(eps0, s, kind_of(k), np, n);
    });
    m.def("contraction_report",
          [](const Schedule& s, const std::string& k, int np, std::size_t n, double eps0, double tau) {
              const auto r = contraction_report(s, kind_of(k), np, n, eps0, tau);
              py::dict d;
              d["kind"] = std::string(to_string(r.kind));
              d["n_prime"] = r.n_prime;
              d["lambda"] = r.lambda;
              d["C"] = r.C;
              d["tau"] = r.tau;
              d["forward_error"] = r.forward_error;
              d["bound_simple"] = r.bound_simple;
              d["bound_recursive"] = r.bound_recursive;
              d["lambda_per_step"] = to_array(r.lambda_per_step);
              d["bound_trace"] = to_array(r.bound_trace);
              return d;
          },
          py::arg("schedule"), py::arg("kind"), py::arg("n_prime"), py::arg("n"), py::arg("eps0"),
          py::arg("tau") = 1.0);
    m.def("minimal_shortcut",
          [](double eps0, double mu, const Schedule& s, const std::string& k, double tau, std::size_t n) {
              const auto r = minimal_shortcut(eps0, mu, s, kind_of(k), tau, n);
              py::dict d;
              d["feasible"] = r.feasible;
              d["n_prime"] = r.n_prime;
              d["violated"] = r.violated;
              return d;
          },
          py::arg("eps0"), py::arg("mu"), py::arg("schedule"), py::arg("kind"), py::arg("tau"), py::arg("n"));

    m.def("ccdf_sample",
          [](const Array& init, const ConsistencyOp& op, const Schedule& s, const ScoreOracle& oracle, double t0,
             std::uint64_t seed, bool corrector, const std::string& rule) {
              CcdfConfig cfg;
              cfg.t0 = t0;
              cfg.use_corrector = corrector;
              cfg.corrector_rule = rule == "squared" ? CorrectorRule::Squared : CorrectorRule::Linear;
              RngStream rng(seed, 0);
              const auto r = ccdf_sample(to_vec(init), op, cfg, s, oracle, rng);
              py::dict d;
              d["x"] = init.ndim() == 2 ? to_image(r.x, shape_of(init)) : to_array(r.x);
              d["n_prime"] = r.n_prime;
              d["reverse_steps"] = r.reverse_steps;
              d["corrector_steps"] = r.corrector_steps;
              d["consistency_applications"] = r.consistency_applications;
              return d;
          },
          py::arg("init"), py::arg("op"), py::arg("schedule"), py::arg("oracle"), py::arg("t0"),
          py::arg("seed") = 0, py::arg("corrector") = true, py::arg("corrector_rule") = "linear");

    m.def("make_phantom",
          [](const std::string& kind, std::size_t h, std::size_t w, std::uint64_t seed) {
              const auto p = make_phantom(kind, {h, w}, seed);
              return to_image(p.data, p.shape);
          },
          py::arg("kind"), py::arg("height"), py::arg("width"), py::arg("seed") = 0);

    m.def("run_mri_demo",
          [](const std::string& kind, std::size_t h, std::size_t w, std::uint64_t phantom_seed, double t0,
             std::uint64_t seed) {
              const auto ph = make_phantom(kind, {h, w}, phantom_seed);
              MriDemoConfig cfg;
              cfg.t0 = t0;
              cfg.seed = seed;
              const auto r = run_mri_demo(ph, cfg);
              py::dict d;
              d["reconstruction"] = to_image(r.reconstruction, ph.shape);
              d["psnr"] = r.psnr;
              d["zero_filled_psnr"] = r.zero_filled_psnr;
              d["max_residual"] = r.max_residual;
              d["reverse_steps"] = r.reverse_steps;
              return d;
          },
          py::arg("kind") = "ellipses", py::arg("height") = 64, py::arg("width") = 64, py::arg("phantom_seed") = 0,
          py::arg("t0") = 0.02, py::arg("seed") = 0);

    m.def("error_curve",
          [](const std::string& kind, double t0, int trials, std::size_t n, const std::string& op,
             const std::string& init, const std::string& oracle, std::uint64_t seed) {
              ExperimentConfig cfg;
              cfg.kind = kind_of(kind);
              cfg.trials = trials;
              cfg.shape = {1, n};
              cfg.op.type = op;
              cfg.init = parse_init_mode(init);
              cfg.oracle.kind = parse_oracle_kind(oracle);
              cfg.seed = seed;
              const auto st = run_error_curve(cfg, t0);
              py::dict d;
              d["n_prime"] = st.n_prime;
              d["eps0"] = st.eps0;
              d["index"] = st.index;
              d["mean"] = to_array(st.mean);
              d["std_error"] = to_array(st.std_error);
              d["bound"] = to_array(st.bound);
              return d;
          },
          py::arg("kind"), py::arg("t0"), py::arg("trials") = 1000, py::arg("n") = 64, py::arg("op") = "identity",
          py::arg("init") = "vanilla", py::arg("oracle") = "conditional", py::arg("seed") = 0);
}
