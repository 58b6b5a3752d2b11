// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <optional>
#include <sstream>

#include "cminv/config.hpp"
#include "cminv/harness.hpp"
#include "cminv/random.hpp"

namespace py = pybind11;
using namespace cminv;

// Images cross the boundary as float64 numpy arrays of shape (C, H, W); 1-D and
// 2-D arrays are read as (1, 1, n) and (1, H, W).
namespace pybind11::detail {
template <>
struct type_caster<ImageTensor> {
  PYBIND11_TYPE_CASTER(ImageTensor, const_name("numpy.ndarray[numpy.float64]"));

  bool load(handle src, bool convert) {
    if (!convert && !array_t<double>::check_(src)) return false;
    auto a = array_t<double, array::c_style | array::forcecast>::ensure(src);
    if (!a || a.ndim() < 1 || a.ndim() > 3) return false;
    Shape s;
    if (a.ndim() == 3) {
      s = {a.shape(0), a.shape(1), a.shape(2)};
    } else if (a.ndim() == 2) {
      s = {1, a.shape(0), a.shape(1)};
    } else {
      s = {1, 1, a.shape(0)};
    }
    Vector v(s.size());
    std::memcpy(v.data(), a.data(), sizeof(double) * static_cast<std::size_t>(s.size()));
    value = ImageTensor(s, std::move(v));
    return true;
  }

  static handle cast(const ImageTensor& image, return_value_policy, handle) {
    const Shape& s = image.shape();
    array_t<double> a({s.channels, s.height, s.width});
    std::memcpy(a.mutable_data(), image.data().data(),
                sizeof(double) * static_cast<std::size_t>(s.size()));
    return a.release();
  }
};
}  // namespace pybind11::detail

namespace {

Shape to_shape(const std::tuple<Index, Index, Index>& t) {
  return {std::get<0>(t), std::get<1>(t), std::get<2>(t)};
}

std::tuple<Index, Index, Index> from_shape(const Shape& s) {
  return {s.channels, s.height, s.width};
}

// pybind11 holders must be non-const; the library hands out const pointers.
using OpHolder = std::shared_ptr<ForwardOperator>;
using LinearHolder = std::shared_ptr<LinearOperator>;
using NonlinearHolder = std::shared_ptr<NonlinearOperator>;
using FnHolder = std::shared_ptr<ConsistencyFn>;

template <typename T>
std::shared_ptr<T> held(std::shared_ptr<const T> p) {
  return std::const_pointer_cast<T>(std::move(p));
}

class PyConsistencyFn : public ConsistencyFn {
 public:
  using ConsistencyFn::ConsistencyFn;

  ImageTensor predict(const ImageTensor& x_t, const Vector& y, double t) const override {
    PYBIND11_OVERRIDE_PURE(ImageTensor, ConsistencyFn, predict, x_t, y, t);
  }
  bool uses_measurement() const override {
    PYBIND11_OVERRIDE(bool, ConsistencyFn, uses_measurement, );
  }
};

ExperimentConfig make_config(const std::string& text, const std::vector<std::string>& overrides,
                             std::optional<std::uint64_t> seed, int workers,
                             const std::optional<std::filesystem::path>& output_dir) {
  ExperimentConfig c = parse_config(text);
  if (seed) apply_seed(c, *seed);
  apply_overrides(c, overrides);
  c.workers = workers;
  if (output_dir) c.output_dir = *output_dir;
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_cminv, m) {
  m.doc() = "Consistency-model samplers for linear and nonlinear inverse problems";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<UnsupportedVariantError>(m, "UnsupportedVariantError", PyExc_ValueError);

  // Operators

  py::class_<ForwardOperator, OpHolder>(m, "ForwardOperator")
      .def_property_readonly("input_dim", &ForwardOperator::input_dim)
      .def_property_readonly("output_dim", &ForwardOperator::output_dim)
      .def_property_readonly("output_dims", &ForwardOperator::output_dims)
      .def_property_readonly("input_shape",
                             [](const ForwardOperator& op) { return from_shape(op.input_shape()); })
      .def_property_readonly("is_linear", &ForwardOperator::is_linear)
      .def("describe", &ForwardOperator::describe)
      .def("apply", [](const ForwardOperator& op, const ImageTensor& x) { return op.apply(x); },
           py::arg("x"))
      .def("__repr__", &ForwardOperator::describe);

  py::class_<LinearOperator, ForwardOperator, LinearHolder>(m, "LinearOperator")
      .def_property_readonly("singular_values", &LinearOperator::singular_values)
      .def("spectral_norm", &LinearOperator::spectral_norm)
      .def("adjoint", &LinearOperator::adjoint, py::arg("y"))
      .def("to_spectral",
           [](const LinearOperator& op, const ImageTensor& x) { return op.to_spectral(x); })
      .def("to_dense", &LinearOperator::to_dense);

  py::class_<NonlinearOperator, ForwardOperator, NonlinearHolder>(
      m, "NonlinearOperator");

  m.def("identity", [](std::tuple<Index, Index, Index> s) { return held(make_identity(to_shape(s))); },
        py::arg("shape"));
  m.def("dense", [](Matrix a) { return held(make_dense(std::move(a))); }, py::arg("matrix"));
  m.def(
      "downsample",
      [](Index c, Index h, Index w, Index block) { return held(make_downsample(c, h, w, block)); },
      py::arg("channels"), py::arg("height"), py::arg("width"),
        py::arg("block"));
  m.def(
      "gaussian_blur",
      [](Index c, Index h, Index w, double sigma, Index radius) {
        return held(make_gaussian_blur(c, h, w, sigma, radius));
      },
      py::arg("channels"), py::arg("height"),
        py::arg("width"), py::arg("sigma"), py::arg("kernel_radius") = 0);
  m.def(
      "inpaint",
      [](Index c, Index h, Index w, const std::vector<bool>& mask) {
        return held(make_inpaint(c, h, w, mask));
      },
      py::arg("channels"), py::arg("height"), py::arg("width"), py::arg("mask"));
  m.def(
      "center_inpaint",
      [](Index c, Index h, Index w) { return held(make_center_inpaint(c, h, w)); },
      py::arg("channels"), py::arg("height"),
        py::arg("width"));
  m.def(
      "nonlinear_blur",
      [](Index c, Index h, Index w, double sigma, double saturation, Index radius) {
        return held(make_synthetic_nonlinear_blur(c, h, w, sigma, saturation, radius));
      },
      py::arg("channels"), py::arg("height"),
        py::arg("width"), py::arg("sigma"), py::arg("saturation"), py::arg("kernel_radius") = 0);

  py::class_<MeasurementModel>(m, "MeasurementModel")
      .def(py::init([](OpHolder op, double sigma_y) { return MeasurementModel(op, sigma_y); }),
           py::arg("op"), py::arg("sigma_y"))
      .def_property_readonly("op", [](const MeasurementModel& mm) { return held(mm.op); })
      .def_readonly("sigma_y", &MeasurementModel::sigma_y);

  m.def(
      "degrade",
      [](const MeasurementModel& model, const ImageTensor& x, std::uint64_t seed) {
        return degrade(model, x, seed);
      },
      py::arg("model"), py::arg("x"), py::arg("seed"));

  // Schedules

  py::class_<NoiseSchedule>(m, "NoiseSchedule")
      .def(py::init<std::vector<double>, double, double>(), py::arg("levels"), py::arg("t_min"),
           py::arg("t_max"))
      .def_property_readonly("levels", &NoiseSchedule::levels)
      .def_property_readonly("t_min", &NoiseSchedule::t_min)
      .def_property_readonly("t_max", &NoiseSchedule::t_max)
      .def("__len__", &NoiseSchedule::size);
  m.def("karras_schedule", &make_karras_schedule, py::arg("n"), py::arg("t_min") = kDefaultTMin,
        py::arg("t_max") = kDefaultTMax, py::arg("rho") = kDefaultRho);

  // Priors and consistency functions

  py::class_<GaussianPrior>(m, "GaussianPrior")
      .def(py::init<Vector, Matrix>(), py::arg("mean"), py::arg("covariance"))
      .def_static("isotropic", &GaussianPrior::isotropic, py::arg("mean"), py::arg("variance"))
      .def_property_readonly("mean", &GaussianPrior::mean)
      .def_property_readonly("covariance", &GaussianPrior::covariance)
      .def(
          "sample",
          [](const GaussianPrior& p, std::uint64_t seed) {
            Rng rng(seed);
            return p.sample(rng);
          },
          py::arg("seed"));

  py::class_<EmpiricalPrior>(m, "EmpiricalPrior")
      .def(py::init<std::vector<Vector>, std::vector<double>>(), py::arg("atoms"),
           py::arg("weights"))
      .def(py::init<std::vector<Vector>>(), py::arg("atoms"))
      .def_property_readonly("atoms", &EmpiricalPrior::atoms)
      .def_property_readonly("weights", &EmpiricalPrior::weights);

  m.def("gaussian_denoise", &gaussian_denoise, py::arg("prior"), py::arg("x_t"), py::arg("t"));
  m.def("gaussian_joint_denoise", &gaussian_joint_denoise, py::arg("prior"), py::arg("x_t"),
        py::arg("t"), py::arg("op"), py::arg("y"), py::arg("sigma_y"));
  m.def(
      "gaussian_posterior",
      [](const GaussianPrior& prior, const LinearOperator& op, const Vector& y, double sigma_y) {
        auto p = gaussian_posterior(prior, op, y, sigma_y);
        return py::make_tuple(p.mean, p.covariance);
      },
      py::arg("prior"), py::arg("op"), py::arg("y"), py::arg("sigma_y"));
  m.def("empirical_denoise", &empirical_denoise, py::arg("prior"), py::arg("x_t"), py::arg("t"));

  py::class_<ConsistencyFn, PyConsistencyFn, FnHolder>(m, "ConsistencyFn")
      .def(py::init<>())
      .def("predict", &ConsistencyFn::predict, py::arg("x_t"), py::arg("y"), py::arg("t"))
      .def("uses_measurement", &ConsistencyFn::uses_measurement);
  py::class_<GaussianConsistency, ConsistencyFn, std::shared_ptr<GaussianConsistency>>(
      m, "GaussianConsistency")
      .def(py::init<GaussianPrior>(), py::arg("prior"));
  py::class_<GaussianMeasurementConsistency, ConsistencyFn,
             std::shared_ptr<GaussianMeasurementConsistency>>(m, "GaussianMeasurementConsistency")
      .def(py::init([](GaussianPrior prior, LinearHolder op, double sigma_y) {
             return std::make_shared<GaussianMeasurementConsistency>(std::move(prior), op,
                                                                     sigma_y);
           }),
           py::arg("prior"), py::arg("op"), py::arg("sigma_y"));
  py::class_<EmpiricalConsistency, ConsistencyFn, std::shared_ptr<EmpiricalConsistency>>(
      m, "EmpiricalConsistency")
      .def(py::init<EmpiricalPrior>(), py::arg("prior"));
  py::class_<EmpiricalMeasurementConsistency, ConsistencyFn,
             std::shared_ptr<EmpiricalMeasurementConsistency>>(m, "EmpiricalMeasurementConsistency")
      .def(py::init([](EmpiricalPrior prior, OpHolder op, double sigma_y) {
             return std::make_shared<EmpiricalMeasurementConsistency>(std::move(prior), op,
                                                                      sigma_y);
           }),
           py::arg("prior"), py::arg("op"), py::arg("sigma_y"));

  // Samplers

  py::enum_<SamplerVariant>(m, "SamplerVariant")
      .value("cm_baseline", SamplerVariant::cm_baseline)
      .value("ddim", SamplerVariant::ddim)
      .value("addim", SamplerVariant::addim)
      .value("inverse_addim", SamplerVariant::inverse_addim)
      .value("ddrm", SamplerVariant::ddrm);

  py::class_<SamplerConfig>(m, "SamplerConfig")
      .def(py::init([](SamplerVariant variant, int steps, double gamma, double eta,
                       double eta_ddrm, double eta_b, std::uint64_t seed) {
             SamplerConfig c;
             c.variant = variant;
             c.steps = steps;
             c.gamma = gamma;
             c.eta = eta;
             c.eta_ddrm = eta_ddrm;
             c.eta_b = eta_b;
             c.seed = seed;
             c.validate();
             return c;
           }),
           py::arg("variant") = SamplerVariant::inverse_addim, py::arg("steps") = 2,
           py::arg("gamma") = 1.0, py::arg("eta") = 1.0, py::arg("eta_ddrm") = 0.85,
           py::arg("eta_b") = 1.0, py::arg("seed") = 0)
      .def_readwrite("variant", &SamplerConfig::variant)
      .def_readwrite("steps", &SamplerConfig::steps)
      .def_readwrite("gamma", &SamplerConfig::gamma)
      .def_readwrite("eta", &SamplerConfig::eta)
      .def_readwrite("eta_ddrm", &SamplerConfig::eta_ddrm)
      .def_readwrite("eta_b", &SamplerConfig::eta_b)
      .def_readwrite("seed", &SamplerConfig::seed);

  py::class_<StepResult>(m, "StepResult")
      .def_readonly("next", &StepResult::next)
      .def_readonly("coefficient", &StepResult::coefficient)
      .def_readonly("degenerate", &StepResult::degenerate)
      .def_readonly("residual_norm_sq", &StepResult::residual_norm_sq);

  py::class_<TrajectoryRecord>(m, "TrajectoryRecord")
      .def_readonly("t", &TrajectoryRecord::t)
      .def_readonly("x_t", &TrajectoryRecord::x_t)
      .def_readonly("x_hat", &TrajectoryRecord::x_hat)
      .def_readonly("residual_norm_sq", &TrajectoryRecord::residual_norm_sq)
      .def_readonly("degenerate", &TrajectoryRecord::degenerate);

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("records", &Trajectory::records)
      .def_readonly("final", &Trajectory::final)
      .def_readonly("ddrm_branch_hits", &Trajectory::ddrm_branch_hits);

  m.def("ddim_variance_ratio", &ddim_variance_ratio, py::arg("t"), py::arg("s"), py::arg("t_min"));
  m.def("ddim_step", &ddim_step, py::arg("x_t"), py::arg("x_hat"), py::arg("t"), py::arg("s"),
        py::arg("t_min"));
  m.def("addim_step", &addim_step, py::arg("x_t"), py::arg("x_hat"), py::arg("x_teacher"),
        py::arg("t"), py::arg("s"), py::arg("t_min"), py::arg("eta"));
  m.def("inverse_addim_step", &inverse_addim_step, py::arg("x_t"), py::arg("x_hat"), py::arg("y"),
        py::arg("op"), py::arg("t"), py::arg("s"), py::arg("t_min"), py::arg("gamma"));
  m.def(
      "sample",
      [](const SamplerConfig& config, const ConsistencyFn& f, const NoiseSchedule& schedule,
         const Vector& y, const MeasurementModel& model, std::optional<ImageTensor> teacher) {
        py::gil_scoped_release release;
        return sample(config, f, schedule, y, model, teacher ? &*teacher : nullptr);
      },
      py::arg("config"), py::arg("f"), py::arg("schedule"), py::arg("y"), py::arg("model"),
      py::arg("teacher") = std::nullopt);
  m.def("ddrm_sample", &ddrm_sample, py::arg("config"), py::arg("denoiser"), py::arg("schedule"),
        py::arg("y"), py::arg("model"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "sample_batch",
      [](const SamplerConfig& config, const ConsistencyFn& f, const NoiseSchedule& schedule,
         const std::vector<Vector>& measurements, const MeasurementModel& model, int workers) {
        return sample_batch(config, f, schedule, measurements, model, workers);
      },
      py::arg("config"), py::arg("f"), py::arg("schedule"), py::arg("measurements"),
      py::arg("model"), py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>());

  // Metrics

  py::class_<KidResult>(m, "KidResult")
      .def_readonly("kid_x1000", &KidResult::kid_x1000)
      .def_readonly("std_x1000", &KidResult::std_x1000)
      .def_readonly("se_x1000", &KidResult::se_x1000)
      .def_readonly("n_subsets", &KidResult::n_subsets)
      .def_readonly("subset_size", &KidResult::subset_size);

  m.def("psnr", &psnr, py::arg("x"), py::arg("reference"), py::arg("peak") = 1.0);
  m.def("ssim", &ssim, py::arg("x"), py::arg("reference"), py::arg("window") = 0,
        py::arg("k1") = 0.01, py::arg("k2") = 0.03, py::arg("peak") = 1.0);
  m.def(
      "frechet_distance",
      [](const Vector& mu1, const Matrix& c1, const Vector& mu2, const Matrix& c2) {
        return frechet_distance(mu1, c1, mu2, c2).distance;
      },
      py::arg("mu1"), py::arg("cov1"), py::arg("mu2"), py::arg("cov2"));
  m.def(
      "fid", [](const Matrix& fx, const Matrix& fy) { return fid(fx, fy).distance; },
      py::arg("features_x"), py::arg("features_y"));
  m.def("kid", &kid, py::arg("features_x"), py::arg("features_y"), py::arg("subset_size"),
        py::arg("n_subsets"), py::arg("seed"));
  m.def(
      "feature_matrix",
      [](const std::vector<ImageTensor>& images, const std::string& mode, Index patch) {
        return feature_matrix(images, parse_feature_mode(mode), patch);
      },
      py::arg("images"), py::arg("mode") = "raw_pixels", py::arg("patch") = 2);

  // Verification

  py::class_<VerificationReport>(m, "VerificationReport")
      .def_readonly("check_name", &VerificationReport::check_name)
      .def_readonly("statistic", &VerificationReport::statistic)
      .def_readonly("bound_or_target", &VerificationReport::bound_or_target)
      .def_readonly("tolerance", &VerificationReport::tolerance)
      .def_readonly("standard_error", &VerificationReport::standard_error)
      .def_readonly("n_samples", &VerificationReport::n_samples)
      .def_readonly("passed", &VerificationReport::passed)
      .def_readonly("detail", &VerificationReport::detail)
      .def("__repr__", [](const VerificationReport& r) { return to_json(r).dump(); });

  m.def("mc_dropped_variance_check", &mc_dropped_variance_check, py::arg("prior"), py::arg("t"),
        py::arg("s"), py::arg("t_min"), py::arg("n_samples"), py::arg("seed"),
        py::arg("relative_tolerance") = 0.02);
  m.def(
      "residual_bound_check",
      [](const LinearOperator& op, const GaussianPrior& prior, double sigma_y, Index n,
         std::uint64_t seed, double t) {
        auto r = residual_bound_check(op, prior, sigma_y, n, seed, t);
        return py::make_tuple(r.decomposition, r.bound);
      },
      py::arg("op"), py::arg("prior"), py::arg("sigma_y"), py::arg("n_samples"), py::arg("seed"),
      py::arg("t") = 0.5);
  m.def("verify", &run_verification_suite, py::arg("seed") = 0, py::arg("filter") = "",
        py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>());

  // Pipeline commands on an output directory, configured with INI text.

  m.def(
      "run_command",
      [](const std::string& command, const std::string& config_text,
         const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed,
         int workers, std::optional<std::filesystem::path> output_dir) {
        const ExperimentConfig c = make_config(config_text, overrides, seed, workers, output_dir);
        py::gil_scoped_release release;
        if (command == "synthesize") return cmd_synthesize(c);
        if (command == "degrade") return cmd_degrade(c);
        if (command == "sample") return cmd_sample(c);
        if (command == "evaluate") return cmd_evaluate(c);
        if (command == "tune-gamma") return cmd_tune_gamma(c);
        if (command == "verify") return cmd_verify(c, "", seed.value_or(0));
        throw std::invalid_argument("unknown command: " + command);
      },
      py::arg("command"), py::arg("config_text") = "", py::arg("overrides") = std::vector<std::string>{},
      py::arg("seed") = std::nullopt, py::arg("workers") = 1, py::arg("output_dir") = std::nullopt);
}
