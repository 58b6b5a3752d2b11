// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#include "cminv/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cminv/random.hpp"

namespace cminv {

namespace pt = boost::property_tree;

const char* to_string(Generator g) {
  switch (g) {
    case Generator::gaussian_prior: return "gaussian_prior";
    case Generator::piecewise_constant: return "piecewise_constant";
    case Generator::atoms: return "atoms";
  }
  return "unknown";
}

const char* to_string(TaskKind t) {
  switch (t) {
    case TaskKind::super_resolution: return "super_resolution";
    case TaskKind::deblur: return "deblur";
    case TaskKind::inpaint: return "inpaint";
    case TaskKind::denoise: return "denoise";
    case TaskKind::nonlinear_deblur: return "nonlinear_deblur";
  }
  return "unknown";
}

const char* to_string(ModelKind m) {
  switch (m) {
    case ModelKind::gaussian: return "gaussian";
    case ModelKind::empirical: return "empirical";
    case ModelKind::external: return "external";
  }
  return "unknown";
}

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) fail(key + ": expected a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) fail(key + ": expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) fail(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(key + ": expected a boolean, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double(key, item));
  }
  return out;
}

template <typename E>
E to_enum(const std::string& key, const std::string& v, std::initializer_list<E> options) {
  for (E e : options) {
    if (v == to_string(e)) return e;
  }
  std::string valid;
  for (E e : options) valid += std::string(valid.empty() ? "" : ", ") + to_string(e);
  fail(key + ": unknown value '" + v + "' (expected one of " + valid + ")");
}

void set_key(ExperimentConfig& c, const std::string& section, const std::string& name,
             const std::string& raw) {
  const std::string key = section + "." + name;
  const std::string v = trim(raw);
  auto& d = c.dataset;
  auto& t = c.task;
  auto& s = c.schedule;
  auto& smp = c.sampler;
  auto& m = c.metrics;
  if (section == "run") {
    if (name == "seed") return apply_seed(c, to_u64(key, v));
    if (name == "workers") return void(c.workers = static_cast<int>(to_int(key, v)));
    if (name == "output_dir") return void(c.output_dir = v);
    if (name == "export_images") return void(c.export_images = to_bool(key, v));
  } else if (section == "dataset") {
    if (name == "generator") {
      d.generator = to_enum(key, v, {Generator::gaussian_prior, Generator::piecewise_constant,
                                     Generator::atoms});
      return;
    }
    if (name == "count") return void(d.count = to_int(key, v));
    if (name == "channels") return void(d.shape.channels = to_int(key, v));
    if (name == "height") return void(d.shape.height = to_int(key, v));
    if (name == "width") return void(d.shape.width = to_int(key, v));
    if (name == "seed") return void(d.seed = to_u64(key, v));
    if (name == "split") return void(d.split = to_u64(key, v));
    if (name == "mean") return void(d.mean = to_double(key, v));
    if (name == "variance") return void(d.variance = to_double(key, v));
    if (name == "length_scale") return void(d.length_scale = to_double(key, v));
    if (name == "nugget") return void(d.nugget = to_double(key, v));
    if (name == "n_rects") return void(d.n_rects = to_int(key, v));
    if (name == "n_atoms") return void(d.n_atoms = to_int(key, v));
  } else if (section == "task") {
    if (name == "name") {
      t.kind = to_enum(key, v, {TaskKind::super_resolution, TaskKind::deblur, TaskKind::inpaint,
                                TaskKind::denoise, TaskKind::nonlinear_deblur});
      return;
    }
    if (name == "sigma_y") return void(t.sigma_y = to_double(key, v));
    if (name == "scale") return void(t.scale = to_int(key, v));
    if (name == "blur_sigma") return void(t.blur_sigma = to_double(key, v));
    if (name == "kernel_radius") return void(t.kernel_radius = to_int(key, v));
    if (name == "saturation") return void(t.saturation = to_double(key, v));
    if (name == "seed") return void(t.seed = to_u64(key, v));
  } else if (section == "schedule") {
    if (name == "t_min") return void(s.t_min = to_double(key, v));
    if (name == "t_max") return void(s.t_max = to_double(key, v));
    if (name == "rho") return void(s.rho = to_double(key, v));
    if (name == "levels") return void(s.levels = to_list(key, v));
    if (name == "ddrm_steps") return void(s.ddrm_steps = static_cast<int>(to_int(key, v)));
  } else if (section == "sampler") {
    if (name == "variant") {
      try {
        smp.variant = parse_sampler_variant(v);
      } catch (const std::invalid_argument& e) {
        fail(key + ": " + e.what());
      }
      return;
    }
    if (name == "steps") return void(smp.steps = static_cast<int>(to_int(key, v)));
    if (name == "eta") return void(smp.eta = to_double(key, v));
    if (name == "gamma") return void(smp.gamma = to_double(key, v));
    if (name == "eta_ddrm") return void(smp.eta_ddrm = to_double(key, v));
    if (name == "eta_b") return void(smp.eta_b = to_double(key, v));
    if (name == "seed") return void(smp.seed = to_u64(key, v));
  } else if (section == "model") {
    if (name == "type") {
      c.model.kind =
          to_enum(key, v, {ModelKind::gaussian, ModelKind::empirical, ModelKind::external});
      return;
    }
    if (name == "conditioning") {
      require(v == "measurement" || v == "none", key + ": expected 'measurement' or 'none'");
      c.model.condition_on_measurement = v == "measurement";
      return;
    }
    if (name == "predictions") return void(c.model.predictions = v);
  } else if (section == "metrics") {
    if (name == "psnr") return void(m.psnr = to_bool(key, v));
    if (name == "ssim") return void(m.ssim = to_bool(key, v));
    if (name == "kid") return void(m.kid = to_bool(key, v));
    if (name == "fid") return void(m.fid = to_bool(key, v));
    if (name == "peak") return void(m.peak = to_double(key, v));
    if (name == "features") {
      m.features = to_enum(key, v, {FeatureMode::raw_pixels, FeatureMode::pooled_patches,
                                    FeatureMode::external_file});
      return;
    }
    if (name == "patch") return void(m.patch = to_int(key, v));
    if (name == "kid_subset_size") return void(m.kid_subset_size = to_int(key, v));
    if (name == "kid_subsets") return void(m.kid_subsets = to_int(key, v));
    if (name == "features_samples") return void(m.features_samples = v);
    if (name == "features_reference") return void(m.features_reference = v);
  } else if (section == "tune") {
    if (name == "gammas") return void(c.tune.gammas = to_list(key, v));
    if (name == "count") return void(c.tune.count = to_int(key, v));
    if (name == "split") return void(c.tune.split = to_u64(key, v));
    if (name == "criterion") return void(c.tune.criterion = v);
  }
  fail("unknown config key '" + key + "'");
}

}  // namespace

void DatasetSpec::validate() const {
  require(count >= 0, "dataset.count must be >= 0");
  require(shape.channels >= 1 && shape.height >= 1 && shape.width >= 1,
          "dataset shape must be positive");
  require(std::isfinite(mean), "dataset.mean must be finite");
  require(variance > 0.0 && std::isfinite(variance), "dataset.variance must be > 0");
  require(length_scale > 0.0 && std::isfinite(length_scale), "dataset.length_scale must be > 0");
  require(nugget >= 0.0 && std::isfinite(nugget), "dataset.nugget must be >= 0");
  require(n_rects >= 0, "dataset.n_rects must be >= 0");
  require(n_atoms >= 1, "dataset.n_atoms must be >= 1");
}

void TaskSpec::validate() const {
  require(sigma_y >= 0.0 && std::isfinite(sigma_y), "task.sigma_y must be finite and >= 0");
  require(scale >= 1, "task.scale must be >= 1");
  require(blur_sigma > 0.0 && std::isfinite(blur_sigma), "task.blur_sigma must be > 0");
  require(kernel_radius >= 0, "task.kernel_radius must be >= 0");
  require(saturation > 0.0 && std::isfinite(saturation), "task.saturation must be > 0");
}

void ScheduleSpec::validate() const {
  require(t_min > 0.0 && t_max > t_min && std::isfinite(t_max),
          "schedule requires 0 < t_min < t_max");
  require(rho > 0.0 && std::isfinite(rho), "schedule.rho must be > 0");
  require(ddrm_steps >= 1, "schedule.ddrm_steps must be >= 1");
  if (!levels.empty()) {
    require(levels.size() >= 2, "schedule.levels needs at least two values");
    for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
      require(levels[i] > levels[i + 1], "schedule.levels must be strictly decreasing");
    }
  }
}

void MetricsSpec::validate() const {
  require(peak > 0.0, "metrics.peak must be > 0");
  require(patch >= 1, "metrics.patch must be >= 1");
  require(kid_subset_size == 0 || kid_subset_size >= 2, "metrics.kid_subset_size must be 0 or >= 2");
  require(kid_subsets >= 1, "metrics.kid_subsets must be >= 1");
  if (features == FeatureMode::external_file) {
    require(!features_samples.empty() && !features_reference.empty(),
            "external_file features need metrics.features_samples and features_reference");
  }
}

void TuneSpec::validate() const {
  require(!gammas.empty(), "tune.gammas must not be empty");
  for (double g : gammas) require(g >= 0.0 && std::isfinite(g), "tune.gammas must be >= 0");
  require(count >= 2, "tune.count must be >= 2");
  require(criterion == "kid" || criterion == "psnr", "tune.criterion must be kid or psnr");
}

void ExperimentConfig::validate() const {
  dataset.validate();
  task.validate();
  schedule.validate();
  metrics.validate();
  tune.validate();
  require(workers >= 1, "run.workers must be >= 1");
  try {
    sampler.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  if (model.kind == ModelKind::external) {
    require(!model.predictions.empty(), "model.type=external needs model.predictions");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig config;
  // [run] first so that its seed can be refined by per-section seeds.
  if (auto run = tree.get_child_optional("run")) {
    for (const auto& [name, node] : *run) set_key(config, "run", name, node.data());
  }
  for (const auto& [section, node] : tree) {
    if (section == "run") continue;
    if (!node.data().empty()) fail("config key '" + section + "' must be inside a section");
    for (const auto& [name, value] : node) set_key(config, section, name, value.data());
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_overrides(ExperimentConfig& config, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      fail("override '" + o + "' must look like section.key=value");
    }
    set_key(config, trim(o.substr(0, dot)), trim(o.substr(dot + 1, eq - dot - 1)),
            o.substr(eq + 1));
  }
  config.validate();
}

void apply_seed(ExperimentConfig& config, std::uint64_t seed) {
  config.dataset.seed = derive_seed(seed, 1);
  config.task.seed = derive_seed(seed, 2);
  config.sampler.seed = derive_seed(seed, 3);
}

}  // namespace cminv
