#include <pybind11/pybind11.h>
#include <pybind11/numpy.h>
#include <pybind11/stl.h>

#include <cstring>
#include <stdexcept>

#include "ntkreg/experiments.hpp"
#include "ntkreg/linalg.hpp"
#include "ntkreg/ntk_kls.hpp"
#include "ntkreg/relu_net.hpp"
#include "ntkreg/spectral_stop.hpp"
#include "ntkreg/sphere_data.hpp"
#include "ntkreg/version.hpp"

namespace py = pybind11;
using namespace ntkreg;

namespace {

py::array_t<double> to_array(const Matrix& m) {
  py::array_t<double> out({m.rows, m.cols});
  std::memcpy(out.mutable_data(), m.a.data(), m.a.size() * sizeof(double));
  return out;
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(double));
  return out;
}

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::memcpy(m.a.data(), a.data(), m.a.size() * sizeof(double));
  return m;
}

std::vector<double> to_vector(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1-d array");
  return {a.data(), a.data() + a.shape(0)};
}

TargetSpec target_from_name(const std::string& name, double lipschitz, std::size_t d,
                            std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.lambda = lipschitz;
  cfg.d = d;
  cfg.seed = seed;
  if (name == "abs_linear") {
    cfg.target_kind = TargetKind::AbsLinear;
  } else if (name == "max_of_linears") {
    cfg.target_kind = TargetKind::MaxOfLinears;
  } else {
    throw std::invalid_argument("unknown target family: " + name);
  }
  return make_target(cfg);
}

NoiseSpec noise_from_name(const std::string& name, double sigma) {
  if (name == "rademacher") return {NoiseKind::Rademacher, sigma};
  if (name == "uniform") return {NoiseKind::Uniform, sigma};
  throw std::invalid_argument("unknown noise family: " + name);
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() =
      "Shallow ReLU networks, their tangent kernel, and early-stopped kernel "
      "least squares on the unit sphere";
  mod.attr("__version__") = kVersion;

  mod.def("kappa", &kappa_from_dot, py::arg("dot"),
          "Kernel value for two unit vectors with the given inner product");

  mod.def(
      "sample_sphere",
      [](std::size_t n, std::size_t d, std::uint64_t seed) {
        return to_array(sample_sphere(n, d, seed));
      },
      py::arg("n"), py::arg("d"), py::arg("seed"),
      "Draw n points uniformly from the unit sphere in R^d");

  mod.def(
      "kernel_matrix",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
        return to_array(kernel_matrix(to_matrix(x)).k);
      },
      py::arg("x"), "Kernel matrix of a set of unit-norm rows");

  mod.def(
      "eigh",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& m) {
        const EighResult eig = eigh_symmetric(to_matrix(m));
        return py::make_tuple(to_array(eig.eigenvalues), to_array(eig.eigenvectors));
      },
      py::arg("m"),
      "Eigenvalues (descending) and eigenvectors of a symmetric matrix");

  mod.def(
      "rwy_stopping_time",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& eigenvalues,
         std::size_t n, double eta, double sigma) {
        const SpectrumView spectrum = make_spectrum(to_vector(eigenvalues), n);
        const StoppingDecision dec = rwy_stopping_time(spectrum, eta, sigma);
        py::dict out;
        out["t_hat"] = dec.t_hat;
        out["r_hat"] = dec.r_hat.value();
        return out;
      },
      py::arg("eigenvalues"), py::arg("n"), py::arg("eta"), py::arg("sigma"),
      "Data-driven stopping step and critical radius from a kernel spectrum");

  mod.def(
      "generate_dataset",
      [](std::size_t n, std::size_t d, double lipschitz, double sigma, std::uint64_t seed,
         const std::string& target, const std::string& noise) {
        const TargetSpec spec = target_from_name(target, lipschitz, d, seed);
        const Dataset ds = generate_dataset(n, d, spec, noise_from_name(noise, sigma), seed);
        py::dict out;
        out["x"] = to_array(ds.inputs);
        out["y"] = to_array(ds.targets);
        out["clean"] = to_array(ds.clean);
        out["b_y"] = ds.b_y;
        return out;
      },
      py::arg("n"), py::arg("d"), py::arg("lipschitz"), py::arg("sigma"), py::arg("seed"),
      py::arg("target") = "abs_linear", py::arg("noise") = "rademacher",
      "Sample a sphere regression dataset with bounded noise");

  mod.def(
      "train_network",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& y,
         std::size_t m, double eta, std::size_t steps, std::uint64_t seed) {
        Dataset ds;
        ds.inputs = to_matrix(x);
        ds.targets = to_vector(y);
        ds.clean = ds.targets;
        ds.seed = seed;
        ds.b_y = 0.0;
        for (double v : ds.targets) ds.b_y = std::max(ds.b_y, std::abs(v));
        const NetworkParams params = init_params(m, ds.d(), seed);
        const TrainTrajectory traj = train_gd(params, ds, eta, steps, 0);
        const NetworkParams& trained = traj.final_params();
        py::dict out;
        out["risk"] = to_array(traj.risk);
        out["max_drift"] = to_array(traj.max_drift);
        std::vector<double> flips(traj.max_pattern_changes.begin(),
                                  traj.max_pattern_changes.end());
        out["max_pattern_changes"] = to_array(flips);
        out["w"] = to_array(trained.w);
        out["u"] = to_array(trained.u);
        return out;
      },
      py::arg("x"), py::arg("y"), py::arg("m"), py::arg("eta"), py::arg("steps"),
      py::arg("seed"),
      "Full-batch GD on the hidden layer from the paired zero-function start");

  mod.def(
      "forward",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& w,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& u,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
        NetworkParams params;
        params.w = to_matrix(w);
        params.u = to_vector(u);
        params.m = params.w.rows;
        params.d = params.w.cols;
        const Matrix pts = to_matrix(x);
        std::vector<double> out(pts.rows);
        for (std::size_t i = 0; i < pts.rows; ++i) out[i] = forward(params, pts.row(i));
        return to_array(out);
      },
      py::arg("w"), py::arg("u"), py::arg("x"),
      "Evaluate the network at each row of x");

  mod.def(
      "kls_fit_predict",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& y,
         double eta, std::size_t steps,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& xq) {
        const KernelMatrix kern = kernel_matrix(to_matrix(x));
        const KlsState state = kls_gd_run(kern, to_vector(y), eta, steps);
        const Matrix q = to_matrix(xq);
        std::vector<double> out(q.rows);
        for (std::size_t i = 0; i < q.rows; ++i) out[i] = kls_predict(state, q.row(i));
        return to_array(out);
      },
      py::arg("x"), py::arg("y"), py::arg("eta"), py::arg("steps"), py::arg("xq"),
      "Run kernel least squares by GD and predict at query rows");
}
