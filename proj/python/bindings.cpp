#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hvio/pipeline.hpp"

namespace py = pybind11;
using namespace hvio;

namespace {

GrayImage image_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                           double timestamp) {
  if (a.ndim() != 2) {
    throw DimensionError("expected a 2-D array (height, width)");
  }
  const auto h = static_cast<int>(a.shape(0));
  const auto w = static_cast<int>(a.shape(1));
  return GrayImage(w, h, std::vector<double>(a.data(), a.data() + a.size()), timestamp);
}

py::array_t<double> image_to_array(const GrayImage& img) {
  py::array_t<double> out({img.height(), img.width()});
  std::copy(img.data().begin(), img.data().end(), out.mutable_data());
  return out;
}

py::dict metrics_dict(const MetricReport& m) {
  py::dict d;
  d["rpe_trans_rmse"] = m.rpe_trans_rmse;
  d["rpe_rot_rmse"] = m.rpe_rot_rmse;
  d["ate_xy_rmse"] = m.ate_xy_rmse;
  d["relative_ate"] = m.relative_ate;
  d["velocity_rmse"] = m.velocity_rmse;
  d["failure_rate"] = m.failure_rate;
  d["path_length_xy"] = m.path_length_xy;
  return d;
}

}  // namespace

PYBIND11_MODULE(_hvio, m) {
  m.doc() = "Downward-facing visual-inertial odometry core";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<DegenerateWarpError>(m, "DegenerateWarpError", base.ptr());
  py::register_exception<PointAtInfinityError>(m, "PointAtInfinityError", base.ptr());
  py::register_exception<InsufficientOverlapError>(m, "InsufficientOverlapError", base.ptr());
  py::register_exception<StreamError>(m, "StreamError", base.ptr());
  py::register_exception<PairingError>(m, "PairingError", base.ptr());
  py::register_exception<SpanError>(m, "SpanError", base.ptr());
  py::register_exception<UndefinedMetricError>(m, "UndefinedMetricError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  py::class_<GrayImage>(m, "GrayImage")
      .def(py::init(&image_from_array), py::arg("array"), py::arg("timestamp") = 0.0)
      .def_property_readonly("width", &GrayImage::width)
      .def_property_readonly("height", &GrayImage::height)
      .def_property_readonly("timestamp", &GrayImage::timestamp)
      .def("to_array", &image_to_array)
      .def("downsample", &GrayImage::downsample);

  py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
      .def(py::init(&CameraIntrinsics::make), py::arg("fx") = 300.0, py::arg("fy") = 300.0,
           py::arg("cx") = 160.0, py::arg("cy") = 120.0)
      .def_readonly("fx", &CameraIntrinsics::fx)
      .def_readonly("fy", &CameraIntrinsics::fy)
      .def_readonly("cx", &CameraIntrinsics::cx)
      .def_readonly("cy", &CameraIntrinsics::cy)
      .def("matrix", &CameraIntrinsics::matrix);

  py::class_<PlaneNormal>(m, "PlaneNormal")
      .def(py::init<>())
      .def(py::init([](double theta, double phi) { return PlaneNormal{theta, phi}; }),
           py::arg("theta"), py::arg("phi"))
      .def_static("from_vector", &PlaneNormal::from_vector)
      .def_readwrite("theta", &PlaneNormal::theta)
      .def_readwrite("phi", &PlaneNormal::phi)
      .def("vector", &PlaneNormal::vector);

  py::class_<WarpParams>(m, "WarpParams")
      .def(py::init([](const Eigen::Vector3d& t, const Eigen::Vector3d& r) {
             return WarpParams{t, r};
           }),
           py::arg("t") = Eigen::Vector3d::Zero(), py::arg("r") = Eigen::Vector3d::Zero())
      .def_readwrite("t", &WarpParams::t)
      .def_readwrite("r", &WarpParams::r)
      .def("to_vector", &WarpParams::to_vector);

  m.def("rodrigues_to_matrix",
        py::overload_cast<const Eigen::Vector3d&>(&rodrigues_to_matrix));
  m.def("matrix_to_rodrigues", &matrix_to_rodrigues);
  m.def("build_homography", [](const CameraIntrinsics& k, const WarpParams& p,
                               const PlaneNormal& n) { return build_homography(k, p, n).h; });
  m.def("warp_point", [](const Eigen::Matrix3d& h, double x, double y) {
    return warp_point(WarpMatrix{h}, x, y);
  });

  m.def("gradient", [](const GrayImage& img) {
    const GradientField g = gradient(img);
    py::array_t<double> gx({g.height, g.width});
    py::array_t<double> gy({g.height, g.width});
    std::copy(g.gx.begin(), g.gx.end(), gx.mutable_data());
    std::copy(g.gy.begin(), g.gy.end(), gy.mutable_data());
    return py::make_tuple(gx, gy);
  });
  m.def("select_pixels",
        [](const GrayImage& img, std::size_t budget, double threshold) {
          const PixelSet s = select_pixels(gradient(img), budget, threshold);
          py::array_t<double> out({static_cast<py::ssize_t>(s.size()), py::ssize_t{2}});
          auto r = out.mutable_unchecked<2>();
          for (std::size_t i = 0; i < s.size(); ++i) {
            r(i, 0) = s.coords[i].x;
            r(i, 1) = s.coords[i].y;
          }
          return out;
        },
        py::arg("image"), py::arg("budget") = 2000,
        py::arg("threshold") = PixelSelection{}.threshold);

  py::class_<AlignResult>(m, "AlignResult")
      .def_readonly("p", &AlignResult::p)
      .def_readonly("iterations", &AlignResult::iterations)
      .def_readonly("final_cost", &AlignResult::final_cost)
      .def_readonly("pixels_used", &AlignResult::pixels_used)
      .def_readonly("converged", &AlignResult::converged)
      .def_property_readonly("failure_reason", [](const AlignResult& r) -> py::object {
        if (!r.failure_reason) {
          return py::none();
        }
        return py::str(std::string(to_string(*r.failure_reason)));
      });

  m.def(
      "align",
      [](const GrayImage& prev, const GrayImage& curr, const WarpParams& p0,
         const CameraIntrinsics& k, const PlaneNormal& n, const Vector6d& w_diag, int max_iters,
         std::size_t budget, double threshold, bool pyramid) {
        AlignConfig cfg;
        cfg.w_diag = w_diag;
        cfg.max_iters = max_iters;
        cfg.pyramid = pyramid;
        return align_frames(prev, curr, AlignPrior{p0}, cfg, PixelSelection{budget, threshold}, k,
                            n);
      },
      py::arg("prev"), py::arg("curr"), py::arg("p0") = WarpParams{},
      py::arg("k") = CameraIntrinsics{}, py::arg("n") = PlaneNormal{0.0, 1.5707963267948966},
      py::arg("w_diag") = AlignConfig{}.w_diag, py::arg("max_iters") = 30,
      py::arg("budget") = 2000, py::arg("threshold") = PixelSelection{}.threshold,
      py::arg("pyramid") = false);

  py::class_<EkfState>(m, "EkfState")
      .def(py::init([](const Eigen::Vector3d& v, double d, const Eigen::Vector3d& b) {
             return EkfState{v, d, b};
           }),
           py::arg("v") = Eigen::Vector3d::Zero(), py::arg("d") = 1.0,
           py::arg("b") = Eigen::Vector3d::Zero())
      .def_readwrite("v", &EkfState::v)
      .def_readwrite("d", &EkfState::d)
      .def_readwrite("b", &EkfState::b)
      .def("to_vector", &EkfState::to_vector);

  m.def(
      "ekf_update",
      [](const EkfState& s, const Matrix7d& cov, const Eigen::Vector3d& t_m,
         std::optional<double> l_m, double n_z, double tau) {
        FusionMeasurement meas{t_m, l_m, n_z, tau};
        const UpdateResult r = update(s, cov, meas, NoiseConfig{});
        return py::make_tuple(r.state, r.cov, r.accepted);
      },
      py::arg("state"), py::arg("cov"), py::arg("t_m"), py::arg("l_m") = py::none(),
      py::arg("n_z") = 1.0, py::arg("tau") = 0.0125);
  m.def("initial_covariance", &initial_covariance, py::arg("var_v") = 0.25,
        py::arg("var_d") = 0.01, py::arg("var_b") = 0.01);

  m.def("preset_names", &preset_names);
  m.def(
      "generate",
      [](const std::string& preset_or_path, const std::filesystem::path& out,
         std::optional<double> duration, std::optional<std::uint64_t> seed) {
        ScenarioSpec spec = load_scenario(preset_or_path);
        if (duration) {
          spec.duration = *duration;
        }
        if (seed) {
          spec.seed = *seed;
        }
        write_dataset(spec, out);
      },
      py::arg("spec"), py::arg("out"), py::arg("duration") = py::none(),
      py::arg("seed") = py::none());
  m.def(
      "render_preset_frame",
      [](const std::string& name, double t) {
        const Scenario sc(preset(name));
        return image_to_array(render_frame(sc, sc.camera_pose(t), t));
      },
      py::arg("preset"), py::arg("t") = 0.0);

  m.def(
      "track",
      [](const std::filesystem::path& config, bool write) {
        const RunConfig cfg = RunConfig::load(config);
        const TrackOutput out = run_tracking(load_dataset(cfg.dataset), cfg);
        if (write) {
          write_outputs(out, cfg.output_dir);
        }
        py::dict result;
        result["frames"] = out.rows.size();
        std::vector<double> failures;
        py::list converged;
        for (const auto& d : out.diagnostics) {
          converged.append(d.align.converged);
        }
        result["converged"] = converged;
        result["metrics"] = out.metrics ? py::object(metrics_dict(out.metrics->report)) : py::none();
        return result;
      },
      py::arg("config"), py::arg("write") = true);

  m.def("metrics", [](const std::filesystem::path& est, const std::filesystem::path& gt) {
    return metrics_dict(evaluate_rows(read_track_csv(est), read_groundtruth_csv(gt)).report);
  });
}
