#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "agshock/error.hpp"
#include "agshock/outliers.hpp"
#include "agshock/pipeline.hpp"
#include "agshock/preprocess.hpp"
#include "agshock/relations.hpp"
#include "agshock/report.hpp"

namespace py = pybind11;
using namespace agshock;

namespace {

PipelineConfig resolve(const std::filesystem::path& config, std::optional<std::filesystem::path> out,
                       std::optional<std::uint64_t> seed) {
  PipelineConfig cfg = load_config(config);
  if (out) cfg.output_dir = *out;
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

Stage stage_from_name(const std::string& name) {
  for (Stage s : all_stages()) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::kConfigError, "unknown stage: " + name);
}

}  // namespace

PYBIND11_MODULE(_agshock, m) {
  m.doc() = "Commodity price shock analysis core";

  static py::exception<Error> error(m, "AgshockError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (std::string(to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  m.def("rmse", [](const std::vector<double>& y_hat, const std::vector<double>& y) { return rmse(y_hat, y); },
        py::arg("y_hat"), py::arg("y"));
  m.def("r2", [](const std::vector<double>& y_hat, const std::vector<double>& y) { return r2(y_hat, y); },
        py::arg("y_hat"), py::arg("y"));

  m.def("double_rolling_aggregate",
        [](const std::vector<double>& series, std::size_t window) { return double_rolling_aggregate(series, window); },
        py::arg("series"), py::arg("window"));
  m.def("contamination_from_iqr",
        [](const std::vector<double>& signal, double fence_k) { return contamination_from_iqr(signal, fence_k); },
        py::arg("signal"), py::arg("fence_k") = 1.5);
  m.def("average_path_length", &average_path_length, py::arg("m"));
  m.def(
      "isolation_scores",
      [](const Eigen::MatrixXd& data, std::size_t n_trees, double contamination, std::uint64_t seed) {
        IsolationForestConfig cfg;
        cfg.n_trees = n_trees;
        cfg.contamination = contamination;
        cfg.seed = seed;
        const auto model = IsolationForestModel::fit(data, cfg);
        std::vector<int> flags;
        const auto scores = model.score_rows(data);
        for (double s : scores) flags.push_back(model.is_outlier(s) ? 1 : 0);
        return py::make_tuple(scores, flags);
      },
      py::arg("data"), py::arg("n_trees") = 100, py::arg("contamination") = 0.1, py::arg("seed") = 0);

  m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); },
        py::arg("x"), py::arg("y"));
  m.def(
      "causation_score",
      [](const std::vector<double>& cause, const std::vector<double>& effect, std::size_t lags) {
        const auto s = causation_score(cause, effect, lags);
        py::dict d;
        d["f_stat"] = s.f_stat;
        d["p_value"] = s.p_value;
        d["df_num"] = s.df_num;
        d["df_den"] = s.df_den;
        return d;
      },
      py::arg("cause"), py::arg("effect"), py::arg("lags") = 3);

  m.def("stages", [] {
    std::vector<std::string> names;
    for (Stage s : all_stages()) names.emplace_back(to_string(s));
    return names;
  });
  m.def(
      "run_stage",
      [](const std::string& stage, const std::filesystem::path& config, std::optional<std::filesystem::path> out,
         std::optional<std::uint64_t> seed) {
        const auto cfg = resolve(config, out, seed);
        py::gil_scoped_release release;
        run_stage(stage_from_name(stage), cfg);
      },
      py::arg("stage"), py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none());
  m.def(
      "run_all",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> out,
         std::optional<std::uint64_t> seed) {
        const auto cfg = resolve(config, out, seed);
        py::gil_scoped_release release;
        run_all(cfg);
        return cfg.output_dir;
      },
      py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none());
}
