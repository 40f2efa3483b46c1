#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "specloop/bundle.hpp"
#include "specloop/config.hpp"
#include "specloop/error.hpp"
#include "specloop/hashing.hpp"
#include "specloop/headless.hpp"
#include "specloop/metrics.hpp"
#include "specloop/spec_model.hpp"
#include "specloop/stats.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace specloop;

namespace {

// JSON crosses the boundary as text; the Python side turns it into dicts.
py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

py::dict spec_dict(const ProblemSpec& s) {
  py::list examples;
  for (const auto& e : s.examples()) {
    py::dict d;
    d["input"] = e.input;
    d["expected"] = e.expected;
    examples.append(d);
  }
  py::dict d;
  d["function_name"] = s.function_name();
  d["signature"] = s.signature();
  d["description"] = s.description();
  d["constraints"] = s.constraints();
  d["examples"] = examples;
  d["source_hash"] = s.source_hash();
  d["warnings"] = s.warnings();
  return d;
}

py::dict run_script_py(const fs::path& script, const fs::path& out_dir, const std::string& backend,
                       const std::optional<fs::path>& fixtures, const std::optional<fs::path>& canned,
                       const std::optional<fs::path>& config) {
  auto cfg = AppConfig::load(config);
  cfg.gateway.backend = backend;
  if (fixtures) cfg.gateway.fixture_dir = fixtures->string();
  if (canned) cfg.gateway.canned_file = canned->string();
  HeadlessOptions opts;
  opts.backend = cfg.make_backend();
  opts.params = cfg.gateway.params;
  opts.config = cfg.session_config();
  opts.templates = cfg.templates();
  opts.out_dir = out_dir;
  opts.pseudonym_salt = cfg.service.salt;
  HeadlessResult r;
  {
    py::gil_scoped_release release;
    r = headless_run(load_script(script), opts);
  }
  py::dict d;
  d["bundle_dir"] = r.bundle_dir.string();
  d["phase"] = std::string(to_string(r.final_phase));
  d["metrics"] = to_python(to_json(r.metrics));
  d["debounced_steps"] = r.debounced_steps;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the specloop core: specs, statistics, metrics, bundles and headless runs.";

  static py::exception<Error> error_type(m, "SpecloopError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      std::string msg = std::string(to_string(e.kind())) + ": " + e.what();
      PyErr_SetString(error_type.ptr(), msg.c_str());
    }
  });

  m.def("sha256_hex", [](py::bytes data) { return sha256_hex(std::string(data)); }, py::arg("data"));

  m.def("parse_spec", [](const std::string& text) { return spec_dict(parse_spec(text)); }, py::arg("text"));
  m.def("render_for_prompt", [](const std::string& text) { return render_for_prompt(parse_spec(text)); },
        py::arg("text"));

  m.def(
      "descriptive_stats",
      [](const std::vector<double>& values) {
        auto s = descriptive_stats(values);
        py::dict d;
        d["n"] = s.n;
        d["median"] = s.median;
        d["q1"] = s.q1;
        d["q3"] = s.q3;
        d["iqr"] = s.iqr();
        return d;
      },
      py::arg("values"));
  m.def("quantile", [](const std::vector<double>& v, double p) { return quantile(v, p); }, py::arg("values"),
        py::arg("p"));
  m.def("spearman_rho", [](const std::vector<double>& x, const std::vector<double>& y) { return spearman_rho(x, y); },
        py::arg("x"), py::arg("y"));

  m.def(
      "test_diversity",
      [](const std::vector<std::string>& bodies, const std::vector<std::string>& ignored) {
        TestSuite suite;
        for (std::size_t i = 0; i < bodies.size(); ++i) {
          suite.tests.push_back(TestCase::make("t" + std::to_string(i), bodies[i], TestOrigin::generated, {}));
        }
        return test_diversity(suite, ignored);
      },
      py::arg("bodies"), py::arg("ignored_tokens") = std::vector<std::string>{});

  m.def(
      "verify_bundle",
      [](const fs::path& dir) {
        VerifyResult r;
        {
          py::gil_scoped_release release;
          r = verify_bundle(dir);
        }
        return r.problems;
      },
      py::arg("bundle_dir"));
  m.def("bundle_metrics", [](const fs::path& dir) { return to_python(to_json(metrics_from_bundle(read_bundle(dir)))); },
        py::arg("bundle_dir"));
  m.def("metrics_csv_header", &metrics_csv_header);

  m.def("run_script", &run_script_py, py::arg("script"), py::arg("out_dir"), py::arg("backend") = "replay",
        py::arg("fixtures") = std::nullopt, py::arg("canned") = std::nullopt, py::arg("config") = std::nullopt);
}
