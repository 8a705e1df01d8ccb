// pybind11 surface: model builders, resolvent blocks, multiplicity
// estimators, tree checks, spectral measures and the config-driven runner.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "specmult/greens_function.hpp"
#include "specmult/harness.hpp"
#include "specmult/model_io.hpp"
#include "specmult/multiplicity.hpp"
#include "specmult/operator_model.hpp"
#include "specmult/spectral_measures.hpp"
#include "specmult/tree_simplicity.hpp"

namespace py = pybind11;
using namespace specmult;

PYBIND11_MODULE(_specmult, m) {
  m.doc() = "multiplicity of random block perturbations: core operations";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<NumericalError>(m, "NumericalError");

  py::class_<ModelInstance>(m, "ModelInstance")
      .def_property_readonly("dim", &ModelInstance::dim)
      .def_property_readonly("block_count", &ModelInstance::block_count)
      .def_property_readonly("has_omega", &ModelInstance::has_omega)
      .def_property_readonly("omega", [](const ModelInstance& s) { return s.omega; })
      .def_property_readonly("assembled",
                             [](const ModelInstance& s) { return s.assembled; })
      .def_property_readonly("a", [](const ModelInstance& s) { return s.a.entries; })
      .def("block_support",
           [](const ModelInstance& s, int n) {
             return s.blocks.at(static_cast<std::size_t>(n)).support;
           })
      .def("block_c",
           [](const ModelInstance& s, int n) {
             return s.blocks.at(static_cast<std::size_t>(n)).c;
           })
      .def("__repr__", [](const ModelInstance& s) {
        return "<ModelInstance dim=" + std::to_string(s.dim()) +
               " blocks=" + std::to_string(s.block_count()) + ">";
      });

  m.def("build_strip", &build_strip, py::arg("length"), py::arg("fibers"),
        py::arg("vertical_hopping") = false);
  m.def("build_shell_model", &build_shell_model, py::arg("d"), py::arg("radius"));
  m.def("build_nested_model", &build_nested_model, py::arg("levels"));
  m.def("build_canopy_bethe", &build_canopy_bethe, py::arg("branching"), py::arg("depth"),
        py::arg("block_depth"));
  m.def("with_disorder", &with_disorder, py::arg("model"), py::arg("sample_index"));
  m.def(
      "with_omega",
      [](const ModelInstance& model, const RVector& omega) {
        return with_omega(model, omega);
      },
      py::arg("model"), py::arg("omega"));

  m.def(
      "to_json", [](const ModelInstance& model) { return model_to_json(model).dump(2); },
      py::arg("model"));
  m.def(
      "from_json", [](const std::string& doc) { return model_from_json(ojson::parse(doc)); },
      py::arg("doc"));

  m.def(
      "green_block",
      [](const ModelInstance& model, int n, int mm, std::complex<double> z) {
        return green_block(model, n, mm, z).matrix;
      },
      py::arg("model"), py::arg("n"), py::arg("m"), py::arg("z"));

  py::class_<MnEstimate>(m, "MnEstimate")
      .def_readonly("block", &MnEstimate::block)
      .def_readonly("value", &MnEstimate::value)
      .def_readonly("constant", &MnEstimate::constant)
      .def_readonly("per_sample", &MnEstimate::per_sample);
  m.def("estimate_M_n", &estimate_M_n, py::arg("model"), py::arg("n"), py::arg("n_samples"),
        py::arg("n_z"), py::arg("seed"), py::arg("cluster_tol") = 1e-8);
  m.def("global_degeneracy", &global_degeneracy, py::arg("model"),
        py::arg("cluster_tol") = 1e-8);
  m.def("corollary_bound", &corollary_bound, py::arg("model"), py::arg("n"),
        py::arg("cluster_tol") = 1e-8);
  m.def(
      "mult_exact",
      [](const ModelInstance& model, int n, double e_real) {
        return mult_exact(model, n, e_real).k;
      },
      py::arg("model"), py::arg("n"), py::arg("e_real"));

  py::class_<RootedTree>(m, "RootedTree")
      .def_property_readonly("vertex_count", &RootedTree::vertex_count)
      .def_readonly("boundary", &RootedTree::boundary);
  m.def("build_rooted_tree", &build_rooted_tree, py::arg("branching"), py::arg("depth"));
  py::class_<SimplicityReport>(m, "SimplicityReport")
      .def_readonly("min_gap", &SimplicityReport::min_gap)
      .def_readonly("min_root_amplitude", &SimplicityReport::min_root_amplitude)
      .def_readonly("sibling_min_separation", &SimplicityReport::sibling_min_separation)
      .def_readonly("pole_count", &SimplicityReport::pole_count)
      .def_readonly("expected_pole_count", &SimplicityReport::expected_pole_count)
      .def_readonly("verdict", &SimplicityReport::verdict);
  m.def("simplicity_report", &simplicity_report, py::arg("tree"), py::arg("tau"),
        py::arg("gap_tol") = kTreeGapTol, py::arg("amp_tol") = kTreeAmpTol);

  m.def(
      "spectrum",
      [](const ModelInstance& model, double cluster_tol) {
        const SpectralDecomposition d = decompose(model, cluster_tol);
        return py::make_tuple(d.eigenvalues, d.clusters);
      },
      py::arg("model"), py::arg("cluster_tol") = 1e-8);
  m.def(
      "trace_measure",
      [](const ModelInstance& model, int n, double cluster_tol) {
        std::vector<std::pair<double, double>> out;
        const SpectralDecomposition d = decompose(model, cluster_tol);
        for (const auto& atom : trace_measure(model, d, n))
          out.emplace_back(atom.energy, atom.weight);
        return out;
      },
      py::arg("model"), py::arg("n"), py::arg("cluster_tol") = 1e-8);

  m.def(
      "run_experiment",
      [](const std::string& config) {
        const ExperimentConfig cfg = parse_config(ojson::parse(config));
        const RunRecord rec = run(cfg);
        py::dict out;
        out["csv"] = render_csv(rec.rows);
        out["summary"] = rec.summary.dump(2);
        out["all_passed"] = rec.all_passed;
        return out;
      },
      py::arg("config"),
      "Parse a config document, run its task and return csv/summary strings.");
}
