#include <array>
#include <string>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cdwmf/io.hpp"
#include "cdwmf/phase.hpp"
#include "cdwmf/selfcheck.hpp"

namespace py = pybind11;
using namespace cdwmf;

namespace {

std::string ttpv_point(const TtpvParams& p) {
  const TtpvModel m(p);
  return json{{"N", to_json(m.solve_branch(Branch::N))}, {"CDW", to_json(m.solve_branch(Branch::CDW))}}.dump();
}

std::string luttinger_point(const LuttParams& p, double mu) {
  const LuttingerModel m(p);
  return json{{"N", to_json(m.self_consistent_point(mu, Branch::N))},
              {"CDW", to_json(m.self_consistent_point(mu, Branch::CDW))}}
      .dump();
}

std::string boundaries(const BranchModel& m, double lo, double hi, int n) {
  return to_json(find_crossings(m, scan_mu(m, lo, hi, n))).dump();
}

std::string selfcheck() {
  const CheckReport r = run_selfcheck(canned_sets());
  json items = json::array();
  for (const CheckItem& i : r.items) {
    items.push_back({{"suite", i.suite}, {"name", i.name}, {"measured", i.measured},
                     {"tolerance", i.tolerance}, {"passed", i.passed}, {"detail", i.detail}});
  }
  return json{{"passed", r.passed()}, {"items", items}}.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hartree-Fock CDW solvers";
  m.attr("schema_version") = schema_version;
  m.def("code_version", &code_version);

  py::class_<TtpvParams>(m, "TtpvParams")
      .def(py::init<>())
      .def_readwrite("t", &TtpvParams::t)
      .def_readwrite("t_prime", &TtpvParams::t_prime)
      .def_readwrite("V", &TtpvParams::V)
      .def_readwrite("mu", &TtpvParams::mu)
      .def_readwrite("beta", &TtpvParams::beta)
      .def_readwrite("L", &TtpvParams::L)
      .def("validate", &TtpvParams::validate);

  py::class_<LuttParams>(m, "LuttParams")
      .def(py::init<>())
      .def_readwrite("t", &LuttParams::t)
      .def_readwrite("t_prime", &LuttParams::t_prime)
      .def_readwrite("V", &LuttParams::V)
      .def_readwrite("beta", &LuttParams::beta)
      .def_readwrite("kappa", &LuttParams::kappa)
      .def_readwrite("Q", &LuttParams::Q)
      .def_readwrite("antinodal_count", &LuttParams::antinodal_count)
      .def_property(
          "band", [](const LuttParams& p) { return p.band == BandChoice::full ? "full" : "taylor"; },
          [](LuttParams& p, const std::string& s) {
            if (s != "full" && s != "taylor") throw py::value_error("band must be taylor or full");
            p.band = s == "full" ? BandChoice::full : BandChoice::taylor;
          })
      .def("validate", &LuttParams::validate);

  const auto nogil = py::call_guard<py::gil_scoped_release>();
  m.def("ttpv_point", &ttpv_point, py::arg("params"), nogil);
  m.def("luttinger_point", &luttinger_point, py::arg("params"), py::arg("mu"), nogil);
  m.def(
      "omega_hf",
      [](const TtpvParams& p, const std::array<double, 5>& q, const std::array<double, 5>& mm) {
        VariationalAnsatz a;
        a.q = q;
        a.m = mm;
        a.restricted = false;
        return omega_hf(p, a);
      },
      py::arg("params"), py::arg("q"), py::arg("m"), nogil);
  m.def(
      "ttpv_boundaries",
      [](const TtpvParams& p, double lo, double hi, int n) { return boundaries(TtpvBranchModel(p), lo, hi, n); },
      py::arg("params"), py::arg("mu_min"), py::arg("mu_max"), py::arg("n_mu"), nogil);
  m.def(
      "luttinger_boundaries",
      [](const LuttParams& p, double lo, double hi, int n, bool q_fixed, bool n_side) {
        if (q_fixed) return to_json(q_fixed_boundaries(p, n, p.Q, n_side, std::pair{lo, hi})).dump();
        return boundaries(LuttBranchModel(p), lo, hi, n);
      },
      py::arg("params"), py::arg("mu_min"), py::arg("mu_max"), py::arg("n_mu"), py::arg("q_fixed") = false,
      py::arg("n_side") = false, nogil);
  m.def("selfcheck", &selfcheck, nogil);
}
