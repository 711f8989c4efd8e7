#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <numbers>

#include "qss/pipeline.hpp"

namespace py = pybind11;
using namespace qss;

namespace {

Party party_arg(const std::string& name) {
    if (auto p = parse_party(name)) return *p;
    throw py::value_error("unknown party '" + name + "'");
}

std::vector<Party> parties_arg(const std::vector<std::string>& names) {
    std::vector<Party> out;
    for (const auto& n : names) out.push_back(party_arg(n));
    return out;
}

py::dict check_dict(const CheckReport& r) {
    py::dict d;
    d["kind"] = std::string(check_kind_name(r.kind));
    d["sample_size"] = r.sample_size;
    d["estimate"] = r.estimate;
    d["standard_error"] = r.standard_error;
    d["threshold"] = r.threshold;
    d["verdict"] = std::string(verdict_name(r.verdict));
    return d;
}

py::dict session_dict(const SessionResult& s, Party dealer) {
    py::dict d;
    d["status"] = s.status == SessionStatus::completed ? "completed" : "aborted";
    d["check"] = check_dict(s.check);
    d["windows"] = s.windows;
    d["detected"] = s.detected;
    d["sifted_bits"] = s.sifted.size();
    d["bell_pool"] = s.bell_pool;
    d["parity_errors"] = s.sifted.parity_errors(dealer);
    d["seconds"] = s.seconds;
    py::dict keys;
    for (Party p : kAllParties) keys[py::str(std::string(party_name(p)))] = s.key.of(p);
    d["key"] = keys;
    d["messages"] = s.transcript.size();
    return d;
}

}  // namespace

PYBIND11_MODULE(_qss, m) {
    m.doc() = "Four-party quantum secret sharing simulator";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<InsufficientStatistics>(m, "InsufficientStatistics");
    py::register_exception<ReconciliationError>(m, "ReconciliationError");
    py::register_exception<KeyReuse>(m, "KeyReuse");
    py::register_exception<KeyTooShort>(m, "KeyTooShort");

    m.def(
        "outcome_distribution",
        [](std::array<double, 4> phases, double visibility) {
            return outcome_distribution(make_psi4_minus(),
                                        settings_from_phases(phases[0], phases[1], phases[2], phases[3]),
                                        NoiseModel{visibility})
                .probs;
        },
        py::arg("phases"), py::arg("visibility") = 1.0,
        "Probabilities of the 16 outcome patterns, index (a<<3)|(b<<2)|(c<<1)|d with H=0.");
    m.def("pattern_label", &pattern_label, py::arg("pattern"));
    m.def("correlation", &correlation_analytic, py::arg("phi_a"), py::arg("phi_b"), py::arg("phi_c"),
          py::arg("phi_d"));
    m.def(
        "bell_s",
        [](double visibility) {
            return visibility * bell_S(standard_bell_setting(), correlation_analytic);
        },
        py::arg("visibility") = 1.0, "Bell quantity at the standard angles with exact correlations.");
    m.def("qber_from_visibility", &qber_from_visibility, py::arg("visibility"));
    m.def(
        "expected_qber_under_attack",
        [](const std::vector<std::string>& modes, std::vector<double> eve_bases, double fraction,
           double visibility) {
            AttackConfig cfg{parties_arg(modes), std::move(eve_bases), fraction};
            const std::array<double, 2> bases{0.0, std::numbers::pi / 2};
            return expected_qber_under_attack(cfg, bases, NoiseModel{visibility});
        },
        py::arg("modes"), py::arg("eve_bases") = std::vector<double>{0.0, std::numbers::pi / 2},
        py::arg("fraction") = 1.0, py::arg("visibility") = 1.0);
    m.def(
        "semi_access_predictor",
        [](const std::string& dealer, const std::vector<std::string>& subset, std::vector<std::uint8_t> bits,
           double phi) {
            const auto parties = parties_arg(subset);
            return semi_access_predictor(party_arg(dealer), parties, bits, phi);
        },
        py::arg("dealer"), py::arg("subset"), py::arg("bits"), py::arg("phi") = 0.0);
    m.def("reconstruct_dealer_bit", &reconstruct_dealer_bit);
    m.def("binary_entropy", &binary_entropy);
    m.def("final_key_length", &final_key_length, py::arg("n"), py::arg("qber"), py::arg("leaked_bits"),
          py::arg("epsilon"));
    m.def(
        "privacy_amplify",
        [](const Bits& key, const Bits& seed, std::size_t n_out) {
            return privacy_amplify(key, ToeplitzSeed{key.size(), n_out, seed}, n_out);
        },
        py::arg("key"), py::arg("seed"), py::arg("n_out"));
    m.def(
        "reconcile",
        [](const Bits& dealer_key, const Bits& access_key, double qber, std::uint64_t seed) {
            Channel ch;
            Rng rng = RngStreams(seed).stream("reconcile");
            const auto r = reconcile(dealer_key, access_key, qber, ch, Party::alice, Party::bob, rng);
            py::dict d;
            d["dealer_key"] = r.dealer_key;
            d["access_key"] = r.access_key;
            d["leaked_bits"] = r.leaked_bits;
            d["corrected_bits"] = r.corrected_bits;
            d["passes"] = r.passes;
            return d;
        },
        py::arg("dealer_key"), py::arg("access_key"), py::arg("qber"), py::arg("seed") = 1);

    py::class_<OneTimePad>(m, "OneTimePad")
        .def(py::init<Bits>(), py::arg("key"))
        .def_property_readonly("remaining", &OneTimePad::remaining)
        .def(
            "encrypt",
            [](OneTimePad& pad, const Bits& msg) {
                const auto ct = pad.encrypt(msg);
                return py::make_tuple(ct.key_offset, ct.bits);
            },
            py::arg("message"))
        .def(
            "decrypt",
            [](OneTimePad& pad, std::size_t offset, const Bits& bits) {
                return pad.decrypt(Ciphertext{offset, bits});
            },
            py::arg("key_offset"), py::arg("bits"));

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def("set", &ExperimentConfig::set, py::arg("key"), py::arg("value"))
        .def("validate", &ExperimentConfig::validate)
        .def_readwrite("seed", &ExperimentConfig::seed)
        .def_readwrite("visibility", &ExperimentConfig::visibility)
        .def_readwrite("samples", &ExperimentConfig::samples)
        .def_readwrite("scan_samples", &ExperimentConfig::scan_samples)
        .def_readwrite("analytic", &ExperimentConfig::analytic)
        .def_readwrite("out_dir", &ExperimentConfig::out_dir);
    m.def("parse_config", [](const std::string& text) { return parse_config(text); }, py::arg("text"));
    m.def("config_keys", [] {
        std::vector<std::string> out;
        for (auto k : config_keys()) out.emplace_back(k);
        return out;
    });

    m.def("run_protocol", [](const ExperimentConfig& c) {
        c.validate();
        return session_dict(run_protocol(c.protocol_config()), c.dealer);
    });
    m.def("histogram", [](const ExperimentConfig& c) {
        const auto r = run_histogram(c);
        py::dict d;
        d["probabilities"] = r.probabilities;
        d["counts"] = r.counts;
        d["correlation_analytic"] = r.correlation_analytic;
        d["correlation_sampled"] = r.correlation_sampled;
        d["standard_error"] = r.standard_error;
        return d;
    });
    m.def("correlation_scan", [](const ExperimentConfig& c) {
        const auto r = run_correlation_scan(c);
        py::list points;
        for (const auto& p : r.points) {
            points.append(py::make_tuple(p.phi_b, p.analytic, p.sampled, p.standard_error));
        }
        py::dict d;
        d["points"] = points;
        d["fitted_visibility"] = r.fitted_visibility;
        d["fit_standard_error"] = r.fit_standard_error;
        return d;
    });
    m.def("qss_run", [](const ExperimentConfig& c) {
        const auto r = run_qss(c);
        py::dict d;
        d["status"] = std::string(run_status_name(r.status));
        d["session"] = session_dict(r.session, c.dealer);
        d["leaked_bits"] = r.leaked_bits;
        d["final_length"] = r.final_length;
        d["keys_match"] = r.keys_match();
        d["vernam_ok"] = r.vernam_ok();
        d["report"] = qss_report(c, r);
        return d;
    });
    m.def("bell_test", [](const ExperimentConfig& c) {
        const auto r = run_bell_test(c);
        py::dict d;
        d["check"] = check_dict(r.report);
        d["pool"] = r.pool;
        d["predicted"] = r.predicted;
        return d;
    });
}
