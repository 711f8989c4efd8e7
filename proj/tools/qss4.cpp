#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "qss/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kError = 1, kAbort = 2, kConfigError = 3, kInsufficient = 4 };

struct Overrides {
    std::string config;
    std::optional<std::string> seed, mode, visibility, windows, target_bits, attack, out_dir;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "Config file of key = value lines");
    cmd->add_option("--seed", o.seed, "Master seed");
    cmd->add_option("--mode", o.mode, "qber or bell");
    cmd->add_option("--visibility", o.visibility, "Visibility in [0, 1]");
    cmd->add_option("--windows", o.windows, "Number of acquisition windows");
    cmd->add_option("--target-bits", o.target_bits, "Run until this many sifted key bits");
    cmd->add_option("--attack", o.attack, "Modes under intercept-resend, e.g. b or bc; none to disable");
    cmd->add_option("--out-dir", o.out_dir, "Directory for output files");
}

qss::ExperimentConfig build_config(const Overrides& o) {
    qss::ExperimentConfig c;
    if (!o.config.empty()) c = qss::load_config(o.config);
    auto apply = [&c](std::string_view key, const std::optional<std::string>& v) {
        if (v) c.set(key, *v);
    };
    apply("seed", o.seed);
    apply("mode", o.mode);
    apply("visibility", o.visibility);
    apply("windows", o.windows);
    apply("target_bits", o.target_bits);
    apply("attack", o.attack);
    apply("out_dir", o.out_dir);
    c.validate();
    return c;
}

int verdict_code(qss::Verdict v) { return v == qss::Verdict::proceed ? kOk : kAbort; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Four-party quantum secret sharing simulator"};
    app.require_subcommand(1);

    Overrides o;
    auto* histogram = app.add_subcommand("histogram", "Outcome probabilities and sampled counts");
    auto* scan = app.add_subcommand("correlation-scan", "Sweep Bob's phase and fit the visibility");
    auto* run = app.add_subcommand("qss-run", "Full protocol with post-processing and Vernam demo");
    auto* bell = app.add_subcommand("bell-test", "Bell quantity from a Bell-mode session");
    for (auto* cmd : {histogram, scan, run, bell}) add_common(cmd, o);

    CLI11_PARSE(app, argc, argv);

    try {
        const auto config = build_config(o);
        if (histogram->parsed()) {
            const auto r = qss::run_histogram(config);
            qss::write_histogram_files(config, r);
            std::cout << qss::histogram_report(r);
            return kOk;
        }
        if (scan->parsed()) {
            const auto r = qss::run_correlation_scan(config);
            qss::write_scan_files(config, r);
            std::cout << qss::scan_report(r);
            return kOk;
        }
        if (run->parsed()) {
            const auto r = qss::run_qss(config);
            qss::write_qss_files(config, r);
            std::cout << qss::qss_report(config, r);
            return r.status == qss::RunStatus::completed ? kOk : kAbort;
        }
        const auto r = qss::run_bell_test(config);
        qss::write_bell_files(config, r);
        std::cout << qss::bell_report_text(r);
        return verdict_code(r.report.verdict);
    } catch (const qss::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const qss::InsufficientStatistics& e) {
        std::cerr << "insufficient statistics: " << e.what() << '\n';
        return kInsufficient;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kError;
    }
}
