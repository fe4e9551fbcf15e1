#include "ratebv/cli.hpp"

#include "ratebv/io.hpp"
#include "ratebv/parallel.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace ratebv
{

namespace
{

namespace fs = std::filesystem;

struct Invocation
{
    std::string subcommand;
    std::string config_path;
    std::string out_dir;
    std::string profile;
    std::string input;
    std::uint64_t seed{0};
    int threads{0};
};

/// Output directory plus provenance stamp shared by every artifact of a run.
class Artifacts
{
public:
    Artifacts(fs::path dir, std::string hash, std::vector<std::string> formats)
        : dir_(std::move(dir)), hash_(std::move(hash)), formats_(std::move(formats))
    {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec)
        {
            throw FileError("cannot create output directory " + dir_.string() + ": " + ec.message());
        }
    }

    [[nodiscard]] bool wants(const std::string& format) const
    {
        return std::find(formats_.begin(), formats_.end(), format) != formats_.end();
    }
    [[nodiscard]] const std::string& hash() const { return hash_; }

    void json_file(const std::string& name, json document) const
    {
        json out;
        out["config_hash"] = hash_;
        for (auto& item : document.items())
        {
            out[item.key()] = std::move(item.value());
        }
        write_text(dir_ / name, out.dump(2) + "\n");
    }
    void text_file(const std::string& name, const std::string& text) const { write_text(dir_ / name, text); }

    void trajectory(const std::string& stem, const ParamTrajectory& p) const
    {
        if (wants("csv"))
        {
            text_file(stem + ".csv", param_csv(p, hash_));
        }
        if (wants("json"))
        {
            json_file(stem + ".json", to_json(p));
        }
    }

private:
    fs::path dir_;
    std::string hash_;
    std::vector<std::string> formats_;
};

ViscousOptions viscous_options(const RunConfig& c)
{
    ViscousOptions o;
    o.inner_tolerance = c.solver.inner_tolerance;
    o.max_inner_iterations = c.solver.max_inner_iterations;
    o.pause_gap = c.solver.pause_gap;
    return o;
}

AutonomousOptions transient_options(const RunConfig& c)
{
    return {c.transient.delta, c.transient.tau, c.transient.stop_gap, c.transient.horizon_cap};
}

int solve_viscous_command(const RunConfig& c, const Artifacts& out)
{
    const ProblemSpec spec = c.spec();
    const LoadPath load = c.load_path();
    const ViscousTrajectory traj = solve_viscous(spec, load, c.z0, c.solver.epsilon, c.solver.tau, viscous_options(c));
    const std::vector<double> edb = edb_residual(spec, traj, load);
    if (out.wants("csv"))
    {
        out.text_file("viscous.csv", viscous_csv(traj, out.hash()));
    }
    out.json_file("viscous_summary.json", summary_json(traj, edb));
    std::cout << "solve-viscous: " << traj.steps() << " steps, max EDB residual " << max_abs(edb) << "\n";
    return exit_ok;
}

int solve_autonomous_command(const RunConfig& c, const Artifacts& out)
{
    const ProblemSpec spec = c.spec();
    const Vec ell_star = c.solver.ell_star ? *c.solver.ell_star : c.load_path().value(0.0);
    AutonomousOptions o{c.solver.delta, c.solver.tau, c.solver.stop_gap, c.solver.horizon_cap};
    const ViscousTrajectory traj = solve_autonomous(spec, ell_star, c.z0, o);
    const std::vector<double> edb = edb_residual(spec, traj);
    if (out.wants("csv"))
    {
        out.text_file("autonomous.csv", viscous_csv(traj, out.hash()));
    }
    json summary = summary_json(traj, edb);
    if (c.solver.delta > 0.0)
    {
        const NuDeltaBound nu = nu_delta_initial(spec, c.solver.delta, ell_star, c.z0);
        summary["nu_delta_initial"] = nu.nu0;
        summary["nu_delta_bound"] = nu.bound;
    }
    out.json_file("autonomous_summary.json", summary);
    std::cout << "solve-autonomous: " << traj.steps() << " steps, terminal gap " << traj.terminal_gap << "\n";
    if (!traj.converged)
    {
        throw NumericalError("solve-autonomous: horizon cap reached before the stability gap fell below stop_gap",
                             traj.terminal_gap);
    }
    return exit_ok;
}

int reparam_command(const RunConfig& c, const Artifacts& out)
{
    const ProblemSpec spec = c.spec();
    const LoadPath load = c.load_path();
    const ViscousTrajectory traj = solve_viscous(spec, load, c.z0, c.solver.epsilon, c.solver.tau, viscous_options(c));
    ParamTrajectory p = reparametrize(spec, traj, load, c.reparam.s_samples);
    out.trajectory("trajectory", p);
    std::cout << "reparam: S = " << p.S << "\n";
    return exit_ok;
}

int extract_command(const RunConfig& c, const Artifacts& out, int threads)
{
    const Extraction ex = extract_bv(c.spec(), c.load_path(), c.z0, c.extract_options(threads));
    out.trajectory("trajectory", ex.candidate);
    out.json_file("convergence.json", to_json(ex.report));
    std::cout << "extract-bv: S = " << ex.candidate.S << ", Cauchy (" << ex.report.convention
              << "): " << (ex.report.cauchy ? "yes" : "no") << "\n";
    return exit_ok;
}

int certify_command(const RunConfig& c, const Artifacts& out, int threads)
{
    const ProblemSpec spec = c.spec();
    const LoadPath load = c.load_path();
    ParamTrajectory p;
    if (!c.certify.input.empty())
    {
        p = read_param_trajectory(c.certify.input);
    }
    else
    {
        const Extraction ex = extract_bv(spec, load, c.z0, c.extract_options(threads));
        out.json_file("convergence.json", to_json(ex.report));
        p = ex.candidate;
    }
    const CertificateReport report = certify(spec, load, c.z0, p, c.certify_options());
    annotate(p, report);
    out.trajectory("trajectory", p);
    out.json_file("certificate.json", to_json(report));
    std::cout << "certify: " << (report.passed ? "passed" : "FAILED") << " (normalization "
              << report.normalization_defect << ", complementarity " << report.complementarity_defect << ", EDB "
              << report.edb_defect << ")\n";
    for (const std::string& f : report.failures)
    {
        std::cout << "  " << f << "\n";
    }
    return report.passed ? exit_ok : exit_certificate_failed;
}

int jump_transient_command(const RunConfig& c, const Artifacts& out, int threads)
{
    const ProblemSpec spec = c.spec();
    const AutonomousOptions options = transient_options(c);
    if (c.transient.z_a)
    {
        const JumpTransient jt = jump_transient(spec, *c.transient.ell_star, *c.transient.z_a, options);
        if (out.wants("csv"))
        {
            out.text_file("transient_0.csv", viscous_csv(jt.orbit, out.hash()));
        }
        out.json_file("jump_transient.json",
                      {{"transients", json::array({{{"z_b", std::vector<double>(jt.z_b.data(), jt.z_b.data() + jt.z_b.size())},
                                                     {"converged", jt.converged},
                                                     {"terminal_gap", jt.orbit.terminal_gap}}})}});
        std::cout << "jump-transient: " << (jt.converged ? "converged" : "did not converge") << "\n";
        if (!jt.converged)
        {
            throw NumericalError("jump-transient: no stable end point within the horizon cap", jt.orbit.terminal_gap);
        }
        return exit_ok;
    }

    const LoadPath load = c.load_path();
    const Extraction ex = extract_bv(spec, load, c.z0, c.extract_options(threads));
    ParamTrajectory p = ex.candidate;
    const CertificateReport report = certify(spec, load, c.z0, p, c.certify_options());
    annotate(p, report);
    json transients = json::array();
    bool all_converged = true;
    for (std::size_t k = 0; k < report.g_components.size(); ++k)
    {
        const GComponent& g = report.g_components[k];
        const JumpCheck check = check_jump(spec, load, p, g, options, c.transient.nudge);
        all_converged = all_converged && check.transient.converged;
        if (out.wants("csv"))
        {
            out.text_file("transient_" + std::to_string(k) + ".csv", viscous_csv(check.transient.orbit, out.hash()));
        }
        auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
        transients.push_back({{"component", k},
                              {"s_start", g.s_start},
                              {"s_end", g.s_end},
                              {"t_hat", check.ell_time},
                              {"z_a", vec(check.z_a)},
                              {"z_b", vec(check.transient.z_b)},
                              {"z_end", vec(check.z_end)},
                              {"mismatch", check.mismatch},
                              {"converged", check.transient.converged}});
        std::cout << "jump-transient: component " << k << " at t = " << check.ell_time << ", mismatch "
                  << check.mismatch << "\n";
    }
    if (report.g_components.empty())
    {
        std::cout << "jump-transient: the extracted trajectory has no jumps\n";
    }
    out.trajectory("trajectory", p);
    out.json_file("jump_transient.json", {{"transients", transients}});
    if (!all_converged)
    {
        throw NumericalError("jump-transient: a transient did not reach a stable end point", 0.0);
    }
    return exit_ok;
}

int optimize_command(const RunConfig& c, const Artifacts& out, std::uint64_t seed, int threads)
{
    const ControlResult r =
        optimize(c.spec(), c.z0, c.objective(), c.load_path(), c.optimize_options(seed, threads));
    out.json_file("control.json", to_json(r));
    out.json_file("best_load.json", {{"load", to_json(r.best_load)}});
    out.trajectory("trajectory", r.state);
    std::cout << "optimize: J = " << r.best_J << " after " << r.evaluations << " evaluations";
    if (c.control.certify_final)
    {
        std::cout << ", certificate " << (r.certified ? "passed" : "FAILED");
    }
    std::cout << "\n";
    return c.control.certify_final && !r.certified ? exit_certificate_failed : exit_ok;
}

int write_error(const fs::path& dir, int code, const std::string& kind, const std::string& message,
                const std::string& path = {})
{
    std::cerr << "ratebv: " << message << "\n";
    json report{{"error", kind}, {"message", message}, {"exit_code", code}};
    if (!path.empty())
    {
        report["path"] = path;
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream file(dir / "error.json");
    if (file)
    {
        file << report.dump(2) << "\n";
    }
    return code;
}

int resolve_thread_flag(const CLI::App& app, int flag)
{
    if (app.count("--threads") > 0)
    {
        if (flag < 1)
        {
            throw ConfigError("--threads", "must be at least 1");
        }
        return flag;
    }
    if (const char* env = std::getenv("RATEBV_THREADS"); env != nullptr && *env != '\0')
    {
        char* end = nullptr;
        const long value = std::strtol(env, &end, 10);
        if (*end != '\0' || value < 1)
        {
            throw ConfigError("RATEBV_THREADS", "expected a positive integer");
        }
        return static_cast<int>(value);
    }
    return resolve_threads(0);
}

}  // namespace

int run_cli(int argc, const char* const* argv)
{
    Invocation inv;
    CLI::App app{"Balanced-viscosity solutions of rate-independent systems", "ratebv"};
    app.require_subcommand(1);
    const std::vector<std::pair<const char*, const char*>> commands = {
        {"solve-viscous", "Implicit Euler solve of the viscous system"},
        {"solve-autonomous", "Explicit flow of the autonomous system at a frozen load"},
        {"reparam", "Viscous solve followed by arc-length reparametrization"},
        {"extract-bv", "Vanishing-viscosity sweep with a Cauchy table"},
        {"certify", "Certificate of a parametrized trajectory (extracted unless an input is given)"},
        {"jump-transient", "Autonomous transients across the jumps of a trajectory"},
        {"optimize", "Optimal control of the load"}};
    for (const auto& [name, help] : commands)
    {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", inv.config_path, "Run configuration (JSON)")->required();
        sub->add_option("--out", inv.out_dir, "Output directory (overrides output.directory)");
        sub->add_option("--seed", inv.seed, "Seed of randomized search steps");
        sub->add_option("--threads", inv.threads, "Worker threads (fallback: RATEBV_THREADS)");
        sub->add_option("--profile", inv.profile, "Certificate tolerances")
            ->check(CLI::IsMember({"strict", "standard"}));
        if (std::string(name) == "certify")
        {
            sub->add_option("--input", inv.input, "Trajectory file to certify (CSV or JSON)");
        }
        sub->final_callback([&inv, sub] { inv.subcommand = sub->get_name(); });
    }

    fs::path out_dir = "ratebv_out";
    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        // No output directory is known yet; CLI11 already reported the error.
        app.exit(e);
        return exit_config_error;
    }

    if (!inv.out_dir.empty())
    {
        out_dir = inv.out_dir;
    }
    const CLI::App* sub = app.get_subcommand(inv.subcommand);
    try
    {
        RunConfig config = parse_config_file(inv.config_path);
        if (!inv.out_dir.empty())
        {
            config.output.directory = inv.out_dir;
        }
        if (!inv.profile.empty())
        {
            config.certify.profile = inv.profile;
        }
        if (!inv.input.empty())
        {
            config.certify.input = inv.input;
        }
        out_dir = config.output.directory;
        const int threads = resolve_thread_flag(*sub, inv.threads);

        const Artifacts out(out_dir, config_hash(config), config.output.formats);
        write_text(out_dir / "effective_config.json", to_json(config).dump(2) + "\n");

        if (inv.subcommand == "solve-viscous")
        {
            return solve_viscous_command(config, out);
        }
        if (inv.subcommand == "solve-autonomous")
        {
            return solve_autonomous_command(config, out);
        }
        if (inv.subcommand == "reparam")
        {
            return reparam_command(config, out);
        }
        if (inv.subcommand == "extract-bv")
        {
            return extract_command(config, out, threads);
        }
        if (inv.subcommand == "certify")
        {
            return certify_command(config, out, threads);
        }
        if (inv.subcommand == "jump-transient")
        {
            return jump_transient_command(config, out, threads);
        }
        return optimize_command(config, out, inv.seed, threads);
    }
    catch (const ConfigError& e)
    {
        return write_error(out_dir, exit_config_error, "config", e.what(), e.path());
    }
    catch (const ArgumentError& e)
    {
        return write_error(out_dir, exit_config_error, "argument", e.what());
    }
    catch (const ConsistencyError& e)
    {
        return write_error(out_dir, exit_config_error, "consistency", e.what());
    }
    catch (const FileError& e)
    {
        return write_error(out_dir, exit_file_error, "file", e.what());
    }
    catch (const Error& e)
    {
        return write_error(out_dir, exit_numerical_failure, "numerical", e.what());
    }
    catch (const std::exception& e)
    {
        return write_error(out_dir, exit_numerical_failure, "internal", e.what());
    }
}

int run_cli(const std::vector<std::string>& args)
{
    std::vector<const char*> argv{"ratebv"};
    for (const std::string& a : args)
    {
        argv.push_back(a.c_str());
    }
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace ratebv
