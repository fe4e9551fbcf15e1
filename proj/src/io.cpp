#include "ratebv/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ratebv
{

namespace
{

std::string index_path(const std::string& path, std::size_t i)
{
    return path + "[" + std::to_string(i) + "]";
}

std::string key_path(const std::string& path, const std::string& key)
{
    return path.empty() ? key : path + "." + key;
}

double as_number(const json& v, const std::string& path)
{
    if (!v.is_number())
    {
        throw ConfigError(path, "expected a number");
    }
    const double x = v.get<double>();
    if (!std::isfinite(x))
    {
        throw ConfigError(path, "must be finite");
    }
    return x;
}

Vec as_vector(const json& v, const std::string& path)
{
    if (v.is_number())
    {
        return Vec::Constant(1, as_number(v, path));
    }
    if (!v.is_array() || v.empty())
    {
        throw ConfigError(path, "expected a non-empty array of numbers");
    }
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i)
    {
        out(static_cast<Eigen::Index>(i)) = as_number(v[i], index_path(path, i));
    }
    return out;
}

Mat as_matrix(const json& v, const std::string& path)
{
    if (v.is_number())
    {
        return Mat::Constant(1, 1, as_number(v, path));
    }
    if (!v.is_array() || v.empty())
    {
        throw ConfigError(path, "expected a non-empty array of rows");
    }
    const std::size_t rows = v.size();
    std::size_t cols = 0;
    Mat out;
    for (std::size_t i = 0; i < rows; ++i)
    {
        const Vec row = as_vector(v[i], index_path(path, i));
        if (i == 0)
        {
            cols = static_cast<std::size_t>(row.size());
            out.resize(static_cast<Eigen::Index>(rows), row.size());
        }
        else if (static_cast<std::size_t>(row.size()) != cols)
        {
            throw ConfigError(index_path(path, i), "row length differs from the first row");
        }
        out.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    return out;
}

json vector_json(const Vec& v)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
    {
        out.push_back(v(i));
    }
    return out;
}

json matrix_json(const Mat& m)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
    {
        out.push_back(vector_json(m.row(i).transpose()));
    }
    return out;
}

json optional_vector_json(const std::optional<Vec>& v)
{
    return v ? vector_json(*v) : json(nullptr);
}

/// Typed access to one JSON object of the schema; rejects unknown keys.
class Section
{
public:
    Section(const json& document, std::string path, std::initializer_list<const char*> allowed)
        : doc_(document), path_(std::move(path))
    {
        if (!doc_.is_object())
        {
            throw ConfigError(path_, "expected an object");
        }
        for (const auto& item : doc_.items())
        {
            bool known = false;
            for (const char* key : allowed)
            {
                known = known || item.key() == key;
            }
            if (!known)
            {
                throw ConfigError(key_path(path_, item.key()), "unknown key '" + item.key() + "'");
            }
        }
    }

    [[nodiscard]] bool has(const char* key) const { return doc_.contains(key) && !doc_.at(key).is_null(); }
    [[nodiscard]] std::string path(const char* key) const { return key_path(path_, key); }
    [[nodiscard]] const json& at(const char* key) const
    {
        if (!has(key))
        {
            throw ConfigError(path(key), "required field is missing");
        }
        return doc_.at(key);
    }

    [[nodiscard]] double number(const char* key, double fallback) const
    {
        return has(key) ? as_number(doc_.at(key), path(key)) : fallback;
    }
    [[nodiscard]] double positive(const char* key, double fallback) const
    {
        const double x = number(key, fallback);
        if (!(x > 0.0))
        {
            throw ConfigError(path(key), "must be positive");
        }
        return x;
    }
    [[nodiscard]] double nonnegative(const char* key, double fallback) const
    {
        const double x = number(key, fallback);
        if (!(x >= 0.0))
        {
            throw ConfigError(path(key), "must be nonnegative");
        }
        return x;
    }
    [[nodiscard]] std::size_t count(const char* key, std::size_t fallback) const
    {
        if (!has(key))
        {
            return fallback;
        }
        const json& v = doc_.at(key);
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        {
            throw ConfigError(path(key), "expected a nonnegative integer");
        }
        return v.get<std::size_t>();
    }
    [[nodiscard]] bool flag(const char* key, bool fallback) const
    {
        if (!has(key))
        {
            return fallback;
        }
        if (!doc_.at(key).is_boolean())
        {
            throw ConfigError(path(key), "expected true or false");
        }
        return doc_.at(key).get<bool>();
    }
    [[nodiscard]] std::string text(const char* key, const std::string& fallback,
                                   std::initializer_list<const char*> choices = {}) const
    {
        if (!has(key))
        {
            return fallback;
        }
        if (!doc_.at(key).is_string())
        {
            throw ConfigError(path(key), "expected a string");
        }
        std::string value = doc_.at(key).get<std::string>();
        if (choices.size() > 0)
        {
            bool ok = false;
            std::string list;
            for (const char* c : choices)
            {
                ok = ok || value == c;
                list += list.empty() ? c : std::string(", ") + c;
            }
            if (!ok)
            {
                throw ConfigError(path(key), "'" + value + "' is not one of " + list);
            }
        }
        return value;
    }
    [[nodiscard]] std::optional<Vec> vector(const char* key, Eigen::Index n) const
    {
        if (!has(key))
        {
            return std::nullopt;
        }
        Vec v = as_vector(doc_.at(key), path(key));
        if (v.size() != n)
        {
            throw ConfigError(path(key), "expected " + std::to_string(n) + " entries");
        }
        return v;
    }
    [[nodiscard]] std::optional<Section> section(const char* key, std::initializer_list<const char*> allowed) const
    {
        if (!has(key))
        {
            return std::nullopt;
        }
        return Section(doc_.at(key), path(key), allowed);
    }

private:
    const json& doc_;
    std::string path_;
};

void parse_model(const Section& root, RunConfig& c)
{
    const Section m(root.at("model"), "model", {"A", "V", "kappa", "F", "q"});
    c.model.A = as_matrix(m.at("A"), m.path("A"));
    const Eigen::Index n = c.model.A.rows();
    if (c.model.A.cols() != n)
    {
        throw ConfigError(m.path("A"), "must be square");
    }
    c.model.V = as_matrix(m.at("V"), m.path("V"));
    if (c.model.V.rows() != n || c.model.V.cols() != n)
    {
        throw ConfigError(m.path("V"), "must be " + std::to_string(n) + "x" + std::to_string(n));
    }
    c.model.kappa = as_vector(m.at("kappa"), m.path("kappa"));
    if (c.model.kappa.size() != n)
    {
        throw ConfigError(m.path("kappa"), "expected " + std::to_string(n) + " entries");
    }
    for (Eigen::Index i = 0; i < n; ++i)
    {
        if (!(c.model.kappa(i) > 0.0))
        {
            throw ConfigError(index_path(m.path("kappa"), static_cast<std::size_t>(i)), "must be positive");
        }
    }
    if (m.has("F"))
    {
        const json& f = m.at("F");
        if (f.is_string())
        {
            c.model.F = m.text("F", "zero", {"zero", "double_well"});
            if (c.model.F == "double_well")
            {
                throw ConfigError(m.path("F"), "double_well needs an object with 'beta'");
            }
        }
        else
        {
            const Section fs(f, m.path("F"), {"kind", "beta"});
            c.model.F = fs.text("kind", "zero", {"zero", "double_well"});
            c.model.beta = c.model.F == "double_well" ? fs.positive("beta", 1.0) : fs.nonnegative("beta", 0.0);
        }
    }
    c.model.q = m.nonnegative("q", 0.0);
    try
    {
        (void)c.spec();
    }
    catch (const ArgumentError& e)
    {
        throw ConfigError("model", e.what());
    }
}

void parse_load(const Section& root, RunConfig& c)
{
    const Section l(root.at("load"), "load", {"times", "values"});
    const json& times = l.at("times");
    if (!times.is_array())
    {
        throw ConfigError(l.path("times"), "expected an array of numbers");
    }
    c.load.times.clear();
    for (std::size_t i = 0; i < times.size(); ++i)
    {
        c.load.times.push_back(as_number(times[i], index_path(l.path("times"), i)));
    }
    const json& values = l.at("values");
    if (!values.is_array() || values.size() != times.size())
    {
        throw ConfigError(l.path("values"), "expected one row per node time");
    }
    const Eigen::Index n = c.model.A.rows();
    c.load.values.resize(static_cast<Eigen::Index>(values.size()), n);
    for (std::size_t i = 0; i < values.size(); ++i)
    {
        const Vec row = as_vector(values[i], index_path(l.path("values"), i));
        if (row.size() != n)
        {
            throw ConfigError(index_path(l.path("values"), i), "expected " + std::to_string(n) + " entries");
        }
        c.load.values.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    try
    {
        (void)c.load_path();
    }
    catch (const ArgumentError& e)
    {
        throw ConfigError("load", e.what());
    }
}

}  // namespace

ProblemSpec RunConfig::spec() const
{
    const Nonconvexity f = model.F == "double_well" ? Nonconvexity::double_well(model.beta) : Nonconvexity::zero();
    return ProblemSpec(model.A, model.V, model.kappa, f, model.q);
}

LoadPath RunConfig::load_path() const
{
    return LoadPath(load.times, load.values);
}

ExtractOptions RunConfig::extract_options(int threads) const
{
    ExtractOptions o;
    o.eps_list = reparam.eps_list;
    const double ratio = reparam.tau_ratio;
    o.tau_rule = [ratio](double eps) { return ratio * eps; };
    o.s_samples = reparam.s_samples;
    o.extend_constant = reparam.extend_constant;
    o.threads = threads;
    o.viscous.inner_tolerance = solver.inner_tolerance;
    o.viscous.max_inner_iterations = solver.max_inner_iterations;
    return o;
}

CertifyOptions RunConfig::certify_options() const
{
    CertifyOptions o;
    o.tolerances = ToleranceProfile::named(certify.profile);
    o.gap_threshold = certify.gap_threshold;
    return o;
}

ControlObjective RunConfig::objective() const
{
    ControlObjective o;
    o.z_des = control.z_des ? *control.z_des : z0;
    o.alpha = control.alpha;
    return o;
}

OptimizeOptions RunConfig::optimize_options(std::uint64_t seed, int threads) const
{
    OptimizeOptions o;
    o.method = control.method == "fd_gradient_descent" ? OptimizeOptions::Method::fd_gradient_descent
                                                       : OptimizeOptions::Method::nelder_mead;
    o.nelder_mead.initial_step = control.initial_step;
    o.gradient.h_fd = control.h_fd;
    o.gradient.initial_step = control.step;
    o.budget = control.budget;
    o.fidelity = control.fidelity == "full" ? Fidelity::full(extract_options(1))
                                            : Fidelity::surrogate(control.fidelity_epsilon, control.fidelity_tau);
    o.certify_final = control.certify_final;
    o.final_extraction = extract_options(threads);
    o.certify = certify_options();
    o.seed = seed;
    o.threads = threads;
    return o;
}

RunConfig parse_config(const json& document)
{
    const Section root(document, "",
                       {"model", "load", "z0", "solver", "reparam", "certify", "transient", "control", "output"});
    RunConfig c;
    parse_model(root, c);
    const Eigen::Index n = c.model.A.rows();
    parse_load(root, c);
    c.z0 = root.vector("z0", n).value_or(Vec::Zero(n));

    if (auto s = root.section("solver", {"epsilon", "tau", "delta", "stop_gap", "horizon_cap", "ell_star", "pause_gap",
                                         "inner_tolerance", "max_inner_iterations"}))
    {
        c.solver.epsilon = s->positive("epsilon", c.solver.epsilon);
        c.solver.tau = s->positive("tau", c.solver.tau);
        c.solver.delta = s->nonnegative("delta", c.solver.delta);
        c.solver.stop_gap = s->positive("stop_gap", c.solver.stop_gap);
        c.solver.horizon_cap = s->nonnegative("horizon_cap", c.solver.horizon_cap);
        c.solver.ell_star = s->vector("ell_star", n);
        c.solver.pause_gap = s->nonnegative("pause_gap", c.solver.pause_gap);
        c.solver.inner_tolerance = s->positive("inner_tolerance", c.solver.inner_tolerance);
        const std::size_t iterations = s->count("max_inner_iterations", 20000);
        if (iterations == 0)
        {
            throw ConfigError(s->path("max_inner_iterations"), "must be positive");
        }
        c.solver.max_inner_iterations = static_cast<int>(iterations);
    }
    if (c.solver.tau > c.load.times.back())
    {
        throw ConfigError("solver.tau", "exceeds the horizon T");
    }

    if (auto s = root.section("reparam", {"eps_list", "tau_ratio", "s_samples", "extend_constant"}))
    {
        if (s->has("eps_list"))
        {
            const Vec eps = as_vector(s->at("eps_list"), s->path("eps_list"));
            c.reparam.eps_list.assign(eps.data(), eps.data() + eps.size());
        }
        c.reparam.tau_ratio = s->positive("tau_ratio", c.reparam.tau_ratio);
        c.reparam.s_samples = s->count("s_samples", c.reparam.s_samples);
        c.reparam.extend_constant = s->flag("extend_constant", c.reparam.extend_constant);
        if (c.reparam.s_samples < 3)
        {
            throw ConfigError(s->path("s_samples"), "must be at least 3");
        }
    }
    const auto& eps = c.reparam.eps_list;
    if (eps.size() < 3)
    {
        throw ConfigError("reparam.eps_list", "needs at least three entries");
    }
    for (std::size_t i = 0; i < eps.size(); ++i)
    {
        if (!(eps[i] > 0.0) || (i > 0 && !(eps[i] < eps[i - 1])))
        {
            throw ConfigError(index_path("reparam.eps_list", i), "entries must be positive and strictly decreasing");
        }
    }

    if (auto s = root.section("certify", {"profile", "gap_threshold", "input"}))
    {
        c.certify.profile = s->text("profile", c.certify.profile, {"strict", "standard"});
        c.certify.gap_threshold = s->nonnegative("gap_threshold", c.certify.gap_threshold);
        c.certify.input = s->text("input", c.certify.input);
    }

    if (auto s = root.section("transient", {"z_a", "ell_star", "delta", "tau", "stop_gap", "horizon_cap", "nudge"}))
    {
        c.transient.z_a = s->vector("z_a", n);
        c.transient.ell_star = s->vector("ell_star", n);
        if (c.transient.z_a.has_value() != c.transient.ell_star.has_value())
        {
            throw ConfigError(s->path(c.transient.z_a ? "ell_star" : "z_a"), "z_a and ell_star must be given together");
        }
        c.transient.delta = s->nonnegative("delta", c.transient.delta);
        c.transient.tau = s->positive("tau", c.transient.tau);
        c.transient.stop_gap = s->positive("stop_gap", c.transient.stop_gap);
        c.transient.horizon_cap = s->nonnegative("horizon_cap", c.transient.horizon_cap);
        c.transient.nudge = s->nonnegative("nudge", c.transient.nudge);
    }

    if (auto s = root.section("control", {"z_des", "alpha", "method", "initial_step", "h_fd", "step", "budget",
                                          "fidelity", "fidelity_epsilon", "fidelity_tau", "certify_final"}))
    {
        c.control.z_des = s->vector("z_des", n);
        c.control.alpha = s->positive("alpha", c.control.alpha);
        c.control.method = s->text("method", c.control.method, {"nelder_mead", "fd_gradient_descent"});
        c.control.initial_step = s->nonnegative("initial_step", c.control.initial_step);
        c.control.h_fd = s->positive("h_fd", c.control.h_fd);
        c.control.step = s->positive("step", c.control.step);
        c.control.budget = s->count("budget", c.control.budget);
        c.control.fidelity = s->text("fidelity", c.control.fidelity, {"surrogate", "full"});
        c.control.fidelity_epsilon = s->positive("fidelity_epsilon", c.control.fidelity_epsilon);
        c.control.fidelity_tau = s->positive("fidelity_tau", c.control.fidelity_tau);
        c.control.certify_final = s->flag("certify_final", c.control.certify_final);
    }
    if (!c.control.z_des)
    {
        c.control.z_des = c.z0;
    }

    if (auto s = root.section("output", {"directory", "formats"}))
    {
        c.output.directory = s->text("directory", c.output.directory);
        if (s->has("formats"))
        {
            const json& f = s->at("formats");
            if (!f.is_array())
            {
                throw ConfigError(s->path("formats"), "expected an array of strings");
            }
            c.output.formats.clear();
            for (std::size_t i = 0; i < f.size(); ++i)
            {
                if (!f[i].is_string() || (f[i] != "csv" && f[i] != "json"))
                {
                    throw ConfigError(index_path(s->path("formats"), i), "expected \"csv\" or \"json\"");
                }
                c.output.formats.push_back(f[i].get<std::string>());
            }
        }
    }
    return c;
}

RunConfig parse_config_text(const std::string& text)
{
    json document;
    try
    {
        document = json::parse(text);
    }
    catch (const json::parse_error& e)
    {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return parse_config(document);
}

RunConfig parse_config_file(const std::filesystem::path& path)
{
    return parse_config_text(read_text(path));
}

json to_json(const RunConfig& c)
{
    json out;
    json f;
    f["kind"] = c.model.F;
    f["beta"] = c.model.beta;
    out["model"] = {{"A", matrix_json(c.model.A)},
                    {"V", matrix_json(c.model.V)},
                    {"kappa", vector_json(c.model.kappa)},
                    {"F", f},
                    {"q", c.model.q}};
    out["load"] = {{"times", c.load.times}, {"values", matrix_json(c.load.values)}};
    out["z0"] = vector_json(c.z0);
    out["solver"] = {{"epsilon", c.solver.epsilon},
                     {"tau", c.solver.tau},
                     {"delta", c.solver.delta},
                     {"stop_gap", c.solver.stop_gap},
                     {"horizon_cap", c.solver.horizon_cap},
                     {"ell_star", optional_vector_json(c.solver.ell_star)},
                     {"pause_gap", c.solver.pause_gap},
                     {"inner_tolerance", c.solver.inner_tolerance},
                     {"max_inner_iterations", c.solver.max_inner_iterations}};
    out["reparam"] = {{"eps_list", c.reparam.eps_list},
                      {"tau_ratio", c.reparam.tau_ratio},
                      {"s_samples", c.reparam.s_samples},
                      {"extend_constant", c.reparam.extend_constant}};
    out["certify"] = {{"profile", c.certify.profile},
                      {"gap_threshold", c.certify.gap_threshold},
                      {"input", c.certify.input}};
    out["transient"] = {{"z_a", optional_vector_json(c.transient.z_a)},
                        {"ell_star", optional_vector_json(c.transient.ell_star)},
                        {"delta", c.transient.delta},
                        {"tau", c.transient.tau},
                        {"stop_gap", c.transient.stop_gap},
                        {"horizon_cap", c.transient.horizon_cap},
                        {"nudge", c.transient.nudge}};
    out["control"] = {{"z_des", optional_vector_json(c.control.z_des)},
                      {"alpha", c.control.alpha},
                      {"method", c.control.method},
                      {"initial_step", c.control.initial_step},
                      {"h_fd", c.control.h_fd},
                      {"step", c.control.step},
                      {"budget", c.control.budget},
                      {"fidelity", c.control.fidelity},
                      {"fidelity_epsilon", c.control.fidelity_epsilon},
                      {"fidelity_tau", c.control.fidelity_tau},
                      {"certify_final", c.control.certify_final}};
    out["output"] = {{"directory", c.output.directory}, {"formats", c.output.formats}};
    return out;
}

std::string config_hash(const RunConfig& config)
{
    const std::string text = to_json(config).dump();
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : text)
    {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json to_json(const ProblemSpec& spec)
{
    json f;
    f["kind"] = spec.F().kind() == Nonconvexity::Kind::double_well ? "double_well"
                : spec.F().kind() == Nonconvexity::Kind::zero    ? "zero"
                                                                 : "custom";
    f["beta"] = spec.F().beta();
    return {{"A", matrix_json(spec.A())},
            {"V", matrix_json(spec.V())},
            {"kappa", vector_json(spec.kappa())},
            {"F", f},
            {"q", spec.q()}};
}

json to_json(const LoadPath& load)
{
    const auto t = load.node_times();
    return {{"times", std::vector<double>(t.begin(), t.end())}, {"values", matrix_json(load.node_values())}};
}

LoadPath load_from_json(const json& document)
{
    const Section l(document, "load", {"times", "values"});
    const json& times = l.at("times");
    const json& values = l.at("values");
    if (!times.is_array() || !values.is_array() || times.size() != values.size())
    {
        throw ConfigError("load", "times and values must be arrays of equal length");
    }
    std::vector<double> t;
    for (std::size_t i = 0; i < times.size(); ++i)
    {
        t.push_back(as_number(times[i], index_path("load.times", i)));
    }
    const Mat v = as_matrix(values, "load.values");
    try
    {
        return LoadPath(t, v);
    }
    catch (const ArgumentError& e)
    {
        throw ConfigError("load", e.what());
    }
}

json to_json(const ConvergenceReport& r)
{
    return {{"eps", r.eps},
            {"tau", r.tau},
            {"S", r.S},
            {"distances_affine", r.distances_affine},
            {"distances_constant", r.distances_constant},
            {"S_differences", r.S_differences},
            {"jump_locations", r.jump_locations},
            {"decreasing_affine", r.decreasing_affine},
            {"decreasing_constant", r.decreasing_constant},
            {"convention", r.convention},
            {"cauchy", r.cauchy},
            {"pause_gap", r.pause_gap},
            {"warnings", r.warnings}};
}

json to_json(const CertificateReport& r)
{
    json components = json::array();
    for (const GComponent& c : r.g_components)
    {
        components.push_back({{"first", c.first},
                              {"last", c.last},
                              {"s_start", c.s_start},
                              {"s_end", c.s_end},
                              {"t_variation", c.t_variation},
                              {"t_constant", c.t_constant},
                              {"lambda_positive", c.lambda_positive},
                              {"inclusion_residual", c.inclusion_residual},
                              {"inverse_lambda_sum", c.inverse_lambda_sum}});
    }
    const auto& a = r.apriori;
    return {{"passed", r.passed},
            {"tolerances",
             {{"profile", r.tolerances.name},
              {"normalization", r.tolerances.normalization},
              {"complementarity", r.tolerances.complementarity},
              {"edb", r.tolerances.edb},
              {"inclusion", r.tolerances.inclusion},
              {"plateau", r.tolerances.plateau}}},
            {"gap_threshold", r.gap_threshold},
            {"normalization_defect", r.normalization_defect},
            {"complementarity_defect", r.complementarity_defect},
            {"edb_defect", r.edb_defect},
            {"endpoint_checks", {{"t_hat_S_equals_T", r.endpoint_time}, {"z_hat_0_equals_z0", r.endpoint_state}}},
            {"g_components", components},
            {"inclusion_residual", r.inclusion_residual},
            {"force_bound", {{"sup", r.force_sup}, {"bound_off_G", r.force_bound}, {"ok", r.force_ok}}},
            {"apriori",
             {{"energy_initial", a.energy_initial},
              {"load_l1", a.load_l1},
              {"load_sup", a.load_sup},
              {"z_sup", a.z_sup},
              {"z_bound", a.z_bound},
              {"z_ok", a.z_ok},
              {"S", a.S},
              {"S_bound", a.S_bound},
              {"S_ok", a.S_ok},
              {"S_identity_defect", a.S_identity_defect},
              {"S_identity_ok", a.S_identity_ok}}},
            {"chain_rule_defect", r.chain_rule_defect},
            {"failures", r.failures},
            {"notes", r.notes}};
}

json to_json(const ParamTrajectory& p)
{
    json provenance = json::array();
    for (const Provenance& q : p.provenance)
    {
        provenance.push_back({{"epsilon", q.epsilon}, {"tau", q.tau}, {"S", q.S}, {"paused_steps", q.paused_steps}});
    }
    json z = json::array();
    for (const Vec& v : p.z_hat)
    {
        z.push_back(vector_json(v));
    }
    std::vector<int> in_G(p.g_mask.begin(), p.g_mask.end());
    return {{"S", p.S},
            {"gap_threshold", p.gap_threshold},
            {"provenance", provenance},
            {"t_hat", p.t_hat},
            {"z_hat", z},
            {"gap", p.gap},
            {"lambda", p.lambda},
            {"in_G", in_G}};
}

ParamTrajectory param_from_json(const json& document)
{
    const Section s(document, "trajectory",
                    {"S", "gap_threshold", "provenance", "t_hat", "z_hat", "gap", "lambda", "in_G", "config_hash"});
    ParamTrajectory p;
    p.S = s.positive("S", 0.0);
    p.gap_threshold = s.nonnegative("gap_threshold", 0.0);
    const Vec t = as_vector(s.at("t_hat"), s.path("t_hat"));
    p.t_hat.assign(t.data(), t.data() + t.size());
    const Mat z = as_matrix(s.at("z_hat"), s.path("z_hat"));
    if (z.rows() != t.size())
    {
        throw ConfigError(s.path("z_hat"), "expected one state per node");
    }
    for (Eigen::Index i = 0; i < z.rows(); ++i)
    {
        p.z_hat.push_back(z.row(i).transpose());
    }
    const auto m = static_cast<std::size_t>(t.size());
    auto optional_series = [&](const char* key) {
        std::vector<double> out(m, 0.0);
        if (s.has(key))
        {
            const Vec v = as_vector(s.at(key), s.path(key));
            if (static_cast<std::size_t>(v.size()) != m)
            {
                throw ConfigError(s.path(key), "expected one value per node");
            }
            out.assign(v.data(), v.data() + v.size());
        }
        return out;
    };
    p.gap = optional_series("gap");
    p.lambda = optional_series("lambda");
    const std::vector<double> g = optional_series("in_G");
    p.g_mask.assign(m, 0);
    for (std::size_t j = 0; j < m; ++j)
    {
        p.g_mask[j] = g[j] != 0.0 ? 1 : 0;
    }
    if (s.has("provenance"))
    {
        const json& prov = s.at("provenance");
        if (!prov.is_array())
        {
            throw ConfigError(s.path("provenance"), "expected an array");
        }
        for (std::size_t i = 0; i < prov.size(); ++i)
        {
            const Section q(prov[i], index_path(s.path("provenance"), i), {"epsilon", "tau", "S", "paused_steps"});
            p.provenance.push_back({q.positive("epsilon", 1.0), q.positive("tau", 1.0), q.positive("S", 1.0),
                                    q.count("paused_steps", 0)});
        }
    }
    p.validate();
    return p;
}

std::string viscous_csv(const ViscousTrajectory& traj, const std::string& hash)
{
    const Eigen::Index n = traj.states.front().size();
    std::ostringstream out;
    out << "# config_hash: " << hash << "\n";
    out << "t";
    for (Eigen::Index i = 1; i <= n; ++i)
    {
        out << ",z_" << i;
    }
    for (Eigen::Index i = 1; i <= n; ++i)
    {
        out << ",rate_" << i;
    }
    out << ",energy,diss_R,diss_visc\n";
    char buf[32];
    auto put = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out << buf;
    };
    for (std::size_t k = 0; k < traj.times.size(); ++k)
    {
        put(traj.times[k]);
        for (Eigen::Index i = 0; i < n; ++i)
        {
            out << ',';
            put(traj.states[k](i));
        }
        for (Eigen::Index i = 0; i < n; ++i)
        {
            out << ',';
            put(k == 0 ? 0.0 : traj.rates[k - 1](i));
        }
        out << ',';
        put(traj.energies[k]);
        out << ',';
        put(k == 0 ? 0.0 : traj.diss_R[k - 1]);
        out << ',';
        put(k == 0 ? 0.0 : traj.diss_visc[k - 1]);
        out << '\n';
    }
    return out.str();
}

std::string param_csv(const ParamTrajectory& p, const std::string& hash)
{
    const Eigen::Index n = p.dimension();
    std::ostringstream out;
    out << "# config_hash: " << hash << "\n";
    char line[160];
    for (const Provenance& q : p.provenance)
    {
        std::snprintf(line, sizeof line, "# provenance: epsilon=%.17g tau=%.17g S=%.17g paused_steps=%zu\n", q.epsilon,
                      q.tau, q.S, q.paused_steps);
        out << line;
    }
    std::snprintf(line, sizeof line, "# gap_threshold: %.17g\n", p.gap_threshold);
    out << line;
    out << "s,t_hat";
    for (Eigen::Index i = 1; i <= n; ++i)
    {
        out << ",z_" << i;
    }
    out << ",gap,lambda,in_G\n";
    char buf[32];
    auto put = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out << buf;
    };
    for (std::size_t j = 0; j < p.size(); ++j)
    {
        put(j + 1 == p.size() ? p.S : p.s(j));
        out << ',';
        put(p.t_hat[j]);
        for (Eigen::Index i = 0; i < n; ++i)
        {
            out << ',';
            put(p.z_hat[j](i));
        }
        out << ',';
        put(p.gap[j]);
        out << ',';
        put(p.lambda[j]);
        out << ',' << (p.g_mask[j] != 0 ? 1 : 0) << '\n';
    }
    return out.str();
}

ParamTrajectory param_from_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<Provenance> provenance;
    double gap_threshold = 0.0;
    std::size_t line_number = 0;
    while (std::getline(in, line))
    {
        ++line_number;
        if (!line.empty() && line.back() == '\r')
        {
            line.pop_back();
        }
        if (line.rfind("# provenance:", 0) == 0)
        {
            Provenance q;
            if (std::sscanf(line.c_str(), "# provenance: epsilon=%lf tau=%lf S=%lf paused_steps=%zu", &q.epsilon,
                            &q.tau, &q.S, &q.paused_steps) != 4)
            {
                throw ConfigError("trajectory", "line " + std::to_string(line_number) + ": malformed provenance");
            }
            provenance.push_back(q);
            continue;
        }
        if (line.rfind("# gap_threshold:", 0) == 0)
        {
            gap_threshold = std::strtod(line.c_str() + 16, nullptr);
            continue;
        }
        if (line.empty() || line[0] == '#')
        {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
        {
            cells.push_back(cell);
        }
        if (header.empty())
        {
            header = cells;
            continue;
        }
        if (cells.size() != header.size())
        {
            throw ConfigError("trajectory", "line " + std::to_string(line_number) + " has the wrong number of columns");
        }
        std::vector<double> row;
        for (const std::string& c : cells)
        {
            try
            {
                std::size_t used = 0;
                row.push_back(std::stod(c, &used));
                if (used != c.size())
                {
                    throw std::invalid_argument(c);
                }
            }
            catch (const std::exception&)
            {
                throw ConfigError("trajectory", "line " + std::to_string(line_number) + ": '" + c + "' is not a number");
            }
        }
        rows.push_back(std::move(row));
    }
    if (header.size() < 6 || header[0] != "s" || header[1] != "t_hat" || header[header.size() - 3] != "gap" ||
        header[header.size() - 2] != "lambda" || header.back() != "in_G")
    {
        throw ConfigError("trajectory", "expected columns s, t_hat, z_1..z_n, gap, lambda, in_G");
    }
    if (rows.size() < 2)
    {
        throw ConfigError("trajectory", "needs at least two rows");
    }
    const auto n = static_cast<Eigen::Index>(header.size() - 5);
    ParamTrajectory p;
    p.S = rows.back()[0];
    p.provenance = std::move(provenance);
    p.gap_threshold = gap_threshold;
    const double h = p.S / static_cast<double>(rows.size() - 1);
    for (std::size_t j = 0; j < rows.size(); ++j)
    {
        const auto& r = rows[j];
        if (std::abs(r[0] - static_cast<double>(j) * h) > 1e-9 * (1.0 + p.S))
        {
            throw ConfigError("trajectory", "arc-length column is not a uniform grid (row " + std::to_string(j) + ")");
        }
        p.t_hat.push_back(r[1]);
        Vec z(n);
        for (Eigen::Index i = 0; i < n; ++i)
        {
            z(i) = r[static_cast<std::size_t>(2 + i)];
        }
        p.z_hat.push_back(z);
        p.gap.push_back(r[r.size() - 3]);
        p.lambda.push_back(r[r.size() - 2]);
        p.g_mask.push_back(r.back() != 0.0 ? 1 : 0);
    }
    try
    {
        p.validate();
    }
    catch (const ConsistencyError& e)
    {
        throw ConfigError("trajectory", e.what());
    }
    return p;
}

ParamTrajectory read_param_trajectory(const std::filesystem::path& path)
{
    const std::string text = read_text(path);
    if (path.extension() == ".json")
    {
        json document;
        try
        {
            document = json::parse(text);
        }
        catch (const json::parse_error& e)
        {
            throw ConfigError("trajectory", std::string("malformed JSON: ") + e.what());
        }
        return param_from_json(document);
    }
    return param_from_csv(text);
}

json summary_json(const ViscousTrajectory& traj, const std::vector<double>& edb)
{
    return {{"epsilon", traj.epsilon},
            {"delta", traj.delta},
            {"tau", traj.tau},
            {"steps", traj.steps()},
            {"paused_steps", traj.paused_steps()},
            {"final_time", traj.times.back()},
            {"final_state", vector_json(traj.final_state())},
            {"converged", traj.converged},
            {"terminal_gap", traj.terminal_gap},
            {"edb_residual_max", max_abs(edb)},
            {"edb_residual_final", edb.empty() ? 0.0 : edb.back()},
            {"warnings", traj.warnings}};
}

json to_json(const ControlResult& r)
{
    json history = json::array();
    for (const HistoryEntry& h : r.history)
    {
        history.push_back({{"iteration", h.iteration}, {"evaluations", h.evaluations}, {"J", h.J}});
    }
    return {{"best_J", r.best_J},
            {"best_j", r.best_j},
            {"best_h1", r.best_h1},
            {"J_init", r.J_init},
            {"best_load", to_json(r.best_load)},
            {"history", history},
            {"evaluations", r.evaluations},
            {"failed_evaluations", r.failed_evaluations},
            {"witness_checks", r.witness_checks},
            {"certified", r.certified},
            {"final_J", r.final_J},
            {"final_j", r.final_j},
            {"certificate", r.certified || !r.certificate.failures.empty() ? to_json(r.certificate) : json(nullptr)},
            {"warnings", r.warnings}};
}

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw FileError("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
    {
        throw FileError("error while reading " + path.string());
    }
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text))
    {
        throw FileError("cannot write " + path.string());
    }
}

}  // namespace ratebv
