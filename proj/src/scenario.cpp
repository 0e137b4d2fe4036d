#include "dichotomy/scenario.hpp"

#include "dichotomy/lyapunov_norms.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace dichotomy {

using json = nlohmann::ordered_json;

std::string to_string(Task task)
{
    switch (task) {
    case Task::Axioms: return "axioms";
    case Task::Evolve: return "evolve";
    case Task::Solve: return "solve";
    case Task::Check: return "check";
    case Task::Reconstruct: return "reconstruct";
    case Task::Perturb: return "perturb";
    case Task::Full: return "full";
    }
    return "unknown";
}

std::optional<Task> parse_task(const std::string& text)
{
    for (Task t : {Task::Axioms, Task::Evolve, Task::Solve, Task::Check, Task::Reconstruct, Task::Perturb, Task::Full})
        if (to_string(t) == text)
            return t;
    return std::nullopt;
}

ConfigError::ConfigError(const std::string& source, int line, const std::string& field, const std::string& message)
    : InvalidInput(source + ":" + std::to_string(line) + ": field '" + field + "': " + message), line_(line),
      field_(field)
{
}

namespace {

// Field access with diagnostics that point at the line of the offending key.
class Reader {
public:
    Reader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

    [[noreturn]] void fail(const std::string& field, const std::string& message) const
    {
        throw ConfigError(source_, line_of(field), field, message);
    }

    int line_of(const std::string& field) const
    {
        // Walk the dotted path, searching each key after the previous one.
        std::size_t pos = 0;
        std::size_t found = std::string::npos;
        std::stringstream ss(field);
        std::string part;
        while (std::getline(ss, part, '.')) {
            const auto bracket = part.find('[');
            if (bracket != std::string::npos)
                part = part.substr(0, bracket);
            const auto at = text_.find("\"" + part + "\"", pos);
            if (at == std::string::npos)
                break;
            found = at;
            pos = at + 1;
        }
        if (found == std::string::npos)
            return 1;
        return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(found), '\n'));
    }

    const json* find(const json& obj, const std::string& key) const
    {
        const auto it = obj.find(key);
        return it == obj.end() ? nullptr : &*it;
    }

    double number(const json& obj, const std::string& key, const std::string& field, std::optional<double> fallback) const
    {
        const json* v = find(obj, key);
        if (!v) {
            if (fallback)
                return *fallback;
            fail(field, "required number is missing");
        }
        if (!v->is_number())
            fail(field, "expected a number");
        const double d = v->get<double>();
        if (!std::isfinite(d))
            fail(field, "must be finite");
        return d;
    }

    double positive(const json& obj, const std::string& key, const std::string& field, std::optional<double> fallback) const
    {
        const double d = number(obj, key, field, fallback);
        if (!(d > 0.0))
            fail(field, "must be positive");
        return d;
    }

    std::string string(const json& obj, const std::string& key, const std::string& field,
                       std::optional<std::string> fallback) const
    {
        const json* v = find(obj, key);
        if (!v) {
            if (fallback)
                return *fallback;
            fail(field, "required string is missing");
        }
        if (!v->is_string())
            fail(field, "expected a string");
        return v->get<std::string>();
    }

    Exponent exponent(const json& obj, const std::string& key, const std::string& field) const
    {
        const json* v = find(obj, key);
        if (!v)
            fail(field, "required exponent is missing");
        try {
            if (v->is_string())
                return parse_exponent(v->get<std::string>());
            if (v->is_number())
                return Exponent(v->get<double>());
        } catch (const InvalidExponent& e) {
            fail(field, e.what());
        }
        fail(field, "expected a number >= 1 or \"inf\"");
    }

    std::vector<double> numbers(const json& v, const std::string& field) const
    {
        if (!v.is_array())
            fail(field, "expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number())
                fail(field, "expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    Matrix matrix(const json& v, const std::string& field, int n) const
    {
        if (!v.is_array() || static_cast<int>(v.size()) != n)
            fail(field, "expected a " + std::to_string(n) + "x" + std::to_string(n) + " array of rows");
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) {
            const auto row = numbers(v[static_cast<std::size_t>(i)], field);
            if (static_cast<int>(row.size()) != n)
                fail(field, "expected a " + std::to_string(n) + "x" + std::to_string(n) + " array of rows");
            for (int j = 0; j < n; ++j)
                m(i, j) = row[static_cast<std::size_t>(j)];
        }
        if (!m.allFinite())
            fail(field, "entries must be finite");
        return m;
    }

    void known_keys(const json& obj, const std::string& prefix, const std::set<std::string>& keys) const
    {
        for (const auto& [k, v] : obj.items()) {
            (void)v;
            if (!keys.count(k))
                fail(prefix.empty() ? k : prefix + "." + k, "unknown field");
        }
    }

    const std::string& source() const { return source_; }

private:
    const std::string& text_;
    std::string source_;
};

// Entry of a time-varying coefficient: a + b sin(omega t) + c cos(omega t).
struct Entry {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double omega = 1.0;
    double operator()(double t) const { return a + b * std::sin(omega * t) + c * std::cos(omega * t); }
};

EvolutionFamily build_system(const Reader& r, const json& sys)
{
    if (!sys.is_object())
        r.fail("system", "expected an object");
    const std::string kind = r.string(sys, "kind", "system.kind", std::nullopt);
    if (kind == "scalar") {
        r.known_keys(sys, "system", {"kind", "a"});
        return EvolutionFamily::constant_scalar(r.number(sys, "a", "system.a", std::nullopt));
    }
    if (kind == "diagonal") {
        r.known_keys(sys, "system", {"kind", "rates"});
        const json* rates = r.find(sys, "rates");
        if (!rates)
            r.fail("system.rates", "required array is missing");
        const auto v = r.numbers(*rates, "system.rates");
        if (v.empty())
            r.fail("system.rates", "needs at least one rate");
        return EvolutionFamily::diagonal(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    if (kind == "matrix") {
        r.known_keys(sys, "system", {"kind", "A"});
        const json* a = r.find(sys, "A");
        if (!a || !a->is_array() || a->empty())
            r.fail("system.A", "required square matrix is missing");
        return EvolutionFamily::constant_matrix(r.matrix(*a, "system.A", static_cast<int>(a->size())));
    }
    if (kind == "nonuniform_scalar") {
        r.known_keys(sys, "system", {"kind", "rate"});
        return EvolutionFamily::nonuniform_scalar(r.positive(sys, "rate", "system.rate", 3.0));
    }
    if (kind == "time_varying") {
        r.known_keys(sys, "system", {"kind", "A", "h_int"});
        const json* a = r.find(sys, "A");
        if (!a || !a->is_array() || a->empty())
            r.fail("system.A", "required square array of entries is missing");
        const int n = static_cast<int>(a->size());
        std::vector<Entry> entries;
        for (const auto& row : *a) {
            if (!row.is_array() || static_cast<int>(row.size()) != n)
                r.fail("system.A", "expected a square array of entries");
            for (const auto& e : row) {
                Entry en;
                if (e.is_number()) {
                    en.a = e.get<double>();
                } else if (e.is_object()) {
                    r.known_keys(e, "system.A", {"a", "b", "c", "omega"});
                    en.a = r.number(e, "a", "system.A.a", 0.0);
                    en.b = r.number(e, "b", "system.A.b", 0.0);
                    en.c = r.number(e, "c", "system.A.c", 0.0);
                    en.omega = r.number(e, "omega", "system.A.omega", 1.0);
                } else {
                    r.fail("system.A", "entries are numbers or {a, b, c, omega} objects");
                }
                entries.push_back(en);
            }
        }
        const double h_int = r.positive(sys, "h_int", "system.h_int", 1e-3);
        auto coefficient = [entries, n](double t) {
            Matrix m(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    m(i, j) = entries[static_cast<std::size_t>(i * n + j)](t);
            return m;
        };
        return EvolutionFamily::time_varying(n, coefficient, h_int, "time-varying");
    }
    r.fail("system.kind", "unknown system kind '" + kind +
                              "' (expected scalar, diagonal, matrix, time_varying or nonuniform_scalar)");
}

}  // namespace

AdmissibilityConfig Scenario::admissibility_config() const
{
    AdmissibilityConfig c;
    c.half_width = half_width;
    c.h = h;
    c.sweep = kernel_sweep;
    c.solver = solver;
    c.residual_tolerance = tolerances.residual;
    c.kernel_factor = tolerances.kernel;
    c.random_probes = random_probes;
    c.seed = seed;
    return c;
}

ReconstructConfig Scenario::reconstruct_config() const
{
    ReconstructConfig c;
    c.admissibility = admissibility_config();
    c.interior_margin = interior_margin;
    c.node_stride = node_stride;
    return c;
}

GridFunction Scenario::sample_input() const
{
    const Grid g = grid();
    const int n = family->dimension();
    const auto norms = family->norms_ptr();
    if (!input)
        return GridFunction::zeros(g, norms);
    const InputSpec in = *input;
    if (in.kind == "pulse")
        return GridFunction::sample_sided(g, norms, [in](double t, Side side) -> Vector {
            return indicator(in.from, in.to, t, side) * in.direction;
        });
    if (in.kind == "bump")
        return GridFunction::sample(g, norms, [in](double t) -> Vector {
            const double u = (t - in.center) / in.width;
            return std::exp(-u * u) * in.direction;
        });
    if (in.kind == "constant")
        return GridFunction::sample(g, norms, [in](double) -> Vector { return in.direction; });
    (void)n;
    return GridFunction::zeros(g, norms);
}

Scenario parse_scenario(const std::string& text, const std::string& source)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto upto = std::min<std::size_t>(e.byte, text.size());
        const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
        throw ConfigError(source, line, "<document>", std::string("unparseable JSON: ") + e.what());
    }
    const Reader r(text, source);
    if (!root.is_object())
        r.fail("<document>", "top level must be an object");
    r.known_keys(root, "",
                 {"name", "description", "task", "system", "norms", "window", "h", "p", "q", "tolerances", "kernel_sweep",
                  "solver", "probes", "reconstruct", "input", "expect", "certificate", "perturbation", "lyapunov",
                  "seed"});

    Scenario s;
    s.source = source;
    s.name = r.string(root, "name", "name", std::nullopt);
    const std::string task = r.string(root, "task", "task", std::string("full"));
    if (auto t = parse_task(task))
        s.task = *t;
    else
        r.fail("task", "unknown task '" + task + "' (expected axioms, evolve, solve, check, reconstruct, perturb or full)");

    const json* sys = r.find(root, "system");
    if (!sys)
        r.fail("system", "required object is missing");
    s.system_json = *sys;
    EvolutionFamily family = [&] {
        try {
            return build_system(r, *sys);
        } catch (const ConfigError&) {
            throw;
        } catch (const InvalidInput& e) {
            r.fail("system", e.what());
        }
    }();
    const int n = family.dimension();

    s.half_width = r.positive(root, "window", "window", std::nullopt);
    s.h = r.positive(root, "h", "h", 0.01);
    try {
        (void)Grid::window(s.half_width, s.h);
    } catch (const InvalidInput& e) {
        r.fail("h", e.what());
    }
    s.p = r.exponent(root, "p", "p");
    s.q = r.exponent(root, "q", "q");
    if (s.p < s.q)
        r.fail("p", "p >= q is required (got p = " + s.p.to_string() + ", q = " + s.q.to_string() + ")");

    if (const json* tol = r.find(root, "tolerances")) {
        r.known_keys(*tol, "tolerances", {"cocycle", "residual", "kernel", "projection"});
        s.tolerances.cocycle = r.positive(*tol, "cocycle", "tolerances.cocycle", s.tolerances.cocycle);
        s.tolerances.residual = r.positive(*tol, "residual", "tolerances.residual", s.tolerances.residual);
        s.tolerances.kernel = r.positive(*tol, "kernel", "tolerances.kernel", s.tolerances.kernel);
        s.tolerances.projection = r.positive(*tol, "projection", "tolerances.projection", s.tolerances.projection);
    }
    if (const json* sw = r.find(root, "kernel_sweep")) {
        s.kernel_sweep = r.numbers(*sw, "kernel_sweep");
        if (s.kernel_sweep.size() < 2)
            r.fail("kernel_sweep", "needs at least two window half-widths");
        for (double w : s.kernel_sweep) {
            try {
                (void)Grid::window(w, s.h);
            } catch (const InvalidInput& e) {
                r.fail("kernel_sweep", e.what());
            }
        }
    }
    if (const json* so = r.find(root, "solver")) {
        r.known_keys(*so, "solver", {"boundary", "bootstrap_horizon", "dead_band"});
        try {
            s.solver.mode = parse_boundary_mode(r.string(*so, "boundary", "solver.boundary", std::string("projected")));
        } catch (const InvalidInput& e) {
            r.fail("solver.boundary", e.what());
        }
        s.solver.bootstrap_horizon = r.positive(*so, "bootstrap_horizon", "solver.bootstrap_horizon", 10.0);
        s.solver.dead_band = r.positive(*so, "dead_band", "solver.dead_band", 1e-3);
    }
    if (const json* pr = r.find(root, "probes")) {
        if (!pr->is_number_integer() || pr->get<long long>() < 0)
            r.fail("probes", "expected a nonnegative integer");
        s.random_probes = static_cast<int>(pr->get<long long>());
    }
    if (const json* rc = r.find(root, "reconstruct")) {
        r.known_keys(*rc, "reconstruct", {"interior_margin", "node_stride"});
        s.interior_margin = r.positive(*rc, "interior_margin", "reconstruct.interior_margin", 5.0);
        const double stride = r.positive(*rc, "node_stride", "reconstruct.node_stride", 10.0);
        if (stride != std::floor(stride))
            r.fail("reconstruct.node_stride", "expected a positive integer");
        s.node_stride = static_cast<std::size_t>(stride);
    }
    if (const json* sd = r.find(root, "seed")) {
        if (!sd->is_number_unsigned())
            r.fail("seed", "expected a nonnegative integer");
        s.seed = sd->get<std::uint64_t>();
    }

    if (const json* in = r.find(root, "input")) {
        r.known_keys(*in, "input", {"kind", "from", "to", "center", "width", "direction"});
        InputSpec spec;
        spec.kind = r.string(*in, "kind", "input.kind", std::string("pulse"));
        if (spec.kind != "pulse" && spec.kind != "bump" && spec.kind != "constant")
            r.fail("input.kind", "unknown input kind '" + spec.kind + "' (expected pulse, bump or constant)");
        spec.direction = Vector::Ones(n);
        if (const json* d = r.find(*in, "direction")) {
            const auto v = r.numbers(*d, "input.direction");
            if (static_cast<int>(v.size()) != n)
                r.fail("input.direction", "expected " + std::to_string(n) + " components");
            spec.direction = Eigen::Map<const Vector>(v.data(), n);
        }
        spec.from = r.number(*in, "from", "input.from", 0.0);
        spec.to = r.number(*in, "to", "input.to", 1.0);
        spec.center = r.number(*in, "center", "input.center", 0.0);
        spec.width = r.positive(*in, "width", "input.width", 1.0);
        if (spec.kind == "pulse") {
            if (!(spec.to > spec.from))
                r.fail("input.to", "pulse needs to > from");
            const Grid g = Grid::window(s.half_width, s.h);
            if (!g.node_index(spec.from))
                r.fail("input.from", "jump location must be a grid node (h must divide it)");
            if (!g.node_index(spec.to))
                r.fail("input.to", "jump location must be a grid node (h must divide it)");
        }
        s.input = spec;
    }

    if (const json* ex = r.find(root, "expect")) {
        std::string v;
        if (ex->is_string()) {
            v = ex->get<std::string>();
        } else if (ex->is_object()) {
            r.known_keys(*ex, "expect", {"verdict"});
            v = r.string(*ex, "verdict", "expect.verdict", std::nullopt);
        } else {
            r.fail("expect", "expected a verdict string or {\"verdict\": ...}");
        }
        if (v == "admissible")
            s.expect = Verdict::Admissible;
        else if (v == "not-admissible")
            s.expect = Verdict::NotAdmissible;
        else if (v == "inconclusive")
            s.expect = Verdict::Inconclusive;
        else
            r.fail("expect.verdict", "unknown verdict '" + v + "' (expected admissible, not-admissible or inconclusive)");
    }

    if (const json* c = r.find(root, "certificate")) {
        r.known_keys(*c, "certificate", {"projection", "alpha", "beta", "D"});
        AnalyticCertificate ac;
        const json* pm = r.find(*c, "projection");
        if (!pm)
            r.fail("certificate.projection", "required matrix is missing");
        ac.projection = r.matrix(*pm, "certificate.projection", n);
        if (spectral_norm(ac.projection * ac.projection - ac.projection) > 1e-10)
            r.fail("certificate.projection", "must be idempotent");
        ac.alpha = r.positive(*c, "alpha", "certificate.alpha", std::nullopt);
        ac.beta = r.positive(*c, "beta", "certificate.beta", std::nullopt);
        ac.D = r.number(*c, "D", "certificate.D", std::nullopt);
        if (ac.D < 1.0)
            r.fail("certificate.D", "must be >= 1");
        s.certificate = ac;
    }

    if (const json* ly = r.find(root, "lyapunov")) {
        r.known_keys(*ly, "lyapunov", {"margin", "horizon", "ds"});
        s.lyapunov.margin = r.positive(*ly, "margin", "lyapunov.margin", 0.5);
        s.lyapunov.horizon = r.positive(*ly, "horizon", "lyapunov.horizon", 40.0);
        s.lyapunov.ds = r.positive(*ly, "ds", "lyapunov.ds", 0.01);
    }

    if (const json* pt = r.find(root, "perturbation")) {
        r.known_keys(*pt, "perturbation", {"magnitudes", "phi", "direction"});
        PerturbationConfig pc;
        const json* mags = r.find(*pt, "magnitudes");
        if (!mags)
            r.fail("perturbation.magnitudes", "required array is missing");
        pc.magnitudes = r.numbers(*mags, "perturbation.magnitudes");
        if (pc.magnitudes.empty())
            r.fail("perturbation.magnitudes", "needs at least one magnitude");
        for (double m : pc.magnitudes)
            if (!(m >= 0.0) || !std::isfinite(m))
                r.fail("perturbation.magnitudes", "magnitudes must be finite and nonnegative");
        if (const json* phi = r.find(*pt, "phi")) {
            r.known_keys(*phi, "perturbation.phi", {"kind", "rate"});
            pc.phi = r.string(*phi, "kind", "perturbation.phi.kind", std::string("exp_abs"));
            if (pc.phi != "exp_abs" && pc.phi != "gaussian")
                r.fail("perturbation.phi.kind", "unknown weight '" + pc.phi + "' (expected exp_abs or gaussian)");
            pc.phi_rate = r.positive(*phi, "rate", "perturbation.phi.rate", 1.0);
        }
        pc.direction = Matrix::Identity(n, n);
        if (const json* d = r.find(*pt, "direction"))
            pc.direction = r.matrix(*d, "perturbation.direction", n);
        if (spectral_norm(pc.direction) > 1.0 + 1e-12)
            r.fail("perturbation.direction", "must satisfy ||B0|| <= 1");
        s.perturbation = pc;
    }

    // Norm family, last: adapted norms need the analytic certificate.
    json norms = json{{"kind", "constant"}};
    if (const json* nm = r.find(root, "norms"))
        norms = *nm;
    s.norms_json = norms;
    if (!norms.is_object())
        r.fail("norms", "expected an object");
    const std::string nkind = r.string(norms, "kind", "norms.kind", std::string("constant"));
    NormFamilyPtr nf;
    if (nkind == "constant") {
        r.known_keys(norms, "norms", {"kind"});
        nf = std::make_shared<const NormFamily>(NormFamily::constant(n));
    } else if (nkind == "exp_weight") {
        r.known_keys(norms, "norms", {"kind", "rate", "scale"});
        const double rate = r.number(norms, "rate", "norms.rate", std::nullopt);
        const double scale = r.number(norms, "scale", "norms.scale", 1.0);
        if (rate < 0.0)
            r.fail("norms.rate", "must be nonnegative");
        if (scale < 1.0)
            r.fail("norms.scale", "must be >= 1 (lower envelope)");
        nf = std::make_shared<const NormFamily>(NormFamily::exponential_weight(n, rate, scale));
    } else if (nkind == "diag_exp") {
        r.known_keys(norms, "norms", {"kind", "rates"});
        const json* rates = r.find(norms, "rates");
        if (!rates)
            r.fail("norms.rates", "required array is missing");
        const auto v = r.numbers(*rates, "norms.rates");
        if (static_cast<int>(v.size()) != n)
            r.fail("norms.rates", "expected " + std::to_string(n) + " rates");
        for (double x : v)
            if (x < 0.0)
                r.fail("norms.rates", "rates must be nonnegative");
        nf = std::make_shared<const NormFamily>(NormFamily::diagonal_exponential(v));
    } else if (nkind == "adapted") {
        r.known_keys(norms, "norms", {"kind"});
        if (!s.certificate)
            r.fail("norms.kind", "adapted norms need an analytic certificate");
        if (s.lyapunov.margin >= std::min(s.certificate->alpha, s.certificate->beta))
            r.fail("lyapunov.margin", "must lie strictly inside (0, min(alpha, beta))");
        const auto base = std::make_shared<const EvolutionFamily>(family);
        const Grid g = Grid::window(s.half_width, s.h);
        const DichotomyCertificate cert = make_constant_certificate(base, g, s.certificate->projection,
                                                                    s.certificate->alpha, s.certificate->beta,
                                                                    s.certificate->D);
        LyapunovOptions lo;
        lo.rate_margin = s.lyapunov.margin;
        lo.horizon = s.lyapunov.horizon;
        lo.ds = s.lyapunov.ds;
        nf = build_lyapunov_norms(family, cert, lo).norms;
    } else {
        r.fail("norms.kind", "unknown norm kind '" + nkind + "' (expected constant, exp_weight, diag_exp or adapted)");
    }
    s.family = std::make_shared<const EvolutionFamily>(family.with_norms(nf));
    return s;
}

Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError(path.string(), 1, "<document>", "cannot open the configuration file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path.string());
}

void validate_for_task(const Scenario& scenario, Task task)
{
    if ((task == Task::Reconstruct || task == Task::Perturb) && is_excluded_pair(scenario.p, scenario.q))
        throw ConfigError(scenario.source, 1, "p", "task " + to_string(task) + " forbids (p, q) = (inf, 1)");
    if (task == Task::Perturb && !scenario.perturbation)
        throw ConfigError(scenario.source, 1, "perturbation", "task perturb needs a perturbation block");
}

}  // namespace dichotomy
