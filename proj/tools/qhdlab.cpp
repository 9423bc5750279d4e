// qhdlab: batch driver for the solvers and harnesses.
//
//   qhdlab run --config exp.ini [--out DIR] [--seed S] [--override-cfl]
//   qhdlab sweep --config sweep.ini [--jobs N]
//   qhdlab verify <suite> [--out DIR]
//   qhdlab list-experiments
//
// Exit codes: 0 ok, 1 crash, 2 validation, 3 breakdown, 4 assertion failure, 5 partial sweep.

#include <CLI11.hpp>
#include <json.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <boost/version.hpp>

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qhdlab/asymptotics.hpp"
#include "qhdlab/conserved.hpp"
#include "qhdlab/data.hpp"
#include "qhdlab/hydro.hpp"
#include "qhdlab/madelung.hpp"
#include "qhdlab/schrodinger.hpp"
#include "qhdlab/suites.hpp"
#include "qhdlab/weakqhd.hpp"

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using json = nlohmann::ordered_json;
using namespace qhdlab;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit : int { ok = 0, crash = 1, validation = 2, breakdown = 3, assertion = 4, partial = 5 };

const std::vector<std::string> kKinds = {"nls", "euler", "qhd", "korteweg", "linear", "kdv"};
const std::vector<std::string> kHarnesses = {"euler_limit", "wave_approx", "dispersion", "transonic", "weakqhd"};

// Every key a config may contain, by section.
const std::map<std::string, std::set<std::string>> kSchema = {
    {"experiment", {"kind", "name"}},
    {"grid", {"dim", "n", "length"}},
    {"physics", {"eps", "law", "sigma", "kappa", "background", "direction"}},
    {"data",
     {"family", "amplitude", "width", "k0", "chirp", "center", "separation", "phase_amplitude", "velocity"}},
    {"time", {"T", "dt", "observe_every", "snapshot_every"}},
    {"tolerances",
     {"max_gradient", "min_density", "density_floor", "vacuum_threshold", "continuity", "momentum", "curl",
      "energy"}},
    {"harness", {"amplitudes", "times", "ks", "normalization", "tau_end"}},
    {"output", {"dir"}},
    {"run", {"seed"}},
    {"sweep", {}},  // any dotted key
};

struct Flags {
    std::string config;
    std::string out;
    int jobs = 1;
    std::optional<unsigned> seed;
    bool override_cfl = false;
};

// ---------------------------------------------------------------------------
// Config

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

double parse_double(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("'" + key + "' expects a number, got '" + s + "'");
    }
}

int parse_int(const std::string& key, const std::string& s) {
    const double v = parse_double(key, s);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ValidationError("'" + key + "' expects an integer");
    return static_cast<int>(v);
}

std::vector<double> parse_doubles(const std::string& key, const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) out.push_back(parse_double(key, item));
    if (out.empty()) throw ValidationError("'" + key + "' is an empty list");
    return out;
}

pt::ptree read_ini(const std::string& path) {
    if (path.empty()) throw ValidationError("--config is required");
    if (!fs::exists(path)) throw ValidationError("config file not found: " + path);
    pt::ptree tree;
    try {
        pt::read_ini(path, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ValidationError(std::string("config parse error: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
        const auto it = kSchema.find(section);
        if (it == kSchema.end()) throw ValidationError("unknown config section [" + section + "]");
        if (!body.data().empty()) throw ValidationError("key '" + section + "' outside any section");
        if (section == "sweep") continue;
        for (const auto& [key, v] : body)
            if (!it->second.count(key)) throw ValidationError("unknown key '" + key + "' in [" + section + "]");
    }
    return tree;
}

json ini_to_json(const pt::ptree& tree) {
    json j = json::object();
    for (const auto& [section, body] : tree) {
        json s = json::object();
        for (const auto& [key, v] : body) s[key] = v.data();
        j[section] = s;
    }
    return j;
}

struct RunConfig {
    std::string kind;
    std::string harness;  // set when kind == "harness:<name>"
    std::string name = "experiment";
    int dim = 1;
    int n = 256;
    double length = 20.0;
    std::vector<double> eps = {1.0};
    std::string law = "cubic";
    double sigma = 1.0;
    std::string kappa = "quantum";
    double background = 0.0;
    std::string direction = "left";
    std::string family = "constant";
    DataParams data;
    double T = 1.0;
    double dt = 1e-3;
    int observe_every = 1;
    int snapshot_every = 0;
    double max_gradient = 50.0;
    double min_density = -1.0;
    double density_floor = 1e-4;
    double vacuum_threshold = 1e-8;
    WeakTolerances weak_tol;
    std::vector<double> amplitudes, times, ks;
    std::string normalization = "semiclassical";
    double tau_end = 0.5;
    unsigned seed = 0;
    bool override_cfl = false;
    json echo;

    NonlinearityLaw nonlinearity() const { return NonlinearityLaw::from_name(law, sigma); }
    CapillarityLaw capillarity() const {
        if (kappa == "quantum") return CapillarityLaw::quantum(eps.front());
        const double k = parse_double("physics.kappa", kappa);
        if (!(k > 0.0)) throw ValidationError("physics.kappa must be positive or 'quantum'");
        return CapillarityLaw::constant(k);
    }
    double single_eps() const {
        if (eps.size() != 1) throw ValidationError("experiment '" + kind + "' takes a single eps");
        return eps.front();
    }
};

RunConfig parse_config(const pt::ptree& tree, const Flags& flags) {
    RunConfig c;
    auto get = [&](const std::string& path) -> std::optional<std::string> {
        if (auto v = tree.get_optional<std::string>(path)) return *v;
        return std::nullopt;
    };
    auto num = [&](const std::string& path, double& dst) {
        if (auto v = get(path)) dst = parse_double(path, *v);
    };
    auto integer = [&](const std::string& path, int& dst) {
        if (auto v = get(path)) dst = parse_int(path, *v);
    };
    auto text = [&](const std::string& path, std::string& dst) {
        if (auto v = get(path)) dst = *v;
    };
    auto list = [&](const std::string& path, std::vector<double>& dst) {
        if (auto v = get(path)) dst = parse_doubles(path, *v);
    };

    const auto kind = get("experiment.kind");
    if (!kind) throw ValidationError("[experiment] kind is required");
    c.kind = *kind;
    if (c.kind.rfind("harness:", 0) == 0) {
        c.harness = c.kind.substr(8);
        if (std::find(kHarnesses.begin(), kHarnesses.end(), c.harness) == kHarnesses.end())
            throw ValidationError("unknown harness '" + c.harness + "'");
    } else if (std::find(kKinds.begin(), kKinds.end(), c.kind) == kKinds.end()) {
        throw ValidationError("unknown experiment kind '" + c.kind + "'");
    }
    text("experiment.name", c.name);
    integer("grid.dim", c.dim);
    integer("grid.n", c.n);
    num("grid.length", c.length);
    list("physics.eps", c.eps);
    text("physics.law", c.law);
    num("physics.sigma", c.sigma);
    text("physics.kappa", c.kappa);
    num("physics.background", c.background);
    text("physics.direction", c.direction);
    text("data.family", c.family);
    num("data.amplitude", c.data.amplitude);
    num("data.width", c.data.width);
    num("data.k0", c.data.k0);
    num("data.chirp", c.data.chirp);
    num("data.center", c.data.center);
    num("data.separation", c.data.separation);
    num("data.phase_amplitude", c.data.phase_amplitude);
    num("data.velocity", c.data.velocity);
    num("time.T", c.T);
    num("time.dt", c.dt);
    integer("time.observe_every", c.observe_every);
    integer("time.snapshot_every", c.snapshot_every);
    num("tolerances.max_gradient", c.max_gradient);
    num("tolerances.min_density", c.min_density);
    num("tolerances.density_floor", c.density_floor);
    num("tolerances.vacuum_threshold", c.vacuum_threshold);
    num("tolerances.continuity", c.weak_tol.continuity);
    num("tolerances.momentum", c.weak_tol.momentum);
    num("tolerances.curl", c.weak_tol.curl);
    num("tolerances.energy", c.weak_tol.energy);
    list("harness.amplitudes", c.amplitudes);
    list("harness.times", c.times);
    list("harness.ks", c.ks);
    text("harness.normalization", c.normalization);
    num("harness.tau_end", c.tau_end);
    if (auto v = get("run.seed")) c.seed = static_cast<unsigned>(parse_int("run.seed", *v));
    if (flags.seed) c.seed = *flags.seed;
    c.override_cfl = flags.override_cfl;

    for (double e : c.eps)
        if (!(e > 0.0)) throw ValidationError("physics.eps must be positive");
    if (!(c.T > 0.0)) throw ValidationError("time.T must be positive");
    if (!(c.dt > 0.0)) throw ValidationError("time.dt must be positive");
    if (c.observe_every < 1) throw ValidationError("time.observe_every must be >= 1");
    if (c.snapshot_every < 0) throw ValidationError("time.snapshot_every must be >= 0");
    if (c.direction != "left" && c.direction != "right")
        throw ValidationError("physics.direction must be 'left' or 'right'");
    // Throws on unknown law names or non-positive sigma.
    const NonlinearityLaw law = c.nonlinearity();
    if (c.harness == "weakqhd") validate_weak_law(law, c.dim);
    if (c.kind == "korteweg") c.capillarity();

    c.echo = ini_to_json(tree);
    return c;
}

json config_json(const RunConfig& c) {
    json d = {{"amplitude", c.data.amplitude}, {"width", c.data.width},   {"k0", c.data.k0},
              {"chirp", c.data.chirp},         {"center", c.data.center}, {"separation", c.data.separation},
              {"phase_amplitude", c.data.phase_amplitude}, {"velocity", c.data.velocity}};
    return {{"kind", c.kind},
            {"name", c.name},
            {"grid", {{"dim", c.dim}, {"n", c.n}, {"length", c.length}}},
            {"physics",
             {{"eps", c.eps},
              {"law", c.law},
              {"sigma", c.sigma},
              {"kappa", c.kappa},
              {"background", c.background},
              {"direction", c.direction}}},
            {"data", {{"family", c.family}, {"params", d}}},
            {"time", {{"T", c.T}, {"dt", c.dt}, {"observe_every", c.observe_every},
                      {"snapshot_every", c.snapshot_every}}},
            {"tolerances",
             {{"max_gradient", c.max_gradient},
              {"min_density", c.min_density},
              {"density_floor", c.density_floor},
              {"vacuum_threshold", c.vacuum_threshold},
              {"continuity", c.weak_tol.continuity},
              {"momentum", c.weak_tol.momentum},
              {"curl", c.weak_tol.curl},
              {"energy", c.weak_tol.energy}}},
            {"seed", c.seed},
            {"override_cfl", c.override_cfl}};
}

// ---------------------------------------------------------------------------
// Output

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << s;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

template <class T>
void put_le(std::ostream& os, T value) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

// Layout: "QHDSNAP1" | uint64 header length | JSON header | little-endian payload.
class SnapshotWriter {
public:
    SnapshotWriter(fs::path dir, const SpectralGrid& g) : dir_(std::move(dir)), g_(g) {}

    void real(const std::string& tag, double t, const std::vector<std::string>& names,
              const std::vector<const RealField*>& fields, json extra = json::object()) {
        write(tag, t, names, "float64", extra, [&](std::ostream& os) {
            for (const auto* f : fields)
                for (double x : *f) put_le(os, x);
        });
    }
    void complex(const std::string& tag, double t, const std::string& name, const ComplexField& f,
                 json extra = json::object()) {
        write(tag, t, {name}, "complex128", extra, [&](std::ostream& os) {
            for (const Complex& z : f) {
                put_le(os, z.real());
                put_le(os, z.imag());
            }
        });
    }
    const std::vector<std::string>& files() const { return files_; }

private:
    template <class Payload>
    void write(const std::string& tag, double t, const std::vector<std::string>& names, const std::string& dtype,
               json extra, Payload payload) {
        fs::create_directories(dir_);
        json shape = json::array({names.size()});
        for (int ax = 0; ax < g_.dim(); ++ax) shape.push_back(g_.n());
        json h = {{"format", "qhdlab-snapshot"},
                  {"version", 1},
                  {"byte_order", "little"},
                  {"dtype", dtype},
                  {"shape", shape},
                  {"fields", names},
                  {"grid", {{"dim", g_.dim()}, {"n", g_.n()}, {"length", g_.length()}}},
                  {"time", t}};
        h.update(extra);
        const std::string header = h.dump();
        const std::string file = "snapshot_" + tag + ".bin";
        std::ofstream os(dir_ / file, std::ios::binary);
        os.write("QHDSNAP1", 8);
        put_le<std::uint64_t>(os, header.size());
        os.write(header.data(), static_cast<std::streamsize>(header.size()));
        payload(os);
        if (!os) throw std::runtime_error("snapshot write failed: " + (dir_ / file).string());
        files_.push_back("snapshots/" + file);
    }

    fs::path dir_;
    const SpectralGrid& g_;
    std::vector<std::string> files_;
};

std::string tag_of(int k) {
    std::ostringstream s;
    s << std::setw(6) << std::setfill('0') << k;
    return s.str();
}

struct RunOutcome {
    int code = Exit::ok;
    json metrics = json::object();
    std::vector<std::string> files;
};

void check_dt(const RunConfig& c, double limit, const std::string& what) {
    if (c.override_cfl || c.dt <= limit) return;
    std::ostringstream s;
    s << "time step " << c.dt << " exceeds the " << what << " bound " << limit << " (use --override-cfl)";
    throw ValidationError(s.str());
}

std::string csv_number(double x) {
    std::ostringstream s;
    s << std::setprecision(17) << x;
    return s.str();
}

double hydro_cfl(const SpectralGrid& g, const RealField& rho, const VectorField& v, const NonlinearityLaw& law) {
    double vmax = 0.0, cs = 0.0;
    for (const auto& comp : v) vmax = std::max(vmax, max_abs(comp));
    for (double r : rho) cs = std::max(cs, std::sqrt(std::max(0.0, r * law.fprime(std::max(r, 1e-300)))));
    return 0.5 * g.dx() / (vmax + cs + 1e-300);
}

// ---------------------------------------------------------------------------
// Experiments

RunOutcome run_nls(const RunConfig& c, const fs::path& out) {
    const SpectralGrid g(c.dim, c.n, c.length);
    const double eps = c.single_eps();
    const auto law = c.nonlinearity();
    const ComplexField psi0 = wave_data(g, c.family, eps, c.data);
    double fmax = 0.0;
    for (double r : abs2(psi0)) fmax = std::max(fmax, std::abs(law.f(r)));
    // Nonlinear phase advance per step dt |f|/eps kept below one radian.
    check_dt(c, fmax > 0.0 ? eps / fmax : std::numeric_limits<double>::infinity(), "nonlinear phase");

    DiagnosticsOptions o;
    o.background = c.background;
    o.with_gp_momentum = law.kind() == NonlinearityLaw::Kind::gross_pitaevskii;
    std::vector<DiagnosticsRecord> rec;
    SnapshotWriter snaps(out / "snapshots", g);
    EvolveOptions eo;
    eo.observe_every = c.observe_every;
    eo.snapshot_every = 0;
    int counter = 0;
    eo.observers.push_back([&](const SchrodingerState& s) {
        rec.push_back(diagnostics_wave(g, s.psi, s.t, eps, law, o));
        if (c.snapshot_every > 0 && counter % c.snapshot_every == 0)
            snaps.complex(tag_of(counter), s.t, "psi", s.psi, {{"eps", eps}});
        ++counter;
    });
    RunOutcome r;
    try {
        const Trajectory tr = evolve({psi0, 0.0, eps}, c.T, c.dt, law, g, eo);
        snaps.complex("final", tr.back().t, "psi", tr.back().psi, {{"eps", eps}});
    } catch (const NonFiniteError& e) {
        std::ofstream f(out / "diagnostics.csv");
        write_diagnostics_csv(f, rec);
        throw BreakdownError(e.what(), "nonfinite", e.time());
    }
    std::ofstream f(out / "diagnostics.csv");
    write_diagnostics_csv(f, rec);
    const DriftReport d = conservation_drift(rec);
    r.metrics = {{"mass_drift", d.M}, {"energy_drift", d.H}, {"momentum_drift", d.P},
                 {"angular_momentum_drift", d.A}, {"U_drift", d.U}, {"Z_identity", d.Z_identity}};
    r.files = snaps.files();
    r.files.insert(r.files.begin(), "diagnostics.csv");
    return r;
}

json breakdown_json(const BreakdownReport& b) {
    return {{"triggered", b.triggered},
            {"cause", to_string(b.cause)},
            {"time", b.time},
            {"peak_gradient", b.peak_gradient},
            {"min_density", b.min_density}};
}

RunOutcome run_euler(const RunConfig& c, const fs::path& out) {
    const SpectralGrid g(c.dim, c.n, c.length);
    const auto law = c.nonlinearity();
    const HydroData d = hydro_data(g, c.family, c.data);
    SymmetricEulerState s;
    s.v = d.v;
    s.a.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) s.a[i] = std::sqrt(std::max(0.0, d.rho[i]));
    check_dt(c, EulerSolver(g, law).cfl_limit(s), "Euler CFL");
    BreakdownThresholds th{c.max_gradient, c.min_density};
    const EulerRun run = evolve_euler(g, s, c.T, c.dt, law, th, c.observe_every);

    DiagnosticsOptions o;
    o.background = c.background;
    std::vector<DiagnosticsRecord> rec;
    SnapshotWriter snaps(out / "snapshots", g);
    int counter = 0;
    for (const auto& snap : run.snapshots) {
        RealField rho(snap.a.size());
        for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = snap.a[i] * snap.a[i];
        rec.push_back(diagnostics_hydro(g, rho, snap.v, snap.t, 0.0, law, o));
        if (c.snapshot_every > 0 && counter % c.snapshot_every == 0) {
            std::vector<const RealField*> f = {&rho};
            std::vector<std::string> names = {"rho"};
            for (int ax = 0; ax < g.dim(); ++ax) {
                f.push_back(&snap.v[ax]);
                names.push_back("v" + std::to_string(ax));
            }
            snaps.real(tag_of(counter), snap.t, names, f);
        }
        ++counter;
    }
    std::ofstream csv(out / "diagnostics.csv");
    write_diagnostics_csv(csv, rec);
    RunOutcome r;
    r.metrics = {{"breakdown", breakdown_json(run.report)}, {"max_leakage", run.max_leakage}};
    r.files = snaps.files();
    r.files.insert(r.files.begin(), "diagnostics.csv");
    if (run.report.triggered) {
        json b = breakdown_json(run.report);
        b["max_leakage"] = run.max_leakage;
        write_json(out / "breakdown.json", b);
        r.files.push_back("breakdown.json");
        r.code = Exit::breakdown;
    }
    return r;
}

RunOutcome run_extended(const RunConfig& c, const fs::path& out) {
    const SpectralGrid g(c.dim, c.n, c.length);
    const double eps = c.single_eps();
    const auto law = c.nonlinearity();
    const HydroData d = hydro_data(g, c.family, c.data);
    const bool korteweg = c.kind == "korteweg";
    const CapillarityLaw kappa = korteweg ? c.capillarity() : CapillarityLaw::quantum(eps);
    ExtendedState s = korteweg ? extended_vars_korteweg(g, d.rho, d.v, kappa, c.density_floor)
                               : extended_vars_qhd(g, d.rho, d.v, eps, c.density_floor);
    double limit = hydro_cfl(g, d.rho, d.v, law);
    if (korteweg) limit = std::min(limit, KortewegSolver(g, law, kappa, c.density_floor).dispersive_limit(s));
    check_dt(c, limit, korteweg ? "Korteweg CFL/dispersive" : "QHD CFL");

    DiagnosticsOptions o;
    o.background = c.background;
    std::vector<DiagnosticsRecord> rec;
    SnapshotWriter snaps(out / "snapshots", g);
    auto observe = [&](int k) {
        VectorField v(g.dim());
        for (int ax = 0; ax < g.dim(); ++ax) v[ax] = real_part(s.z[ax]);
        rec.push_back(korteweg ? diagnostics_korteweg(g, s.rho, v, s.t, kappa, law, o)
                               : diagnostics_hydro(g, s.rho, v, s.t, eps, law, o));
        if (c.snapshot_every > 0 && (k / c.observe_every) % c.snapshot_every == 0) {
            std::vector<const RealField*> f = {&s.rho};
            std::vector<std::string> names = {"rho"};
            for (int ax = 0; ax < g.dim(); ++ax) {
                f.push_back(&v[ax]);
                names.push_back("v" + std::to_string(ax));
            }
            snaps.real(tag_of(k), s.t, names, f);
        }
    };
    const int steps = step_count(c.T, c.dt);
    RunOutcome r;
    auto flush = [&] {
        std::ofstream csv(out / "diagnostics.csv");
        write_diagnostics_csv(csv, rec);
    };
    try {
        std::optional<QhdExtendedSolver> qhd;
        std::optional<KortewegSolver> kw;
        if (korteweg)
            kw.emplace(g, law, kappa, c.density_floor);
        else
            qhd.emplace(g, law, c.density_floor);
        for (int k = 0; k <= steps; ++k) {
            if (k % c.observe_every == 0 || k == steps) observe(k);
            if (k == steps) break;
            if (korteweg)
                kw->step(s, c.dt);
            else
                qhd->step(s, c.dt);
        }
    } catch (const VacuumError& e) {
        flush();
        throw BreakdownError(e.what(), "vacuum_approach", e.time());
    } catch (const NonFiniteError& e) {
        flush();
        throw BreakdownError(e.what(), "nonfinite", e.time());
    }
    flush();
    const DriftReport dr = conservation_drift(rec);
    r.metrics = {{"mass_drift", dr.M}, {"energy_drift", dr.H}, {"momentum_drift", dr.P}};
    r.files = snaps.files();
    r.files.insert(r.files.begin(), "diagnostics.csv");
    return r;
}

RunOutcome run_linear(const RunConfig& c, const fs::path& out) {
    const SpectralGrid g(c.dim, c.n, c.length);
    const double eps = c.single_eps();
    const HydroData d = hydro_data(g, c.family, c.data);
    RealField b0(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) b0[i] = d.rho[i] - 1.0;
    SnapshotWriter snaps(out / "snapshots", g);
    std::ofstream csv(out / "diagnostics.csv");
    csv << "t,b_integral,b_l2,v_l2,energy\n";
    const int steps = step_count(c.T, c.dt);
    double e0 = 0.0, drift = 0.0;
    for (int k = 0; k <= steps; k += c.observe_every) {
        const double t = k * c.dt;
        const LinearWaveState s = solve_linearized(g, b0, d.v, t, eps);
        double vl2 = 0.0;
        for (const auto& comp : s.v) vl2 += std::pow(l2_norm(g, comp), 2);
        // Quadratic energy of the linear system: (|v|^2 + b^2 + (eps^2/4)|grad b|^2)/2.
        double gb = 0.0;
        for (const auto& comp : gradient(g, s.b)) gb += std::pow(l2_norm(g, comp), 2);
        const double bl2 = l2_norm(g, s.b);
        const double energy = 0.5 * (vl2 + bl2 * bl2 + 0.25 * eps * eps * gb);
        if (k == 0) e0 = energy;
        drift = std::max(drift, std::abs(energy - e0) / std::max(e0, 1e-300));
        csv << csv_number(t) << ',' << csv_number(integrate(g, s.b)) << ',' << csv_number(bl2) << ','
            << csv_number(std::sqrt(vl2)) << ',' << csv_number(energy) << '\n';
        if (c.snapshot_every > 0 && (k / c.observe_every) % c.snapshot_every == 0) {
            std::vector<const RealField*> f = {&s.b};
            std::vector<std::string> names = {"b"};
            for (int ax = 0; ax < g.dim(); ++ax) {
                f.push_back(&s.v[ax]);
                names.push_back("v" + std::to_string(ax));
            }
            snaps.real(tag_of(k), t, names, f, {{"eps", eps}});
        }
    }
    RunOutcome r;
    r.metrics = {{"energy_drift", drift}};
    r.files = snaps.files();
    r.files.insert(r.files.begin(), "diagnostics.csv");
    return r;
}

RunOutcome run_kdv(const RunConfig& c, const fs::path& out) {
    if (c.dim != 1) throw ValidationError("KdV experiments are one-dimensional");
    const SpectralGrid g(1, c.n, c.length);
    const KdvDirection dir = c.direction == "left" ? KdvDirection::left : KdvDirection::right;
    RealField u0(g.size());
    if (c.family == "kdv_soliton") {
        u0 = kdv_soliton(g, c.data.amplitude, 0.0, c.data.center, dir);
    } else if (c.family == "sech2") {
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = (g.coordinate_1d(static_cast<int>(i)) - c.data.center) / c.data.width;
            u0[i] = c.data.amplitude / std::pow(std::cosh(x), 2);
        }
    } else {
        throw ValidationError("KdV data family must be 'kdv_soliton' or 'sech2'");
    }
    check_dt(c, 0.5 * g.dx() / (max_abs(u0) + 1e-300), "KdV advective CFL");
    const int steps = step_count(c.T, c.dt);
    KdvSolver solver(g, dir);
    KdVState s{u0, 0.0, dir};
    SnapshotWriter snaps(out / "snapshots", g);
    std::ofstream csv(out / "diagnostics.csv");
    csv << "tau,mass,l2sq\n";
    const double m0 = integrate(g, u0), q0 = std::pow(l2_norm(g, u0), 2);
    double drift = 0.0;
    try {
        for (int k = 0; k <= steps; ++k) {
            if (k % c.observe_every == 0 || k == steps) {
                const double m = integrate(g, s.u), q = std::pow(l2_norm(g, s.u), 2);
                drift = std::max({drift, std::abs(m - m0) / std::max(std::abs(m0), 1e-300),
                                  std::abs(q - q0) / std::max(q0, 1e-300)});
                csv << csv_number(s.tau) << ',' << csv_number(m) << ',' << csv_number(q) << '\n';
                if (c.snapshot_every > 0 && (k / c.observe_every) % c.snapshot_every == 0)
                    snaps.real(tag_of(k), s.tau, {"u"}, {&s.u}, {{"direction", to_string(dir)}});
            }
            if (k < steps) solver.step(s, c.dt);
        }
    } catch (const NonFiniteError& e) {
        throw BreakdownError(e.what(), "nonfinite", e.time());
    }
    RunOutcome r;
    r.metrics = {{"invariant_drift", drift}};
    r.files = snaps.files();
    r.files.insert(r.files.begin(), "diagnostics.csv");
    return r;
}

// ---------------------------------------------------------------------------
// Harnesses

json fit_json(const OrderFit& f) {
    return {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}, {"eps", f.eps}, {"error", f.error}};
}

RunOutcome run_harness(const RunConfig& c, const fs::path& out) {
    RunOutcome r;
    json res = {{"harness", c.harness}};
    if (c.harness == "euler_limit") {
        EulerLimitConfig e;
        e.n = c.n;
        e.length = c.length;
        e.T = c.T;
        e.eps = c.eps;
        e.law = c.nonlinearity();
        e.vacuum_threshold = c.vacuum_threshold;
        e.thresholds = {c.max_gradient, c.min_density};
        if (c.dim != 1) throw ValidationError("euler_limit harness is one-dimensional");
        if (c.eps.size() == 1) {
            const EulerLimitCell cell = euler_limit_at(e, c.eps.front());
            r.metrics = {{"eps", cell.eps},
                         {"density_error", cell.density_error},
                         {"velocity_error", cell.velocity_error},
                         {"total_error", cell.density_error + cell.velocity_error}};
        } else {
            const EulerLimitResult er = euler_limit_error(e);
            res["fit_total"] = fit_json(er.total);
            res["fit_density"] = fit_json(er.density);
            res["fit_velocity"] = fit_json(er.velocity);
            r.metrics = {{"order_total", er.total.slope}, {"order_density", er.density.slope}};
            std::ofstream f(out / "fit.csv");
            write_order_csv(f, er.total);
            r.files.push_back("fit.csv");
        }
    } else if (c.harness == "wave_approx") {
        WaveApproxConfig w;
        w.n = c.n;
        w.length = c.length;
        w.eps = c.eps;
        w.dt = c.dt;
        if (!c.amplitudes.empty()) w.amplitudes = c.amplitudes;
        if (!c.times.empty()) w.times = c.times;
        const WaveApproxResult wr = wave_approx_error(w);
        std::ofstream f(out / "cells.csv");
        f << "t,amplitude,eps,error,shape\n";
        for (const auto& cell : wr.cells)
            f << csv_number(cell.t) << ',' << csv_number(cell.amplitude) << ',' << csv_number(cell.eps) << ','
              << csv_number(cell.error) << ',' << csv_number(cell.shape) << '\n';
        r.files.push_back("cells.csv");
        r.metrics = {{"C", wr.C}, {"r2", wr.r2}, {"cells", wr.cells.size()}};
    } else if (c.harness == "dispersion") {
        if (c.normalization != "semiclassical" && c.normalization != "gross_pitaevskii")
            throw ValidationError("harness.normalization must be semiclassical or gross_pitaevskii");
        const auto norm = c.normalization == "semiclassical" ? DispersionNormalization::semiclassical
                                                              : DispersionNormalization::gross_pitaevskii;
        const std::vector<double> ks = c.ks.empty() ? std::vector<double>{1.0, 2.0, 4.0} : c.ks;
        std::ofstream f(out / "dispersion.csv");
        f << "eps,k,omega_measured,omega_exact,rel_error,phase_speed\n";
        double worst = 0.0;
        for (double eps : c.eps)
            for (const auto& row : dispersion_check(eps, ks, norm)) {
                f << csv_number(row.eps) << ',' << csv_number(row.k) << ',' << csv_number(row.omega_measured)
                  << ',' << csv_number(row.omega_exact) << ',' << csv_number(row.rel_error) << ','
                  << csv_number(row.phase_speed) << '\n';
                worst = std::max(worst, row.rel_error);
            }
        r.files.push_back("dispersion.csv");
        r.metrics = {{"max_rel_error", worst}};
    } else if (c.harness == "transonic") {
        TransonicConfig t;
        t.eps = c.eps;
        t.tau_end = c.tau_end;
        std::ofstream f(out / "transonic.csv");
        f << "eps,n,tau,err_minus,err_plus\n";
        std::vector<double> total;
        for (double eps : c.eps) {
            const TransonicEpsResult run = transonic_single(eps, t);
            for (std::size_t j = 0; j < run.taus.size(); ++j)
                f << csv_number(eps) << ',' << run.n << ',' << csv_number(run.taus[j]) << ','
                  << csv_number(run.err_minus[j]) << ',' << csv_number(run.err_plus[j]) << '\n';
            total.push_back(run.err_minus.back() + run.err_plus.back());
        }
        r.files.push_back("transonic.csv");
        if (c.eps.size() == 1) {
            r.metrics = {{"eps", c.eps.front()}, {"total_error", total.front()}};
        } else {
            const OrderFit fit = fit_order(c.eps, total);
            res["fit_total"] = fit_json(fit);
            r.metrics = {{"order_total", fit.slope}};
        }
    } else if (c.harness == "weakqhd") {
        const SpectralGrid g(c.dim, c.n, c.length);
        const double eps = c.single_eps();
        const auto law = c.nonlinearity();
        validate_weak_law(law, c.dim);
        EvolveOptions o;
        o.snapshot_every = 1;
        const Trajectory tr = evolve({wave_data(g, c.family, eps, c.data), 0.0, eps}, c.T, c.dt, law, g, o);
        const TestFunctionSet tests(g, tr.front().t, tr.back().t, c.seed);
        const double bg = law.kind() == NonlinearityLaw::Kind::gross_pitaevskii ? 1.0 : c.background;
        std::vector<WeakCheck> checks = {
            make_check("continuity", law, weak_residual_continuity(g, tr, eps, tests).relative(),
                       c.weak_tol.continuity),
            make_check("momentum", law, weak_residual_momentum(g, tr, eps, law, tests).relative(),
                       c.weak_tol.momentum),
            make_check("energy", law, energy_equality_check(g, tr, eps, law, bg), c.weak_tol.energy)};
        if (c.dim == 2) {
            double curl = 0.0;
            for (const auto& s : tr) {
                const CurlResidual cr = curl_constraint_residual(g, s.psi);
                curl = std::max(curl, cr.max_lhs > 0.0 ? cr.max_residual / cr.max_lhs : cr.max_residual);
            }
            checks.push_back(make_check("curl", law, curl, c.weak_tol.curl));
        }
        json arr = json::array();
        for (const auto& ch : checks) {
            arr.push_back({{"name", ch.name}, {"residual", ch.residual}, {"tolerance", ch.tolerance},
                           {"pass", ch.pass}});
            r.metrics[ch.name] = ch.residual;
            if (!ch.pass) r.code = Exit::assertion;
        }
        res["checks"] = arr;
    }
    res["metrics"] = r.metrics;
    write_json(out / "results.json", res);
    r.files.push_back("results.json");
    return r;
}

RunOutcome dispatch(const RunConfig& c, const fs::path& out) {
    if (!c.harness.empty()) return run_harness(c, out);
    if (c.kind == "nls") return run_nls(c, out);
    if (c.kind == "euler") return run_euler(c, out);
    if (c.kind == "qhd" || c.kind == "korteweg") return run_extended(c, out);
    if (c.kind == "linear") return run_linear(c, out);
    return run_kdv(c, out);
}

json versions() {
    return {{"qhdlab", kVersion},
            {"fftw", std::string(fftw_version)},
            {"boost", BOOST_LIB_VERSION},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"cli11", CLI11_VERSION},
            {"compiler", __VERSION__}};
}

int error_record(const fs::path& out, int code, const std::string& kind, const std::string& message,
                 json extra = json::object()) {
    std::error_code ec;
    fs::create_directories(out, ec);
    json e = {{"status", kind}, {"exit_code", code}, {"message", message}};
    e.update(extra);
    if (!ec) write_json(out / "error.json", e);
    return code;
}

/// Runs one parsed config into `out`; always leaves a manifest behind.
int execute(const pt::ptree& tree, const Flags& flags, const fs::path& out, json* metrics_out = nullptr) {
    const auto start = std::chrono::steady_clock::now();
    json manifest = {{"tool", "qhdlab"}, {"versions", versions()}, {"config_file", flags.config}};
    manifest["config_echo"] = ini_to_json(tree);
    int code = Exit::ok;
    RunOutcome outcome;
    try {
        fs::create_directories(out);
        const RunConfig c = parse_config(tree, flags);
        manifest["config"] = config_json(c);
        outcome = dispatch(c, out);
        code = outcome.code;
    } catch (const ValidationError& e) {
        code = error_record(out, Exit::validation, "validation_error", e.what());
        std::cerr << "validation error: " << e.what() << '\n';
    } catch (const BreakdownError& e) {
        json b = {{"triggered", true}, {"cause", e.cause()}, {"time", e.time()}, {"message", e.what()}};
        write_json(out / "breakdown.json", b);
        code = error_record(out, Exit::breakdown, "breakdown", e.what(), {{"cause", e.cause()}});
        outcome.files.push_back("breakdown.json");
        std::cerr << "breakdown: " << e.what() << '\n';
    } catch (const std::exception& e) {
        code = error_record(out, Exit::crash, "crash", e.what());
        std::cerr << "error: " << e.what() << '\n';
    }
    if (code == Exit::breakdown && !fs::exists(out / "error.json"))
        error_record(out, Exit::breakdown, "breakdown", "breakdown monitor triggered",
                     {{"breakdown", outcome.metrics.value("breakdown", json::object())}});
    manifest["exit_code"] = code;
    manifest["metrics"] = outcome.metrics;
    manifest["outputs"] = outcome.files;
    manifest["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::error_code ec;
    fs::create_directories(out, ec);
    if (!ec) write_json(out / "manifest.json", manifest);
    if (metrics_out) *metrics_out = outcome.metrics;
    return code;
}

fs::path output_root(const Flags& flags, const pt::ptree* tree) {
    if (!flags.out.empty()) return flags.out;
    if (tree)
        if (auto d = tree->get_optional<std::string>("output.dir")) return *d;
    const std::string stem = flags.config.empty() ? "qhdlab" : fs::path(flags.config).stem().string();
    if (const char* env = std::getenv("QHDLAB_OUT")) return fs::path(env) / stem;
    return fs::path("qhdlab_out") / stem;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_run(const Flags& flags) {
    pt::ptree tree;
    try {
        tree = read_ini(flags.config);
        if (tree.get_child_optional("sweep")) throw ValidationError("[sweep] section given to 'run'; use 'sweep'");
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return error_record(output_root(flags, nullptr), Exit::validation, "validation_error", e.what());
    }
    const fs::path out = output_root(flags, &tree);
    const int code = execute(tree, flags, out);
    std::cout << "run " << (code == 0 ? "ok" : "failed") << " (exit " << code << "): " << out.string() << '\n';
    return code;
}

struct Cell {
    std::vector<std::pair<std::string, std::string>> params;
    int code = Exit::crash;
    json metrics;
};

int cmd_sweep(const Flags& flags) {
    pt::ptree tree;
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    try {
        tree = read_ini(flags.config);
        const auto sweep = tree.get_child_optional("sweep");
        if (!sweep || sweep->empty()) throw ValidationError("sweep needs a non-empty [sweep] section");
        for (const auto& [key, v] : *sweep) {
            const auto dot = key.find('.');
            if (dot == std::string::npos) throw ValidationError("sweep key '" + key + "' must be section.key");
            const std::string sec = key.substr(0, dot), name = key.substr(dot + 1);
            const auto it = kSchema.find(sec);
            if (it == kSchema.end() || sec == "sweep" || !it->second.count(name))
                throw ValidationError("sweep key '" + key + "' does not name a config entry");
            auto values = split_list(v.data());
            if (values.empty()) throw ValidationError("sweep list '" + key + "' is empty");
            axes.emplace_back(key, std::move(values));
        }
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return error_record(output_root(flags, nullptr), Exit::validation, "validation_error", e.what());
    }
    const fs::path root = output_root(flags, &tree);
    fs::create_directories(root);

    std::vector<Cell> cells(1);
    for (const auto& [key, values] : axes) {
        std::vector<Cell> next;
        for (const auto& base : cells)
            for (const auto& v : values) {
                Cell c = base;
                c.params.emplace_back(key, v);
                next.push_back(std::move(c));
            }
        cells = std::move(next);
    }

    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
        for (std::size_t i = cursor++; i < cells.size(); i = cursor++) {
            pt::ptree t = tree;
            t.erase("sweep");
            for (const auto& [key, v] : cells[i].params) t.put(key, v);
            std::ostringstream name;
            name << "cell_" << std::setw(3) << std::setfill('0') << i;
            try {
                cells[i].code = execute(t, flags, root / name.str(), &cells[i].metrics);
            } catch (const std::exception& e) {
                cells[i].code = Exit::crash;
                cells[i].metrics = {{"error", e.what()}};
            }
        }
    };
    const int jobs = std::clamp(flags.jobs, 1, static_cast<int>(cells.size()));
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    // Aggregation (single writer).
    std::set<std::string> metric_keys;
    for (const auto& c : cells)
        for (const auto& [k, v] : c.metrics.items())
            if (v.is_number()) metric_keys.insert(k);
    std::ofstream csv(root / "sweep.csv");
    csv << "cell";
    for (const auto& [key, values] : axes) csv << ',' << key;
    csv << ",status,exit_code";
    for (const auto& k : metric_keys) csv << ',' << k;
    csv << '\n';
    int failed = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& c = cells[i];
        failed += c.code != Exit::ok;
        csv << i;
        for (const auto& [k, v] : c.params) csv << ',' << v;
        csv << ',' << (c.code == Exit::ok ? "ok" : "failed") << ',' << c.code;
        for (const auto& k : metric_keys) {
            csv << ',';
            if (c.metrics.contains(k) && c.metrics[k].is_number()) csv << csv_number(c.metrics[k].get<double>());
        }
        csv << '\n';
    }
    csv.close();

    // Order fit when the harness defines one and eps is swept.
    const std::string kind = tree.get<std::string>("experiment.kind", "");
    if ((kind == "harness:euler_limit" || kind == "harness:transonic") && metric_keys.count("total_error")) {
        std::vector<double> eps, err;
        for (const auto& c : cells)
            if (c.code == Exit::ok && c.metrics.contains("eps")) {
                eps.push_back(c.metrics["eps"].get<double>());
                err.push_back(c.metrics["total_error"].get<double>());
            }
        json fit;
        try {
            fit = fit_json(fit_order(eps, err));
        } catch (const std::exception& e) {
            fit = {{"error", e.what()}, {"eps", eps}, {"total_error", err}};
        }
        write_json(root / "fit.json", fit);
    }

    json summary = {{"cells", cells.size()}, {"failed", failed}, {"versions", versions()},
                    {"config_echo", ini_to_json(tree)}};
    write_json(root / "sweep.json", summary);
    std::cout << "sweep: " << cells.size() - failed << "/" << cells.size() << " cells ok: " << root.string() << '\n';
    if (failed == 0) return Exit::ok;
    if (failed < static_cast<int>(cells.size())) return Exit::partial;
    return cells.front().code;
}

json report_json(const SuiteReport& r) {
    json checks = json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"criterion", c.criterion}, {"name", c.name}, {"value", c.value},
                          {"relation", c.relation}, {"lo", c.lo}, {"hi", c.hi}, {"pass", c.pass}});
    json tables = json::array();
    for (const auto& t : r.tables) tables.push_back({{"name", t.name}, {"columns", t.columns}, {"rows", t.rows}});
    return {{"suite", r.suite}, {"pass", r.pass()}, {"seconds", r.seconds}, {"checks", checks},
            {"tables", tables}, {"versions", versions()}};
}

int cmd_verify(const std::string& suite, const Flags& flags) {
    const auto& names = suite_names();
    if (std::find(names.begin(), names.end(), suite) == names.end()) {
        std::cerr << "unknown suite '" << suite << "'; choose one of:";
        for (const auto& n : names) std::cerr << ' ' << n;
        std::cerr << '\n';
        return Exit::validation;
    }
    SuiteReport r;
    try {
        r = run_suite(suite);
    } catch (const std::exception& e) {
        std::cerr << "suite " << suite << " crashed: " << e.what() << '\n';
        return Exit::crash;
    }
    const json j = report_json(r);
    if (!flags.out.empty() || std::getenv("QHDLAB_OUT")) {
        const fs::path dir = flags.out.empty() ? fs::path(std::getenv("QHDLAB_OUT")) : fs::path(flags.out);
        fs::create_directories(dir);
        write_json(dir / ("verify_" + suite + ".json"), j);
    }
    std::cout << j.dump(2) << '\n';
    return r.pass() ? Exit::ok : Exit::assertion;
}

int cmd_list() {
    json j = {{"experiments", kKinds},
              {"harnesses", kHarnesses},
              {"suites", suite_names()},
              {"wave_data", {"constant", "plane_wave", "gaussian_packet", "density_bump", "black_soliton",
                             "vortex_pair"}},
              {"hydro_data", {"constant", "density_bump", "cosine_mode", "compact_bump"}},
              {"kdv_data", {"kdv_soliton", "sech2"}},
              {"laws", {"cubic", "gross_pitaevskii", "power"}}};
    std::cout << j.dump(2) << '\n';
    return Exit::ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qhdlab: NLS / quantum hydrodynamics experiments"};
    app.require_subcommand(1);
    app.fallthrough();
    Flags flags;
    app.add_option("--config", flags.config, "experiment config (INI)");
    app.add_option("--out", flags.out, "output directory (default: $QHDLAB_OUT/<config stem>)");
    app.add_option("--jobs", flags.jobs, "sweep worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", flags.seed, "RNG seed (overrides [run] seed)");
    app.add_flag("--override-cfl", flags.override_cfl, "accept time steps above the stability bound");

    auto* run = app.add_subcommand("run", "run one experiment");
    auto* sweep = app.add_subcommand("sweep", "Cartesian sweep over the [sweep] lists");
    auto* verify = app.add_subcommand("verify", "run a canned verification suite");
    std::string suite;
    verify->add_option("suite", suite, "suite name")->required();
    auto* list = app.add_subcommand("list-experiments", "list experiment kinds, harnesses and suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return Exit::validation;
    }
    try {
        if (run->parsed()) return cmd_run(flags);
        if (sweep->parsed()) return cmd_sweep(flags);
        if (verify->parsed()) return cmd_verify(suite, flags);
        if (list->parsed()) return cmd_list();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Exit::crash;
    }
    return Exit::crash;
}
