#include "commands.hpp"

#include "manydelta/config_io.hpp"
#include "manydelta/localtime.hpp"
#include "manydelta/mc.hpp"
#include "manydelta/measures.hpp"
#include "manydelta/ntc.hpp"
#include "manydelta/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace manydelta::cli {

using nlohmann::json;

namespace {

Configuration triangle(double side = 1.0) {
    return {{0, 0}, {side, 0}, {side / 2, side * std::sqrt(3.0) / 2}};
}

ModelConfig default_model() { return {ModelParams::uniform(3, 1.0), triangle()}; }

// Weighted edges on particles 1-3; pairs among 4-6 are free separations.
ModelConfig six_particle_model() {
    std::vector<double> beta(edge_count(6), 1.0), w(edge_count(6), 0.0);
    w[edge_index({1, 0})] = w[edge_index({2, 0})] = w[edge_index({2, 1})] = 1.0;
    const double h = std::sqrt(3.0) / 2;
    return {ModelParams::create(6, beta, w), {{0, 0}, {1, 0}, {0.5, h}, {10, 0}, {11, 0}, {10.5, h}}};
}

// Reads the task block, remembering which keys were consumed so that
// leftovers can be rejected.
class Task {
public:
    explicit Task(json j) : j_(std::move(j)) {}

    double number(const std::string& key, double fallback) {
        used_.insert(key);
        double v = fallback;
        if (j_.contains(key)) {
            if (!j_[key].is_number()) throw ConfigError("task." + key + ": expected a number");
            v = j_[key].get<double>();
        }
        resolved_[key] = v;
        return v;
    }
    long integer(const std::string& key, long fallback) {
        used_.insert(key);
        long v = fallback;
        if (j_.contains(key)) {
            if (!j_[key].is_number_integer()) throw ConfigError("task." + key + ": integer required");
            v = j_[key].get<long>();
        }
        resolved_[key] = v;
        return v;
    }
    std::string text(const std::string& key, const std::string& fallback, const std::set<std::string>& allowed) {
        used_.insert(key);
        std::string v = fallback;
        if (j_.contains(key)) {
            if (!j_[key].is_string()) throw ConfigError("task." + key + ": expected a string");
            v = j_[key].get<std::string>();
        }
        if (!allowed.empty() && !allowed.count(v)) throw ConfigError("task." + key + ": unsupported value '" + v + "'");
        resolved_[key] = v;
        return v;
    }
    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
        used_.insert(key);
        std::vector<double> out = fallback;
        if (j_.contains(key)) {
            if (!j_[key].is_array() || j_[key].empty()) throw ConfigError("task." + key + ": nonempty array required");
            out.clear();
            for (const auto& v : j_[key]) {
                if (!v.is_number()) throw ConfigError("task." + key + ": numbers required");
                out.push_back(v.get<double>());
            }
        }
        resolved_[key] = out;
        return out;
    }
    int edge(const std::string& key, const std::string& fallback, int n) {
        return edge_of(text(key, fallback, {}), n, key);
    }
    std::vector<int> edges(const std::string& key, const std::vector<std::string>& fallback, int n) {
        used_.insert(key);
        std::vector<std::string> keys = fallback;
        if (j_.contains(key)) {
            if (!j_[key].is_array()) throw ConfigError("task." + key + ": array of edge keys required");
            keys.clear();
            for (const auto& v : j_[key]) {
                if (!v.is_string()) throw ConfigError("task." + key + ": edge keys are strings");
                keys.push_back(v.get<std::string>());
            }
        }
        std::vector<int> out;
        for (const auto& k : keys) out.push_back(edge_of(k, n, key));
        resolved_[key] = keys;
        return out;
    }
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError("task: unknown key '" + it.key() + "'");
    }
    const json& raw() const { return j_; }
    const json& resolved() const { return resolved_; }

private:
    static int edge_of(const std::string& key, int n, const std::string& where) {
        try {
            return edge_index(parse_edge_key(key, n));
        } catch (const ParamError& e) {
            throw ConfigError("task." + where + ": " + e.what());
        }
    }
    json j_;
    json resolved_ = json::object();
    std::set<std::string> used_;
};

struct Context {
    ExperimentConfig cfg;
    Task task;
    int workers = 1;
};

Context load(const Options& opt, const ModelConfig& model_default, const SimConfig& sim_default,
             long paths_default) {
    json raw = opt.config.empty() ? json::object() : load_json_file(opt.config);
    if (!raw.is_object()) throw ConfigError("config: expected an object");
    Context ctx{ExperimentConfig{}, Task(json::object())};
    ctx.cfg.model = model_default;
    ctx.cfg.sim = sim_default;
    ctx.cfg.mc.paths = paths_default;
    if (raw.contains("n")) {
        ctx.cfg.model = parse_model_config(raw);
    } else if (!raw.empty()) {
        for (auto it = raw.begin(); it != raw.end(); ++it)
            if (it.key() != "model" && it.key() != "sim" && it.key() != "mc" && it.key() != "task")
                throw ConfigError("config: unknown key '" + it.key() + "'");
        if (raw.contains("model")) ctx.cfg.model = parse_model_config(raw["model"]);
        if (raw.contains("sim")) ctx.cfg.sim = parse_sim_config(raw["sim"], sim_default);
        if (raw.contains("mc")) ctx.cfg.mc = parse_mc_config(raw["mc"], ctx.cfg.mc);
        if (raw.contains("task")) {
            if (!raw["task"].is_object()) throw ConfigError("config.task: expected an object");
            ctx.task = Task(raw["task"]);
        }
    }
    if (opt.paths) {
        if (*opt.paths < 2) throw ConfigError("--paths: at least 2 required");
        ctx.cfg.mc.paths = *opt.paths;
    }
    if (opt.seed) ctx.cfg.mc.seed = *opt.seed;
    if (opt.workers) {
        if (*opt.workers < 0) throw ConfigError("--workers: nonnegative integer required");
        ctx.cfg.mc.workers = *opt.workers;
    }
    if (opt.dt) ctx.cfg.sim.dt_max = *opt.dt;
    if (opt.delta_contact) ctx.cfg.sim.contact_threshold = *opt.delta_contact;
    // command line flags win over the file
    json t = ctx.task.raw();
    if (opt.eps) t["eps"] = *opt.eps;
    if (opt.tolerance) t["tolerance"] = *opt.tolerance;
    ctx.task = Task(t);
    try {
        ctx.cfg.sim.validate();
    } catch (const ParamError& e) {
        throw ConfigError(e.what());
    }
    ctx.workers = resolve_workers(ctx.cfg.mc.workers);
    return ctx;
}

json estimator_json(const EstimatorResult& r) {
    return {{"mean", r.mean}, {"stderr", r.std_error}, {"n", r.n}, {"ci_half_width", r.ci_half_width}};
}

json report(const std::string& command, const Context& ctx, double estimate, double stderr_, long n,
            double tolerance, bool pass, json details) {
    json cfg = experiment_to_json(ctx.cfg);
    cfg["task"] = ctx.task.resolved();
    json r;
    r["command"] = command;
    r["estimate"] = estimate;
    r["stderr"] = stderr_;
    r["n"] = n;
    r["tolerance"] = tolerance;
    r["pass"] = pass;
    r["details"] = std::move(details);
    r["config"] = cfg;
    r["hash"] = content_hash(json{{"command", command}, {"config", cfg}}.dump());
    return r;
}

// Distribution-free standard error of a median from the order statistics
// bracketing a 95% interval.
double median_stderr(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    long lo = std::max(0L, static_cast<long>(std::floor(n / 2 - 0.98 * std::sqrt(n))));
    long hi = std::min(static_cast<long>(n) - 1, static_cast<long>(std::ceil(n / 2 + 0.98 * std::sqrt(n))));
    return (xs[hi] - xs[lo]) / (2 * 1.96);
}

QvMode qv_mode(const std::string& s) { return s == "riemann" ? QvMode::Riemann : QvMode::Sampled; }

// ---- commands -------------------------------------------------------------

Outcome specfun_table(const Options& opt) {
    if (!(opt.xmin > 0) || !(opt.xmax > opt.xmin) || opt.points < 2)
        throw ConfigError("specfun-table: need 0 < xmin < xmax and points >= 2");
    std::ostringstream csv;
    csv.precision(17);
    csv << "x,K0,K1,Khat1,Khat1/K0\n";
    const double ratio = std::log(opt.xmax / opt.xmin) / (opt.points - 1);
    for (int k = 0; k < opt.points; ++k) {
        double x = k + 1 == opt.points ? opt.xmax : opt.xmin * std::exp(ratio * k);
        csv << x << ',' << specfun::k0(x) << ',' << specfun::k1(x) << ',' << specfun::khat(1, x) << ','
            << specfun::ratio_khat1_k0(x) << '\n';
    }
    Context ctx{ExperimentConfig{}, Task(json::object())};
    ctx.cfg.model = default_model();
    ctx.task.number("xmin", opt.xmin);
    ctx.task.number("xmax", opt.xmax);
    ctx.task.integer("points", opt.points);
    Outcome o;
    o.report = report("specfun-table", ctx, 0.0, 0.0, opt.points, 0.0, true, json::object());
    o.artifacts.push_back({"specfun_table.csv", csv.str()});
    o.primary = csv.str();
    return o;
}

Outcome simulate(const Options& opt) {
    Context ctx = load(opt, default_model(), SimConfig{}, 10);
    const auto& m = ctx.cfg.model;
    std::string mode = ctx.task.text("mode", "many", {"many", "one", "free"});
    int edge = ctx.task.edge("edge", "2-1", m.params.n);
    ctx.task.finish();
    const auto& sim = ctx.cfg.sim;
    auto paths = map_paths<PathRecord>(ctx.cfg.mc.paths, ctx.workers, [&](long i) {
        Stream s(ctx.cfg.mc.seed, i);
        if (mode == "one") return simulate_one_delta(m.z0, m.params, edge, sim, s);
        if (mode == "free") return simulate_free(m.z0, m.params, sim, s);
        return simulate_many_delta(m.z0, m.params, sim, s);
    });
    std::string jsonl;
    Welford contacts;
    for (size_t i = 0; i < paths.size(); ++i) {
        const auto& p = paths[i];
        json c = json::array(), fin = json::array();
        for (const auto& e : p.contacts) c.push_back({{"time", e.time}, {"edge", edge_key(edge_at(e.edge))}, {"pre_radius", e.pre_radius}});
        for (auto z : p.state(p.steps())) fin.push_back({z.real(), z.imag()});
        json line = {{"path", i},          {"t_end", p.times.back()}, {"steps", p.steps()},
                     {"absorbed", p.absorbed}, {"projections", p.projections}, {"tamed", p.tamed},
                     {"contacts", c},      {"final", fin}};
        jsonl += line.dump() + "\n";
        contacts.add(static_cast<double>(p.contacts.size()));
    }
    auto r = contacts.result();
    Outcome o;
    o.report = report("simulate", ctx, r.mean, r.std_error, r.n, 0.0, true,
                      {{"mode", mode}, {"mean_contacts", estimator_json(r)}});
    o.artifacts.push_back({"paths.jsonl", jsonl});
    o.primary = jsonl;
    return o;
}

Outcome residual_command(const Options& opt, const std::string& command, bool rn) {
    Context ctx = load(opt, default_model(), SimConfig{}, 100);
    const auto& m = ctx.cfg.model;
    std::string kind = rn ? "rn" : ctx.task.text("kind", "many", {"one", "many"});
    int edge = ctx.task.edge("edge", "2-1", m.params.n);
    double t = ctx.task.number("t", 0.1);
    double dt = ctx.task.number("dt", opt.dt ? *opt.dt : 1e-4);
    double eps = ctx.task.number("eps", rn ? 1e-3 : 1e-2);
    QvMode mode = qv_mode(rn ? "sampled" : ctx.task.text("qv", "sampled", {"sampled", "riemann"}));
    double tol = ctx.task.number("tolerance", 0.05);
    double ratio_max = rn ? 1.0 : ctx.task.number("ratio_max", 0.8);
    ctx.task.finish();
    ResidualKind rk = rn ? ResidualKind::RN : kind == "one" ? ResidualKind::ItoOneDelta : ResidualKind::ItoMany;
    auto st = residual_study(m.z0, m.params, edge, rk, dt, t, eps, mode, ctx.cfg.mc.paths, ctx.workers,
                             ctx.cfg.mc.seed);
    double ratio = st.median_coarse > 0 ? st.median_fine / st.median_coarse : 0.0;
    bool pass = st.median_coarse <= tol && (rn || ratio <= ratio_max);
    json d = {{"kind", kind},
              {"median_coarse", st.median_coarse},
              {"median_fine", st.median_fine},
              {"halving_ratio", ratio},
              {"min_radius", st.min_radius},
              {"dt", dt},
              {"t", t}};
    if (!rn) d["ratio_max"] = ratio_max;
    Outcome o;
    o.report = report(command, ctx, st.median_coarse, median_stderr(st.coarse), static_cast<long>(st.coarse.size()),
                      tol, pass, d);
    std::ostringstream csv;
    csv.precision(17);
    csv << "path,residual_dt,residual_half_dt\n";
    for (size_t i = 0; i < st.coarse.size(); ++i) csv << i << ',' << st.coarse[i] << ',' << st.fine[i] << '\n';
    o.artifacts.push_back({command + ".csv", csv.str()});
    return o;
}

// Mean of exp(-|Z^e|^2) over edges: bounded, continuous and radial.
double radial_test_functional(const Configuration& z) {
    auto seps = separations(z);
    double s = 0.0;
    for (auto c : seps) s += std::exp(-std::norm(c));
    return s / static_cast<double>(seps.size());
}

Outcome check_identities(const Options& opt) {
    Context ctx = load(opt, default_model(), SimConfig{}, 100000);
    const auto& m = ctx.cfg.model;
    double eta = ctx.task.number("eta", 0.1);
    double t_cap = ctx.task.number("t_cap", 0.5);
    double zmax = ctx.task.number("tolerance", 3.0);
    ctx.task.finish();
    auto gir = girsanov_bm_estimator(m.z0, m.params, radial_test_functional, eta, t_cap, ctx.cfg.sim,
                                     ctx.cfg.mc.paths, ctx.workers, ctx.cfg.mc.seed);
    auto dir = direct_many_delta_estimator(m.z0, m.params, radial_test_functional, eta, t_cap, ctx.cfg.sim,
                                           ctx.cfg.mc.paths, ctx.workers, ctx.cfg.mc.seed + 1);
    auto ag = agreement_test(gir, dir, zmax);
    Outcome o;
    o.report = report("check-identities", ctx, gir.mean - dir.mean,
                      std::sqrt(gir.std_error * gir.std_error + dir.std_error * dir.std_error), gir.n + dir.n, zmax,
                      ag.pass, {{"girsanov", estimator_json(gir)}, {"direct", estimator_json(dir)}, {"z", ag.z}});
    return o;
}

Outcome estimate_mass(const Options& opt) {
    SimConfig base;
    base.dt_max = 1e-2;
    base.t_max = 50;
    base.dt_min = 1e-13;
    Context ctx = load(opt, default_model(), base, 3334);
    const auto& m = ctx.cfg.model;
    double k = ctx.task.number("tolerance", 3.0);
    ctx.task.finish();
    auto r = weighted_average_mass(m.z0, m.params, ctx.cfg.sim, ctx.cfg.mc.paths, ctx.workers, ctx.cfg.mc.seed);
    double gap = std::abs(r.total.mean - 1);
    bool pass = r.total.std_error > 0 ? gap <= k * r.total.std_error : gap <= 1e-12;
    json per = json::array();
    for (size_t q = 0; q < r.edges.size(); ++q)
        per.push_back({{"edge", edge_key(edge_at(r.edges[q]))},
                       {"start_weight", r.start_weights[q]},
                       {"estimate", estimator_json(r.per_edge[q])}});
    Outcome o;
    o.report = report("estimate-mass", ctx, r.total.mean, r.total.std_error, r.total.n, k, pass,
                      {{"per_edge", per}, {"unfinished", r.unfinished}});
    return o;
}

Outcome check_martingale(const Options& opt) {
    SimConfig base;
    base.dt_max = 1e-2;
    base.radius_floor = 1e-4;
    base.contact_threshold = 1e-3;
    base.dt_min = 1e-15;
    Context ctx = load(opt, default_model(), base, 10000);
    const auto& m = ctx.cfg.model;
    int edge = ctx.task.edge("edge", "2-1", m.params.n);
    double t = ctx.task.number("t", 1.0);
    double eta = ctx.task.number("eta", 0.1);
    double eps = ctx.task.number("eps", 1e-6);
    std::string method = ctx.task.text("method", "kernel", {"kernel", "tanaka"});
    double k = ctx.task.number("tolerance", 3.0);
    ctx.task.finish();
    auto r = stopped_martingale_test(m.z0, m.params, edge, t, eta, eps, ctx.cfg.sim, ctx.cfg.mc.paths, ctx.workers,
                                     ctx.cfg.mc.seed,
                                     method == "tanaka" ? LocalTimeMethod::Tanaka : LocalTimeMethod::Kernel);
    bool stopped_ok = std::abs(r.stopped.mean - 1) <= k * r.stopped.std_error;
    bool unstopped_ok = r.unstopped.mean <= 1 + k * r.unstopped.std_error;
    Outcome o;
    o.report = report("check-martingale", ctx, r.stopped.mean, r.stopped.std_error, r.stopped.n, k,
                      stopped_ok && unstopped_ok,
                      {{"stopped", estimator_json(r.stopped)},
                       {"unstopped", estimator_json(r.unstopped)},
                       {"stopped_early", r.stopped_early},
                       {"unstopped_pass", unstopped_ok}});
    return o;
}

Outcome check_ntc(const Options& opt) {
    Context ctx = load(opt, default_model(), SimConfig{}, 1000);
    const auto& m = ctx.cfg.model;
    auto ladder = ctx.task.numbers("thresholds", {1e-2, 1e-3, 1e-4});
    int j_level = static_cast<int>(ctx.task.integer("j_level", 2));
    int edge = ctx.task.edge("edge", "2-1", m.params.n);
    double tol = ctx.task.number("tolerance", 0.01);
    ctx.task.finish();
    if (j_level < 2 || j_level > m.params.edges()) throw ConfigError("task.j_level: must lie in [2, #edges]");
    std::ostringstream csv;
    csv.precision(17);
    csv << "law,threshold,violation_fraction,n_paths\n";
    json d = json::object();
    bool pass = true;
    double worst = 0.0;
    const long n = ctx.cfg.mc.paths;
    for (std::string law : {"one", "many"}) {
        auto hits = map_paths<std::vector<char>>(n, ctx.workers, [&](long i) {
            Stream s(ctx.cfg.mc.seed, i, law == "one" ? Substream::Noise : Substream::Auxiliary);
            auto path = law == "one" ? simulate_one_delta(m.z0, m.params, edge, ctx.cfg.sim, s)
                                     : simulate_many_delta(m.z0, m.params, ctx.cfg.sim, s);
            std::vector<char> v;
            for (double th : ladder) v.push_back(nsc_scan(path, j_level, th).violation_count > 0);
            return v;
        });
        json fr = json::array();
        double prev = 1.0;
        for (size_t q = 0; q < ladder.size(); ++q) {
            long c = 0;
            for (const auto& h : hits) c += h[q];
            double f = double(c) / double(n);
            fr.push_back(f);
            csv << law << ',' << ladder[q] << ',' << f << ',' << n << '\n';
            if (f > prev) pass = false;
            prev = f;
        }
        if (prev > tol) pass = false;
        worst = std::max(worst, prev);
        d[law] = fr;
    }
    d["thresholds"] = ladder;
    Outcome o;
    o.report = report("check-ntc", ctx, worst, std::sqrt(worst * (1 - worst) / n), n, tol, pass, d);
    o.artifacts.push_back({"check_ntc.csv", csv.str()});
    return o;
}

Outcome check_comparison(const Options& opt) {
    SimConfig base;
    base.dt_max = 2.5e-5;
    Context ctx = load(opt, six_particle_model(), base, 100);
    const auto& m = ctx.cfg.model;
    std::vector<int> J = ctx.task.edges("edges", {"5-4", "6-4"}, m.params.n);
    double alpha = ctx.task.number("alpha", 0.0);
    int k = static_cast<int>(ctx.task.integer("k", 4));
    int mm = static_cast<int>(ctx.task.integer("m", 100));
    double tol = ctx.task.number("tolerance", 0.99);
    ctx.task.finish();
    if (J.size() < 2) throw ConfigError("task.edges: at least two edges required");
    if (k < 1 || mm <= k) throw ConfigError("task: need 1 <= k < m");
    auto dim = dimension_d(static_cast<int>(J.size()), alpha);
    if (!dim.admissible) throw ConfigError("task.alpha: inadmissible, dimension below 2");
    auto reps = map_paths<ComparisonReport>(ctx.cfg.mc.paths, ctx.workers, [&](long i) {
        Stream s(ctx.cfg.mc.seed, i);
        auto path = simulate_many_delta(m.z0, m.params, ctx.cfg.sim, s);
        auto sp = subset_paths(path, J);
        return lower_bessel_compare(sp.sum(), clock_process(sp), dim.d, k, mm, ctx.cfg.sim);
    });
    std::string jsonl;
    std::vector<double> fr;
    for (size_t i = 0; i < reps.size(); ++i) {
        const auto& r = reps[i];
        json line = {{"path", i},           {"started", r.started},   {"sigma_k", r.sigma_k},
                     {"tau_m", r.tau_m},    {"points", r.points},     {"fraction_dominated", r.fraction_dominated},
                     {"clamps", r.clamps}};
        jsonl += line.dump() + "\n";
        fr.push_back(r.fraction_dominated);
    }
    auto sum = summarize(fr);
    Outcome o;
    o.report = report("check-comparison", ctx, sum.mean, sum.std_error, sum.n, tol, sum.mean >= tol,
                      {{"dimension", dim.d}, {"min_fraction", *std::min_element(fr.begin(), fr.end())}});
    o.artifacts.push_back({"check_comparison.jsonl", jsonl});
    return o;
}

double bump(double r) { return r < 1 ? std::exp(1 - 1 / (1 - r * r)) : 0.0; }

Outcome check_limits(const Options& opt) {
    Context ctx = load(opt, default_model(), SimConfig{}, 2);
    double beta = ctx.task.number("beta", 1.0);
    auto ladder = ctx.task.numbers("eps_ladder", {1e-2, 1e-4, 1e-6});
    double tol = ctx.task.number("tolerance", 0.03);
    double vanish_max = ctx.task.number("vanishing_max", 1e-2);
    double support = ctx.task.number("support", 1.0);
    ctx.task.finish();
    for (double e : ladder)
        if (!(e > 0)) throw ConfigError("task.eps_ladder: positive values required");
    std::ostringstream csv;
    csv.precision(17);
    csv << "identity,eps,value,target,relative_gap\n";
    std::vector<double> kl;
    for (double e : ladder) {
        double v = kernel_limit_quadrature_scaled(bump, 1.0, {beta, e});
        kl.push_back(v);
        csv << "kernel_limit," << e << ',' << v << ",2," << std::abs(v - 2) / 2 << '\n';
    }
    bool monotone = true;
    for (size_t q = 1; q < kl.size(); ++q)
        if (std::abs(kl[q] - 2) > std::abs(kl[q - 1] - 2)) monotone = false;
    double final_gap = std::abs(kl.back() - 2) / 2;
    bool kernel_pass = monotone && final_gap <= tol;
    json vanish = json::object();
    bool vanish_pass = true;
    for (auto v : {VanishingVariant::First, VanishingVariant::Second}) {
        std::string name = v == VanishingVariant::First ? "vanishing_first" : "vanishing_second";
        std::vector<double> vals;
        for (double e : ladder) {
            double x = vanishing_integral_oct(v, support, e);
            vals.push_back(x);
            csv << name << ',' << e << ',' << x << ",0," << std::abs(x) << '\n';
        }
        bool dec = true;
        for (size_t q = 1; q < vals.size(); ++q)
            if (vals[q] > vals[q - 1]) dec = false;
        bool ok = dec && std::abs(vals.back()) <= vanish_max;
        vanish_pass = vanish_pass && ok;
        vanish[name] = {{"values", vals}, {"decreasing", dec}, {"pass", ok}};
    }
    Outcome o;
    o.report = report("check-limits", ctx, kl.back(), 0.0, static_cast<long>(ladder.size()), tol,
                      kernel_pass && vanish_pass,
                      {{"kernel_limit", {{"values", kl}, {"monotone", monotone}, {"final_gap", final_gap},
                                         {"pass", kernel_pass}}},
                       {"vanishing", vanish},
                       {"eps_ladder", ladder}});
    o.artifacts.push_back({"check_limits.csv", csv.str()});
    return o;
}

using Handler = std::function<Outcome(const Options&)>;

const std::map<std::string, Handler>& handlers() {
    static const std::map<std::string, Handler> h = {
        {"specfun-table", specfun_table},
        {"simulate", simulate},
        {"check-ito", [](const Options& o) { return residual_command(o, "check-ito", false); }},
        {"check-rn", [](const Options& o) { return residual_command(o, "check-rn", true); }},
        {"check-identities", check_identities},
        {"check-ntc", check_ntc},
        {"check-comparison", check_comparison},
        {"check-limits", check_limits},
        {"estimate-mass", estimate_mass},
        {"check-martingale", check_martingale},
    };
    return h;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    out << content;
}

}  // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {
        "specfun-table", "simulate",      "check-ito",   "check-rn",       "check-identities",
        "check-ntc",     "check-comparison", "check-limits", "estimate-mass", "check-martingale"};
    return names;
}

Outcome run(const std::string& command, const Options& opt) {
    auto it = handlers().find(command);
    if (it == handlers().end()) throw ConfigError("unknown subcommand '" + command + "'");
    return it->second(opt);
}

int dispatch(const std::string& command, const Options& opt, std::ostream& out, std::ostream& err) {
    Outcome o;
    try {
        o = run(command, opt);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const ParamError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const PathFailure& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const NumericalBlowup& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const SingularState& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const specfun::DomainError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 3;
    }
    const std::string text = o.report.dump(2) + "\n";
    if (!opt.out.empty()) {
        std::filesystem::path dir(opt.out);
        std::filesystem::create_directories(dir);
        write_file(dir / (command + ".json"), text);
        for (const auto& a : o.artifacts) write_file(dir / a.file, a.content);
        out << text;
    } else if (o.primary) {
        out << *o.primary;
    } else {
        out << text;
    }
    return o.report["pass"].get<bool>() ? 0 : 1;
}

}  // namespace manydelta::cli
