#include "densteer/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "densteer/error.hpp"

namespace densteer {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

std::string type_name(const json& j) { return j.type_name(); }

// Reads members of one JSON object and remembers which keys were consumed.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ValidationError(where() + ": expected an object, got " + type_name(j_));
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        return as_number(raw(key), join(path_, key));
    }

    double number(const std::string& key) {
        require(key);
        return as_number(raw(key), join(path_, key));
    }

    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_number_integer()) {
            throw ValidationError(join(path_, key) + ": expected an integer, got " + type_name(v));
        }
        return v.get<std::int64_t>();
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_number_unsigned()) {
            throw ValidationError(join(path_, key) + ": expected a nonnegative integer, got " + type_name(v));
        }
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_boolean()) throw ValidationError(join(path_, key) + ": expected a boolean, got " + type_name(v));
        return v.get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        return as_string(key);
    }

    std::string string(const std::string& key) {
        require(key);
        return as_string(key);
    }

    std::vector<double> numbers(const std::string& key) {
        require(key);
        const json& v = raw(key);
        if (!v.is_array()) throw ValidationError(join(path_, key) + ": expected an array, got " + type_name(v));
        std::vector<double> out;
        for (std::size_t k = 0; k < v.size(); ++k) {
            out.push_back(as_number(v[k], join(path_, key) + "[" + std::to_string(k) + "]"));
        }
        return out;
    }

    ObjectReader object(const std::string& key) { return ObjectReader(raw(key), join(path_, key)); }

    std::string child(const std::string& key) const { return join(path_, key); }
    std::string where() const { return path_.empty() ? "config" : path_; }

    void require(const std::string& key) const {
        if (!has(key)) throw ValidationError(join(path_, key) + ": required field is missing");
    }

    /// Rejects every key that was never read.
    void finish() const {
        for (const auto& item : j_.items()) {
            if (!used_.count(item.key())) throw ValidationError(join(path_, item.key()) + ": unknown key");
        }
    }

private:
    static double as_number(const json& v, const std::string& field) {
        if (!v.is_number()) throw ValidationError(field + ": expected a number, got " + type_name(v));
        return v.get<double>();
    }

    std::string as_string(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_string()) throw ValidationError(join(path_, key) + ": expected a string, got " + type_name(v));
        return v.get<std::string>();
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

PiecewiseSchedule parse_schedule(const json& j, const std::string& field, const std::string& value_key) {
    if (!j.is_array()) throw ValidationError(field + ": expected an array of segments");
    std::vector<PiecewiseSchedule::Segment> segments;
    for (std::size_t k = 0; k < j.size(); ++k) {
        ObjectReader seg(j[k], field + "[" + std::to_string(k) + "]");
        segments.push_back({seg.number("t_start"), seg.number("t_end"), seg.number(value_key)});
        seg.finish();
    }
    try {
        return PiecewiseSchedule(std::move(segments));
    } catch (const ValidationError& e) {
        throw ValidationError(field + ": " + e.what());
    }
}

ordered_json schedule_json(const PiecewiseSchedule& s, const std::string& value_key) {
    ordered_json arr = ordered_json::array();
    for (const auto& seg : s.segments()) {
        arr.push_back({{"t_start", seg.t_start}, {"t_end", seg.t_end}, {value_key, seg.value}});
    }
    return arr;
}

NormalTarget parse_normal(ObjectReader& r) { return {r.number("mean"), r.number("sd")}; }

TargetDistribution parse_target(ObjectReader r) {
    const std::string type = r.string("type");
    TargetDistribution out;
    if (type == "normal") {
        out = parse_normal(r);
    } else if (type == "mixture") {
        r.require("components");
        const json& comps = r.raw("components");
        if (!comps.is_array()) throw ValidationError(r.child("components") + ": expected an array");
        MixtureTarget m;
        for (std::size_t k = 0; k < comps.size(); ++k) {
            ObjectReader c(comps[k], r.child("components") + "[" + std::to_string(k) + "]");
            const double weight = c.number("weight");
            m.components.push_back({weight, parse_normal(c)});
            c.finish();
        }
        out = m;
    } else if (type == "weibull") {
        out = WeibullTarget{r.number("shape"), r.number("scale")};
    } else if (type == "tabulated") {
        TabulatedTarget t;
        t.nodes = r.numbers("nodes");
        t.values = r.numbers("values");
        out = t;
    } else if (type == "point_mass") {
        out = PointMassTarget{r.number("location")};
    } else {
        throw ValidationError(r.child("type") + ": unknown target type '" + type +
                              "' (normal, mixture, weibull, tabulated, point_mass)");
    }
    r.finish();
    return out;
}

ordered_json target_json(const TargetDistribution& target) {
    return std::visit(
        [](const auto& t) -> ordered_json {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, NormalTarget>) {
                return {{"type", "normal"}, {"mean", t.mean}, {"sd", t.sd}};
            } else if constexpr (std::is_same_v<T, MixtureTarget>) {
                ordered_json comps = ordered_json::array();
                for (const auto& c : t.components) {
                    comps.push_back({{"weight", c.weight}, {"mean", c.normal.mean}, {"sd", c.normal.sd}});
                }
                return {{"type", "mixture"}, {"components", comps}};
            } else if constexpr (std::is_same_v<T, WeibullTarget>) {
                return {{"type", "weibull"}, {"shape", t.shape}, {"scale", t.scale}};
            } else if constexpr (std::is_same_v<T, TabulatedTarget>) {
                return {{"type", "tabulated"}, {"nodes", t.nodes}, {"values", t.values}};
            } else {
                return {{"type", "point_mass"}, {"location", t.location}};
            }
        },
        target);
}

CostSpec parse_cost(ObjectReader r) {
    CostSpec cost;
    if (r.has("box")) {
        ObjectReader b = r.object("box");
        cost.box.a_max = b.number("a_max", cost.box.a_max);
        cost.box.b_min = b.number("b_min", cost.box.b_min);
        cost.box.b_max = b.number("b_max", cost.box.b_max);
        b.finish();
    }
    const std::string type = r.string("type", "quadratic_shift");
    if (type == "quadratic_shift") {
        QuadraticShift q;
        q.a_center = r.number("a_center", q.a_center);
        q.b_center = r.number("b_center", q.b_center);
        cost.kind = q;
    } else if (type == "cash_input") {
        CashInputPiecewise c;
        c.w = r.number("w", c.w);
        c.l = r.number("l", c.l);
        if (r.has("K") && r.has("K_schedule")) {
            throw ValidationError(r.child("K") + ": give either K or K_schedule, not both");
        }
        if (r.has("K")) {
            c.k_schedule = PiecewiseSchedule::constant(r.number("K"));
        } else if (r.has("K_schedule")) {
            c.k_schedule = parse_schedule(r.raw("K_schedule"), r.child("K_schedule"), "K");
        }
        cost.kind = c;
    } else {
        throw ValidationError(r.child("type") + ": unknown cost type '" + type + "' (quadratic_shift, cash_input)");
    }
    r.finish();
    return cost;
}

ordered_json cost_json(const CostSpec& cost) {
    ordered_json j;
    if (const auto* q = std::get_if<QuadraticShift>(&cost.kind)) {
        j["type"] = "quadratic_shift";
        j["a_center"] = q->a_center;
        j["b_center"] = q->b_center;
    } else {
        const auto& c = std::get<CashInputPiecewise>(cost.kind);
        j["type"] = "cash_input";
        j["w"] = c.w;
        j["l"] = c.l;
        j["K_schedule"] = schedule_json(c.k_schedule, "K");
    }
    j["box"] = {{"a_max", cost.box.a_max}, {"b_min", cost.box.b_min}, {"b_max", cost.box.b_max}};
    return j;
}

PenaltySpec parse_penalty(ObjectReader r) {
    const std::string type = r.string("type");
    PenaltySpec out;
    if (type == "indicator") {
        out = Indicator{};
    } else if (type == "l2") {
        out = SquaredL2{r.number("lambda")};
    } else if (type == "kl") {
        out = KullbackLeibler{r.number("lambda")};
    } else {
        throw ValidationError(r.child("type") + ": unknown penalty type '" + type + "' (indicator, l2, kl)");
    }
    r.finish();
    return out;
}

ordered_json penalty_json(const PenaltySpec& p) {
    if (const auto* l2 = std::get_if<SquaredL2>(&p)) return {{"type", "l2"}, {"lambda", l2->lambda}};
    if (const auto* kl = std::get_if<KullbackLeibler>(&p)) return {{"type", "kl"}, {"lambda", kl->lambda}};
    return {{"type", "indicator"}};
}

template <typename F>
void with_prefix(const std::string& prefix, F&& f) {
    try {
        f();
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        if (msg.rfind(prefix, 0) == 0) throw;
        throw ValidationError(prefix + ": " + msg);
    }
}

int line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
        throw ValidationError("parse error at line " + std::to_string(line_of_offset(text, offset)) + ": " +
                              e.what());
    }

    ExperimentConfig c;
    ObjectReader r(root, "");
    c.name = r.string("name", c.name);

    if (r.has("grid")) {
        ObjectReader g = r.object("grid");
        c.grid.x_min = g.number("x_min", c.grid.x_min);
        c.grid.x_max = g.number("x_max", c.grid.x_max);
        c.grid.M = g.integer("M", c.grid.M);
        c.grid.N = g.integer("N", c.grid.N);
        g.finish();
    }
    if (r.has("market")) {
        ObjectReader m = r.object("market");
        c.market.mu = m.number("mu", c.market.mu);
        c.market.sigma = m.number("sigma", c.market.sigma);
        if (m.has("nu_schedule")) {
            c.market.nu_schedule = parse_schedule(m.raw("nu_schedule"), m.child("nu_schedule"), "value");
        }
        m.finish();
    }
    if (r.has("initial")) {
        ObjectReader i = r.object("initial");
        c.initial.x0 = i.number("x0", c.initial.x0);
        c.initial.mollifier_width = i.number("mollifier_width", c.initial.mollifier_width);
        i.finish();
    }
    if (r.has("target")) c.target = parse_target(r.object("target"));
    if (r.has("cost")) c.cost = parse_cost(r.object("cost"));
    if (r.has("penalty")) c.penalty = parse_penalty(r.object("penalty"));
    if (r.has("solver")) {
        ObjectReader s = r.object("solver");
        c.hjb.fp_tol = s.number("fp_tol", c.hjb.fp_tol);
        c.hjb.fp_max_iter = static_cast<int>(s.integer("fp_max_iter", c.hjb.fp_max_iter));
        const std::string scheme = s.string("fp_scheme", "adjoint");
        if (scheme == "adjoint") {
            c.fp.scheme = FpScheme::Adjoint;
        } else if (scheme == "explicit") {
            c.fp.scheme = FpScheme::Explicit;
        } else {
            throw ValidationError(s.child("fp_scheme") + ": expected 'adjoint' or 'explicit'");
        }
        const std::string stencil = s.string("drift_stencil", "central_guarded");
        if (stencil == "central_guarded") {
            c.hjb.stencil = DriftStencil::CentralGuarded;
        } else if (stencil == "upwind") {
            c.hjb.stencil = DriftStencil::Upwind;
        } else if (stencil == "central") {
            c.hjb.stencil = DriftStencil::Central;
        } else {
            throw ValidationError(s.child("drift_stencil") + ": expected 'central_guarded', 'upwind' or 'central'");
        }
        c.fp.stencil = c.hjb.stencil;
        const std::string cfl = s.string("cfl", "substep");
        if (cfl == "substep") {
            c.fp.cfl = CflMode::Substep;
        } else if (cfl == "reject") {
            c.fp.cfl = CflMode::Reject;
        } else {
            throw ValidationError(s.child("cfl") + ": expected 'substep' or 'reject'");
        }
        c.fp.cfl_safety = s.number("cfl_safety", c.fp.cfl_safety);
        c.fp.neg_tol = s.number("neg_tol", c.fp.neg_tol);
        s.finish();
    }
    if (r.has("optimizer")) {
        ObjectReader o = r.object("optimizer");
        auto& opt = c.optimizer;
        opt.grad_tol = o.number("grad_tol", opt.grad_tol);
        opt.max_outer_iter = static_cast<int>(o.integer("max_outer_iter", opt.max_outer_iter));
        opt.memory = static_cast<int>(o.integer("memory", opt.memory));
        opt.armijo_c1 = o.number("armijo_c1", opt.armijo_c1);
        opt.max_backtracks = static_cast<int>(o.integer("max_backtracks", opt.max_backtracks));
        opt.initial_step = o.number("initial_step", opt.initial_step);
        opt.use_preconditioner = o.boolean("use_preconditioner", opt.use_preconditioner);
        opt.precond_floor = o.number("precond_floor", opt.precond_floor);
        opt.precond_shift = o.number("precond_shift", opt.precond_shift);
        opt.indicator_continuation = o.boolean("indicator_continuation", opt.indicator_continuation);
        opt.continuation_lambda0 = o.number("continuation_lambda0", opt.continuation_lambda0);
        opt.continuation_factor = o.number("continuation_factor", opt.continuation_factor);
        opt.continuation_max_lambda = o.number("continuation_max_lambda", opt.continuation_max_lambda);
        o.finish();
    }
    if (r.has("montecarlo")) {
        ObjectReader m = r.object("montecarlo");
        c.montecarlo.enabled = m.boolean("enabled", c.montecarlo.enabled);
        c.montecarlo.n_paths = m.integer("n_paths", c.montecarlo.n_paths);
        c.montecarlo.seed = m.unsigned_integer("seed", c.montecarlo.seed);
        m.finish();
    }
    if (r.has("output")) {
        ObjectReader o = r.object("output");
        c.output.directory = o.string("directory", c.output.directory);
        c.output.snapshot_stride = static_cast<int>(o.integer("snapshot_stride", c.output.snapshot_stride));
        o.finish();
    }
    r.finish();
    validate_config(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void validate_config(const ExperimentConfig& c) {
    with_prefix("grid", [&] { make_grid(c.grid.x_min, c.grid.x_max, c.grid.M, c.grid.N); });
    const Grid grid = make_grid(c.grid.x_min, c.grid.x_max, c.grid.M, c.grid.N);
    c.market.validate();
    if (!(c.initial.x0 >= grid.x_min && c.initial.x0 <= grid.x_max)) {
        throw ValidationError("initial.x0: must lie inside [grid.x_min, grid.x_max]");
    }
    if (!(c.initial.mollifier_width >= 0.0) || !std::isfinite(c.initial.mollifier_width)) {
        throw ValidationError("initial.mollifier_width: must be >= 0");
    }
    validate_target(c.target);
    target_density(c.target, grid);
    c.cost.validate();
    validate_penalty(c.penalty);
    if (!(c.hjb.fp_tol > 0.0)) throw ValidationError("solver.fp_tol: must be > 0");
    if (c.hjb.fp_max_iter < 1) throw ValidationError("solver.fp_max_iter: must be >= 1");
    if (!(c.fp.cfl_safety > 0.0 && c.fp.cfl_safety <= 1.0)) {
        throw ValidationError("solver.cfl_safety: must lie in (0, 1]");
    }
    if (!(c.fp.neg_tol >= 0.0)) throw ValidationError("solver.neg_tol: must be >= 0");
    const auto& o = c.optimizer;
    if (!(o.grad_tol > 0.0)) throw ValidationError("optimizer.grad_tol: must be > 0");
    if (o.max_outer_iter < 1) throw ValidationError("optimizer.max_outer_iter: must be >= 1");
    if (o.memory < 1) throw ValidationError("optimizer.memory: must be >= 1");
    if (!(o.armijo_c1 > 0.0 && o.armijo_c1 < 1.0)) throw ValidationError("optimizer.armijo_c1: must lie in (0, 1)");
    if (o.max_backtracks < 0) throw ValidationError("optimizer.max_backtracks: must be >= 0");
    if (!(o.initial_step > 0.0)) throw ValidationError("optimizer.initial_step: must be > 0");
    if (!(o.precond_floor > 0.0)) throw ValidationError("optimizer.precond_floor: must be > 0");
    if (!(o.precond_shift > 0.0)) throw ValidationError("optimizer.precond_shift: must be > 0");
    if (!(o.continuation_lambda0 > 0.0)) throw ValidationError("optimizer.continuation_lambda0: must be > 0");
    if (!(o.continuation_factor > 1.0)) throw ValidationError("optimizer.continuation_factor: must be > 1");
    if (!(o.continuation_max_lambda > 0.0)) {
        throw ValidationError("optimizer.continuation_max_lambda: must be > 0");
    }
    if (c.montecarlo.n_paths < 1) throw ValidationError("montecarlo.n_paths: must be >= 1");
    if (c.output.snapshot_stride < 1) throw ValidationError("output.snapshot_stride: must be >= 1");
    if (c.output.directory.empty()) throw ValidationError("output.directory: must be nonempty");
}

ordered_json to_json(const ExperimentConfig& c) {
    ordered_json j;
    j["name"] = c.name;
    j["grid"] = {{"x_min", c.grid.x_min}, {"x_max", c.grid.x_max}, {"M", c.grid.M}, {"N", c.grid.N}};
    j["market"] = {{"mu", c.market.mu}, {"sigma", c.market.sigma}};
    if (c.market.nu_schedule) j["market"]["nu_schedule"] = schedule_json(*c.market.nu_schedule, "value");
    j["initial"] = {{"x0", c.initial.x0}, {"mollifier_width", c.initial.mollifier_width}};
    j["target"] = target_json(c.target);
    j["cost"] = cost_json(c.cost);
    j["penalty"] = penalty_json(c.penalty);
    j["solver"] = {{"fp_tol", c.hjb.fp_tol},
                   {"fp_max_iter", c.hjb.fp_max_iter},
                   {"drift_stencil", to_string(c.hjb.stencil)},
                   {"fp_scheme", c.fp.scheme == FpScheme::Adjoint ? "adjoint" : "explicit"},
                   {"cfl", c.fp.cfl == CflMode::Substep ? "substep" : "reject"},
                   {"cfl_safety", c.fp.cfl_safety},
                   {"neg_tol", c.fp.neg_tol}};
    const auto& o = c.optimizer;
    j["optimizer"] = {{"grad_tol", o.grad_tol},         {"max_outer_iter", o.max_outer_iter},
                      {"memory", o.memory},             {"armijo_c1", o.armijo_c1},
                      {"max_backtracks", o.max_backtracks}, {"initial_step", o.initial_step},
                      {"use_preconditioner", o.use_preconditioner}, {"precond_floor", o.precond_floor},
                      {"precond_shift", o.precond_shift},
                      {"indicator_continuation", o.indicator_continuation},
                      {"continuation_lambda0", o.continuation_lambda0},
                      {"continuation_factor", o.continuation_factor},
                      {"continuation_max_lambda", o.continuation_max_lambda}};
    j["montecarlo"] = {{"enabled", c.montecarlo.enabled}, {"n_paths", c.montecarlo.n_paths},
                       {"seed", c.montecarlo.seed}};
    j["output"] = {{"directory", c.output.directory}, {"snapshot_stride", c.output.snapshot_stride}};
    return j;
}

Problem make_problem(const ExperimentConfig& c) {
    Problem p;
    p.grid = make_grid(c.grid.x_min, c.grid.x_max, c.grid.M, c.grid.N);
    p.market = c.market;
    p.cost = c.cost;
    p.penalty = c.penalty;
    p.rho0 = initial_density(c.initial.x0, p.grid, c.initial.mollifier_width);
    p.target = target_density(c.target, p.grid);
    p.hjb = c.hjb;
    p.fp = c.fp;
    return p;
}

}  // namespace densteer
