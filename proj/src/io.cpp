#include "cflow/io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace cflow {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path)
{
    std::ofstream f(path);
    if (!f)
        throw Error(ErrorCode::IoError, "cannot write " + path);
    f.precision(17);
    return f;
}

json read_json(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw Error(ErrorCode::IoError, "cannot read " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::IoError, path + ": " + e.what());
    }
}

Vec to_vec(const json& j)
{
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(v.data(), Index(v.size()));
}

Vec2 to_vec2(const json& j)
{
    const Vec v = to_vec(j);
    if (v.size() != 2)
        throw Error(ErrorCode::ShapeError, "expected a 2-vector");
    return v;
}

json from_vec(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::vector<Vec2> to_points(const json& j)
{
    std::vector<Vec2> out;
    for (const json& p : j)
        out.push_back(to_vec2(p));
    return out;
}

json from_points(const std::vector<Vec2>& pts)
{
    json out = json::array();
    for (const Vec2& p : pts)
        out.push_back({p.x(), p.y()});
    return out;
}

template <typename T>
void take(const json& j, const char* key, T& dst)
{
    if (j.contains(key))
        dst = j.at(key).get<T>();
}

} // namespace

void write_dataset(const std::string& path, const std::vector<Trajectory>& trajs, const std::string& model)
{
    if (trajs.empty())
        throw Error(ErrorCode::EmptyPrior, "nothing to write");
    const Layout l = trajs.front().layout;
    auto f = open_out(path);
    for (const Trajectory& t : trajs) {
        if (!(t.layout == l))
            throw Error(ErrorCode::ShapeError, "dataset trajectories must share one layout");
        for (Index i = 0; i < t.data.size(); ++i)
            f << (i ? "," : "") << t.data(i);
        f << '\n';
    }
    json meta{{"H", l.H}, {"d_s", l.ds}, {"d_a", l.da}, {"count", trajs.size()}};
    if (!model.empty())
        meta["model"] = model;
    open_out(path + ".json") << meta.dump(2) << '\n';
}

std::vector<Trajectory> read_dataset(const std::string& path, std::string* model)
{
    const json meta = read_json(path + ".json");
    const Layout l{meta.at("H").get<int>(), meta.at("d_s").get<int>(), meta.at("d_a").get<int>()};
    if (model)
        *model = meta.value("model", std::string());
    std::ifstream f(path);
    if (!f)
        throw Error(ErrorCode::IoError, "cannot read " + path);
    std::vector<Trajectory> out;
    std::string line;
    int row = 0;
    while (std::getline(f, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            vals.push_back(std::stod(cell));
        if (Index(vals.size()) != l.dim())
            throw Error(ErrorCode::ShapeError, path + " row " + std::to_string(row) + ": expected "
                                                   + std::to_string(l.dim()) + " values, got "
                                                   + std::to_string(vals.size()));
        out.emplace_back(l, Eigen::Map<const Vec>(vals.data(), l.dim()));
    }
    return out;
}

Scene load_scene(const std::string& path)
{
    const json j = read_json(path);
    Scene s = j.contains("preset") ? scene_by_name(j.at("preset").get<std::string>()) : Scene{};
    try {
        take(j, "name", s.name);
        take(j, "model", s.model);
        take(j, "H", s.H);
        take(j, "w_ctrl", s.w_ctrl);
        take(j, "w_smooth", s.w_smooth);
        take(j, "infeasible_test", s.infeasible_test);
        if (j.contains("s_cur"))
            s.s_cur = to_vec(j.at("s_cur"));
        if (j.contains("action_bounds"))
            s.action_bounds = to_vec(j.at("action_bounds"));
        if (j.contains("goal"))
            s.goal = to_vec(j.at("goal"));
        if (j.contains("cost_Q"))
            s.cost_Q = to_vec(j.at("cost_Q"));
        if (j.contains("cost_R"))
            s.cost_R = to_vec(j.at("cost_R"));
        if (j.contains("ellipses")) {
            s.obstacles.ellipses.clear();
            for (const json& e : j.at("ellipses"))
                s.obstacles.ellipses.push_back(Ellipse{to_vec2(e.at("center")), to_vec2(e.at("axes")),
                                                       e.value("rotation_deg", 0.0) * std::numbers::pi / 180.0});
        }
        if (j.contains("walls")) {
            s.obstacles.walls.clear();
            for (const json& w : j.at("walls"))
                s.obstacles.walls.push_back(Wall{to_vec2(w.at("normal")).normalized(), w.at("offset").get<double>()});
        }
        if (j.contains("corridor")) {
            const json& c = j.at("corridor");
            s.obstacles.corridor = Corridor::from_boundaries(to_points(c.at("left")), to_points(c.at("right")));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::IoError, path + ": " + e.what());
    }
    return s;
}

void save_scene(const std::string& path, const Scene& s)
{
    json j{{"name", s.name}, {"model", s.model}, {"H", s.H}, {"w_ctrl", s.w_ctrl}, {"w_smooth", s.w_smooth}};
    if (s.infeasible_test)
        j["infeasible_test"] = true;
    if (s.s_cur.size())
        j["s_cur"] = from_vec(s.s_cur);
    if (s.action_bounds.size())
        j["action_bounds"] = from_vec(s.action_bounds);
    if (s.goal)
        j["goal"] = from_vec(*s.goal);
    if (s.cost_Q.size())
        j["cost_Q"] = from_vec(s.cost_Q);
    if (s.cost_R.size())
        j["cost_R"] = from_vec(s.cost_R);
    j["ellipses"] = json::array();
    for (const Ellipse& e : s.obstacles.ellipses)
        j["ellipses"].push_back({{"center", {e.center.x(), e.center.y()}},
                                 {"axes", {e.axes.x(), e.axes.y()}},
                                 {"rotation_deg", e.rotation * 180.0 / std::numbers::pi}});
    j["walls"] = json::array();
    for (const Wall& w : s.obstacles.walls)
        j["walls"].push_back({{"normal", {w.normal.x(), w.normal.y()}}, {"offset", w.offset}});
    if (s.obstacles.corridor)
        j["corridor"] = {{"left", from_points(s.obstacles.corridor->left.points())},
                         {"right", from_points(s.obstacles.corridor->right.points())}};
    open_out(path) << j.dump(2) << '\n';
}

PlannerConfig load_planner_config(const std::string& path, PlannerConfig c)
{
    const json j = read_json(path);
    try {
        take(j, "steps", c.steps);
        take(j, "t_pre", c.t_pre);
        take(j, "c_r", c.c_r);
        take(j, "c_gamma", c.c_gamma);
        take(j, "margin", c.margin);
        take(j, "c_pt", c.c_pt);
        take(j, "p_delta", c.p_delta);
        take(j, "p_u", c.p_u);
        take(j, "p_u_state", c.p_u_state);
        take(j, "p_u_action", c.p_u_action);
        take(j, "clamp_eps", c.clamp_eps);
        take(j, "step_cap", c.step_cap);
        take(j, "action_init_scale", c.action_init_scale);
        take(j, "conventional_pt", c.conventional_pt);
        take(j, "seed", c.seed);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::IoError, path + ": " + e.what());
    }
    if (c.t_pre > 1.0 || !(c.t_pre > 0.0))
        throw Error(ErrorCode::InvalidArgument, "t_pre must lie in (0, 1]");
    return c;
}

RefineConfig load_refine_config(const std::string& path, RefineConfig c)
{
    const json j = read_json(path);
    try {
        take(j, "pad", c.pad);
        take(j, "rec", c.rec);
        take(j, "max_outer", c.max_outer);
        take(j, "chunk", c.chunk);
        take(j, "safety_margin", c.safety_margin);
        take(j, "vio_std_fraction", c.vio_std_fraction);
        take(j, "frozen_std_fraction", c.frozen_std_fraction);
        if (j.contains("cem")) {
            const json& k = j.at("cem");
            take(k, "population", c.cem.population);
            take(k, "elites", c.cem.elites);
            take(k, "iterations", c.cem.iterations);
            take(k, "std_floor", c.cem.std_floor);
            take(k, "patience", c.cem.patience);
            take(k, "seed", c.cem.seed);
        }
        if (j.contains("weights")) {
            const json& w = j.at("weights");
            take(w, "obs", c.weights.obs);
            take(w, "trk", c.weights.trk);
            take(w, "rmse", c.weights.rmse);
            take(w, "term", c.weights.term);
            take(w, "smooth", c.weights.smooth);
            take(w, "end", c.weights.end);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::IoError, path + ": " + e.what());
    }
    return c;
}

void write_diagnostics_csv(const std::string& path, const std::vector<StepDiagnostics>& diag)
{
    auto f = open_out(path);
    f << "t,u_norm,max_rho,max_delta,g,max_h\n";
    for (const StepDiagnostics& d : diag)
        f << d.t << ',' << d.u_norm << ',' << d.max_rho << ',' << d.max_delta << ',' << d.g << ',' << d.max_h << '\n';
}

void write_refine_report(const std::string& path, const RefineReport& rep)
{
    json windows = json::array();
    for (const WindowPlan& p : rep.plans) {
        json w = json::array();
        for (const auto& [tag, win] : p.ordered())
            w.push_back({{"kind", std::string(1, tag)}, {"lo", win.lo}, {"hi", win.hi}});
        windows.push_back(w);
    }
    json j{{"success", rep.success},   {"outer_iterations", rep.outer_iterations},
           {"kc_f", rep.kc_f},         {"max_h", rep.max_h},
           {"failure", rep.failure},   {"windows", windows}};
    open_out(path) << j.dump(2) << '\n';
}

void write_plan_report(const std::string& path, const PlanResult& res)
{
    json j{{"certified", res.certified},
           {"g_final", res.g_final},
           {"h_max_final", res.h_max_final},
           {"steps", res.diagnostics.size()}};
    json r0 = json::array();
    for (const ZeroingSchedule& s : res.schedules)
        r0.push_back(s.r0());
    j["schedule_r0"] = r0;
    open_out(path) << j.dump(2) << '\n';
}

void write_metrics_json(const std::string& path, const MetricsReport& m, double median_time_ms)
{
    json j{{"sr_s", m.sr_s},   {"sr_a", m.sr_a}, {"ar", m.ar},
           {"tsr", m.tsr},     {"kc_f", m.kc_f}, {"kc_i", m.kc_i},
           {"kc_i_excluded", m.kc_i_excluded}, {"cost", m.cost},
           {"time_ms", m.time_ms}, {"median_time_ms", median_time_ms}, {"count", m.count}};
    open_out(path) << j.dump(2) << '\n';
}

} // namespace cflow
