#include "cflow/bench.hpp"
#include "cflow/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace cflow;

namespace {

Scene resolve_scene(const std::string& arg)
{
    return std::filesystem::exists(arg) ? load_scene(arg) : scene_by_name(arg);
}

void write_traj(const std::string& path, const Trajectory& t, const std::string& model)
{
    write_dataset(path, {t}, model);
}

void print_metrics(const MetricsReport& m, double median_ms)
{
    std::cout << "SR-S " << m.sr_s << "  SR-A " << m.sr_a << "  AR " << m.ar << "  TSR " << m.tsr << "\n"
              << "KC-F " << m.kc_f << "  KC-I " << m.kc_i << " (" << m.kc_i_excluded << " steps excluded)\n"
              << "cost " << m.cost << "  mean ms " << m.time_ms << "  median ms " << median_ms << "\n";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Constrained flow-matching trajectory planner"};
    app.require_subcommand(1);

    // dataset
    auto* ds = app.add_subcommand("dataset", "Generate an MPC dataset for a scene");
    std::string ds_scene = "pendulum", ds_out = "data.csv";
    DatasetConfig ds_cfg;
    ds->add_option("--scene", ds_scene, "Scene name or JSON file");
    ds->add_option("--count", ds_cfg.count, "Number of trajectories");
    ds->add_option("--seed", ds_cfg.seed, "RNG seed");
    ds->add_option("--out", ds_out, "Output CSV");

    // plan
    auto* pl = app.add_subcommand("plan", "Guided sampling of one trajectory");
    std::string pl_mode = "traj", pl_scene, pl_prior, pl_out = "traj.csv", pl_report, pl_config, pl_diag;
    std::string pl_kind = "gmm";
    double pl_sigma = 0.1;
    pl->add_option("--mode", pl_mode, "traj | path | gpc");
    pl->add_option("--scene", pl_scene, "Scene name or JSON file")->required();
    pl->add_option("--prior", pl_prior, "Dataset CSV")->required();
    pl->add_option("--prior-kind", pl_kind, "gmm | empirical");
    pl->add_option("--sigma", pl_sigma, "Mixture component scale");
    pl->add_option("--out", pl_out, "Output trajectory CSV");
    pl->add_option("--report", pl_report, "Output JSON report");
    pl->add_option("--config", pl_config, "Planner JSON config");
    pl->add_option("--diagnostics", pl_diag, "Per-step CSV");

    // refine
    auto* rf = app.add_subcommand("refine", "Repair a trajectory with windowed CEM");
    std::string rf_traj, rf_scene, rf_out = "refined.csv", rf_report, rf_config;
    rf->add_option("--traj", rf_traj, "Trajectory CSV")->required();
    rf->add_option("--scene", rf_scene, "Scene name or JSON file")->required();
    rf->add_option("--out", rf_out, "Output trajectory CSV");
    rf->add_option("--report", rf_report, "Output JSON report");
    rf->add_option("--config", rf_config, "Refinement JSON config");

    // bench
    auto* bn = app.add_subcommand("bench", "Run the sample-guide-refine-score pipeline");
    std::string bn_scene = "pendulum", bn_prior, bn_dir = ".", bn_mode = "traj", bn_config, bn_rconfig;
    BenchConfig bn_cfg;
    int bn_count = 48;
    bn->add_option("--scene", bn_scene, "Scene name or JSON file");
    bn->add_option("--prior", bn_prior, "Dataset CSV; generated when omitted");
    bn->add_option("--dataset-count", bn_count, "Trajectories to generate when --prior is omitted");
    bn->add_option("--mode", bn_mode, "traj | path | gpc");
    bn->add_option("--trials", bn_cfg.trials, "Number of trials");
    bn->add_option("--seed", bn_cfg.seed, "RNG seed");
    bn->add_option("--sigma", bn_cfg.prior_sigma, "Mixture component scale");
    bn->add_option("--config", bn_config, "Planner JSON config");
    bn->add_option("--refine-config", bn_rconfig, "Refinement JSON config");
    bn->add_option("--out-dir", bn_dir, "Output directory");

    // figs
    auto* fg = app.add_subcommand("figs", "Emit r(t) curves and PTZF vs conventional guidance traces");
    std::string fg_dir = ".";
    std::uint64_t fg_seed = 0;
    fg->add_option("--out-dir", fg_dir, "Output directory");
    fg->add_option("--seed", fg_seed, "RNG seed for the guidance comparison");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ds) {
            const Scene sc = resolve_scene(ds_scene);
            const DynamicsModel m = make_model(sc.model);
            const DatasetResult r = make_dataset(sc, m, ds_cfg);
            write_dataset(ds_out, r.trajectories, sc.model);
            std::cout << "kept " << r.trajectories.size() << " of " << r.attempts << " rollouts (dropped "
                      << r.dropped << ")\n";
        } else if (*pl) {
            const Scene sc = resolve_scene(pl_scene);
            const DynamicsModel m = make_model(sc.model);
            const PlanMode mode = parse_plan_mode(pl_mode);
            const PlannerConfig cfg = pl_config.empty() ? PlannerConfig{} : load_planner_config(pl_config);
            const VelocityField prior = make_prior(mode, read_dataset(pl_prior), pl_kind, pl_sigma, cfg.clamp_eps);
            const PlanResult r = plan(mode, sc, m, prior, cfg);
            write_traj(pl_out, r.traj, sc.model);
            if (!pl_report.empty())
                write_plan_report(pl_report, r);
            if (!pl_diag.empty())
                write_diagnostics_csv(pl_diag, r.diagnostics);
            std::cout << (r.certified ? "certified" : "not certified") << ": g = " << r.g_final
                      << ", max h = " << r.h_max_final << "\n";
        } else if (*rf) {
            const Scene sc = resolve_scene(rf_scene);
            const DynamicsModel m = make_model(sc.model);
            const RefineConfig cfg = rf_config.empty() ? RefineConfig{} : load_refine_config(rf_config);
            const std::vector<Trajectory> in = read_dataset(rf_traj);
            if (in.size() != 1)
                throw Error(ErrorCode::ShapeError, "expected exactly one trajectory in " + rf_traj);
            const RefineReport r = refine(in.front(), sc, m, cfg);
            write_traj(rf_out, r.traj, sc.model);
            if (!rf_report.empty())
                write_refine_report(rf_report, r);
            std::cout << "refined in " << r.outer_iterations << " passes, KC-F " << r.kc_f << "\n";
        } else if (*bn) {
            const Scene sc = resolve_scene(bn_scene);
            const DynamicsModel m = make_model(sc.model);
            bn_cfg.mode = parse_plan_mode(bn_mode);
            if (!bn_config.empty())
                bn_cfg.planner = load_planner_config(bn_config);
            if (!bn_rconfig.empty())
                bn_cfg.refine = load_refine_config(bn_rconfig);
            std::filesystem::create_directories(bn_dir);
            std::vector<Trajectory> data;
            if (bn_prior.empty()) {
                Scene free = sc;
                if (sc.name == "car")
                    free = car_scene(sc.H, false);
                DatasetConfig dc;
                dc.count = bn_count;
                dc.seed = bn_cfg.seed + 1;
                const DatasetResult r = make_dataset(free, m, dc);
                std::cout << "dataset: kept " << r.trajectories.size() << " of " << r.attempts << "\n";
                data = r.trajectories;
                write_dataset(bn_dir + "/dataset.csv", data, sc.model);
            } else {
                data = read_dataset(bn_prior);
            }
            const BenchReport rep = bench_run(sc, m, data, bn_cfg);
            write_trials_csv(bn_dir + "/trials.csv", rep);
            write_metrics_json(bn_dir + "/metrics.json", rep.metrics, rep.median_time_ms);
            write_dataset(bn_dir + "/outputs.csv", rep.outputs, sc.model);
            print_metrics(rep.metrics, rep.median_time_ms);
        } else if (*fg) {
            std::filesystem::create_directories(fg_dir);
            const std::vector<double> rates{0.5, 1.0, 2.0, 3.0};
            const ScheduleCurves c = schedule_curves(1.0, rates, 501, 2000);
            {
                std::ofstream f(fg_dir + "/r_curves.csv");
                f.precision(12);
                f << "t";
                for (double g : rates)
                    f << ",closed_" << g << ",numeric_" << g;
                f << "\n";
                for (size_t i = 0; i < c.t.size(); ++i) {
                    f << c.t[i];
                    for (Index j = 0; j < Index(rates.size()); ++j)
                        f << ',' << c.closed(Index(i), j) << ',' << c.numeric(Index(i), j);
                    f << "\n";
                }
            }
            const GuidanceComparison cmp = compare_ptzf_conventional(fg_seed);
            write_diagnostics_csv(fg_dir + "/ptzf_trace.csv", cmp.ptzf.diagnostics);
            write_diagnostics_csv(fg_dir + "/conventional_trace.csv", cmp.conventional.diagnostics);
            std::cout << "max ||u|| on [0, " << cmp.c_r << "]: PTZF " << cmp.max_u_ptzf_early << ", conventional "
                      << cmp.max_u_conventional_early << "\n";
        }
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return e.code() == ErrorCode::RefinementFailed ? 3 : 1;
    }
    return 0;
}
