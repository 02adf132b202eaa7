#include "gtb/report.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "gtb/csv.hpp"

namespace gtb {

namespace {

using nlohmann::json;

struct RunData {
    std::string dir;
    json manifest;
    CsvTable metrics;
    CsvTable resources;
    CsvTable taxes;
    CsvTable curve;  // may be empty
    bool has_curve = false;

    std::string environment() const { return manifest.at("environment").get<std::string>(); }
    std::string objective() const { return manifest.at("objective").get<std::string>(); }
    int horizon() const { return manifest.at("horizon").get<int>(); }
};

RunData load_run(const std::string& dir) {
    RunData r;
    r.dir = dir;
    std::ifstream mf(dir + "/manifest.json");
    if (!mf) throw ConfigError("run directory has no manifest.json: " + dir);
    mf >> r.manifest;
    r.metrics = read_csv(dir + "/metrics.csv");
    r.resources = read_csv(dir + "/resources.csv");
    r.taxes = read_csv(dir + "/taxes.csv");
    if (std::filesystem::exists(dir + "/training_curve.csv")) {
        r.curve = read_csv(dir + "/training_curve.csv");
        r.has_curve = true;
    }
    return r;
}

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};

MeanSd pool(const std::vector<double>& xs) {
    MeanSd ms;
    if (xs.empty()) return ms;
    for (double x : xs) ms.mean += x;
    ms.mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - ms.mean) * (x - ms.mean);
    ms.sd = std::sqrt(var / static_cast<double>(xs.size()));
    return ms;
}

/// A single-run pool keeps the input's decimal text; otherwise the mean is
/// reformatted. Either way the values trace back to the run CSVs.
std::string pooled_cell(const std::vector<std::string>& raw, double value) {
    if (raw.size() == 1) return raw.front();
    return csv_num(value);
}

}  // namespace

void aggregate_runs(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    require(!run_dirs.empty(), "aggregate: at least one run directory required");
    std::vector<RunData> runs;
    runs.reserve(run_dirs.size());
    for (const std::string& d : run_dirs) runs.push_back(load_run(d));

    const int horizon = runs.front().horizon();
    for (const RunData& r : runs) {
        if (r.horizon() != horizon) {
            std::ostringstream msg;
            msg << "aggregate: mixed horizons (" << runs.front().dir << " has " << horizon
                << " steps, " << r.dir << " has " << r.horizon() << ")";
            throw ConfigError(msg.str());
        }
    }

    std::filesystem::create_directories(out_dir);

    // group run indices by environment, preserving input order
    std::map<std::string, std::vector<size_t>> by_env;
    std::vector<std::string> env_order;
    for (size_t i = 0; i < runs.size(); ++i) {
        const std::string env = runs[i].environment();
        if (!by_env.contains(env)) env_order.push_back(env);
        by_env[env].push_back(i);
    }

    {
        CsvWriter w(out_dir + "/pooled_metrics.csv",
                    "environment,step,productivity_mean,productivity_sd,equality_mean,"
                    "equality_sd,maximin_mean,maximin_sd,swf_mean,swf_sd");
        const std::vector<std::string> cols{"productivity", "equality", "maximin", "swf"};
        for (const std::string& env : env_order) {
            const auto& members = by_env[env];
            for (int t = 0; t < horizon; ++t) {
                std::vector<std::string> cells{env, std::to_string(t)};
                for (const std::string& col : cols) {
                    std::vector<std::string> raw;
                    std::vector<double> vals;
                    for (size_t m : members) {
                        const CsvTable& tab = runs[m].metrics;
                        const std::string& cell =
                            tab.rows[static_cast<size_t>(t)][static_cast<size_t>(tab.column(col))];
                        raw.push_back(cell);
                        vals.push_back(std::stod(cell));
                    }
                    MeanSd ms = pool(vals);
                    cells.push_back(pooled_cell(raw, ms.mean));
                    cells.push_back(csv_num(ms.sd));
                }
                std::string line;
                for (size_t i = 0; i < cells.size(); ++i)
                    line += (i ? "," : "") + cells[i];
                w.raw_row(line);
            }
        }
    }

    {
        CsvWriter w(out_dir + "/pooled_resources.csv",
                    "environment,step,resource,mean_units,sd_units");
        const std::vector<std::string> res{"wood", "stone", "iron"};
        for (const std::string& env : env_order) {
            const auto& members = by_env[env];
            for (int t = 0; t < horizon; ++t) {
                for (const std::string& col : res) {
                    std::vector<std::string> raw;
                    std::vector<double> vals;
                    for (size_t m : members) {
                        const CsvTable& tab = runs[m].resources;
                        const std::string& cell =
                            tab.rows[static_cast<size_t>(t)][static_cast<size_t>(tab.column(col))];
                        raw.push_back(cell);
                        vals.push_back(std::stod(cell));
                    }
                    MeanSd ms = pool(vals);
                    w.row(env, t, col, pooled_cell(raw, ms.mean), csv_num(ms.sd));
                }
            }
        }
    }

    {
        CsvWriter w(out_dir + "/tax_returns.csv",
                    "run,environment,objective,period,agent,pretax_income,tax,tax_return");
        for (size_t m = 0; m < runs.size(); ++m) {
            const CsvTable& tab = runs[m].taxes;
            const int c_period = tab.column("period");
            const int c_agent = tab.column("agent");
            const int c_income = tab.column("pretax_income");
            const int c_tax = tab.column("tax");
            const int c_ret = tab.column("tax_return");
            for (const auto& row : tab.rows)
                w.row(static_cast<int>(m), runs[m].environment(), runs[m].objective(),
                      row[static_cast<size_t>(c_period)], row[static_cast<size_t>(c_agent)],
                      row[static_cast<size_t>(c_income)], row[static_cast<size_t>(c_tax)],
                      row[static_cast<size_t>(c_ret)]);
        }
    }

    {
        CsvWriter w(out_dir + "/curves.csv",
                    "run,environment,objective,iteration,mean_agent_reward,mean_planner_reward");
        for (size_t m = 0; m < runs.size(); ++m) {
            if (!runs[m].has_curve) continue;
            const CsvTable& tab = runs[m].curve;
            const int c_iter = tab.column("iteration");
            const int c_ar = tab.column("mean_agent_reward");
            const int c_pr = tab.column("mean_planner_reward");
            for (const auto& row : tab.rows)
                w.row(static_cast<int>(m), runs[m].environment(), runs[m].objective(),
                      row[static_cast<size_t>(c_iter)], row[static_cast<size_t>(c_ar)],
                      row[static_cast<size_t>(c_pr)]);
        }
    }

    json manifest;
    manifest["runs"] = json::array();
    for (size_t m = 0; m < runs.size(); ++m) {
        manifest["runs"].push_back({{"index", m},
                                    {"dir", runs[m].dir},
                                    {"environment", runs[m].environment()},
                                    {"objective", runs[m].objective()}});
    }
    manifest["horizon"] = horizon;
    manifest["environments"] = env_order;
    std::ofstream mo(out_dir + "/aggregate_manifest.json");
    mo << manifest.dump(2) << "\n";
}

void write_plot_data(const std::string& aggregate_dir, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);

    {
        // fig4: resource levels per environment
        const CsvTable in = read_csv(aggregate_dir + "/pooled_resources.csv");
        CsvWriter w(out_dir + "/fig4.csv", "step,environment,resource,mean_units");
        const int c_env = in.column("environment");
        const int c_step = in.column("step");
        const int c_res = in.column("resource");
        const int c_mean = in.column("mean_units");
        for (const auto& row : in.rows)
            w.row(row[static_cast<size_t>(c_step)], row[static_cast<size_t>(c_env)],
                  row[static_cast<size_t>(c_res)], row[static_cast<size_t>(c_mean)]);
    }
    {
        // fig5: productivity/equality/maximin series per environment
        const CsvTable in = read_csv(aggregate_dir + "/pooled_metrics.csv");
        CsvWriter w(out_dir + "/fig5.csv", "step,environment,metric,mean_value,sd_value");
        const int c_env = in.column("environment");
        const int c_step = in.column("step");
        for (const std::string metric : {"productivity", "equality", "maximin"}) {
            const int c_mean = in.column(metric + "_mean");
            const int c_sd = in.column(metric + "_sd");
            for (const auto& row : in.rows)
                w.row(row[static_cast<size_t>(c_step)], row[static_cast<size_t>(c_env)], metric,
                      row[static_cast<size_t>(c_mean)], row[static_cast<size_t>(c_sd)]);
        }
    }
    {
        // fig6: per-run per-year tax returns
        const CsvTable in = read_csv(aggregate_dir + "/tax_returns.csv");
        CsvWriter w(out_dir + "/fig6.csv", "run,environment,objective,period,agent,tax_return");
        const int c_run = in.column("run");
        const int c_env = in.column("environment");
        const int c_obj = in.column("objective");
        const int c_period = in.column("period");
        const int c_agent = in.column("agent");
        const int c_ret = in.column("tax_return");
        for (const auto& row : in.rows)
            w.row(row[static_cast<size_t>(c_run)], row[static_cast<size_t>(c_env)],
                  row[static_cast<size_t>(c_obj)], row[static_cast<size_t>(c_period)],
                  row[static_cast<size_t>(c_agent)], row[static_cast<size_t>(c_ret)]);
    }
    {
        // fig10: training curves
        const CsvTable in = read_csv(aggregate_dir + "/curves.csv");
        CsvWriter w(out_dir + "/fig10.csv",
                    "run,environment,objective,iteration,mean_agent_reward,mean_planner_reward");
        if (!in.rows.empty()) {
            const int c_run = in.column("run");
            const int c_env = in.column("environment");
            const int c_obj = in.column("objective");
            const int c_iter = in.column("iteration");
            const int c_ar = in.column("mean_agent_reward");
            const int c_pr = in.column("mean_planner_reward");
            for (const auto& row : in.rows)
                w.row(row[static_cast<size_t>(c_run)], row[static_cast<size_t>(c_env)],
                      row[static_cast<size_t>(c_obj)], row[static_cast<size_t>(c_iter)],
                      row[static_cast<size_t>(c_ar)], row[static_cast<size_t>(c_pr)]);
        }
    }

    std::ofstream schema(out_dir + "/schema.md");
    schema << "# Plot data schemas\n\n"
           << "All files are tidy CSV; values are copied verbatim from the aggregate report.\n\n"
           << "## fig4.csv\n"
           << "`step, environment, resource, mean_units` - pooled per-step map totals of each\n"
           << "resource for the band and uniform environments.\n\n"
           << "## fig5.csv\n"
           << "`step, environment, metric, mean_value, sd_value` - pooled productivity,\n"
           << "equality, and maximin series per environment.\n\n"
           << "## fig6.csv\n"
           << "`run, environment, objective, period, agent, tax_return` - per-run, per-tax-year,\n"
           << "per-agent redistribution received, in grid order.\n\n"
           << "## fig10.csv\n"
           << "`run, environment, objective, iteration, mean_agent_reward, mean_planner_reward`\n"
           << "- training curves for the runs that were trained (empty for scripted runs).\n";
}

}  // namespace gtb
