#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace amrvit {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
    int n = 0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd out;
    out.n = static_cast<int>(xs.size());
    if (xs.empty()) return out;
    for (double x : xs) out.mean += x;
    out.mean /= xs.size();
    if (xs.size() > 1) {
        double acc = 0.0;
        for (double x : xs) acc += (x - out.mean) * (x - out.mean);
        out.std = std::sqrt(acc / (xs.size() - 1));
    }
    return out;
}

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("report: cannot open " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace detail

// Per-run metrics pulled from one evaluation output directory.
struct RunMetrics {
    double overall = 0.0;
    std::map<int, double> per_class;      // class_id -> accuracy
    std::map<int, std::string> class_names;
    std::map<int, double> per_snr;        // snr_db -> accuracy
};

inline RunMetrics load_run_metrics(const std::string& dir) {
    RunMetrics m;
    const auto overall = detail::read_csv(dir + "/overall.csv");
    if (overall.size() < 2 || overall[1].empty())
        throw std::runtime_error("report: malformed overall.csv in " + dir);
    m.overall = std::stod(overall[1][0]);
    const auto class_rows = detail::read_csv(dir + "/per_class.csv");
    for (size_t r = 1; r < class_rows.size(); ++r) {
        const auto& row = class_rows[r];
        if (row.size() < 3) continue;
        const int id = std::stoi(row[0]);
        m.class_names[id] = row[1];
        m.per_class[id] = std::stod(row[2]);
    }
    for (const auto& row : detail::read_csv(dir + "/per_snr.csv"))
        if (!row.empty() && row[0] != "snr_db" && row.size() >= 2) m.per_snr[std::stoi(row[0])] = std::stod(row[1]);
    return m;
}

struct AggregateReport {
    MeanStd overall;
    std::map<int, MeanStd> per_class;
    std::map<int, std::string> class_names;
    std::map<int, MeanStd> per_snr;
    std::vector<RunMetrics> runs;
};

inline AggregateReport aggregate_runs(const std::vector<std::string>& run_dirs) {
    if (run_dirs.empty()) throw std::invalid_argument("report: no run directories given");
    AggregateReport agg;
    for (const auto& dir : run_dirs) agg.runs.push_back(load_run_metrics(dir));

    std::vector<double> overall;
    std::map<int, std::vector<double>> per_class, per_snr;
    for (const auto& run : agg.runs) {
        overall.push_back(run.overall);
        for (const auto& [id, acc] : run.per_class) per_class[id].push_back(acc);
        for (const auto& [snr, acc] : run.per_snr) per_snr[snr].push_back(acc);
        for (const auto& [id, name] : run.class_names) agg.class_names[id] = name;
    }
    agg.overall = mean_std(overall);
    for (const auto& [id, xs] : per_class) agg.per_class[id] = mean_std(xs);
    for (const auto& [snr, xs] : per_snr) agg.per_snr[snr] = mean_std(xs);
    return agg;
}

// Line chart of accuracy vs SNR: one light line per run plus the bold mean.
inline void write_snr_svg(const AggregateReport& agg, const std::string& path) {
    if (agg.per_snr.empty()) throw std::invalid_argument("write_snr_svg: no per-SNR data");
    const double width = 640, height = 420, ml = 60, mr = 20, mt = 30, mb = 50;
    const double pw = width - ml - mr, ph = height - mt - mb;
    std::vector<int> levels;
    for (const auto& [snr, _] : agg.per_snr) levels.push_back(snr);
    const double lo = levels.front(), hi = levels.back();
    const auto sx = [&](double snr) { return ml + (hi > lo ? (snr - lo) / (hi - lo) : 0.5) * pw; };
    const auto sy = [&](double acc) { return mt + (1.0 - acc) * ph; };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_snr_svg: cannot open " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "' viewBox='0 0 " << width << " " << height << "'>\n"
        << "<rect width='100%' height='100%' fill='white'/>\n";
    // axes
    out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << mt + ph
        << "' stroke='black'/>\n"
        << "<line x1='" << ml << "' y1='" << mt + ph << "' x2='" << ml + pw << "' y2='" << mt + ph
        << "' stroke='black'/>\n";
    for (int t = 0; t <= 10; t += 2) {
        const double acc = t / 10.0;
        out << "<line x1='" << ml - 4 << "' y1='" << sy(acc) << "' x2='" << ml << "' y2='" << sy(acc)
            << "' stroke='black'/>\n"
            << "<text x='" << ml - 8 << "' y='" << sy(acc) + 4
            << "' font-size='11' text-anchor='end' font-family='sans-serif'>" << acc << "</text>\n"
            << "<line x1='" << ml << "' y1='" << sy(acc) << "' x2='" << ml + pw << "' y2='" << sy(acc)
            << "' stroke='#dddddd'/>\n";
    }
    for (int snr : levels)
        out << "<line x1='" << sx(snr) << "' y1='" << mt + ph << "' x2='" << sx(snr) << "' y2='" << mt + ph + 4
            << "' stroke='black'/>\n"
            << "<text x='" << sx(snr) << "' y='" << mt + ph + 18
            << "' font-size='11' text-anchor='middle' font-family='sans-serif'>" << snr << "</text>\n";
    out << "<text x='" << ml + pw / 2 << "' y='" << height - 12
        << "' font-size='12' text-anchor='middle' font-family='sans-serif'>SNR (dB)</text>\n"
        << "<text x='16' y='" << mt + ph / 2
        << "' font-size='12' text-anchor='middle' font-family='sans-serif' transform='rotate(-90 16 "
        << mt + ph / 2 << ")'>accuracy</text>\n"
        << "<text x='" << ml + pw / 2 << "' y='18' font-size='13' text-anchor='middle' "
        << "font-family='sans-serif'>Classification accuracy vs SNR (" << agg.runs.size() << " runs)</text>\n";

    const auto polyline = [&](const std::map<int, double>& curve, const char* style) {
        out << "<polyline fill='none' " << style << " points='";
        for (const auto& [snr, acc] : curve) out << sx(snr) << "," << sy(acc) << " ";
        out << "'/>\n";
    };
    for (const auto& run : agg.runs) polyline(run.per_snr, "stroke='#9ecae1' stroke-width='1'");
    std::map<int, double> mean_curve;
    for (const auto& [snr, ms] : agg.per_snr) mean_curve[snr] = ms.mean;
    polyline(mean_curve, "stroke='#08519c' stroke-width='2.5'");
    for (const auto& [snr, acc] : mean_curve)
        out << "<circle cx='" << sx(snr) << "' cy='" << sy(acc) << "' r='3' fill='#08519c'/>\n";
    out << "</svg>\n";
}

// Emits the aggregate tables plus the SNR chart into `out_dir`.
inline void write_report(const AggregateReport& agg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream out(out_dir + "/report_overall.csv");
        out << "metric,mean,std,runs\noverall_accuracy," << agg.overall.mean << "," << agg.overall.std << ","
            << agg.overall.n << "\n";
    }
    {
        std::ofstream out(out_dir + "/report_per_class.csv");
        out << "class_id,class_name,mean,std\n";
        for (const auto& [id, ms] : agg.per_class) {
            const auto it = agg.class_names.find(id);
            out << id << "," << (it != agg.class_names.end() ? it->second : "?") << "," << ms.mean << ","
                << ms.std << "\n";
        }
    }
    {
        std::ofstream out(out_dir + "/report_per_snr.csv");
        out << "snr_db,mean,std\n";
        for (const auto& [snr, ms] : agg.per_snr) out << snr << "," << ms.mean << "," << ms.std << "\n";
    }
    {
        std::ofstream out(out_dir + "/report.txt");
        out << "runs: " << agg.overall.n << "\n";
        out << "overall accuracy: " << agg.overall.mean << " +/- " << agg.overall.std << "\n\n";
        out << "per-class accuracy (mean +/- std):\n";
        for (const auto& [id, ms] : agg.per_class) {
            const auto it = agg.class_names.find(id);
            out << "  " << (it != agg.class_names.end() ? it->second : std::to_string(id)) << ": " << ms.mean
                << " +/- " << ms.std << "\n";
        }
        out << "\nper-SNR accuracy (mean +/- std):\n";
        for (const auto& [snr, ms] : agg.per_snr)
            out << "  " << snr << " dB: " << ms.mean << " +/- " << ms.std << "\n";
    }
    if (!agg.per_snr.empty()) write_snr_svg(agg, out_dir + "/snr_accuracy.svg");
}

}  // namespace amrvit
