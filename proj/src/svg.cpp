#include "ccplan/svg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace ccplan {

namespace {

const char* kMethodColors[] = {"#7b2d8b", "#c0392b", "#e67e22", "#f1c40f", "#27ae60", "#2980b9"};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(5);
    os << v;
    return os.str();
}

}  // namespace

void write_risk_cdf_svg(const BenchmarkReport& report, const std::string& path) {
    const int width = 640, height = 420;
    const double mx = 70, my = 40;  // margins
    const double pw = width - 2 * mx, ph = height - 2 * my;

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write svg: " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    // Axes.
    out << "<line x1='" << mx << "' y1='" << my + ph << "' x2='" << mx + pw << "' y2='" << my + ph
        << "' stroke='black'/>\n";
    out << "<line x1='" << mx << "' y1='" << my << "' x2='" << mx << "' y2='" << my + ph
        << "' stroke='black'/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double fx = mx + pw * t / 5.0;
        const double fy = my + ph - ph * t / 5.0;
        out << "<text x='" << fx << "' y='" << my + ph + 18
            << "' font-size='11' text-anchor='middle'>" << fmt(t / 5.0) << "</text>\n";
        out << "<text x='" << mx - 8 << "' y='" << fy + 4
            << "' font-size='11' text-anchor='end'>" << fmt(t / 5.0) << "</text>\n";
    }
    out << "<text x='" << mx + pw / 2 << "' y='" << height - 6
        << "' font-size='13' text-anchor='middle'>estimated risk</text>\n";
    out << "<text x='16' y='" << my + ph / 2
        << "' font-size='13' text-anchor='middle' transform='rotate(-90 16 " << my + ph / 2
        << ")'>fraction of problems</text>\n";

    const auto methods = report.methods();
    int color = 0;
    for (const auto& method : methods) {
        std::vector<double> risks;
        int total = 0;
        for (const auto& row : report.rows) {
            if (row.method != method) continue;
            ++total;
            if (row.success) risks.push_back(row.risk.risk);
        }
        if (total == 0) continue;
        std::sort(risks.begin(), risks.end());
        std::ostringstream pts;
        pts << mx << "," << my + ph << " ";
        double prev_y = my + ph;
        for (std::size_t i = 0; i < risks.size(); ++i) {
            const double x = mx + pw * std::min(risks[i], 1.0);
            const double y = my + ph - ph * (static_cast<double>(i + 1) / total);
            pts << x << "," << prev_y << " " << x << "," << y << " ";
            prev_y = y;
        }
        pts << mx + pw << "," << prev_y;
        const char* c = kMethodColors[color % 6];
        out << "<polyline points='" << pts.str() << "' fill='none' stroke='" << c
            << "' stroke-width='2'/>\n";
        out << "<rect x='" << mx + 10 << "' y='" << my + 10 + 18 * color
            << "' width='14' height='4' fill='" << c << "'/>\n";
        out << "<text x='" << mx + 30 << "' y='" << my + 16 + 18 * color << "' font-size='12'>"
            << method << "</text>\n";
        ++color;
    }
    out << "</svg>\n";
}

namespace {

void draw_arm(std::ofstream& out, const KinematicChain& chain, const Vec& q,
              double scale, double cx, double cy, const char* color) {
    const FKResult fk = forward_kinematics(chain, q);
    for (const auto& seg : link_segments(chain, fk)) {
        out << "<line x1='" << cx + scale * seg.a[0] << "' y1='" << cy - scale * seg.a[1]
            << "' x2='" << cx + scale * seg.b[0] << "' y2='" << cy - scale * seg.b[1]
            << "' stroke='" << color << "' stroke-width='" << 2.0 * scale * seg.radius
            << "' stroke-linecap='round' opacity='0.7'/>\n";
    }
}

void draw_ee_trace(std::ofstream& out, const KinematicChain& chain, const Path& path, double scale,
                   double cx, double cy, const char* color) {
    const Path fine = discretize(path, 0.02);
    std::ostringstream pts;
    for (const auto& q : fine.waypoints) {
        const Vec p = forward_kinematics(chain, q).ee.translation;
        pts << cx + scale * p[0] << "," << cy - scale * p[1] << " ";
    }
    out << "<polyline points='" << pts.str() << "' fill='none' stroke='" << color
        << "' stroke-width='2'/>\n";
}

}  // namespace

void write_scene_snapshot_svg(const KinematicChain& chain, const ProblemInstance& problem,
                              const Path* candidate, const Path* safe, const std::string& path) {
    if (chain.dim != 2) return;
    const int size = 560;
    const double half = std::max(problem.scene.bounds.hi.lpNorm<Eigen::Infinity>(),
                                 problem.scene.bounds.lo.lpNorm<Eigen::Infinity>());
    const double scale = size / (2.0 * half * 1.05);
    const double cx = size / 2.0, cy = size / 2.0;

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write svg: " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << size << "' height='" << size
        << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    for (const auto& pt : problem.scene.points) {
        const char* fill = pt.sigma > 0.0 ? "#5dade2" : "#7f8c8d";
        out << "<circle cx='" << cx + scale * pt.center[0] << "' cy='" << cy - scale * pt.center[1]
            << "' r='" << scale * pt.radius << "' fill='" << fill << "' opacity='0.8'/>\n";
    }
    draw_arm(out, chain, problem.q_start, scale, cx, cy, "#555555");
    if (candidate && candidate->waypoints.size() >= 2) {
        draw_ee_trace(out, chain, *candidate, scale, cx, cy, "#c0392b");
        draw_arm(out, chain, candidate->waypoints.back(), scale, cx, cy, "#d5a6a1");
    }
    if (safe && safe->waypoints.size() >= 2) {
        draw_ee_trace(out, chain, *safe, scale, cx, cy, "#7b2d8b");
        draw_arm(out, chain, safe->waypoints.back(), scale, cx, cy, "#b39ddb");
    }
    out << "<circle cx='" << cx + scale * problem.goal.position[0] << "' cy='"
        << cy - scale * problem.goal.position[1] << "' r='" << scale * problem.goal.position_tol
        << "' fill='none' stroke='#27ae60' stroke-width='2'/>\n";
    out << "</svg>\n";
}

}  // namespace ccplan
