#include "gexp/io.hpp"

#include <cstdio>
#include <memory>

namespace gexp {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};

using File = std::unique_ptr<std::FILE, FileCloser>;

File open_out(const std::string& path) {
    File f(std::fopen(path.c_str(), "wb"));
    if (!f) fail(ErrorCode::io, "cannot open '" + path + "' for writing");
    return f;
}

void finish(File& f, const std::string& path) {
    if (std::ferror(f.get()) || std::fclose(f.release()) != 0) fail(ErrorCode::io, "write to '" + path + "' failed");
}

}  // namespace

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_field_csv(const std::string& path, const ValueField& field) {
    File f = open_out(path);
    const GridSpec& g = field.grid;
    std::fprintf(f.get(), "k,t,i,x,u,control\n");
    for (std::size_t k = 0; k < field.u.size(); ++k) {
        for (std::size_t i = 0; i < g.nodes(); ++i) {
            const double v = k < g.t_steps ? field.control_value(k, i) : 0.0;
            std::fprintf(f.get(), "%zu,%.12g,%zu,%.12g,%.12g,%.12g\n", k, g.t(k), i, g.x(i), field.u[k][i], v);
        }
    }
    finish(f, path);
}

void write_heat_csv(const std::string& path, const HeatField& field) {
    File f = open_out(path);
    const GridSpec& g = field.grid;
    std::fprintf(f.get(), "k,t,i,x,u\n");
    for (std::size_t k = 0; k < field.u.size(); ++k) {
        for (std::size_t i = 0; i < g.nodes(); ++i) {
            std::fprintf(f.get(), "%zu,%.12g,%zu,%.12g,%.12g\n", k, g.t(k), i, g.x(i), field.u[k][i]);
        }
    }
    finish(f, path);
}

void write_paths_csv(const std::string& path, const PathBundle& bundle) {
    File f = open_out(path);
    std::fprintf(f.get(), "# seed=%llu\n", static_cast<unsigned long long>(bundle.seed));
    std::fprintf(f.get(), "# scenario=%s\n", bundle.scenario_label.c_str());
    std::fprintf(f.get(), "# control=%s\n", bundle.control_label.c_str());
    std::fprintf(f.get(), "path,k,t,x,b,qv,gamma\n");
    for (std::size_t j = 0; j < bundle.paths.size(); ++j) {
        const auto& p = bundle.paths[j];
        const std::size_t steps = p.size() - 1;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double gamma = k < steps ? bundle.gammas[j * steps + k] : 0.0;
            std::fprintf(f.get(), "%zu,%zu,%.12g,%.12g,%.12g,%.12g,%.12g\n", j, k, p[k].t, p[k].x, p[k].b, p[k].qv,
                         gamma);
        }
    }
    finish(f, path);
}

void write_bsde_csv(const std::string& path, const BsdeSolution& sol) {
    File f = open_out(path);
    const GridSpec& g = sol.grid;
    std::fprintf(f.get(), "k,t,i,x,y,z,level,k_gap\n");
    for (std::size_t k = sol.from_step; k <= g.t_steps; ++k) {
        for (std::size_t i = 0; i < g.nodes(); ++i) {
            const bool last = k == g.t_steps;
            const double z = last ? 0.0 : sol.z[k][i];
            const double level = last ? 0.0 : sol.levels[sol.maximizer(k, i)];
            const double gap = last ? 0.0 : sol.widest_gap(k, i);
            std::fprintf(f.get(), "%zu,%.12g,%zu,%.12g,%.12g,%.12g,%.12g,%.12g\n", k, g.t(k), i, g.x(i), sol.y[k][i],
                         z, level, gap);
        }
    }
    finish(f, path);
}

}  // namespace gexp
